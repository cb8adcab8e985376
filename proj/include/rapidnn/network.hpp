#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/tensor.hpp"

namespace rapidnn {

enum class LayerKind { input, fully_connected, convolution, pooling };
enum class Activation { relu, sigmoid, softsign, softmax, none };
enum class PoolMode { max, min, avg };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::input: return "input";
        case LayerKind::fully_connected: return "fc";
        case LayerKind::convolution: return "conv";
        case LayerKind::pooling: return "pool";
    }
    return "?";
}

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softsign: return "softsign";
        case Activation::softmax: return "softmax";
        case Activation::none: return "none";
    }
    return "?";
}

inline const char* to_string(PoolMode m) {
    switch (m) {
        case PoolMode::max: return "max";
        case PoolMode::min: return "min";
        case PoolMode::avg: return "avg";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softsign") return Activation::softsign;
    if (s == "softmax") return Activation::softmax;
    if (s == "none") return Activation::none;
    throw std::invalid_argument("unknown activation: " + s);
}

inline PoolMode pool_mode_from_string(const std::string& s) {
    if (s == "max") return PoolMode::max;
    if (s == "min") return PoolMode::min;
    if (s == "avg") return PoolMode::avg;
    throw std::invalid_argument("unknown pool mode: " + s);
}

inline double apply_activation(Activation a, double y) {
    switch (a) {
        case Activation::relu: return y > 0.0 ? y : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-y));
        case Activation::softsign: return y / (1.0 + std::fabs(y));
        case Activation::none: return y;
        case Activation::softmax:
            throw std::logic_error("softmax is a vector activation, not elementwise");
    }
    return y;
}

// Derivative in terms of the pre-activation y.
inline double activation_derivative(Activation a, double y) {
    switch (a) {
        case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: {
            double z = 1.0 / (1.0 + std::exp(-y));
            return z * (1.0 - z);
        }
        case Activation::softsign: {
            double d = 1.0 + std::fabs(y);
            return 1.0 / (d * d);
        }
        case Activation::none: return 1.0;
        case Activation::softmax:
            throw std::logic_error("softmax derivative handled with the loss");
    }
    return 1.0;
}

struct LayerSpec {
    LayerKind kind = LayerKind::input;
    std::vector<std::size_t> in_dims;
    std::vector<std::size_t> out_dims;
    std::size_t kernel = 0;  // h x h window, convolution only
    PoolMode pool_mode = PoolMode::max;
    Activation activation = Activation::none;

    std::size_t in_count() const { return dims_count(in_dims); }
    std::size_t out_count() const { return dims_count(out_dims); }

    bool has_weights() const {
        return kind == LayerKind::fully_connected || kind == LayerKind::convolution;
    }

    // Pooling window side, recovered from the dimension contraction.
    std::size_t pool_window() const {
        if (kind != LayerKind::pooling) throw std::logic_error("pool_window on non-pooling layer");
        std::size_t p = in_dims[0] / out_dims[0];
        if (p == 0 || out_dims[0] * p != in_dims[0] || out_dims[1] * p != in_dims[1])
            throw std::invalid_argument("pooling dims are not an exact window contraction");
        return p;
    }
};

struct Network {
    std::vector<LayerSpec> layers;
    std::vector<Tensor> weights;  // parallel to layers; empty when the layer has none
    std::vector<Tensor> biases;

    std::size_t input_count() const { return layers.front().in_count(); }
    std::size_t output_count() const { return layers.back().out_count(); }
    const std::vector<std::size_t>& input_dims() const { return layers.front().in_dims; }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("network has no layers");
        if (layers.front().kind != LayerKind::input)
            throw std::invalid_argument("first layer must be the input layer");
        if (weights.size() != layers.size() || biases.size() != layers.size())
            throw std::logic_error("weights/biases not parallel to layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerSpec& l = layers[i];
            if (i > 0 && l.in_dims != layers[i - 1].out_dims)
                throw std::invalid_argument("layer " + std::to_string(i) + " input dims " +
                                            shape_str(l.in_dims) + " do not chain from " +
                                            shape_str(layers[i - 1].out_dims));
            if ((l.kernel != 0) != (l.kind == LayerKind::convolution))
                throw std::invalid_argument("kernel must be set iff the layer is a convolution");
            if (l.activation == Activation::softmax && i + 1 != layers.size())
                throw std::invalid_argument("softmax is only supported on the final layer");
            switch (l.kind) {
                case LayerKind::input:
                    if (l.in_dims != l.out_dims)
                        throw std::invalid_argument("input layer must not reshape");
                    if (!weights[i].empty())
                        throw std::invalid_argument("input layer carries no weights");
                    break;
                case LayerKind::fully_connected:
                    if (!weights[i].shape_equals({l.out_count(), l.in_count()}))
                        throw std::invalid_argument("fc weight shape mismatch at layer " +
                                                    std::to_string(i));
                    if (!biases[i].shape_equals({l.out_count()}))
                        throw std::invalid_argument("fc bias shape mismatch at layer " +
                                                    std::to_string(i));
                    break;
                case LayerKind::convolution: {
                    if (l.in_dims.size() != 3 || l.out_dims.size() != 3)
                        throw std::invalid_argument("convolution needs HxWxC dims");
                    std::size_t m = l.out_dims[2];
                    if (l.out_dims[0] != l.in_dims[0] - l.kernel + 1 ||
                        l.out_dims[1] != l.in_dims[1] - l.kernel + 1)
                        throw std::invalid_argument("convolution out dims must be valid-window");
                    if (!weights[i].shape_equals({m, l.kernel, l.kernel, l.in_dims[2]}))
                        throw std::invalid_argument("conv weight shape mismatch at layer " +
                                                    std::to_string(i));
                    if (!biases[i].shape_equals({m}))
                        throw std::invalid_argument("conv bias shape mismatch at layer " +
                                                    std::to_string(i));
                    break;
                }
                case LayerKind::pooling:
                    if (l.in_dims.size() != 3 || l.out_dims.size() != 3)
                        throw std::invalid_argument("pooling needs HxWxC dims");
                    if (l.in_dims[2] != l.out_dims[2])
                        throw std::invalid_argument("pooling must preserve the channel count");
                    if (!weights[i].empty())
                        throw std::invalid_argument("pooling layer carries no weights");
                    l.pool_window();
                    break;
            }
        }
    }
};

// --- topology string -------------------------------------------------------
//
// Space-separated layer tokens, fields separated by ':':
//   in:784            in:28x28x1
//   fc:512:relu       (activation optional; relu default, softmax on the last layer)
//   conv:8:3:relu     (8 output channels, 3x3 kernel, stride 1, valid padding)
//   pool:2:max        (2x2 window, window = stride)

namespace detail {

inline std::vector<std::size_t> parse_dims(const std::string& s) {
    std::vector<std::size_t> dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        if (part.empty()) throw std::invalid_argument("bad dims: " + s);
        dims.push_back(std::stoull(part));
    }
    if (dims.empty()) throw std::invalid_argument("bad dims: " + s);
    return dims;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep))
        if (!part.empty()) out.push_back(part);
    return out;
}

}  // namespace detail

inline Network parse_topology(const std::string& topology) {
    Network net;
    std::vector<std::string> tokens = detail::split(topology, ' ');
    if (tokens.empty()) throw std::invalid_argument("empty topology");
    std::vector<std::optional<Activation>> acts;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        std::vector<std::string> f = detail::split(tokens[t], ':');
        LayerSpec l;
        std::optional<Activation> act;
        if (f[0] == "in") {
            if (f.size() != 2) throw std::invalid_argument("bad token: " + tokens[t]);
            l.kind = LayerKind::input;
            l.in_dims = l.out_dims = detail::parse_dims(f[1]);
        } else if (f[0] == "fc") {
            if (f.size() < 2 || f.size() > 3) throw std::invalid_argument("bad token: " + tokens[t]);
            if (net.layers.empty()) throw std::invalid_argument("topology must start with in:");
            l.kind = LayerKind::fully_connected;
            l.in_dims = net.layers.back().out_dims;
            l.out_dims = {std::stoull(f[1])};
            if (f.size() == 3) act = activation_from_string(f[2]);
        } else if (f[0] == "conv") {
            if (f.size() < 3 || f.size() > 4) throw std::invalid_argument("bad token: " + tokens[t]);
            if (net.layers.empty()) throw std::invalid_argument("topology must start with in:");
            l.kind = LayerKind::convolution;
            l.in_dims = net.layers.back().out_dims;
            if (l.in_dims.size() != 3)
                throw std::invalid_argument("conv needs an HxWxC input: " + tokens[t]);
            std::size_t m = std::stoull(f[1]);
            l.kernel = std::stoull(f[2]);
            if (l.kernel == 0 || l.kernel > l.in_dims[0] || l.kernel > l.in_dims[1])
                throw std::invalid_argument("kernel does not fit input: " + tokens[t]);
            l.out_dims = {l.in_dims[0] - l.kernel + 1, l.in_dims[1] - l.kernel + 1, m};
            if (f.size() == 4) act = activation_from_string(f[3]);
        } else if (f[0] == "pool") {
            if (f.size() < 2 || f.size() > 3) throw std::invalid_argument("bad token: " + tokens[t]);
            if (net.layers.empty()) throw std::invalid_argument("topology must start with in:");
            l.kind = LayerKind::pooling;
            l.in_dims = net.layers.back().out_dims;
            if (l.in_dims.size() != 3)
                throw std::invalid_argument("pool needs an HxWxC input: " + tokens[t]);
            std::size_t p = std::stoull(f[1]);
            if (p == 0 || l.in_dims[0] % p != 0 || l.in_dims[1] % p != 0)
                throw std::invalid_argument("pool window must divide the input: " + tokens[t]);
            l.out_dims = {l.in_dims[0] / p, l.in_dims[1] / p, l.in_dims[2]};
            if (f.size() == 3) l.pool_mode = pool_mode_from_string(f[2]);
            l.activation = Activation::none;
        } else {
            throw std::invalid_argument("unknown layer token: " + tokens[t]);
        }
        net.layers.push_back(l);
        acts.push_back(act);
    }
    // Default activations: relu on hidden computational layers, softmax on a
    // final fc layer.
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        LayerSpec& l = net.layers[i];
        if (!l.has_weights()) continue;
        if (acts[i]) {
            l.activation = *acts[i];
        } else if (i + 1 == net.layers.size() && l.kind == LayerKind::fully_connected) {
            l.activation = Activation::softmax;
        } else {
            l.activation = Activation::relu;
        }
    }
    net.weights.resize(net.layers.size());
    net.biases.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind == LayerKind::fully_connected) {
            net.weights[i] = Tensor({l.out_count(), l.in_count()});
            net.biases[i] = Tensor({l.out_count()});
        } else if (l.kind == LayerKind::convolution) {
            net.weights[i] = Tensor({l.out_dims[2], l.kernel, l.kernel, l.in_dims[2]});
            net.biases[i] = Tensor({l.out_dims[2]});
        }
    }
    net.validate();
    return net;
}

inline std::string topology_string(const Network& net) {
    std::ostringstream os;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (i) os << ' ';
        switch (l.kind) {
            case LayerKind::input: os << "in:" << shape_str(l.in_dims); break;
            case LayerKind::fully_connected:
                os << "fc:" << l.out_count() << ':' << to_string(l.activation);
                break;
            case LayerKind::convolution:
                os << "conv:" << l.out_dims[2] << ':' << l.kernel << ':' << to_string(l.activation);
                break;
            case LayerKind::pooling:
                os << "pool:" << l.pool_window() << ':' << to_string(l.pool_mode);
                break;
        }
    }
    return os.str();
}

// Seeded uniform init scaled by fan-in.
inline void init_weights(Network& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (!l.has_weights()) continue;
        std::size_t fan_in = l.kind == LayerKind::fully_connected
                                 ? l.in_count()
                                 : l.kernel * l.kernel * l.in_dims[2];
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : net.weights[i].data) w = dist(rng);
        std::fill(net.biases[i].data.begin(), net.biases[i].data.end(), 0.0);
    }
}

// --- forward pass -----------------------------------------------------------

struct ForwardTrace {
    // outputs[i] is the batch output of layer i (outputs[0] echoes the input);
    // preacts[i] holds the weighted sums of computational layers, else empty.
    std::vector<Tensor> outputs;
    std::vector<Tensor> preacts;

    const Tensor& scores() const { return outputs.back(); }
};

namespace detail {

inline void softmax_rows(Tensor& t, std::size_t batch, std::size_t n) {
    for (std::size_t b = 0; b < batch; ++b) {
        double* row = t.data.data() + b * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
}

// y[b][o] = sum_k w[o][k] x[b][k] + bias[o], via a transposed weight copy so
// the inner loop runs over outputs contiguously.
inline void fc_forward(const Tensor& w, const Tensor& bias, const Tensor& x, std::size_t batch,
                       std::size_t in, std::size_t out, Tensor& y, std::vector<double>& wt) {
    wt.resize(in * out);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t k = 0; k < in; ++k) wt[k * out + o] = w.data[o * in + k];
    for (std::size_t b = 0; b < batch; ++b) {
        double* yr = y.data.data() + b * out;
        const double* xr = x.data.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) yr[o] = bias.data[o];
        for (std::size_t k = 0; k < in; ++k) {
            double xv = xr[k];
            if (xv == 0.0) continue;
            const double* wr = wt.data() + k * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
        }
    }
}

inline void conv_forward(const LayerSpec& l, const Tensor& w, const Tensor& bias, const Tensor& x,
                         std::size_t batch, Tensor& y) {
    std::size_t ih = l.in_dims[0], iw = l.in_dims[1], ic = l.in_dims[2];
    std::size_t oh = l.out_dims[0], ow = l.out_dims[1], m = l.out_dims[2];
    std::size_t k = l.kernel;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xin = x.data.data() + b * ih * iw * ic;
        double* yout = y.data.data() + b * oh * ow * m;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t om = 0; om < m; ++om) {
                    double acc = bias.data[om];
                    const double* wm = w.data.data() + om * k * k * ic;
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const double* xr = xin + ((oy + ky) * iw + (ox + kx)) * ic;
                            const double* wr = wm + (ky * k + kx) * ic;
                            for (std::size_t c = 0; c < ic; ++c) acc += xr[c] * wr[c];
                        }
                    yout[(oy * ow + ox) * m + om] = acc;
                }
    }
}

inline void pool_forward(const LayerSpec& l, const Tensor& x, std::size_t batch, Tensor& y) {
    std::size_t ih = l.in_dims[0], iw = l.in_dims[1], c = l.in_dims[2];
    std::size_t oh = l.out_dims[0], ow = l.out_dims[1];
    std::size_t p = l.pool_window();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xin = x.data.data() + b * ih * iw * c;
        double* yout = y.data.data() + b * oh * ow * c;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double acc;
                    if (l.pool_mode == PoolMode::avg) {
                        acc = 0.0;
                        for (std::size_t ky = 0; ky < p; ++ky)
                            for (std::size_t kx = 0; kx < p; ++kx)
                                acc += xin[((oy * p + ky) * iw + ox * p + kx) * c + ch];
                        acc /= static_cast<double>(p * p);
                    } else {
                        acc = xin[(oy * p * iw + ox * p) * c + ch];
                        for (std::size_t ky = 0; ky < p; ++ky)
                            for (std::size_t kx = 0; kx < p; ++kx) {
                                double v = xin[((oy * p + ky) * iw + ox * p + kx) * c + ch];
                                if (l.pool_mode == PoolMode::max ? v > acc : v < acc) acc = v;
                            }
                    }
                    yout[(oy * ow + ox) * c + ch] = acc;
                }
    }
}

}  // namespace detail

// Runs the batch through every layer and keeps all intermediate outputs.
// batch shape: {B, input dims...}.
inline ForwardTrace forward(const Network& net, const Tensor& batch) {
    net.validate();
    if (batch.shape.empty() || batch.shape.size() != net.input_dims().size() + 1 ||
        !std::equal(net.input_dims().begin(), net.input_dims().end(), batch.shape.begin() + 1))
        throw std::invalid_argument("batch shape " + shape_str(batch.shape) +
                                    " does not match input dims " + shape_str(net.input_dims()));
    std::size_t b = batch.shape[0];

    ForwardTrace trace;
    trace.outputs.resize(net.layers.size());
    trace.preacts.resize(net.layers.size());
    trace.outputs[0] = batch;

    std::vector<double> wt;  // transposed-weight scratch
    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        const Tensor& x = trace.outputs[i - 1];
        std::vector<std::size_t> oshape;
        oshape.push_back(b);
        for (std::size_t d : l.out_dims) oshape.push_back(d);
        Tensor y(std::move(oshape));
        switch (l.kind) {
            case LayerKind::fully_connected:
                detail::fc_forward(net.weights[i], net.biases[i], x, b, l.in_count(), l.out_count(),
                                   y, wt);
                break;
            case LayerKind::convolution:
                detail::conv_forward(l, net.weights[i], net.biases[i], x, b, y);
                break;
            case LayerKind::pooling:
                detail::pool_forward(l, x, b, y);
                break;
            case LayerKind::input:
                throw std::invalid_argument("input layer may only appear first");
        }
        if (l.has_weights()) {
            trace.preacts[i] = y;
            if (l.activation == Activation::softmax) {
                detail::softmax_rows(y, b, l.out_count());
            } else if (l.activation != Activation::none) {
                for (double& v : y.data) v = apply_activation(l.activation, v);
            }
        }
        trace.outputs[i] = std::move(y);
    }
    return trace;
}

}  // namespace rapidnn
