#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/dataset.hpp"
#include "rapidnn/network.hpp"
#include "rapidnn/tensor.hpp"

namespace rapidnn {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t epochs = 10;
    double dropout_rate = 0.0;  // hidden fully-connected outputs only
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("dropout_rate must be in [0,1)");
        if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
        if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("momentum must be in [0,1)");
    }
};

namespace detail {

// Loss on one already-forwarded batch. Softmax head → cross-entropy, anything
// else → mean squared error against the one-hot target. `dY` receives the
// gradient w.r.t. the final pre-activation, averaged over the batch.
inline double loss_and_grad(const Network& net, const ForwardTrace& trace,
                            const std::vector<std::size_t>& labels, Tensor& dY) {
    const LayerSpec& last = net.layers.back();
    std::size_t b = labels.size();
    std::size_t n = last.out_count();
    const Tensor& z = trace.outputs.back();
    dY = Tensor(z.shape);
    double loss = 0.0;
    if (last.activation == Activation::softmax) {
        for (std::size_t s = 0; s < b; ++s) {
            const double* p = z.data.data() + s * n;
            double* g = dY.data.data() + s * n;
            loss += -std::log(std::max(p[labels[s]], 1e-300));
            for (std::size_t j = 0; j < n; ++j)
                g[j] = (p[j] - (j == labels[s] ? 1.0 : 0.0)) / static_cast<double>(b);
        }
    } else {
        const Tensor& y = trace.preacts.back();
        for (std::size_t s = 0; s < b; ++s) {
            const double* zp = z.data.data() + s * n;
            const double* yp = y.data.data() + s * n;
            double* g = dY.data.data() + s * n;
            for (std::size_t j = 0; j < n; ++j) {
                // Single-output nets are binary: the label itself is the
                // target. Wider heads use a one-hot target.
                double t = n == 1 ? static_cast<double>(labels[s])
                                  : (j == labels[s] ? 1.0 : 0.0);
                double d = zp[j] - t;
                loss += 0.5 * d * d;
                g[j] = d * activation_derivative(last.activation, yp[j]) / static_cast<double>(b);
            }
        }
    }
    return loss / static_cast<double>(b);
}

inline void fc_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                        std::size_t batch, Tensor& dw, Tensor& db, Tensor& dx) {
    std::size_t in = l.in_count(), out = l.out_count();
    std::fill(dw.data.begin(), dw.data.end(), 0.0);
    std::fill(db.data.begin(), db.data.end(), 0.0);
    std::fill(dx.data.begin(), dx.data.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* dyr = dy.data.data() + b * out;
        const double* xr = x.data.data() + b * in;
        double* dxr = dx.data.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) {
            double g = dyr[o];
            if (g == 0.0) continue;
            db.data[o] += g;
            double* dwr = dw.data.data() + o * in;
            const double* wr = w.data.data() + o * in;
            for (std::size_t k = 0; k < in; ++k) {
                dwr[k] += g * xr[k];
                dxr[k] += g * wr[k];
            }
        }
    }
}

inline void conv_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                          std::size_t batch, Tensor& dw, Tensor& db, Tensor& dx) {
    std::size_t ih = l.in_dims[0], iw = l.in_dims[1], ic = l.in_dims[2];
    std::size_t oh = l.out_dims[0], ow = l.out_dims[1], m = l.out_dims[2];
    std::size_t k = l.kernel;
    std::fill(dw.data.begin(), dw.data.end(), 0.0);
    std::fill(db.data.begin(), db.data.end(), 0.0);
    std::fill(dx.data.begin(), dx.data.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xin = x.data.data() + b * ih * iw * ic;
        const double* dyo = dy.data.data() + b * oh * ow * m;
        double* dxi = dx.data.data() + b * ih * iw * ic;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t om = 0; om < m; ++om) {
                    double g = dyo[(oy * ow + ox) * m + om];
                    if (g == 0.0) continue;
                    db.data[om] += g;
                    double* dwm = dw.data.data() + om * k * k * ic;
                    const double* wm = w.data.data() + om * k * k * ic;
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            std::size_t xoff = ((oy + ky) * iw + (ox + kx)) * ic;
                            std::size_t woff = (ky * k + kx) * ic;
                            for (std::size_t c = 0; c < ic; ++c) {
                                dwm[woff + c] += g * xin[xoff + c];
                                dxi[xoff + c] += g * wm[woff + c];
                            }
                        }
                }
    }
}

inline void pool_backward(const LayerSpec& l, const Tensor& x, const Tensor& dy, std::size_t batch,
                          Tensor& dx) {
    std::size_t ih = l.in_dims[0], iw = l.in_dims[1], c = l.in_dims[2];
    std::size_t oh = l.out_dims[0], ow = l.out_dims[1];
    std::size_t p = l.pool_window();
    std::fill(dx.data.begin(), dx.data.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xin = x.data.data() + b * ih * iw * c;
        const double* dyo = dy.data.data() + b * oh * ow * c;
        double* dxi = dx.data.data() + b * ih * iw * c;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double g = dyo[(oy * ow + ox) * c + ch];
                    if (l.pool_mode == PoolMode::avg) {
                        double share = g / static_cast<double>(p * p);
                        for (std::size_t ky = 0; ky < p; ++ky)
                            for (std::size_t kx = 0; kx < p; ++kx)
                                dxi[((oy * p + ky) * iw + ox * p + kx) * c + ch] += share;
                    } else {
                        // Route to the first window extremum, matching forward.
                        std::size_t best = (oy * p * iw + ox * p) * c + ch;
                        double bv = xin[best];
                        for (std::size_t ky = 0; ky < p; ++ky)
                            for (std::size_t kx = 0; kx < p; ++kx) {
                                std::size_t off = ((oy * p + ky) * iw + ox * p + kx) * c + ch;
                                bool better = l.pool_mode == PoolMode::max ? xin[off] > bv
                                                                           : xin[off] < bv;
                                if (better) {
                                    bv = xin[off];
                                    best = off;
                                }
                            }
                        dxi[best] += g;
                    }
                }
    }
}

}  // namespace detail

// Mini-batch SGD with momentum. Deterministic for a fixed config.seed; the
// per-epoch mean loss lands in `loss_curve`. Throws if the loss goes
// non-finite (divergence) naming the epoch where it happened. The input
// network is untouched; the trained one is the return value.
[[nodiscard]] inline Network train(Network net, const Dataset& data, const TrainConfig& cfg,
                                   std::vector<double>* loss_curve = nullptr) {
    cfg.validate();
    net.validate();
    data.validate();
    Dataset tr = data.subset(Split::train);
    if (tr.count() == 0) throw std::invalid_argument("dataset has no train split");
    if (cfg.epochs == 0) return net;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Tensor> vel_w(net.layers.size()), vel_b(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_weights()) continue;
        vel_w[i] = Tensor(net.weights[i].shape);
        vel_b[i] = Tensor(net.biases[i].shape);
    }

    // Hidden fully-connected layers get dropout on their outputs.
    std::vector<bool> dropped(net.layers.size(), false);
    for (std::size_t i = 1; i + 1 < net.layers.size(); ++i)
        dropped[i] = cfg.dropout_rate > 0.0 && net.layers[i].kind == LayerKind::fully_connected;

    std::vector<std::size_t> order(tr.count());
    std::iota(order.begin(), order.end(), 0);
    std::size_t stride = tr.sample_size();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::size_t> bshape = tr.samples.shape;
            bshape[0] = bsz;
            Tensor batch(bshape);
            std::vector<std::size_t> blabels(bsz);
            for (std::size_t s = 0; s < bsz; ++s) {
                std::copy_n(tr.samples.data.begin() + order[start + s] * stride, stride,
                            batch.data.begin() + s * stride);
                blabels[s] = tr.labels[order[start + s]];
            }

            ForwardTrace trace = forward(net, batch);

            // Inverted dropout on hidden fc outputs; masks recorded so the
            // backward pass kills the same units.
            std::vector<std::vector<unsigned char>> masks(net.layers.size());
            for (std::size_t i = 1; i + 1 < net.layers.size(); ++i) {
                if (!dropped[i]) continue;
                Tensor& z = trace.outputs[i];
                masks[i].resize(z.size());
                double keep = 1.0 - cfg.dropout_rate;
                for (std::size_t j = 0; j < z.size(); ++j) {
                    bool on = unit(rng) >= cfg.dropout_rate;
                    masks[i][j] = on;
                    z.data[j] = on ? z.data[j] / keep : 0.0;
                }
            }
            std::size_t first_masked = net.layers.size();
            for (std::size_t i = 1; i < net.layers.size(); ++i)
                if (!masks[i].empty()) {
                    first_masked = i;
                    break;
                }
            if (first_masked + 1 < net.layers.size()) {
                // Re-run every layer above the first mask so downstream
                // activations see the dropped values.
                std::vector<double> wt;
                for (std::size_t i = first_masked + 1; i < net.layers.size(); ++i) {
                    const LayerSpec& l = net.layers[i];
                    const Tensor& x = trace.outputs[i - 1];
                    Tensor y(trace.outputs[i].shape);
                    switch (l.kind) {
                        case LayerKind::fully_connected:
                            detail::fc_forward(net.weights[i], net.biases[i], x, bsz, l.in_count(),
                                               l.out_count(), y, wt);
                            break;
                        case LayerKind::convolution:
                            detail::conv_forward(l, net.weights[i], net.biases[i], x, bsz, y);
                            break;
                        case LayerKind::pooling:
                            detail::pool_forward(l, x, bsz, y);
                            break;
                        case LayerKind::input: continue;
                    }
                    if (l.has_weights()) {
                        trace.preacts[i] = y;
                        if (l.activation == Activation::softmax)
                            detail::softmax_rows(y, bsz, l.out_count());
                        else if (l.activation != Activation::none)
                            for (double& v : y.data) v = apply_activation(l.activation, v);
                    }
                    if (!masks[i].empty()) {
                        double keep = 1.0 - cfg.dropout_rate;
                        for (std::size_t j = 0; j < y.size(); ++j)
                            y.data[j] = masks[i][j] ? y.data[j] / keep : 0.0;
                    }
                    trace.outputs[i] = std::move(y);
                }
            }

            Tensor delta;  // gradient w.r.t. current layer's pre-activation
            double loss = detail::loss_and_grad(net, trace, blabels, delta);
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            epoch_loss += loss;
            ++batches;

            for (std::size_t li = net.layers.size(); li-- > 1;) {
                const LayerSpec& l = net.layers[li];
                const Tensor& x = trace.outputs[li - 1];
                Tensor dx(x.shape);
                if (l.has_weights()) {
                    // delta currently holds dL/d(preact) for layer li.
                    Tensor dw(net.weights[li].shape), db(net.biases[li].shape);
                    if (l.kind == LayerKind::fully_connected)
                        detail::fc_backward(l, net.weights[li], x, delta, bsz, dw, db, dx);
                    else
                        detail::conv_backward(l, net.weights[li], x, delta, bsz, dw, db, dx);
                    for (std::size_t j = 0; j < dw.size(); ++j) {
                        vel_w[li].data[j] =
                            cfg.momentum * vel_w[li].data[j] - cfg.learning_rate * dw.data[j];
                        net.weights[li].data[j] += vel_w[li].data[j];
                    }
                    for (std::size_t j = 0; j < db.size(); ++j) {
                        vel_b[li].data[j] =
                            cfg.momentum * vel_b[li].data[j] - cfg.learning_rate * db.data[j];
                        net.biases[li].data[j] += vel_b[li].data[j];
                    }
                } else {
                    detail::pool_backward(l, x, delta, bsz, dx);
                }
                if (li == 1) break;
                // Convert dL/d(output of li-1) into dL/d(preact of li-1).
                const LayerSpec& below = net.layers[li - 1];
                if (!masks[li - 1].empty()) {
                    double keep = 1.0 - cfg.dropout_rate;
                    for (std::size_t j = 0; j < dx.size(); ++j)
                        dx.data[j] = masks[li - 1][j] ? dx.data[j] / keep : 0.0;
                }
                if (below.has_weights() && below.activation != Activation::none) {
                    const Tensor& y = trace.preacts[li - 1];
                    for (std::size_t j = 0; j < dx.size(); ++j)
                        dx.data[j] *= activation_derivative(below.activation, y.data[j]);
                }
                delta = std::move(dx);
            }
        }
        if (loss_curve) loss_curve->push_back(epoch_loss / static_cast<double>(batches));
    }
    return net;
}

// Predicted class per sample: argmax of the final scores, lowest index on ties.
inline std::vector<std::size_t> predict(const Network& net, const Tensor& batch_samples,
                                        std::size_t eval_batch = 256) {
    std::size_t n = batch_samples.shape[0];
    std::size_t stride = batch_samples.size() / std::max<std::size_t>(n, 1);
    std::size_t classes = net.output_count();
    std::vector<std::size_t> pred(n);
    for (std::size_t start = 0; start < n; start += eval_batch) {
        std::size_t bsz = std::min(eval_batch, n - start);
        std::vector<std::size_t> bshape = batch_samples.shape;
        bshape[0] = bsz;
        Tensor batch(bshape);
        std::copy_n(batch_samples.data.begin() + start * stride, bsz * stride, batch.data.begin());
        ForwardTrace trace = forward(net, batch);
        for (std::size_t s = 0; s < bsz; ++s) {
            const double* row = trace.scores().data.data() + s * classes;
            if (classes == 1)  // binary head: threshold at 1/2
                pred[start + s] = row[0] > 0.5 ? 1 : 0;
            else
                pred[start + s] =
                    static_cast<std::size_t>(std::max_element(row, row + classes) - row);
        }
    }
    return pred;
}

// Misclassification rate over one split of the dataset.
inline double evaluate(const Network& net, const Dataset& data, Split split = Split::test) {
    Dataset sub = data.subset(split);
    if (sub.count() == 0)
        throw std::invalid_argument(std::string("dataset has no ") + to_string(split) + " split");
    std::vector<std::size_t> pred = predict(net, sub.samples);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] != sub.labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

}  // namespace rapidnn
