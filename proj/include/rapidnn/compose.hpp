#pragma once

// Conversion of a trained network into lookup-table form: per-layer weight
// and input codebooks (from recursive 2-means trees), precomputed product
// tables, activation tables, and the estimate/retrain refinement loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "rapidnn/activation_lut.hpp"
#include "rapidnn/codebook.hpp"
#include "rapidnn/dataset.hpp"
#include "rapidnn/fixed_point.hpp"
#include "rapidnn/network.hpp"
#include "rapidnn/train.hpp"

namespace rapidnn {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

struct ComposeConfig {
    std::size_t w = 64;   // weight centroids per codebook
    std::size_t u = 16;   // input centroids per layer
    std::size_t q = 64;   // activation table rows
    double epsilon = 0.0;           // acceptable accuracy loss (error-rate points)
    std::size_t max_iters = 5;
    double sample_fraction = 0.02;  // share of train data used to observe activations
    std::size_t retrain_epochs = 2;
    std::uint64_t seed = 1;

    // Retraining is plain SGD restarted from the snapped weights.
    double retrain_lr = 0.01;
    double retrain_momentum = 0.9;
    std::size_t retrain_batch = 32;

    bool use_relu_comparator = false;  // exact comparator instead of a relu table
    bool lut_in_estimator = false;     // estimate with table activation, not exact
    FixedFormat fixed;                 // accumulation grid stamped into the model

    static bool power_of_two(std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; }
    static std::size_t log2_of(std::size_t v) {
        std::size_t l = 0;
        while ((std::size_t(1) << l) < v) ++l;
        return l;
    }

    void validate() const {
        if (!power_of_two(w) || !power_of_two(u) || !power_of_two(q))
            throw std::invalid_argument("w, u, q must be powers of two (at least 2)");
        if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
            throw std::invalid_argument("sample_fraction must be in (0,1]");
        if (max_iters == 0) throw std::invalid_argument("max_iters must be at least 1");
        fixed.validate();
    }
};

// One layer of the reinterpreted model. Layers that own a codebook (fully
// connected, convolution, average pooling) re-encode the values flowing into
// them; max/min pooling is transparent and works on codes directly.
struct RmLayer {
    LayerKind kind = LayerKind::input;
    std::vector<std::size_t> in_dims, out_dims;
    std::size_t kernel = 0;
    PoolMode pool_mode = PoolMode::max;
    Activation activation = Activation::none;

    Codebook input_codebook;                 // owners only
    std::vector<Codebook> weight_codebooks;  // fc: 1, conv: one per channel, avg-pool: {1/n}
    std::vector<Tensor> product_tables;      // parallel to weight_codebooks, {k_w, k_u}
    std::vector<std::uint16_t> weight_codes; // fc: out*in; conv: M*h*h*C; else empty
    Tensor bias;                             // full precision (never clustered)
    ActivationLUT lut;
    bool has_lut = false;
    std::size_t enc_owner = npos;  // layer whose input codebook encodes this layer's output

    std::size_t in_count() const { return dims_count(in_dims); }
    std::size_t out_count() const { return dims_count(out_dims); }
    bool owns_codebook() const {
        return kind == LayerKind::fully_connected || kind == LayerKind::convolution ||
               (kind == LayerKind::pooling && pool_mode == PoolMode::avg);
    }
    bool has_weights() const {
        return kind == LayerKind::fully_connected || kind == LayerKind::convolution;
    }

    std::size_t pool_window() const {
        std::size_t p = in_dims[0] / out_dims[0];
        if (kind != LayerKind::pooling || p == 0 || out_dims[0] * p != in_dims[0] ||
            out_dims[1] * p != in_dims[1])
            throw std::logic_error("not a window-contraction pooling layer");
        return p;
    }
};

struct ReinterpretedModel {
    std::vector<RmLayer> layers;  // layers[0] is the virtual input encoder
    std::size_t w = 0, u = 0, q = 0;
    std::size_t tree_depth_w = 0, tree_depth_u = 0;  // chosen tree levels
    FixedFormat fixed;

    std::size_t input_count() const { return dims_count(layers.front().in_dims); }
    const std::vector<std::size_t>& input_dims() const { return layers.front().in_dims; }
    std::size_t output_count() const { return dims_count(layers.back().out_dims); }

    // Index of the first codebook owner at or after `from`; npos when none.
    std::size_t next_owner(std::size_t from) const {
        for (std::size_t i = from; i < layers.size(); ++i)
            if (layers[i].owns_codebook()) return i;
        return npos;
    }

    void validate() const {
        if (layers.size() < 2) throw std::invalid_argument("reinterpreted model has no layers");
        if (layers.front().kind != LayerKind::input)
            throw std::invalid_argument("first layer must be the virtual input encoder");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const RmLayer& l = layers[i];
            if (i > 0 && l.in_dims != layers[i - 1].out_dims)
                throw std::invalid_argument("reinterpreted layer dims do not chain");
            if (l.owns_codebook()) {
                l.input_codebook.validate();
                if (l.weight_codebooks.size() != l.product_tables.size())
                    throw std::logic_error("product tables not parallel to weight codebooks");
                for (std::size_t c = 0; c < l.weight_codebooks.size(); ++c) {
                    l.weight_codebooks[c].validate();
                    const Tensor& t = l.product_tables[c];
                    if (!t.shape_equals({l.weight_codebooks[c].size(), l.input_codebook.size()}))
                        throw std::logic_error("product table shape mismatch");
                    // Entries must be the exact centroid products.
                    for (std::size_t a = 0; a < l.weight_codebooks[c].size(); ++a)
                        for (std::size_t b = 0; b < l.input_codebook.size(); ++b)
                            if (t.data[a * l.input_codebook.size() + b] !=
                                l.weight_codebooks[c].centroids[a] * l.input_codebook.centroids[b])
                                throw std::logic_error("product table entry is not w*x");
                }
            }
            if (l.enc_owner != npos) {
                if (l.enc_owner >= layers.size() || !layers[l.enc_owner].owns_codebook())
                    throw std::logic_error("encoding target is not a codebook owner");
            }
            if (l.has_lut) l.lut.validate();
        }
    }
};

struct ReinterpretReport {
    double e_baseline = 0.0;
    std::vector<double> e_clustered;  // one entry per compose iteration
    std::vector<double> delta_e;      // e_clustered - e_baseline, per iteration
    std::size_t iterations = 0;
    std::size_t best_iteration = 0;  // 1-based index of the returned model
    bool converged = false;          // best delta_e <= epsilon
    std::size_t memory_bytes = 0;

    double best_delta_e() const {
        return *std::min_element(delta_e.begin(), delta_e.end());
    }
};

// --- clustering entry points -------------------------------------------------

// Weight codebook(s) for one layer: a fully connected layer is clustered as a
// single population; each convolution output channel gets its own codebook.
// Clustering runs the 2-means tree to depth log2(w) so shallower levels are
// prefixes of deeper ones.
inline std::vector<Codebook> cluster_weights(const Network& net, std::size_t layer, std::size_t w,
                                             std::uint64_t seed) {
    if (layer >= net.layers.size()) throw std::out_of_range("layer index out of range");
    const LayerSpec& l = net.layers[layer];
    if (!l.has_weights())
        throw std::invalid_argument("layer " + std::to_string(layer) + " (" + to_string(l.kind) +
                                    ") has no weights to cluster");
    if (!ComposeConfig::power_of_two(w))
        throw std::invalid_argument("w must be a power of two (at least 2)");
    std::vector<Codebook> books;
    if (l.kind == LayerKind::fully_connected) {
        books.push_back(codebook_for(net.weights[layer].data, w, seed));
    } else {
        std::size_t m = l.out_dims[2];
        std::size_t stride = l.kernel * l.kernel * l.in_dims[2];
        for (std::size_t c = 0; c < m; ++c) {
            std::vector<double> slice(net.weights[layer].data.begin() + c * stride,
                                      net.weights[layer].data.begin() + (c + 1) * stride);
            books.push_back(codebook_for(slice, w, seed ^ (c * 0x9E3779B97F4A7C15ull + c)));
        }
    }
    return books;
}

// Observed activations from a seeded subsample of the train split, collected
// in one feed-forward pass: per layer, the values arriving at it (its input)
// and, for weighted layers, the pre-activation sums.
struct LayerSamples {
    std::vector<std::vector<double>> inputs;   // index = network layer
    std::vector<std::vector<double>> preacts;  // weighted layers only
    std::size_t sample_count = 0;
};

inline LayerSamples sample_activations(const Network& net, const Dataset& data, double fraction,
                                       std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("sample fraction must be in (0,1]");
    Dataset tr = data.subset(Split::train);
    if (tr.count() == 0) throw std::invalid_argument("no train split to sample from");
    std::size_t take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(tr.count()))));
    std::vector<std::size_t> idx(tr.count());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());  // stable gather order
    Dataset sub = tr.gather(idx);
    if (sub.sample_dims() != net.input_dims()) sub.reshape_samples(net.input_dims());

    LayerSamples out;
    out.inputs.resize(net.layers.size());
    out.preacts.resize(net.layers.size());
    out.sample_count = take;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < sub.count(); start += chunk) {
        std::size_t bsz = std::min(chunk, sub.count() - start);
        std::vector<std::size_t> bshape = sub.samples.shape;
        bshape[0] = bsz;
        Tensor batch(bshape);
        std::copy_n(sub.samples.data.begin() + start * sub.sample_size(),
                    bsz * sub.sample_size(), batch.data.begin());
        ForwardTrace trace = forward(net, batch);
        for (std::size_t i = 1; i < net.layers.size(); ++i) {
            const Tensor& x = trace.outputs[i - 1];
            out.inputs[i].insert(out.inputs[i].end(), x.data.begin(), x.data.end());
            if (!trace.preacts[i].empty())
                out.preacts[i].insert(out.preacts[i].end(), trace.preacts[i].data.begin(),
                                      trace.preacts[i].data.end());
        }
    }
    for (std::size_t i = 1; i < net.layers.size(); ++i)
        if (out.inputs[i].empty()) throw std::logic_error("empty activation sample set");
    return out;
}

// The values arriving at one layer under seeded subsampling (the population
// its input codebook is clustered from).
inline std::vector<double> sample_inputs(const Network& net, const Dataset& data,
                                         std::size_t layer, double fraction,
                                         std::uint64_t seed) {
    if (layer == 0 || layer >= net.layers.size())
        throw std::out_of_range("layer index out of range");
    return sample_activations(net, data, fraction, seed).inputs[layer];
}

// --- model assembly -----------------------------------------------------------

namespace detail {

inline Tensor product_table(const Codebook& wcb, const Codebook& ucb) {
    Tensor t({wcb.size(), ucb.size()});
    for (std::size_t i = 0; i < wcb.size(); ++i)
        for (std::size_t j = 0; j < ucb.size(); ++j)
            t.data[i * ucb.size() + j] = wcb.centroids[i] * ucb.centroids[j];
    return t;
}

inline std::vector<std::uint16_t> encode_all(const std::vector<double>& values,
                                             const Codebook& cb) {
    std::vector<std::uint16_t> codes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        codes[i] = static_cast<std::uint16_t>(cb.nearest(values[i]));
    return codes;
}

}  // namespace detail

// Builds the lookup-table model from a trained network and its observed
// activations. Deterministic for a fixed config seed.
inline ReinterpretedModel build_reinterpreted(const Network& net, const LayerSamples& samples,
                                              const ComposeConfig& cfg) {
    cfg.validate();
    net.validate();
    ReinterpretedModel rm;
    rm.w = cfg.w;
    rm.u = cfg.u;
    rm.q = cfg.q;
    rm.tree_depth_w = ComposeConfig::log2_of(cfg.w);
    rm.tree_depth_u = ComposeConfig::log2_of(cfg.u);
    rm.fixed = cfg.fixed;

    rm.layers.resize(net.layers.size());
    bool any_owner = false;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        RmLayer& r = rm.layers[i];
        r.kind = l.kind;
        r.in_dims = l.in_dims;
        r.out_dims = l.out_dims;
        r.kernel = l.kernel;
        r.pool_mode = l.pool_mode;
        r.activation = l.activation;
        if (r.owns_codebook()) any_owner = true;
    }
    if (!any_owner)
        throw std::invalid_argument("network has no computational layers to reinterpret");

    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        RmLayer& r = rm.layers[i];
        if (!r.owns_codebook()) continue;

        // Input codebook from this layer's observed inputs.
        r.input_codebook = codebook_for(samples.inputs[i], cfg.u, cfg.seed ^ (i * 0x85EBCA77ull));

        if (r.has_weights()) {
            r.weight_codebooks = cluster_weights(net, i, cfg.w, cfg.seed ^ (i * 0xC2B2AE3Dull));
            r.bias = net.biases[i];
            // Encoded weights: fc as one population; conv per channel slice.
            const std::vector<double>& wd = net.weights[i].data;
            if (r.kind == LayerKind::fully_connected) {
                r.weight_codes = detail::encode_all(wd, r.weight_codebooks[0]);
            } else {
                std::size_t stride = r.kernel * r.kernel * r.in_dims[2];
                r.weight_codes.resize(wd.size());
                for (std::size_t c = 0; c < r.weight_codebooks.size(); ++c)
                    for (std::size_t j = 0; j < stride; ++j)
                        r.weight_codes[c * stride + j] = static_cast<std::uint16_t>(
                            r.weight_codebooks[c].nearest(wd[c * stride + j]));
            }
            for (const Codebook& wcb : r.weight_codebooks)
                r.product_tables.push_back(detail::product_table(wcb, r.input_codebook));

            // Activation table for hidden layers; the classifier head stays
            // in full precision (argmax needs no table).
            bool is_last = i + 1 == net.layers.size();
            if (!is_last && r.activation != Activation::none &&
                r.activation != Activation::softmax) {
                if (r.activation == Activation::relu && cfg.use_relu_comparator) {
                    r.lut.kind = Activation::relu;
                    r.lut.exact_relu = true;
                } else {
                    r.lut = quantize_activation(r.activation, cfg.q, samples.preacts[i]);
                }
                r.has_lut = true;
            }
        } else {
            // Average pooling: accumulation with the window weight 1/n folded
            // into a normalized product table.
            double inv = 1.0 / static_cast<double>(r.pool_window() * r.pool_window());
            Codebook wcb;
            wcb.centroids = {inv};
            r.weight_codebooks = {wcb};
            r.product_tables = {detail::product_table(wcb, r.input_codebook)};
        }
    }

    // Encoding targets: each producer encodes into the next owner's codebook.
    rm.layers[0].enc_owner = rm.next_owner(1);
    for (std::size_t i = 1; i < rm.layers.size(); ++i)
        if (rm.layers[i].owns_codebook() || rm.layers[i].kind == LayerKind::pooling)
            rm.layers[i].enc_owner = rm.next_owner(i + 1);
    rm.validate();
    return rm;
}

// --- estimator / float reference ----------------------------------------------

struct FloatForwardOptions {
    bool lut_activation = false;  // table activation instead of the exact function
    bool round_y_fixed = false;   // round weighted sums through the fixed grid
};

// Forward pass with every weight and neuron output snapped to its codebook,
// in plain doubles. With both options off this is the compose-loop error
// estimator (exact activation); with both on it is an independent reference
// for the encoded execution path.
inline Tensor rm_float_forward(const ReinterpretedModel& rm, const Tensor& batch,
                               const FloatForwardOptions& opt = {}) {
    if (batch.shape.size() != rm.input_dims().size() + 1 ||
        !std::equal(rm.input_dims().begin(), rm.input_dims().end(), batch.shape.begin() + 1))
        throw std::invalid_argument("batch shape does not match the virtual input layer");
    std::size_t bsz = batch.shape[0];

    // Virtual input encoding: snap raw values into the first owner's codebook.
    Tensor cur = batch;
    std::size_t first = rm.layers[0].enc_owner;
    if (first != npos) {
        const Codebook& cb = rm.layers[first].input_codebook;
        for (double& v : cur.data) v = cb.snap(v);
    }

    for (std::size_t i = 1; i < rm.layers.size(); ++i) {
        const RmLayer& l = rm.layers[i];
        std::vector<std::size_t> oshape{bsz};
        oshape.insert(oshape.end(), l.out_dims.begin(), l.out_dims.end());
        Tensor out(oshape);
        bool is_last = i + 1 == rm.layers.size();

        if (l.kind == LayerKind::fully_connected) {
            std::size_t in = l.in_count(), on = l.out_count();
            const Codebook& wcb = l.weight_codebooks[0];
            for (std::size_t b = 0; b < bsz; ++b) {
                const double* x = cur.data.data() + b * in;
                double* y = out.data.data() + b * on;
                for (std::size_t o = 0; o < on; ++o) {
                    double acc = l.bias.data[o];
                    const std::uint16_t* wc = l.weight_codes.data() + o * in;
                    for (std::size_t k = 0; k < in; ++k)
                        acc += wcb.centroids[wc[k]] * x[k];
                    y[o] = acc;
                }
            }
        } else if (l.kind == LayerKind::convolution) {
            std::size_t ih = l.in_dims[0], iw = l.in_dims[1], ic = l.in_dims[2];
            std::size_t oh = l.out_dims[0], ow = l.out_dims[1], m = l.out_dims[2];
            std::size_t kk = l.kernel, stride = kk * kk * ic;
            for (std::size_t b = 0; b < bsz; ++b) {
                const double* xin = cur.data.data() + b * ih * iw * ic;
                double* yout = out.data.data() + b * oh * ow * m;
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t om = 0; om < m; ++om) {
                            const Codebook& wcb = l.weight_codebooks[om];
                            const std::uint16_t* wc = l.weight_codes.data() + om * stride;
                            double acc = l.bias.data[om];
                            for (std::size_t ky = 0; ky < kk; ++ky)
                                for (std::size_t kx = 0; kx < kk; ++kx) {
                                    const double* xr = xin + ((oy + ky) * iw + (ox + kx)) * ic;
                                    const std::uint16_t* wr = wc + (ky * kk + kx) * ic;
                                    for (std::size_t c = 0; c < ic; ++c)
                                        acc += wcb.centroids[wr[c]] * xr[c];
                                }
                            yout[(oy * ow + ox) * m + om] = acc;
                        }
            }
        } else if (l.kind == LayerKind::pooling && l.pool_mode != PoolMode::avg) {
            // Transparent max/min pooling over already-snapped values.
            std::size_t ih = l.in_dims[0], iw = l.in_dims[1], c = l.in_dims[2];
            std::size_t oh = l.out_dims[0], ow = l.out_dims[1], p = l.pool_window();
            for (std::size_t b = 0; b < bsz; ++b) {
                const double* xin = cur.data.data() + b * ih * iw * c;
                double* yout = out.data.data() + b * oh * ow * c;
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            double acc = xin[(oy * p * iw + ox * p) * c + ch];
                            for (std::size_t ky = 0; ky < p; ++ky)
                                for (std::size_t kx = 0; kx < p; ++kx) {
                                    double v = xin[((oy * p + ky) * iw + ox * p + kx) * c + ch];
                                    if (l.pool_mode == PoolMode::max ? v > acc : v < acc) acc = v;
                                }
                            yout[(oy * ow + ox) * c + ch] = acc;
                        }
            }
            cur = std::move(out);
            continue;  // no activation, no re-encoding
        } else if (l.kind == LayerKind::pooling) {
            // Average pooling through the normalized table: mean of the
            // (already snapped) window values.
            std::size_t ih = l.in_dims[0], iw = l.in_dims[1], c = l.in_dims[2];
            std::size_t oh = l.out_dims[0], ow = l.out_dims[1], p = l.pool_window();
            double inv = l.weight_codebooks[0].centroids[0];
            for (std::size_t b = 0; b < bsz; ++b) {
                const double* xin = cur.data.data() + b * ih * iw * c;
                double* yout = out.data.data() + b * oh * ow * c;
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            double acc = 0.0;
                            for (std::size_t ky = 0; ky < p; ++ky)
                                for (std::size_t kx = 0; kx < p; ++kx)
                                    acc += inv * xin[((oy * p + ky) * iw + ox * p + kx) * c + ch];
                            yout[(oy * ow + ox) * c + ch] = acc;
                        }
            }
        } else {
            throw std::logic_error("unexpected layer kind in reinterpreted forward");
        }

        // Weighted sum post-processing: optional fixed-grid rounding, then the
        // activation, then re-encoding into the consumer's codebook.
        if (opt.round_y_fixed)
            for (double& v : out.data) v = rm.fixed.round(v);
        if (l.has_weights()) {
            if (is_last) {
                if (l.activation == Activation::softmax)
                    detail::softmax_rows(out, bsz, l.out_count());
                else if (l.activation != Activation::none)
                    for (double& v : out.data) v = apply_activation(l.activation, v);
            } else if (l.has_lut) {
                if (opt.lut_activation)
                    for (double& v : out.data) v = l.lut.lookup(v);
                else if (l.lut.exact_relu)
                    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
                else
                    for (double& v : out.data) v = apply_activation(l.activation, v);
            } else if (l.activation != Activation::none && l.activation != Activation::softmax) {
                for (double& v : out.data) v = apply_activation(l.activation, v);
            }
        }
        if (l.enc_owner != npos) {
            const Codebook& cb = rm.layers[l.enc_owner].input_codebook;
            for (double& v : out.data) v = cb.snap(v);
        }
        cur = std::move(out);
    }
    return cur;
}

// Classification error of the snapped model on one dataset split.
inline double rm_estimate_error(const ReinterpretedModel& rm, const Dataset& data, Split split,
                                const FloatForwardOptions& opt = {}) {
    Dataset sub = data.subset(split);
    if (sub.count() == 0)
        throw std::invalid_argument(std::string("dataset has no ") + to_string(split) + " split");
    if (sub.sample_dims() != rm.input_dims()) sub.reshape_samples(rm.input_dims());
    std::size_t classes = rm.output_count();
    std::size_t wrong = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < sub.count(); start += chunk) {
        std::size_t bsz = std::min(chunk, sub.count() - start);
        std::vector<std::size_t> bshape = sub.samples.shape;
        bshape[0] = bsz;
        Tensor batch(bshape);
        std::copy_n(sub.samples.data.begin() + start * sub.sample_size(),
                    bsz * sub.sample_size(), batch.data.begin());
        Tensor scores = rm_float_forward(rm, batch, opt);
        for (std::size_t s = 0; s < bsz; ++s) {
            const double* row = scores.data.data() + s * classes;
            std::size_t pred =
                classes == 1 ? (row[0] > 0.5 ? 1 : 0)
                             : static_cast<std::size_t>(std::max_element(row, row + classes) - row);
            if (pred != sub.labels[start + s]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(sub.count());
}

// Snapped copy of the network's weights (the retraining start point).
inline Network snap_network_weights(const Network& net, const ReinterpretedModel& rm) {
    Network out = net;
    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        const RmLayer& r = rm.layers[i];
        if (!r.has_weights()) continue;
        if (r.kind == LayerKind::fully_connected) {
            for (std::size_t j = 0; j < out.weights[i].size(); ++j)
                out.weights[i].data[j] = r.weight_codebooks[0].centroids[r.weight_codes[j]];
        } else {
            std::size_t stride = r.kernel * r.kernel * r.in_dims[2];
            for (std::size_t c = 0; c < r.weight_codebooks.size(); ++c)
                for (std::size_t j = 0; j < stride; ++j)
                    out.weights[i].data[c * stride + j] =
                        r.weight_codebooks[c].centroids[r.weight_codes[c * stride + j]];
        }
    }
    return out;
}

// Model footprint: product tables and codebook/table entries at the declared
// 4-byte fixed-point entry width, activation tables at 8 bytes per row (y and
// z). The same formula backs the memory report.
inline std::size_t rm_memory_bytes(const ReinterpretedModel& rm) {
    constexpr std::size_t entry = 4;
    std::size_t bytes = 0;
    for (const RmLayer& l : rm.layers) {
        for (const Tensor& t : l.product_tables) bytes += t.size() * entry;
        for (const Codebook& cb : l.weight_codebooks) bytes += cb.size() * entry;
        if (l.owns_codebook()) bytes += l.input_codebook.size() * entry;
        if (l.has_lut && !l.lut.exact_relu) bytes += l.lut.rows() * 2 * entry;
    }
    return bytes;
}

// --- the compose loop ----------------------------------------------------------

// Cluster, build tables, estimate the accuracy loss on the validation split,
// and retrain from the snapped weights while the loss exceeds the tolerance.
// Returns the model of the best iteration; `converged` reports whether the
// tolerance was met within the iteration budget.
inline std::pair<ReinterpretedModel, ReinterpretReport> reinterpret(const Network& net,
                                                                    const Dataset& data,
                                                                    const ComposeConfig& cfg) {
    cfg.validate();
    net.validate();
    data.validate();
    if (data.count_of(Split::validation) == 0)
        throw std::invalid_argument("reinterpret needs a labeled validation split");

    // Flat-vs-grid sample dims are interchangeable; align them once.
    Dataset reshaped;
    const Dataset* ds = &data;
    if (data.sample_dims() != net.input_dims()) {
        reshaped = data;
        reshaped.reshape_samples(net.input_dims());
        ds = &reshaped;
    }

    ReinterpretReport report;
    {
        Dataset val = ds->subset(Split::validation);
        std::vector<std::size_t> pred = predict(net, val.samples);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] != val.labels[i]) ++wrong;
        report.e_baseline = static_cast<double>(wrong) / static_cast<double>(pred.size());
    }

    FloatForwardOptions est;
    est.lut_activation = cfg.lut_in_estimator;

    Network current = net;
    ReinterpretedModel best;
    double best_de = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        LayerSamples samples =
            sample_activations(current, *ds, cfg.sample_fraction, cfg.seed);
        ReinterpretedModel rm = build_reinterpreted(current, samples, cfg);
        double e_c = rm_estimate_error(rm, *ds, Split::validation, est);
        double de = e_c - report.e_baseline;
        report.e_clustered.push_back(e_c);
        report.delta_e.push_back(de);
        report.iterations = iter;
        if (de < best_de) {
            best_de = de;
            best = rm;
            report.best_iteration = iter;
        }
        if (de <= cfg.epsilon) {
            report.converged = true;
            break;
        }
        if (iter == cfg.max_iters) break;

        // Retrain in full precision starting from this iteration's snapped
        // weights.
        TrainConfig tc;
        tc.learning_rate = cfg.retrain_lr;
        tc.momentum = cfg.retrain_momentum;
        tc.epochs = cfg.retrain_epochs;
        tc.batch_size = cfg.retrain_batch;
        tc.dropout_rate = 0.0;
        tc.seed = cfg.seed + iter;
        current = train(snap_network_weights(current, rm), *ds, tc);
    }
    report.memory_bytes = rm_memory_bytes(best);
    return {std::move(best), report};
}

}  // namespace rapidnn
