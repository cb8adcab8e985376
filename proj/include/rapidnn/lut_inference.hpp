#pragma once

// Encoded execution of a reinterpreted model: operands travel as codebook
// indices, weighted sums come from product-table cells scaled by occurrence
// counts, activations and re-encodings are table lookups, and max/min
// pooling compares codes directly. A sink interface exposes every
// accumulation and pooling event so a hardware cost model can ride along
// without re-deriving the functional path.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/compose.hpp"

namespace rapidnn {

// An encoded operand: the index of a centroid, tagged with the codebook
// level (bit width) it indexes so that codes from different books cannot be
// compared by accident.
struct Code {
    std::uint16_t bits = 0;  // centroid index, < 2^level
    std::uint8_t level = 0;  // log2 of the codebook capacity
};

inline Code encode(double value, const Codebook& cb) {
    return {static_cast<std::uint16_t>(cb.nearest(value)),
            static_cast<std::uint8_t>(cb.code_width())};
}

inline double decode(Code c, const Codebook& cb) {
    if (c.bits >= cb.size())
        throw std::out_of_range("code " + std::to_string(c.bits) + " outside codebook of " +
                                std::to_string(cb.size()));
    return cb.centroids[c.bits];
}

// Occurrence counts of every product-table cell among one neuron's incoming
// edges; cell (a, b) pairs weight code a with input code b.
struct CountVector {
    std::size_t w = 0, u = 0;
    std::vector<std::uint32_t> counts;  // w*u, row-major in a

    void reset(std::size_t w_, std::size_t u_) {
        w = w_;
        u = u_;
        counts.assign(w * u, 0);
    }
    void add(std::size_t a, std::size_t b) { ++counts[a * u + b]; }
    std::uint32_t at(std::size_t a, std::size_t b) const { return counts[a * u + b]; }
    std::uint64_t fan_in() const {
        std::uint64_t total = 0;
        for (std::uint32_t c : counts) total += c;
        return total;
    }
};

namespace detail {

// The one accumulation routine both the single-neuron entry point and the
// batched model walk share: cells in row-major order, skipping empty ones,
// summed in doubles and rounded once into the fixed-point grid.
inline double accumulate_cells(const CountVector& cv, const Tensor& table, double bias,
                               const FixedFormat& fixed, bool* saturated) {
    double acc = bias;
    for (std::size_t cell = 0; cell < cv.counts.size(); ++cell)
        if (cv.counts[cell]) acc += static_cast<double>(cv.counts[cell]) * table.data[cell];
    return fixed.round(acc, saturated);
}

}  // namespace detail

// One neuron in the encoded domain: count pair occurrences, fetch and
// accumulate table cells, quantize once, then run the activation and
// encoding lookups. `lut`/`enc` may be null for the full-precision head.
struct NeuronResult {
    double y = 0.0;    // quantized weighted sum
    double z = 0.0;    // after activation
    Code zbar;         // code of z in the consumer's book (when enc given)
    bool saturated = false;
};

inline NeuronResult neuron_forward(const std::vector<Code>& inputs,
                                   const std::vector<Code>& weights, const Tensor& table,
                                   double bias, const ActivationLUT* lut, const Codebook* enc,
                                   const FixedFormat& fixed, CountVector* counts_out = nullptr) {
    if (inputs.size() != weights.size())
        throw std::invalid_argument("neuron has " + std::to_string(inputs.size()) +
                                    " inputs but " + std::to_string(weights.size()) + " weights");
    CountVector local;
    CountVector& cv = counts_out ? *counts_out : local;
    cv.reset(table.shape[0], table.shape[1]);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (weights[k].bits >= cv.w || inputs[k].bits >= cv.u)
            throw std::out_of_range("code outside the product table");
        cv.add(weights[k].bits, inputs[k].bits);
    }
    NeuronResult r;
    r.y = detail::accumulate_cells(cv, table, bias, fixed, &r.saturated);
    r.z = lut ? lut->lookup(r.y) : r.y;
    if (enc) r.zbar = encode(r.z, *enc);
    return r;
}

// Max/min over a pooling window of codes. Sorted codebooks make unsigned
// code order equal value order, so the extremum of the codes is the code of
// the extremum. Average pooling runs through accumulation instead.
inline Code pool_encoded(const std::vector<Code>& window, PoolMode mode) {
    if (window.empty()) throw std::invalid_argument("empty pooling window");
    if (mode == PoolMode::avg)
        throw std::invalid_argument("average pooling runs through accumulation, not comparison");
    Code best = window[0];
    for (const Code& c : window) {
        if (c.level != best.level)
            throw std::invalid_argument("pooling window mixes codes from different codebooks");
        if (mode == PoolMode::max ? c.bits > best.bits : c.bits < best.bits) best = c;
    }
    return best;
}

// Observer of the encoded execution; the cost simulator implements this to
// turn counts and searches into cycles and energy.
class InferenceSink {
  public:
    virtual ~InferenceSink() = default;
    virtual void sample_begin(std::size_t /*sample*/) {}
    // One accumulation neuron finished (weighted layers and average pooling).
    virtual void neuron(std::size_t /*layer*/, const CountVector& /*counts*/,
                        bool /*saturated*/) {}
    // One comparison-pooling layer finished for the current sample.
    virtual void pool(std::size_t /*layer*/, PoolMode /*mode*/, std::size_t /*windows*/,
                      std::size_t /*window_size*/) {}
};

struct InferenceStats {
    std::size_t samples = 0;
    std::uint64_t neuron_evals = 0;
    std::uint64_t saturated_sums = 0;  // fixed-point clips during accumulation
};

// Executes the whole model in the encoded domain and returns the
// full-precision class scores. Functionally this matches the float
// reference with table activation and fixed-grid rounding, up to the
// summation-order rounding of one fixed-point ulp.
inline Tensor lut_forward(const ReinterpretedModel& rm, const Tensor& batch,
                          InferenceSink* sink = nullptr, InferenceStats* stats = nullptr) {
    rm.validate();
    if (batch.shape.size() != rm.input_dims().size() + 1 ||
        !std::equal(rm.input_dims().begin(), rm.input_dims().end(), batch.shape.begin() + 1))
        throw std::invalid_argument("batch shape does not match the virtual input layer");
    std::size_t bsz = batch.shape[0];
    std::size_t in_count = rm.input_count();
    std::size_t out_count = rm.output_count();
    std::size_t last = rm.layers.size() - 1;

    Tensor scores({bsz, out_count});
    std::vector<std::uint16_t> cur, next;
    std::vector<double> head;
    CountVector cv;

    for (std::size_t s = 0; s < bsz; ++s) {
        if (sink) sink->sample_begin(s);
        if (stats) ++stats->samples;

        // Virtual input layer: encode the raw sample into the first owner's
        // codebook.
        std::size_t first = rm.layers[0].enc_owner;
        const Codebook* book = &rm.layers[first].input_codebook;
        cur.resize(in_count);
        for (std::size_t k = 0; k < in_count; ++k)
            cur[k] = static_cast<std::uint16_t>(book->nearest(batch.data[s * in_count + k]));

        for (std::size_t i = 1; i <= last; ++i) {
            const RmLayer& l = rm.layers[i];
            bool is_last = i == last;
            const Codebook* enc =
                l.enc_owner == npos ? nullptr : &rm.layers[l.enc_owner].input_codebook;
            if (!is_last && l.owns_codebook() && enc == nullptr)
                throw std::invalid_argument("layer " + std::to_string(i) +
                                            " has no downstream codebook to encode into");
            if (is_last) head.assign(out_count, 0.0);

            auto emit = [&](double y, bool sat, std::size_t out_index) {
                if (sink) sink->neuron(i, cv, sat);
                if (stats) {
                    ++stats->neuron_evals;
                    stats->saturated_sums += sat ? 1 : 0;
                }
                if (is_last) {
                    head[out_index] = y;
                    return;
                }
                double z = y;
                if (l.has_lut) z = l.lut.lookup(y);
                next[out_index] = static_cast<std::uint16_t>(enc->nearest(z));
            };

            if (l.kind == LayerKind::fully_connected) {
                std::size_t in = l.in_count(), on = l.out_count();
                const Tensor& table = l.product_tables[0];
                if (!is_last) next.resize(on);
                for (std::size_t o = 0; o < on; ++o) {
                    cv.reset(table.shape[0], table.shape[1]);
                    const std::uint16_t* wc = l.weight_codes.data() + o * in;
                    for (std::size_t k = 0; k < in; ++k) cv.add(wc[k], cur[k]);
                    bool sat = false;
                    double y = detail::accumulate_cells(cv, table, l.bias.data[o], rm.fixed, &sat);
                    emit(y, sat, o);
                }
            } else if (l.kind == LayerKind::convolution) {
                std::size_t ih = l.in_dims[0], iw = l.in_dims[1], ic = l.in_dims[2];
                std::size_t oh = l.out_dims[0], ow = l.out_dims[1], m = l.out_dims[2];
                std::size_t kk = l.kernel, stride = kk * kk * ic;
                if (!is_last) next.resize(oh * ow * m);
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t om = 0; om < m; ++om) {
                            const Tensor& table = l.product_tables[om];
                            const std::uint16_t* wc = l.weight_codes.data() + om * stride;
                            cv.reset(table.shape[0], table.shape[1]);
                            for (std::size_t ky = 0; ky < kk; ++ky)
                                for (std::size_t kx = 0; kx < kk; ++kx)
                                    for (std::size_t c = 0; c < ic; ++c)
                                        cv.add(wc[(ky * kk + kx) * ic + c],
                                               cur[((oy + ky) * iw + (ox + kx)) * ic + c]);
                            bool sat = false;
                            double y = detail::accumulate_cells(cv, table, l.bias.data[om],
                                                                rm.fixed, &sat);
                            emit(y, sat, (oy * ow + ox) * m + om);
                        }
            } else if (l.pool_mode != PoolMode::avg) {
                // Comparison pooling straight on the codes.
                if (is_last)
                    throw std::invalid_argument(
                        "encoded execution cannot end in comparison pooling");
                std::size_t iw = l.in_dims[1], c = l.in_dims[2];
                std::size_t oh = l.out_dims[0], ow = l.out_dims[1], p = l.pool_window();
                next.resize(oh * ow * c);
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            std::uint16_t best = cur[(oy * p * iw + ox * p) * c + ch];
                            for (std::size_t ky = 0; ky < p; ++ky)
                                for (std::size_t kx = 0; kx < p; ++kx) {
                                    std::uint16_t v =
                                        cur[((oy * p + ky) * iw + ox * p + kx) * c + ch];
                                    if (l.pool_mode == PoolMode::max ? v > best : v < best)
                                        best = v;
                                }
                            next[(oy * ow + ox) * c + ch] = best;
                        }
                if (sink) sink->pool(i, l.pool_mode, oh * ow * c, p * p);
                std::swap(cur, next);
                continue;  // codes stay in the downstream owner's book
            } else {
                // Average pooling: accumulate the window through the
                // normalized product table, then re-encode.
                std::size_t iw = l.in_dims[1], c = l.in_dims[2];
                std::size_t oh = l.out_dims[0], ow = l.out_dims[1], p = l.pool_window();
                const Tensor& table = l.product_tables[0];
                if (!is_last) next.resize(oh * ow * c);
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox)
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            cv.reset(table.shape[0], table.shape[1]);
                            for (std::size_t ky = 0; ky < p; ++ky)
                                for (std::size_t kx = 0; kx < p; ++kx)
                                    cv.add(0, cur[((oy * p + ky) * iw + ox * p + kx) * c + ch]);
                            bool sat = false;
                            double y = detail::accumulate_cells(cv, table, 0.0, rm.fixed, &sat);
                            emit(y, sat, (oy * ow + ox) * c + ch);
                        }
            }
            if (!is_last) std::swap(cur, next);
        }

        // Full-precision head, same post-processing as the float reference.
        std::copy(head.begin(), head.end(), scores.data.begin() + s * out_count);
    }

    const RmLayer& tail = rm.layers[last];
    if (tail.has_weights()) {
        if (tail.activation == Activation::softmax)
            detail::softmax_rows(scores, bsz, out_count);
        else if (tail.activation != Activation::none)
            for (double& v : scores.data) v = apply_activation(tail.activation, v);
    }
    return scores;
}

}  // namespace rapidnn
