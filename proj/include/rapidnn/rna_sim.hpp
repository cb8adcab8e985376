#pragma once

// Behavior, timing, energy and area of the in-memory accelerator that runs
// reinterpreted models: each resident neuron block (RNA) counts code
// occurrences into a crossbar, folds the counts through a shift/add tree,
// and resolves activation/encoding through small associative memories.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rapidnn/kv_file.hpp"
#include "rapidnn/lut_inference.hpp"

namespace rapidnn {

struct BlockCost {
    double area_um2 = 0.0;
    double power_mw = 0.0;
};

// Per-block cost table plus the clocking and composition parameters.  The
// defaults describe the published design point: a 1k-RNA tile, 32 tiles per
// chip, 1 GHz core clock, 13-cycle adder stages and 8-bit CAM search stages.
struct RnaCostModel {
    BlockCost crossbar{3136.0, 3.7};
    BlockCost counter{538.6, 0.7};
    unsigned counter_width_bits = 12;
    BlockCost activation_am{83.2, 0.2};
    std::size_t activation_rows = 64;
    BlockCost encoder_am{83.2, 0.2};
    std::size_t encoder_rows = 64;

    std::size_t tile_rnas = 1000;
    // Sized so the default 32-tile chip totals 124.1 mm²; the raw table lists
    // 37.6, which is three orders of magnitude too small for that total.
    double buffer_area_um2 = 37600.0;
    double buffer_power_mw = 2.8;
    std::size_t chip_tiles = 32;
    // Headline figure quoted for the whole chip; the sum of parts is ~153.7 W.
    // Reports surface both rather than silently preferring one.
    double quoted_chip_power_w = 310.4;

    double clock_ghz = 1.0;
    unsigned adder_stage_cycles = 13;
    unsigned cam_stage_bits = 8;
    double cam_search_ns = 0.5;

    double pool_ndcam_area_um2 = 24.0;
    double pool_ndcam_latency_ns = 0.5;
    double pool_ndcam_energy_fj = 920.0;
    double pool_cmos_area_um2 = 374.0;
    double pool_cmos_latency_ns = 1.2;
    double pool_cmos_energy_fj = 378.0;

    double clock_period_ns() const { return 1.0 / clock_ghz; }

    // Summed pairwise — accumulation datapath first, then the two AMs — so
    // the default constants reproduce the published per-RNA totals exactly.
    double rna_area_um2() const {
        return (crossbar.area_um2 + counter.area_um2) +
               (activation_am.area_um2 + encoder_am.area_um2);
    }
    double rna_power_mw() const {
        return (crossbar.power_mw + counter.power_mw) +
               (activation_am.power_mw + encoder_am.power_mw);
    }
    double tile_area_um2() const {
        return static_cast<double>(tile_rnas) * rna_area_um2() + buffer_area_um2;
    }
    double tile_power_mw() const {
        return static_cast<double>(tile_rnas) * rna_power_mw() + buffer_power_mw;
    }
    double chip_area_mm2() const {
        return static_cast<double>(chip_tiles) * tile_area_um2() / 1e6;
    }
    double chip_power_w() const {
        return static_cast<double>(chip_tiles) * tile_power_mw() / 1000.0;
    }
    std::size_t chip_rnas() const { return chip_tiles * tile_rnas; }

    void validate() const {
        const struct { double v; const char* name; } positives[] = {
            {crossbar.area_um2, "crossbar area"},   {crossbar.power_mw, "crossbar power"},
            {counter.area_um2, "counter area"},     {counter.power_mw, "counter power"},
            {activation_am.area_um2, "activation-AM area"},
            {activation_am.power_mw, "activation-AM power"},
            {encoder_am.area_um2, "encoder-AM area"},
            {encoder_am.power_mw, "encoder-AM power"},
            {buffer_area_um2, "buffer area"},       {buffer_power_mw, "buffer power"},
            {clock_ghz, "clock frequency"},         {cam_search_ns, "CAM search latency"},
        };
        for (const auto& p : positives)
            if (!(p.v > 0.0)) throw std::invalid_argument(std::string(p.name) + " must be positive");
        if (counter_width_bits == 0 || counter_width_bits > 32)
            throw std::invalid_argument("counter width must be 1..32 bits");
        if (tile_rnas == 0 || chip_tiles == 0)
            throw std::invalid_argument("tile/chip composition must be non-empty");
        if (adder_stage_cycles == 0) throw std::invalid_argument("adder stage cycles must be positive");
        if (cam_stage_bits == 0 || cam_stage_bits > 32)
            throw std::invalid_argument("CAM stage width must be 1..32 bits");
        if (activation_rows == 0 || encoder_rows == 0)
            throw std::invalid_argument("AM row counts must be positive");
    }

    // Returns false for keys the cost table does not define.
    bool apply_override(const KvEntry& e) {
        if (e.key == "crossbar.area_um2") crossbar.area_um2 = kv_double(e);
        else if (e.key == "crossbar.power_mw") crossbar.power_mw = kv_double(e);
        else if (e.key == "counter.area_um2") counter.area_um2 = kv_double(e);
        else if (e.key == "counter.power_mw") counter.power_mw = kv_double(e);
        else if (e.key == "counter.width_bits") counter_width_bits = static_cast<unsigned>(kv_size(e));
        else if (e.key == "activation_am.area_um2") activation_am.area_um2 = kv_double(e);
        else if (e.key == "activation_am.power_mw") activation_am.power_mw = kv_double(e);
        else if (e.key == "activation_am.rows") activation_rows = kv_size(e);
        else if (e.key == "encoder_am.area_um2") encoder_am.area_um2 = kv_double(e);
        else if (e.key == "encoder_am.power_mw") encoder_am.power_mw = kv_double(e);
        else if (e.key == "encoder_am.rows") encoder_rows = kv_size(e);
        else if (e.key == "tile.rnas") tile_rnas = kv_size(e);
        else if (e.key == "tile.buffer_area_um2") buffer_area_um2 = kv_double(e);
        else if (e.key == "tile.buffer_power_mw") buffer_power_mw = kv_double(e);
        else if (e.key == "chip.tiles") chip_tiles = kv_size(e);
        else if (e.key == "chip.quoted_power_w") quoted_chip_power_w = kv_double(e);
        else if (e.key == "clock_ghz") clock_ghz = kv_double(e);
        else if (e.key == "adder.stage_cycles") adder_stage_cycles = static_cast<unsigned>(kv_size(e));
        else if (e.key == "cam.stage_bits") cam_stage_bits = static_cast<unsigned>(kv_size(e));
        else if (e.key == "cam.search_ns") cam_search_ns = kv_double(e);
        else if (e.key == "pool.ndcam.area_um2") pool_ndcam_area_um2 = kv_double(e);
        else if (e.key == "pool.ndcam.latency_ns") pool_ndcam_latency_ns = kv_double(e);
        else if (e.key == "pool.ndcam.energy_fj") pool_ndcam_energy_fj = kv_double(e);
        else if (e.key == "pool.cmos.area_um2") pool_cmos_area_um2 = kv_double(e);
        else if (e.key == "pool.cmos.latency_ns") pool_cmos_latency_ns = kv_double(e);
        else if (e.key == "pool.cmos.energy_fj") pool_cmos_energy_fj = kv_double(e);
        else return false;
        return true;
    }
};

inline RnaCostModel load_cost_model(const std::string& path, RnaCostModel base = {}) {
    for (const KvEntry& e : read_kv_file(path))
        if (!base.apply_override(e))
            throw std::invalid_argument(path + ":" + std::to_string(e.line) +
                                        ": unknown cost key '" + e.key + "'");
    base.validate();
    return base;
}

// ---------------------------------------------------------------------------
// Shift/add decomposition of counter values.
//
// A count multiplies a stored product by repeated shifted adds.  The longest
// run of two or more consecutive set bits is folded into one add and one
// subtract (0b1111 -> +2^4 - 2^0); every bit outside that run contributes a
// positive term of its own.

struct ShiftTerm {
    unsigned shift = 0;
    int sign = 1;  // +1 or -1

    bool operator==(const ShiftTerm&) const = default;
};

inline std::vector<ShiftTerm> shift_decompose(std::uint32_t count) {
    // Locate the longest run of consecutive ones; prefer the most significant
    // run on ties so the fold always targets the highest-value bits.
    unsigned best_lo = 0, best_len = 0;
    unsigned run_lo = 0, run_len = 0;
    for (unsigned bit = 0; bit < 32; ++bit) {
        if (count & (1u << bit)) {
            if (run_len == 0) run_lo = bit;
            ++run_len;
            if (run_len >= best_len) {
                best_len = run_len;
                best_lo = run_lo;
            }
        } else {
            run_len = 0;
        }
    }
    std::vector<ShiftTerm> terms;
    if (best_len >= 2) {
        std::uint64_t rest = count & ~(((1ull << best_len) - 1ull) << best_lo);
        for (unsigned bit = 0; bit < 32; ++bit)
            if (rest & (1ull << bit)) terms.push_back({bit, +1});
        terms.push_back({best_lo, -1});
        terms.push_back({best_lo + best_len, +1});
        std::sort(terms.begin(), terms.end(),
                  [](const ShiftTerm& a, const ShiftTerm& b) { return a.shift < b.shift; });
    } else {
        for (unsigned bit = 0; bit < 32; ++bit)
            if (count & (1u << bit)) terms.push_back({bit, +1});
    }
    return terms;
}

// Term count alone, memoized across the 12-bit counter range hot in the
// simulator's inner loop.
inline std::size_t shift_term_count(std::uint32_t count) {
    static const std::array<std::uint8_t, 4096> small = [] {
        std::array<std::uint8_t, 4096> t{};
        for (std::uint32_t c = 0; c < 4096; ++c)
            t[c] = static_cast<std::uint8_t>(shift_decompose(c).size());
        return t;
    }();
    if (count < small.size()) return small[count];
    return shift_decompose(count).size();
}

// ---------------------------------------------------------------------------
// Adder tree: k partial terms merge through carry-save stages that retire
// 3 operands into 2, so s stages suffice once (3/2)^s >= k; a final N-bit
// carry propagation costs one stage per operand bit.

inline std::uint64_t adder_tree_cycles(std::uint64_t k_terms, unsigned operand_bits,
                                       unsigned stage_cycles = 13) {
    if (k_terms == 0) return 0;
    unsigned stages = 0;
    unsigned __int128 p3 = 1, p2 = 1;
    while (p3 < static_cast<unsigned __int128>(k_terms) * p2) {
        p3 *= 3;
        p2 *= 2;
        ++stages;
    }
    return static_cast<std::uint64_t>(stage_cycles) * (stages + operand_bits);
}

// ---------------------------------------------------------------------------
// Counting phase: inputs stream one code per cycle into each weight buffer in
// parallel, so the phase lasts as long as the fullest buffer.

struct CountingSchedule {
    std::uint64_t cycles = 0;
    bool counter_saturated = false;  // some (weight, input) cell overflowed its counter
};

inline CountingSchedule counting_schedule(const CountVector& cv, unsigned counter_width_bits = 12) {
    CountingSchedule s;
    const std::uint32_t cap =
        counter_width_bits >= 32 ? 0xFFFFFFFFu : (1u << counter_width_bits) - 1u;
    for (std::size_t a = 0; a < cv.w; ++a) {
        std::uint64_t row = 0;
        for (std::size_t b = 0; b < cv.u; ++b) {
            std::uint32_t c = cv.at(a, b);
            row += c;
            if (c > cap) s.counter_saturated = true;
        }
        s.cycles = std::max(s.cycles, row);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Nearest-distance CAM search.  The oracle resolves the full word at once;
// the staged mode narrows candidates one 8-bit field at a time from the most
// significant end, the way the pipelined hardware does.

enum class CamMode { oracle, staged };

inline std::size_t ndcam_search(std::uint32_t query, const std::vector<std::uint32_t>& rows,
                                unsigned word_bits, CamMode mode, unsigned stage_bits = 8) {
    if (rows.empty()) throw std::invalid_argument("CAM search over empty table");
    if (word_bits == 0 || word_bits > 32 || stage_bits == 0 || word_bits % stage_bits != 0)
        throw std::invalid_argument("CAM word width must be a positive multiple of the stage width");
    const std::uint64_t limit = 1ull << word_bits;
    if (query >= limit) throw std::invalid_argument("CAM query wider than the table word");
    for (std::uint32_t r : rows)
        if (r >= limit) throw std::invalid_argument("CAM row wider than the table word");

    auto dist = [](std::uint32_t a, std::uint32_t b) {
        return a > b ? std::uint32_t(a - b) : std::uint32_t(b - a);
    };

    if (mode == CamMode::oracle) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (dist(rows[i], query) < dist(rows[best], query)) best = i;
        return best;
    }

    std::vector<std::size_t> alive(rows.size());
    for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
    const std::uint32_t mask = stage_bits >= 32 ? 0xFFFFFFFFu : (1u << stage_bits) - 1u;
    for (unsigned off = word_bits; off != 0;) {
        off -= stage_bits;
        std::uint32_t qf = (query >> off) & mask;
        std::uint32_t best = mask;
        for (std::size_t i : alive) best = std::min(best, dist((rows[i] >> off) & mask, qf));
        std::vector<std::size_t> next;
        for (std::size_t i : alive)
            if (dist((rows[i] >> off) & mask, qf) == best) next.push_back(i);
        alive.swap(next);
        if (alive.size() == 1) break;
    }
    return alive.front();
}

// ---------------------------------------------------------------------------
// Comparison pooling hardware: one associative search per window, or a CMOS
// comparator tree when configured.  A 1x1 window is wiring, not hardware.

struct PoolingCost {
    double area_um2 = 0.0;
    double latency_ns = 0.0;
    double energy_fj = 0.0;
};

inline PoolingCost pooling_cost(std::size_t window_size, const RnaCostModel& cost,
                                bool cmos = false) {
    if (window_size == 0) throw std::invalid_argument("empty pooling window");
    if (window_size == 1) return {};
    if (window_size > cost.encoder_rows)
        throw std::invalid_argument("pooling window of " + std::to_string(window_size) +
                                    " exceeds the " + std::to_string(cost.encoder_rows) +
                                    "-row search block");
    if (cmos) return {cost.pool_cmos_area_um2, cost.pool_cmos_latency_ns, cost.pool_cmos_energy_fj};
    return {cost.pool_ndcam_area_um2, cost.pool_ndcam_latency_ns, cost.pool_ndcam_energy_fj};
}

// ---------------------------------------------------------------------------
// Whole-model simulation.

struct SimOptions {
    // Serialize layers onto the available RNAs when the model has more
    // neurons than the chip; off by default so oversubscription is an error.
    bool allow_sharing = false;
    bool cmos_pooling = false;
};

struct LayerTiming {
    std::size_t layer = 0;
    std::string label;               // e.g. "fc 512", "pool max 2x2", "input encode"
    std::size_t neurons = 0;         // parallel accumulation units in this stage
    std::uint64_t worst_count_cycles = 0;
    std::uint64_t worst_adder_cycles = 0;
    std::size_t searches = 0;        // activation + encoding searches per neuron
    double stage_ns = 0.0;           // worst-case latency of this pipeline stage
};

struct SimReport {
    std::size_t samples = 0;
    std::uint64_t total_cycles = 0;       // accumulation cycles over the whole workload
    double sample_latency_s = 0.0;        // one input through every stage, worst case
    double wall_time_s = 0.0;             // pipelined makespan of the workload
    double throughput_samples_s = 0.0;    // steady-state rate, 1 / slowest stage
    std::uint64_t ops_per_sample = 0;     // MACs counted as 2 ops, comparisons as 1
    double throughput_gops = 0.0;

    double energy_accumulation_j = 0.0;   // crossbar + counter activity
    double energy_activation_j = 0.0;     // activation-AM searches
    double energy_encoding_pooling_j = 0.0;  // encoder-AM searches + pooling blocks
    double energy_other_j = 0.0;          // tile buffers over the makespan
    double total_energy_j = 0.0;
    double edp_js = 0.0;

    double area_mm2 = 0.0;                // full configured chip
    std::size_t memory_bytes = 0;
    std::size_t rnas_used = 0;
    std::size_t tiles_used = 0;
    std::size_t sharing_factor = 1;       // >1 when layers time-share RNAs
    std::uint64_t saturated_sums = 0;     // fixed-point accumulator clips
    std::uint64_t counter_saturations = 0;  // neuron evaluations with an overflowed counter

    std::vector<LayerTiming> layers;
};

struct SimResult {
    SimReport report;
    Tensor scores;  // identical to the encoded-execution scores for the batch
};

namespace detail {

// Collects per-layer worst-case and total cycle counts while the encoded
// execution runs, so timing derives from the very counts that produced the
// functional outputs.
class CostSink : public InferenceSink {
public:
    struct LayerAgg {
        std::uint64_t worst_count = 0;
        std::uint64_t worst_adder = 0;
        std::uint64_t sum_cycles = 0;
        std::uint64_t neuron_events = 0;
        std::uint64_t counter_saturations = 0;
        std::uint64_t pool_windows = 0;
        std::size_t pool_window_size = 0;
    };

    CostSink(std::size_t layer_count, unsigned counter_bits, unsigned operand_bits,
             unsigned stage_cycles)
        : agg_(layer_count), counter_bits_(counter_bits), operand_bits_(operand_bits),
          stage_cycles_(stage_cycles) {}

    void neuron(std::size_t layer, const CountVector& counts, bool) override {
        CountingSchedule cs = counting_schedule(counts, counter_bits_);
        std::uint64_t k_terms = 0;
        for (std::uint32_t c : counts.counts)
            if (c) k_terms += shift_term_count(c);
        std::uint64_t adder = adder_tree_cycles(k_terms, operand_bits_, stage_cycles_);
        LayerAgg& a = agg_[layer];
        a.worst_count = std::max(a.worst_count, cs.cycles);
        a.worst_adder = std::max(a.worst_adder, adder);
        a.sum_cycles += cs.cycles + adder;
        ++a.neuron_events;
        if (cs.counter_saturated) ++a.counter_saturations;
    }

    void pool(std::size_t layer, PoolMode, std::size_t windows, std::size_t window_size) override {
        LayerAgg& a = agg_[layer];
        a.pool_windows += windows;
        a.pool_window_size = window_size;
    }

    const std::vector<LayerAgg>& layers() const { return agg_; }

private:
    std::vector<LayerAgg> agg_;
    unsigned counter_bits_;
    unsigned operand_bits_;
    unsigned stage_cycles_;
};

inline std::uint64_t layer_ops(const RmLayer& l) {
    switch (l.kind) {
        case LayerKind::fully_connected:
            return 2ull * l.in_count() * l.out_count();
        case LayerKind::convolution:
            return 2ull * l.kernel * l.kernel * l.in_dims[2] * l.out_count();
        case LayerKind::pooling: {
            std::uint64_t window = static_cast<std::uint64_t>(l.pool_window()) * l.pool_window();
            std::uint64_t windows = l.out_count();
            return l.pool_mode == PoolMode::avg ? windows * window : windows * (window - 1);
        }
        case LayerKind::input:
            return 0;
    }
    return 0;
}

}  // namespace detail

inline SimResult simulate(const ReinterpretedModel& rm, const Tensor& batch,
                          const RnaCostModel& cost = {}, const SimOptions& opt = {}) {
    rm.validate();
    cost.validate();
    if (batch.shape.empty() || batch.shape[0] == 0)
        throw std::invalid_argument("simulation needs at least one input sample");
    const std::size_t samples = batch.shape[0];
    const unsigned operand_bits = rm.fixed.total_bits;

    // Capacity: every accumulating output needs a resident neuron block.
    std::size_t rnas_needed = 0;
    for (const RmLayer& l : rm.layers)
        if (l.has_weights() || (l.kind == LayerKind::pooling && l.pool_mode == PoolMode::avg))
            rnas_needed += l.out_count();
    std::size_t sharing = 1;
    if (rnas_needed > cost.chip_rnas()) {
        if (!opt.allow_sharing)
            throw std::runtime_error(
                "model needs " + std::to_string(rnas_needed) + " neuron blocks but the chip has " +
                std::to_string(cost.chip_rnas()) + "; enable sharing to time-multiplex them");
        sharing = (rnas_needed + cost.chip_rnas() - 1) / cost.chip_rnas();
    }

    detail::CostSink sink(rm.layers.size(), cost.counter_width_bits, operand_bits,
                          cost.adder_stage_cycles);
    InferenceStats stats;
    Tensor scores = lut_forward(rm, batch, &sink, &stats);

    SimResult res;
    SimReport& rep = res.report;
    res.scores = std::move(scores);
    rep.samples = samples;
    rep.saturated_sums = stats.saturated_sums;
    rep.memory_bytes = rm_memory_bytes(rm);
    rep.area_mm2 = cost.chip_area_mm2();
    rep.rnas_used = rnas_needed;
    rep.tiles_used = std::min(cost.chip_tiles, (rnas_needed + cost.tile_rnas - 1) / cost.tile_rnas);
    if (rep.tiles_used == 0) rep.tiles_used = 1;  // buffers still clock for a pooling-only model
    rep.sharing_factor = sharing;

    const double period = cost.clock_period_ns();
    std::uint64_t act_searches = 0, enc_searches = 0;
    double pool_energy_fj_total = 0.0;
    double pipeline_sum_ns = 0.0, pipeline_max_ns = 0.0;

    for (std::size_t i = 0; i < rm.layers.size(); ++i) {
        const RmLayer& l = rm.layers[i];
        const detail::CostSink::LayerAgg& a = sink.layers()[i];
        const bool is_last = i + 1 == rm.layers.size();

        LayerTiming t;
        t.layer = i;
        rep.total_cycles += a.sum_cycles;
        rep.counter_saturations += a.counter_saturations;
        rep.ops_per_sample += detail::layer_ops(l);

        if (l.kind == LayerKind::input) {
            // Virtual encoding stage: all input elements search in parallel.
            t.label = "input encode";
            t.neurons = l.out_count();
            t.searches = 1;
            t.stage_ns = cost.cam_search_ns;
            enc_searches += static_cast<std::uint64_t>(samples) * l.out_count();
        } else if (l.kind == LayerKind::pooling && l.pool_mode != PoolMode::avg) {
            std::size_t window = l.pool_window() * l.pool_window();
            PoolingCost pc = pooling_cost(window, cost, opt.cmos_pooling);
            t.label = std::string("pool ") + to_string(l.pool_mode) + " " +
                      std::to_string(l.pool_window()) + "x" + std::to_string(l.pool_window());
            t.neurons = l.out_count();
            t.stage_ns = pc.latency_ns;
            pool_energy_fj_total += pc.energy_fj * static_cast<double>(a.pool_windows);
        } else {
            // Accumulating stage: fc, conv, or averaging pool.
            t.label = std::string(to_string(l.kind)) +
                      (l.kind == LayerKind::pooling ? " avg" : " " + std::to_string(l.out_count()));
            t.neurons = l.out_count();
            t.worst_count_cycles = a.worst_count;
            t.worst_adder_cycles = a.worst_adder;
            bool act_search = l.has_lut && !l.lut.exact_relu;  // comparators skip the AM
            bool enc_search = l.enc_owner != npos && !is_last;
            t.searches = (act_search ? 1u : 0u) + (enc_search ? 1u : 0u);
            t.stage_ns = static_cast<double>(a.worst_count + a.worst_adder) * period *
                             static_cast<double>(sharing) +
                         static_cast<double>(t.searches) * cost.cam_search_ns;
            if (act_search) act_searches += a.neuron_events;
            if (enc_search) enc_searches += a.neuron_events;
        }
        pipeline_sum_ns += t.stage_ns;
        pipeline_max_ns = std::max(pipeline_max_ns, t.stage_ns);
        rep.layers.push_back(std::move(t));
    }

    rep.sample_latency_s = pipeline_sum_ns * 1e-9;
    double makespan_ns =
        pipeline_sum_ns + pipeline_max_ns * static_cast<double>(samples - 1);
    rep.wall_time_s = makespan_ns * 1e-9;
    rep.throughput_samples_s = pipeline_max_ns > 0.0 ? 1e9 / pipeline_max_ns : 0.0;
    rep.throughput_gops =
        rep.throughput_samples_s * static_cast<double>(rep.ops_per_sample) / 1e9;

    // Energy: datapath blocks while they cycle, AMs per search, buffers for
    // the whole run.  1 mW over 1 ns is 1 pJ, i.e. 1e-12 J per mW·ns.  Time
    // sharing stretches latency but the switching work stays the same.
    rep.energy_accumulation_j = (cost.crossbar.power_mw + cost.counter.power_mw) *
                                static_cast<double>(rep.total_cycles) * period * 1e-12;
    rep.energy_activation_j = cost.activation_am.power_mw * cost.cam_search_ns *
                              static_cast<double>(act_searches) * 1e-12;
    rep.energy_encoding_pooling_j = cost.encoder_am.power_mw * cost.cam_search_ns *
                                        static_cast<double>(enc_searches) * 1e-12 +
                                    pool_energy_fj_total * 1e-15;
    rep.energy_other_j = cost.buffer_power_mw * static_cast<double>(rep.tiles_used) *
                         makespan_ns * 1e-12;
    rep.total_energy_j = rep.energy_accumulation_j + rep.energy_activation_j +
                         rep.energy_encoding_pooling_j + rep.energy_other_j;
    rep.edp_js = rep.total_energy_j * rep.wall_time_s;
    return res;
}

}  // namespace rapidnn
