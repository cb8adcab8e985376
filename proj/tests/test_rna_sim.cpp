#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "rapidnn/rna_sim.hpp"

using namespace rapidnn;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

// Same exactly-representable two-layer network the inference tests pin down.
ReinterpretedModel toy_model() {
    Network net = parse_topology("in:2 fc:2:relu fc:2:softmax");
    net.weights[1].data = {0.5, 1.0, -0.5, 0.25};
    net.weights[2].data = {1.0, -1.0, 0.5, 0.0};
    Dataset d;
    d.samples = Tensor({8, 2});
    d.samples.data = {0, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 1};
    d.labels = {0, 0, 1, 1, 0, 0, 1, 1};
    d.split.assign(8, Split::train);
    for (std::size_t i = 4; i < 8; ++i) d.split[i] = Split::validation;
    d.num_classes = 2;
    ComposeConfig cfg;
    cfg.w = 4;
    cfg.u = 8;
    cfg.q = 16;
    return build_reinterpreted(net, sample_activations(net, d, 1.0, 1), cfg);
}

Tensor toy_batch() {
    Tensor t({4, 2});
    t.data = {0, 0, 0, 1, 1, 0, 1, 1};
    return t;
}

// Small convolution + max-pooling model for the comparison-pooling path.
ReinterpretedModel pooled_model(Tensor& batch_out) {
    Dataset d;
    d.samples = Tensor({6, 6, 6, 1});
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : d.samples.data) v = u(rng);
    d.labels.assign(6, 0);
    d.split.assign(6, Split::train);
    d.num_classes = 3;
    Network net = parse_topology("in:6x6x1 conv:2:3:relu pool:2:max fc:3:softmax");
    init_weights(net, 17);
    ComposeConfig cfg;
    cfg.w = 8;
    cfg.u = 8;
    cfg.q = 16;
    batch_out = d.samples;
    return build_reinterpreted(net, sample_activations(net, d, 1.0, 2), cfg);
}

// Captures every count vector so cycle totals can be recomputed from the
// public scheduling primitives.
struct CountCapture : InferenceSink {
    std::vector<CountVector> all;
    void neuron(std::size_t, const CountVector& counts, bool) override { all.push_back(counts); }
};

std::int64_t term_sum(const std::vector<ShiftTerm>& terms) {
    std::int64_t s = 0;
    for (const ShiftTerm& t : terms) s += t.sign * (std::int64_t(1) << t.shift);
    return s;
}

}  // namespace

TEST_CASE("shift decomposition turns counts into few shifted adds") {
    SECTION("worked examples") {
        REQUIRE(shift_decompose(4) == std::vector<ShiftTerm>{{2, +1}});
        REQUIRE(shift_decompose(9) == std::vector<ShiftTerm>{{0, +1}, {3, +1}});
        REQUIRE(shift_decompose(15) == std::vector<ShiftTerm>{{0, -1}, {4, +1}});
        REQUIRE(shift_decompose(0).empty());
        REQUIRE(shift_decompose(1) == std::vector<ShiftTerm>{{0, +1}});
    }
    SECTION("every counter value reconstructs exactly") {
        for (std::uint32_t c = 0; c < 4096; ++c) {
            auto terms = shift_decompose(c);
            if (term_sum(terms) != std::int64_t(c)) FAIL("count " << c << " does not reconstruct");
            // Folding one run introduces at most one subtraction.
            std::size_t negs = 0;
            for (const ShiftTerm& t : terms) negs += t.sign < 0;
            if (negs > 1) FAIL("count " << c << " uses " << negs << " subtractions");
            for (std::size_t i = 1; i < terms.size(); ++i)
                if (terms[i - 1].shift >= terms[i].shift) FAIL("terms unsorted for " << c);
            if (shift_term_count(c) != terms.size()) FAIL("memoized count differs at " << c);
        }
        SUCCEED("all 4096 counter values decompose exactly");
    }
    SECTION("folding never loses to the plain binary expansion") {
        for (std::uint32_t c = 1; c < 4096; ++c) {
            std::size_t plain = static_cast<std::size_t>(__builtin_popcount(c));
            std::size_t folded = shift_term_count(c);
            if (folded > std::max<std::size_t>(plain, 2)) FAIL("count " << c << " got worse");
        }
        SUCCEED("folded term counts stay at or near the popcount");
    }
}

TEST_CASE("adder tree latency follows the 3:2 reduction depth") {
    REQUIRE(adder_tree_cycles(4096, 32) == 689);
    REQUIRE(adder_tree_cycles(2, 8) == 130);
    REQUIRE(adder_tree_cycles(1, 8) == 104);   // no reduction stages, carry propagation only
    REQUIRE(adder_tree_cycles(0, 32) == 0);
    REQUIRE(adder_tree_cycles(3, 0) == 39);    // three stages to fold 3 -> 2 -> ... -> 1
    REQUIRE(adder_tree_cycles(2, 8, 1) == 10); // stage cost scales linearly

    SECTION("latency is monotone in the term count") {
        std::uint64_t prev = 0;
        for (std::uint64_t k = 1; k <= 5000; ++k) {
            std::uint64_t c = adder_tree_cycles(k, 32);
            if (c < prev) FAIL("latency dropped between " << k - 1 << " and " << k);
            prev = c;
        }
        SUCCEED("latency never decreases");
    }
    SECTION("stage count is the smallest s with 1.5^s covering k") {
        for (std::uint64_t k : {2ull, 5ull, 100ull, 4096ull, 1000000ull}) {
            std::uint64_t cycles = adder_tree_cycles(k, 0, 13);
            unsigned s = static_cast<unsigned>(cycles / 13);
            REQUIRE(std::pow(1.5, s) >= static_cast<double>(k));
            REQUIRE(std::pow(1.5, s - 1) < static_cast<double>(k));
        }
    }
}

TEST_CASE("counting phase lasts as long as the fullest weight buffer") {
    SECTION("a balanced spread hits the parallelism bound") {
        CountVector cv;
        cv.reset(64, 4);
        for (std::size_t a = 0; a < 64; ++a)
            for (std::size_t b = 0; b < 4; ++b)
                for (int i = 0; i < 4; ++i) cv.add(a, b);
        REQUIRE(cv.fan_in() == 1024);
        CountingSchedule s = counting_schedule(cv);
        REQUIRE(s.cycles == 16);  // 1024 edges over 64 buffers
        REQUIRE_FALSE(s.counter_saturated);
    }
    SECTION("everything on one weight serializes fully") {
        CountVector cv;
        cv.reset(64, 4);
        for (int i = 0; i < 300; ++i) cv.add(0, i % 4);
        REQUIRE(counting_schedule(cv).cycles == 300);
    }
    SECTION("no edges, no cycles") {
        CountVector cv;
        cv.reset(8, 8);
        REQUIRE(counting_schedule(cv).cycles == 0);
    }
    SECTION("cycles sit between the parallel and serial bounds") {
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<std::size_t> wpick(0, 15), upick(0, 7);
        for (int trial = 0; trial < 50; ++trial) {
            CountVector cv;
            cv.reset(16, 8);
            std::size_t fan = 1 + (rng() % 900);
            for (std::size_t i = 0; i < fan; ++i) cv.add(wpick(rng), upick(rng));
            std::uint64_t cycles = counting_schedule(cv).cycles;
            REQUIRE(cycles >= (fan + 15) / 16);
            REQUIRE(cycles <= fan);
        }
    }
    SECTION("a cell past the counter width flags saturation") {
        CountVector cv;
        cv.reset(2, 2);
        for (int i = 0; i < 4095; ++i) cv.add(0, 0);
        REQUIRE_FALSE(counting_schedule(cv, 12).counter_saturated);
        cv.add(0, 0);
        REQUIRE(counting_schedule(cv, 12).counter_saturated);
        REQUIRE(counting_schedule(cv, 13).counter_saturated == false);
        CountVector tiny;
        tiny.reset(1, 1);
        for (int i = 0; i < 16; ++i) tiny.add(0, 0);
        REQUIRE(counting_schedule(tiny, 4).counter_saturated);
    }
}

TEST_CASE("nearest-distance search") {
    std::mt19937_64 rng(41);

    SECTION("an exact match wins in both modes") {
        std::vector<std::uint32_t> rows{5, 99, 200, 17};
        REQUIRE(ndcam_search(200, rows, 8, CamMode::oracle) == 2);
        REQUIRE(ndcam_search(200, rows, 8, CamMode::staged) == 2);
        REQUIRE(ndcam_search(200, rows, 16, CamMode::staged) == 2);
    }
    SECTION("distance ties resolve to the lowest row") {
        std::vector<std::uint32_t> rows{10, 14};
        REQUIRE(ndcam_search(12, rows, 8, CamMode::oracle) == 0);
        REQUIRE(ndcam_search(12, rows, 8, CamMode::staged) == 0);
    }
    SECTION("a single 8-bit stage is exactly the oracle") {
        std::uniform_int_distribution<std::uint32_t> byte(0, 255);
        for (int table = 0; table < 30; ++table) {
            std::vector<std::uint32_t> rows(64);
            for (auto& r : rows) r = byte(rng);
            for (int q = 0; q < 256; ++q)
                if (ndcam_search(q, rows, 8, CamMode::staged) !=
                    ndcam_search(q, rows, 8, CamMode::oracle))
                    FAIL("table " << table << " query " << q);
        }
        SUCCEED("staged and oracle agree on every single-stage search");
    }
    SECTION("multi-stage winnowing can leave the globally nearest row") {
        // The high byte of 255 is as close to 256's as 512's, but the low
        // bytes then favour 512 even though it is 256x further away.  The
        // staged pipeline trades this corner for constant-time search.
        std::vector<std::uint32_t> rows{255, 512};
        REQUIRE(ndcam_search(256, rows, 16, CamMode::oracle) == 0);
        REQUIRE(ndcam_search(256, rows, 16, CamMode::staged) == 1);
    }
    SECTION("malformed searches are rejected") {
        std::vector<std::uint32_t> rows{1, 2};
        REQUIRE_THROWS_AS(ndcam_search(0, {}, 8, CamMode::oracle), std::invalid_argument);
        REQUIRE_THROWS_AS(ndcam_search(256, rows, 8, CamMode::oracle), std::invalid_argument);
        REQUIRE_THROWS_AS(ndcam_search(0, {1, 300}, 8, CamMode::staged), std::invalid_argument);
        REQUIRE_THROWS_AS(ndcam_search(0, rows, 12, CamMode::staged), std::invalid_argument);
        REQUIRE_THROWS_AS(ndcam_search(0, rows, 8, CamMode::staged, 0), std::invalid_argument);
    }
}

TEST_CASE("pooling block costs") {
    RnaCostModel cost;
    SECTION("associative and comparator variants") {
        PoolingCost am = pooling_cost(16, cost);
        REQUIRE(am.area_um2 == 24.0);
        REQUIRE(am.latency_ns == 0.5);
        REQUIRE(am.energy_fj == 920.0);
        PoolingCost cm = pooling_cost(16, cost, true);
        REQUIRE(cm.area_um2 == 374.0);
        REQUIRE(cm.latency_ns == 1.2);
        REQUIRE(cm.energy_fj == 378.0);
    }
    SECTION("trivial windows cost nothing") {
        PoolingCost c = pooling_cost(1, cost);
        REQUIRE(c.area_um2 == 0.0);
        REQUIRE(c.latency_ns == 0.0);
        REQUIRE(c.energy_fj == 0.0);
    }
    SECTION("windows must fit one search block") {
        REQUIRE_THROWS_AS(pooling_cost(0, cost), std::invalid_argument);
        REQUIRE_THROWS_AS(pooling_cost(65, cost), std::invalid_argument);
        REQUIRE_NOTHROW(pooling_cost(64, cost));
    }
}

TEST_CASE("cost model composition") {
    RnaCostModel cost;
    SECTION("per-block sums reproduce the published design point") {
        REQUIRE(cost.rna_area_um2() == 3841.0);  // exact, not approximate
        REQUIRE(cost.rna_power_mw() == Approx(4.8));
        REQUIRE(cost.tile_area_um2() == Approx(3878600.0));
        REQUIRE(cost.chip_area_mm2() == Approx(124.1).epsilon(0.001));
        REQUIRE(cost.chip_area_mm2() == Approx(124.1152).epsilon(1e-12));
        REQUIRE(cost.chip_power_w() == Approx(153.6896));
        REQUIRE(cost.quoted_chip_power_w == 310.4);
        REQUIRE(cost.chip_rnas() == 32000);
        REQUIRE(cost.clock_period_ns() == 1.0);
    }
    SECTION("validation rejects broken tables") {
        RnaCostModel bad = cost;
        bad.clock_ghz = 0.0;
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = cost;
        bad.tile_rnas = 0;
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = cost;
        bad.counter_width_bits = 0;
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = cost;
        bad.cam_stage_bits = 40;
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    }
    SECTION("override files adjust single entries") {
        auto path = temp_file("rapidnn_cost_override.txt");
        {
            std::ofstream out(path);
            out << "# half-speed core, narrow counters\n";
            out << "clock_ghz = 0.5\n";
            out << "counter.width_bits = 8\n";
            out << "pool.ndcam.energy_fj = 1000\n";
        }
        RnaCostModel loaded = load_cost_model(path.string());
        REQUIRE(loaded.clock_ghz == 0.5);
        REQUIRE(loaded.clock_period_ns() == 2.0);
        REQUIRE(loaded.counter_width_bits == 8);
        REQUIRE(loaded.pool_ndcam_energy_fj == 1000.0);
        REQUIRE(loaded.crossbar.area_um2 == 3136.0);  // untouched entries keep defaults
        std::filesystem::remove(path);
    }
    SECTION("unknown keys and malformed lines are rejected with locations") {
        auto path = temp_file("rapidnn_cost_bad.txt");
        {
            std::ofstream out(path);
            out << "clock_ghz = 1.0\n";
            out << "warp.coils = 9\n";
        }
        REQUIRE_THROWS_WITH(load_cost_model(path.string()),
                            Catch::Matchers::ContainsSubstring("warp.coils") &&
                                Catch::Matchers::ContainsSubstring(":2"));
        {
            std::ofstream out(path);
            out << "clock_ghz\n";
        }
        REQUIRE_THROWS_WITH(load_cost_model(path.string()),
                            Catch::Matchers::ContainsSubstring("key = value"));
        std::filesystem::remove(path);
        REQUIRE_THROWS_AS(load_cost_model(path.string()), std::runtime_error);
    }
}

TEST_CASE("whole-model simulation") {
    ReinterpretedModel rm = toy_model();
    Tensor batch = toy_batch();
    RnaCostModel cost;

    SECTION("functional outputs are the encoded execution's, bit for bit") {
        SimResult res = simulate(rm, batch, cost);
        Tensor direct = lut_forward(rm, batch);
        REQUIRE(res.scores.shape == direct.shape);
        REQUIRE(res.scores.data == direct.data);
    }
    SECTION("cycle totals recompute from the public scheduling primitives") {
        CountCapture cap;
        lut_forward(rm, batch, &cap);
        std::uint64_t expect = 0;
        for (const CountVector& cv : cap.all) {
            std::uint64_t k_terms = 0;
            for (std::uint32_t c : cv.counts)
                if (c) k_terms += shift_term_count(c);
            expect += counting_schedule(cv).cycles +
                      adder_tree_cycles(k_terms, rm.fixed.total_bits);
        }
        SimResult res = simulate(rm, batch, cost);
        REQUIRE(res.report.total_cycles == expect);
        REQUIRE(expect > 0);
    }
    SECTION("report bookkeeping holds together") {
        SimResult res = simulate(rm, batch, cost);
        const SimReport& r = res.report;
        REQUIRE(r.samples == 4);
        REQUIRE(r.rnas_used == 4);     // two neurons per weighted layer
        REQUIRE(r.tiles_used == 1);
        REQUIRE(r.sharing_factor == 1);
        REQUIRE(r.area_mm2 == cost.chip_area_mm2());
        REQUIRE(r.memory_bytes == rm_memory_bytes(rm));
        REQUIRE(r.counter_saturations == 0);
        REQUIRE(r.saturated_sums == 0);
        REQUIRE(r.layers.size() == rm.layers.size());

        // The virtual encoding stage is one parallel search.
        REQUIRE(r.layers[0].label == "input encode");
        REQUIRE(r.layers[0].stage_ns == cost.cam_search_ns);
        REQUIRE(r.layers[0].searches == 1);
        // Hidden layer: activation search plus encoding search.
        REQUIRE(r.layers[1].searches == 2);
        // Head layer: exact output activation, nothing to search.
        REQUIRE(r.layers[2].searches == 0);

        double sum = 0.0, mx = 0.0;
        for (const LayerTiming& t : r.layers) {
            sum += t.stage_ns;
            mx = std::max(mx, t.stage_ns);
        }
        REQUIRE(r.sample_latency_s == Approx(sum * 1e-9));
        REQUIRE(r.wall_time_s == Approx((sum + 3 * mx) * 1e-9));
        REQUIRE(r.throughput_samples_s == Approx(1e9 / mx));
        // MACs count double: 2*(2*2) per fc layer.
        REQUIRE(r.ops_per_sample == 16);
        REQUIRE(r.throughput_gops == Approx(16.0 * r.throughput_samples_s / 1e9));

        REQUIRE(r.total_energy_j ==
                r.energy_accumulation_j + r.energy_activation_j +
                    r.energy_encoding_pooling_j + r.energy_other_j);
        REQUIRE(r.edp_js == Approx(r.total_energy_j * r.wall_time_s));
        REQUIRE(r.energy_accumulation_j > 0.0);
        REQUIRE(r.energy_activation_j > 0.0);
        REQUIRE(r.energy_encoding_pooling_j > 0.0);
        REQUIRE(r.energy_other_j > 0.0);
    }
    SECTION("accumulation stages respect the fan-in bound") {
        SimResult res = simulate(rm, batch, cost);
        // Both fc layers have fan-in 2, so counting can never exceed it.
        REQUIRE(res.report.layers[1].worst_count_cycles <= 2);
        REQUIRE(res.report.layers[1].worst_count_cycles >= 1);
        REQUIRE(res.report.layers[2].worst_count_cycles <= 2);
    }
    SECTION("oversubscribed chips reject unless sharing is enabled") {
        RnaCostModel small = cost;
        small.tile_rnas = 1;
        small.chip_tiles = 2;  // room for 2 of the 4 needed blocks
        REQUIRE_THROWS_AS(simulate(rm, batch, small), std::runtime_error);

        SimOptions opt;
        opt.allow_sharing = true;
        SimResult shared = simulate(rm, batch, small, opt);
        REQUIRE(shared.report.sharing_factor == 2);
        REQUIRE(shared.report.tiles_used == 2);
        Tensor direct = lut_forward(rm, batch);
        REQUIRE(shared.scores.data == direct.data);  // sharing is a timing concern only
        SimResult free = simulate(rm, batch, cost);
        REQUIRE(shared.report.wall_time_s > free.report.wall_time_s);
        REQUIRE(shared.report.energy_accumulation_j ==
                Approx(free.report.energy_accumulation_j));
    }
    SECTION("a slower clock stretches time but not switching energy") {
        RnaCostModel slow = cost;
        slow.clock_ghz = 0.5;
        SimResult fast = simulate(rm, batch, cost);
        SimResult half = simulate(rm, batch, slow);
        REQUIRE(half.report.total_cycles == fast.report.total_cycles);
        REQUIRE(half.report.wall_time_s > fast.report.wall_time_s);
        REQUIRE(half.report.energy_accumulation_j ==
                Approx(2.0 * fast.report.energy_accumulation_j));
    }
    SECTION("empty workloads are rejected") {
        Tensor none({0, 2});
        REQUIRE_THROWS_AS(simulate(rm, none, cost), std::invalid_argument);
    }
}

TEST_CASE("simulation of comparison pooling") {
    Tensor batch;
    ReinterpretedModel rm = pooled_model(batch);
    RnaCostModel cost;

    SimResult res = simulate(rm, batch, cost);
    const SimReport& r = res.report;
    // Layers: input encode, conv, max pool, fc head.
    REQUIRE(r.layers.size() == 4);
    REQUIRE(r.layers[2].label == "pool max 2x2");
    REQUIRE(r.layers[2].stage_ns == cost.pool_ndcam_latency_ns);
    REQUIRE(r.layers[2].worst_count_cycles == 0);

    SECTION("pooling energy lands in the encoding/pooling bucket") {
        // 6 samples x 8 windows at 920 fJ, on top of the encoder searches.
        RnaCostModel cheap = cost;
        cheap.pool_ndcam_energy_fj = 0.0;
        SimResult nopool = simulate(rm, batch, cheap);
        double delta =
            r.energy_encoding_pooling_j - nopool.report.energy_encoding_pooling_j;
        REQUIRE(delta == Approx(6.0 * 8.0 * 920.0 * 1e-15));
    }
    SECTION("comparator pooling swaps the block characteristics") {
        SimOptions opt;
        opt.cmos_pooling = true;
        SimResult cm = simulate(rm, batch, cost, opt);
        REQUIRE(cm.report.layers[2].stage_ns == cost.pool_cmos_latency_ns);
        REQUIRE(cm.scores.data == res.scores.data);
    }
    SECTION("pooling ops count comparisons, accumulation ops count MACs twice") {
        // conv: 2 * 3x3x1 * (4x4x2); pool: 8 windows x 3 comparisons;
        // fc: 2 * 8 * 3.
        REQUIRE(r.ops_per_sample == 2 * 9 * 32 + 8 * 3 + 2 * 8 * 3);
    }
}
