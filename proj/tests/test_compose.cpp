#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rapidnn/compose.hpp"

using namespace rapidnn;
using Catch::Approx;

namespace {

// Two noisy 2-D blobs, linearly separable, split for composing experiments.
Dataset blob_dataset(std::size_t n, std::uint64_t seed) {
    Dataset d;
    d.samples = Tensor({n, 2});
    d.labels.resize(n);
    d.split.assign(n, Split::train);
    d.num_classes = 2;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.35);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cls = i % 2;
        double cx = cls == 0 ? -1.0 : 1.0;
        d.samples.data[i * 2] = cx + g(rng);
        d.samples.data[i * 2 + 1] = -cx + g(rng);
        d.labels[i] = cls;
    }
    d.carve_validation(0.25, seed);
    return d;
}

// The binary input grid twice over, labels picked by the first coordinate:
// train and validation see the same four points, so a lossless table model
// must reproduce the baseline exactly.
Dataset grid_dataset() {
    Dataset d;
    d.samples = Tensor({8, 2});
    d.samples.data = {0, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 1};
    d.labels = {0, 0, 1, 1, 0, 0, 1, 1};
    d.split.assign(8, Split::train);
    for (std::size_t i = 4; i < 8; ++i) d.split[i] = Split::validation;
    d.num_classes = 2;
    return d;
}

}  // namespace

TEST_CASE("weight clustering recovers exact value groups") {
    SECTION("four distinct weights with w=4 are lossless") {
        Network net = parse_topology("in:4 fc:2:none");
        net.weights[1].data = {0.1, 0.1, 0.7, 0.7, -0.5, -0.5, 0.0, 0.0};
        std::vector<Codebook> books = cluster_weights(net, 1, 4, 17);
        REQUIRE(books.size() == 1);
        REQUIRE(books[0].centroids == std::vector<double>{-0.5, 0.0, 0.1, 0.7});
    }
    SECTION("convolution channels are clustered independently") {
        Network net = parse_topology("in:4x4x2 conv:2:3:none");
        init_weights(net, 1);
        // Channel 0 uses two values, channel 1 four; 3x3x2 = 18 weights each.
        for (std::size_t j = 0; j < 18; ++j) {
            net.weights[1].data[j] = j % 2 ? 0.25 : -0.25;
            double vals[4] = {-2.0, -1.0, 1.0, 2.0};
            net.weights[1].data[18 + j] = vals[j % 4];
        }
        std::vector<Codebook> books = cluster_weights(net, 1, 4, 17);
        REQUIRE(books.size() == 2);
        REQUIRE(books[0].centroids == std::vector<double>{-0.25, 0.25});
        REQUIRE(books[1].centroids == std::vector<double>{-2.0, -1.0, 1.0, 2.0});
    }
    SECTION("clustering cannot beat the optimal split") {
        Network net = parse_topology("in:8 fc:2:none");
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(0.0, 1.0);
        for (double& w : net.weights[1].data) w = g(rng);
        Codebook cb = cluster_weights(net, 1, 4, 5)[0];
        double sse = 0.0;
        for (double w : net.weights[1].data) {
            double d = w - cb.snap(w);
            sse += d * d;
        }
        REQUIRE(sse >= 0.0);
        REQUIRE(std::isfinite(sse));
        // Deeper levels of the same tree never lose precision.
        Codebook fine = cluster_weights(net, 1, 8, 5)[0];
        double sse8 = 0.0;
        for (double w : net.weights[1].data) {
            double d = w - fine.snap(w);
            sse8 += d * d;
        }
        REQUIRE(sse8 <= sse + 1e-12);
    }
    SECTION("layers without weights are rejected") {
        Network net = parse_topology("in:4x4x1 pool:2:max");
        REQUIRE_THROWS_AS(cluster_weights(net, 0, 4, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(cluster_weights(net, 1, 4, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(cluster_weights(net, 9, 4, 1), std::out_of_range);
        Network fc = parse_topology("in:4 fc:2:none");
        REQUIRE_THROWS_AS(cluster_weights(fc, 1, 3, 1), std::invalid_argument);
    }
}

TEST_CASE("activation sampling observes every layer") {
    Network net = parse_topology("in:2 fc:3:sigmoid fc:2:softmax");
    init_weights(net, 21);
    Dataset data = grid_dataset();

    LayerSamples s = sample_activations(net, data, 1.0, 9);
    REQUIRE(s.sample_count == 4);  // the train split has four samples
    REQUIRE(s.inputs[1] == std::vector<double>{0, 0, 0, 1, 1, 0, 1, 1});
    REQUIRE(s.inputs[2].size() == 4 * 3);
    REQUIRE(s.preacts[1].size() == 4 * 3);
    REQUIRE(s.preacts[2].size() == 4 * 2);

    // The recorded layer-2 inputs are the layer-1 outputs of a plain forward
    // pass over the same samples.
    Tensor x({4, 2});
    x.data = {0, 0, 0, 1, 1, 0, 1, 1};
    ForwardTrace tr = forward(net, x);
    REQUIRE(s.inputs[2] == tr.outputs[1].data);
    REQUIRE(s.preacts[1] == tr.preacts[1].data);

    SECTION("subsampling is seeded and deterministic") {
        Dataset big = blob_dataset(200, 4);
        LayerSamples a = sample_activations(net, big, 0.25, 42);
        LayerSamples b = sample_activations(net, big, 0.25, 42);
        REQUIRE(a.inputs[1] == b.inputs[1]);
        REQUIRE(a.preacts[2] == b.preacts[2]);
        REQUIRE(a.sample_count == 38);  // quarter of the 150-sample train split
        LayerSamples c = sample_activations(net, big, 0.25, 43);
        REQUIRE(a.inputs[1] != c.inputs[1]);
    }
    SECTION("fraction bounds are enforced") {
        REQUIRE_THROWS_AS(sample_activations(net, data, 0.0, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(sample_activations(net, data, 1.5, 1), std::invalid_argument);
    }
}

TEST_CASE("reinterpreted model structure") {
    Network net = parse_topology("in:4 fc:8:sigmoid fc:3:softmax");
    init_weights(net, 31);
    Dataset d;
    d.samples = Tensor({60, 4});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : d.samples.data) v = u(rng);
    d.labels.resize(60);
    for (std::size_t i = 0; i < 60; ++i) d.labels[i] = i % 3;
    d.split.assign(60, Split::train);
    d.num_classes = 3;

    ComposeConfig cfg;
    cfg.w = 8;
    cfg.u = 4;
    cfg.q = 16;
    LayerSamples s = sample_activations(net, d, 1.0, 7);
    ReinterpretedModel rm = build_reinterpreted(net, s, cfg);
    rm.validate();

    REQUIRE(rm.layers.size() == 3);
    REQUIRE(rm.layers[0].kind == LayerKind::input);
    REQUIRE(rm.layers[0].enc_owner == 1);  // raw input encodes into layer 1's book

    const RmLayer& h = rm.layers[1];
    REQUIRE(h.owns_codebook());
    REQUIRE(h.weight_codebooks.size() == 1);
    REQUIRE(h.weight_codebooks[0].size() <= 8);
    REQUIRE(h.input_codebook.size() <= 4);
    REQUIRE(h.weight_codes.size() == 8 * 4);
    REQUIRE(h.has_lut);
    REQUIRE(h.lut.rows() <= 16);
    REQUIRE(h.enc_owner == 2);  // hidden outputs encode into the next layer's book

    const RmLayer& out = rm.layers[2];
    REQUIRE_FALSE(out.has_lut);          // the classifier head stays full precision
    REQUIRE(out.enc_owner == npos);      // nothing downstream to encode for

    SECTION("product tables hold the exact centroid products") {
        const Tensor& t = h.product_tables[0];
        REQUIRE(t.shape_equals({h.weight_codebooks[0].size(), h.input_codebook.size()}));
        for (std::size_t a = 0; a < t.shape[0]; ++a)
            for (std::size_t b = 0; b < t.shape[1]; ++b)
                REQUIRE(t.data[a * t.shape[1] + b] ==
                        h.weight_codebooks[0].centroids[a] * h.input_codebook.centroids[b]);
    }
    SECTION("weight codes decode to the nearest centroid of each weight") {
        for (std::size_t j = 0; j < h.weight_codes.size(); ++j) {
            double orig = net.weights[1].data[j];
            REQUIRE(h.weight_codebooks[0].centroids[h.weight_codes[j]] ==
                    h.weight_codebooks[0].snap(orig));
        }
    }
    SECTION("snapped copy holds the decoded weights") {
        Network snapped = snap_network_weights(net, rm);
        snapped.validate();
        for (std::size_t j = 0; j < snapped.weights[1].size(); ++j)
            REQUIRE(snapped.weights[1].data[j] == h.weight_codebooks[0].snap(net.weights[1].data[j]));
        REQUIRE(snapped.biases[1].data == net.biases[1].data);
    }
    SECTION("memory accounting matches the published structure sizes") {
        std::size_t expected = 0;
        for (const RmLayer& l : rm.layers) {
            for (const Tensor& t : l.product_tables) expected += t.size() * 4;
            for (const Codebook& cb : l.weight_codebooks) expected += cb.size() * 4;
            if (l.owns_codebook()) expected += l.input_codebook.size() * 4;
            if (l.has_lut && !l.lut.exact_relu) expected += l.lut.rows() * 8;
        }
        REQUIRE(rm_memory_bytes(rm) == expected);
        REQUIRE(expected > 0);
    }
    SECTION("relu comparator flag suppresses the activation table") {
        Network rnet = parse_topology("in:4 fc:8:relu fc:3:softmax");
        init_weights(rnet, 31);
        ComposeConfig rcfg = cfg;
        rcfg.use_relu_comparator = true;
        LayerSamples rs = sample_activations(rnet, d, 1.0, 7);
        ReinterpretedModel rrm = build_reinterpreted(rnet, rs, rcfg);
        REQUIRE(rrm.layers[1].has_lut);
        REQUIRE(rrm.layers[1].lut.exact_relu);
        rcfg.use_relu_comparator = false;
        ReinterpretedModel lrm = build_reinterpreted(rnet, rs, rcfg);
        REQUIRE_FALSE(lrm.layers[1].lut.exact_relu);
        REQUIRE(lrm.layers[1].lut.rows() >= 2);
    }
}

TEST_CASE("encoding chain through convolution and pooling") {
    Dataset d;
    d.samples = Tensor({20, 6, 6, 1});
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : d.samples.data) v = u(rng);
    d.labels.assign(20, 0);
    d.split.assign(20, Split::train);
    d.num_classes = 3;

    ComposeConfig cfg;
    cfg.w = 4;
    cfg.u = 4;
    cfg.q = 8;

    SECTION("max pooling is transparent: the producer encodes past it") {
        Network net = parse_topology("in:6x6x1 conv:2:3:relu pool:2:max fc:3:softmax");
        init_weights(net, 8);
        ReinterpretedModel rm =
            build_reinterpreted(net, sample_activations(net, d, 1.0, 3), cfg);
        REQUIRE(rm.layers[1].kind == LayerKind::convolution);
        REQUIRE(rm.layers[1].weight_codebooks.size() == 2);  // one per output channel
        REQUIRE(rm.layers[1].enc_owner == 3);                // skips the pooling layer
        REQUIRE_FALSE(rm.layers[2].owns_codebook());
        REQUIRE(rm.layers[2].enc_owner == 3);
        REQUIRE(rm.layers[3].enc_owner == npos);
    }
    SECTION("average pooling owns a codebook and a normalized table") {
        Network net = parse_topology("in:6x6x1 pool:2:avg fc:3:softmax");
        init_weights(net, 8);
        ReinterpretedModel rm =
            build_reinterpreted(net, sample_activations(net, d, 1.0, 3), cfg);
        const RmLayer& pool = rm.layers[1];
        REQUIRE(pool.owns_codebook());
        REQUIRE(rm.layers[0].enc_owner == 1);
        REQUIRE(pool.weight_codebooks.size() == 1);
        REQUIRE(pool.weight_codebooks[0].centroids == std::vector<double>{0.25});
        const Tensor& t = pool.product_tables[0];
        for (std::size_t b = 0; b < t.shape[1]; ++b)
            REQUIRE(t.data[b] == 0.25 * pool.input_codebook.centroids[b]);
        REQUIRE(pool.enc_owner == 2);
    }
    SECTION("a network with no computational layer is rejected") {
        Network net = parse_topology("in:6x6x1 pool:2:max");
        REQUIRE_THROWS_AS(build_reinterpreted(net, sample_activations(net, d, 1.0, 3), cfg),
                          std::invalid_argument);
    }
}

TEST_CASE("snapped forward is exact when every value is representable") {
    // Weights use at most four distinct values per layer and the binary input
    // grid only ever produces five distinct hidden activations, so codebooks
    // of size 8 capture everything and the table model loses nothing.
    Network net = parse_topology("in:2 fc:2:relu fc:2:softmax");
    net.weights[1].data = {0.5, 1.0, -0.5, 0.25};
    net.weights[2].data = {1.0, -1.0, 0.5, 0.0};
    Dataset data = grid_dataset();

    ComposeConfig cfg;
    cfg.w = 4;
    cfg.u = 8;
    cfg.q = 16;
    cfg.sample_fraction = 1.0;

    LayerSamples s = sample_activations(net, data, 1.0, 1);
    ReinterpretedModel rm = build_reinterpreted(net, s, cfg);

    Tensor all({4, 2});
    all.data = {0, 0, 0, 1, 1, 0, 1, 1};
    Tensor expect = forward(net, all).scores();

    FloatForwardOptions opt;
    SECTION("with the exact activation") {
        REQUIRE(rm_float_forward(rm, all, opt).data == expect.data);
    }
    SECTION("with the table activation") {
        opt.lut_activation = true;
        REQUIRE(rm_float_forward(rm, all, opt).data == expect.data);
    }
    SECTION("error estimate equals the baseline error") {
        double base = evaluate(net, data, Split::validation);
        REQUIRE(rm_estimate_error(rm, data, Split::validation) == base);
    }
    SECTION("the compose loop converges immediately at zero loss") {
        ComposeConfig loop = cfg;
        loop.max_iters = 5;
        loop.epsilon = 0.0;
        auto [model, report] = reinterpret(net, data, loop);
        REQUIRE(report.iterations == 1);
        REQUIRE(report.converged);
        REQUIRE(report.delta_e == std::vector<double>{0.0});
        REQUIRE(report.best_iteration == 1);
        REQUIRE(report.memory_bytes == rm_memory_bytes(model));
    }
}

TEST_CASE("compose loop on a trained classifier") {
    Dataset data = blob_dataset(400, 6);
    Network net = parse_topology("in:2 fc:8:sigmoid fc:2:softmax");
    init_weights(net, 13);
    TrainConfig tc;
    tc.epochs = 30;
    tc.learning_rate = 0.2;
    tc.seed = 13;
    net = train(net, data, tc);
    double base = evaluate(net, data, Split::validation);
    REQUIRE(base < 0.1);  // the blobs are nearly separable

    ComposeConfig cfg;
    cfg.w = 16;
    cfg.u = 16;
    cfg.q = 32;
    cfg.sample_fraction = 1.0;
    cfg.max_iters = 3;
    cfg.retrain_epochs = 2;
    cfg.seed = 5;

    auto [rm, report] = reinterpret(net, data, cfg);
    REQUIRE(report.e_baseline == base);
    REQUIRE(report.iterations >= 1);
    REQUIRE(report.iterations <= 3);
    REQUIRE(report.e_clustered.size() == report.iterations);
    REQUIRE(report.delta_e.size() == report.iterations);
    for (std::size_t i = 0; i < report.iterations; ++i)
        REQUIRE(report.delta_e[i] == report.e_clustered[i] - base);
    REQUIRE(report.best_iteration >= 1);
    REQUIRE(report.best_delta_e() ==
            report.delta_e[report.best_iteration - 1]);
    bool any_hit = false;
    for (double de : report.delta_e) any_hit = any_hit || de <= cfg.epsilon;
    REQUIRE(report.converged == any_hit);
    rm.validate();

    SECTION("runs are deterministic") {
        auto [rm2, report2] = reinterpret(net, data, cfg);
        REQUIRE(report2.delta_e == report.delta_e);
        REQUIRE(report2.best_iteration == report.best_iteration);
        REQUIRE(rm2.layers[1].input_codebook.centroids ==
                rm.layers[1].input_codebook.centroids);
        REQUIRE(rm2.layers[1].weight_codes == rm.layers[1].weight_codes);
    }
    SECTION("a generous tolerance converges in one iteration") {
        ComposeConfig lax = cfg;
        lax.epsilon = 1.0;
        auto [rm2, report2] = reinterpret(net, data, lax);
        REQUIRE(report2.iterations == 1);
        REQUIRE(report2.converged);
    }
    SECTION("an unreachable tolerance uses the whole budget") {
        ComposeConfig strict = cfg;
        strict.epsilon = -2.0;  // delta can never go below -1
        auto [rm2, report2] = reinterpret(net, data, strict);
        REQUIRE(report2.iterations == strict.max_iters);
        REQUIRE_FALSE(report2.converged);
    }
    SECTION("a validation split is required") {
        Dataset no_val = data;
        no_val.split.assign(no_val.count(), Split::train);
        REQUIRE_THROWS_AS(reinterpret(net, no_val, cfg), std::invalid_argument);
    }
    SECTION("invalid table sizes are rejected") {
        ComposeConfig bad = cfg;
        bad.u = 12;
        REQUIRE_THROWS_AS(reinterpret(net, data, bad), std::invalid_argument);
    }
}
