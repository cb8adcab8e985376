#pragma once

// Experiment configuration: one structured-text file with explicit dotted
// keys (dataset.path, compose.w, cost.clock_ghz, ...) so a run is fully
// described by the file plus the seed list — no environment lookups.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "rapidnn/compose.hpp"
#include "rapidnn/kv_file.hpp"
#include "rapidnn/rna_sim.hpp"
#include "rapidnn/train.hpp"

namespace rapidnn {

struct ExperimentConfig {
    std::string dataset_path = "synth-digits";  // file path or synth-digits | synth-patches
    std::string dataset_test_path;              // optional held-out file for idx/csv sources
    std::string dataset_format = "synth";       // synth | idx | csv
    std::size_t synth_train = 10000;
    std::size_t synth_test = 2000;
    double validation_fraction = 0.1;  // carved from train when the source has none
    std::uint64_t data_seed = 1;

    std::string topology = "in:64 fc:32:relu fc:10:softmax";
    TrainConfig train;
    ComposeConfig compose;
    RnaCostModel cost;
    SimOptions sim;
    std::size_t sim_samples = 0;  // cap on simulated inputs; 0 means the whole split

    std::vector<std::size_t> sweep_w{4, 16, 64};
    std::vector<std::size_t> sweep_u{4, 16, 64};
    std::vector<std::size_t> sweep_q{64};
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "runs/exp";
    std::size_t workers = 1;  // grid points in flight at once

    void validate() const {
        if (dataset_format != "synth" && dataset_format != "idx" && dataset_format != "csv")
            throw std::invalid_argument("dataset.format must be synth, idx, or csv");
        // Paths must resolve up front; "a,b" names an image/label file pair.
        auto check_path = [](const std::string& p) {
            std::size_t start = 0;
            while (start <= p.size()) {
                std::size_t comma = p.find(',', start);
                std::string part =
                    p.substr(start, comma == std::string::npos ? comma : comma - start);
                if (!std::filesystem::exists(part))
                    throw std::invalid_argument("dataset path does not exist: " + part);
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        };
        if (dataset_format == "synth") {
            if (dataset_path != "synth-digits" && dataset_path != "synth-patches")
                throw std::invalid_argument("unknown synthetic task: " + dataset_path);
        } else {
            check_path(dataset_path);
            if (!dataset_test_path.empty()) check_path(dataset_test_path);
        }
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
            throw std::invalid_argument("dataset.validation must be in [0,1)");
        if (topology.empty()) throw std::invalid_argument("topology must be set");
        train.validate();
        compose.validate();
        cost.validate();
        auto check_grid = [](const std::vector<std::size_t>& g, const char* name) {
            if (g.empty()) throw std::invalid_argument(std::string("sweep.") + name + " is empty");
            for (std::size_t v : g)
                if (!ComposeConfig::power_of_two(v) || v > 65536)
                    throw std::invalid_argument(std::string("sweep.") + name + " value " +
                                                std::to_string(v) +
                                                " is not a power of two the codes can index");
        };
        check_grid(sweep_w, "w");
        check_grid(sweep_u, "u");
        check_grid(sweep_q, "q");
        if (seeds.empty()) throw std::invalid_argument("seeds must list at least one seed");
        if (out_dir.empty()) throw std::invalid_argument("out must name a directory");
        if (workers == 0) throw std::invalid_argument("workers must be at least 1");
    }
};

namespace detail {

inline std::vector<std::size_t> kv_size_list(const KvEntry& e) {
    std::istringstream ss(e.value);
    std::vector<std::size_t> out;
    long long v;
    while (ss >> v) {
        if (v < 0) throw std::invalid_argument("negative value in list '" + e.key + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (!ss.eof() || out.empty())
        throw std::invalid_argument("value of '" + e.key + "' is not a number list: '" +
                                    e.value + "'");
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& path) {
    ExperimentConfig cfg;
    for (const KvEntry& e : read_kv_file(path)) {
        const std::string& k = e.key;
        if (k == "dataset.path") cfg.dataset_path = e.value;
        else if (k == "dataset.test_path") cfg.dataset_test_path = e.value;
        else if (k == "dataset.format") cfg.dataset_format = e.value;
        else if (k == "dataset.train") cfg.synth_train = kv_size(e);
        else if (k == "dataset.test") cfg.synth_test = kv_size(e);
        else if (k == "dataset.validation") cfg.validation_fraction = kv_double(e);
        else if (k == "dataset.seed") cfg.data_seed = kv_size(e);
        else if (k == "topology") cfg.topology = e.value;
        else if (k == "train.epochs") cfg.train.epochs = kv_size(e);
        else if (k == "train.lr") cfg.train.learning_rate = kv_double(e);
        else if (k == "train.momentum") cfg.train.momentum = kv_double(e);
        else if (k == "train.dropout") cfg.train.dropout_rate = kv_double(e);
        else if (k == "train.batch") cfg.train.batch_size = kv_size(e);
        else if (k == "compose.w") cfg.compose.w = kv_size(e);
        else if (k == "compose.u") cfg.compose.u = kv_size(e);
        else if (k == "compose.q") cfg.compose.q = kv_size(e);
        else if (k == "compose.epsilon") cfg.compose.epsilon = kv_double(e);
        else if (k == "compose.max_iters") cfg.compose.max_iters = kv_size(e);
        else if (k == "compose.sample_fraction") cfg.compose.sample_fraction = kv_double(e);
        else if (k == "compose.retrain_epochs") cfg.compose.retrain_epochs = kv_size(e);
        else if (k == "compose.retrain_lr") cfg.compose.retrain_lr = kv_double(e);
        else if (k == "compose.retrain_momentum") cfg.compose.retrain_momentum = kv_double(e);
        else if (k == "compose.retrain_batch") cfg.compose.retrain_batch = kv_size(e);
        else if (k == "compose.relu_comparator") cfg.compose.use_relu_comparator = kv_bool(e);
        else if (k == "compose.lut_estimator") cfg.compose.lut_in_estimator = kv_bool(e);
        else if (k == "compose.fixed_total_bits")
            cfg.compose.fixed.total_bits = static_cast<unsigned>(kv_size(e));
        else if (k == "compose.fixed_frac_bits")
            cfg.compose.fixed.frac_bits = static_cast<unsigned>(kv_size(e));
        else if (k == "sim.allow_sharing") cfg.sim.allow_sharing = kv_bool(e);
        else if (k == "sim.cmos_pooling") cfg.sim.cmos_pooling = kv_bool(e);
        else if (k == "sim.samples") cfg.sim_samples = kv_size(e);
        else if (k == "sweep.w") cfg.sweep_w = detail::kv_size_list(e);
        else if (k == "sweep.u") cfg.sweep_u = detail::kv_size_list(e);
        else if (k == "sweep.q") cfg.sweep_q = detail::kv_size_list(e);
        else if (k == "seeds") {
            cfg.seeds.clear();
            for (std::size_t s : detail::kv_size_list(e)) cfg.seeds.push_back(s);
        }
        else if (k == "out") cfg.out_dir = e.value;
        else if (k == "workers") cfg.workers = kv_size(e);
        else if (k.rfind("cost.", 0) == 0) {
            KvEntry sub = e;
            sub.key = k.substr(5);
            if (!cfg.cost.apply_override(sub))
                throw std::invalid_argument(path + ":" + std::to_string(e.line) +
                                            ": unknown cost key '" + k + "'");
        }
        else throw std::invalid_argument(path + ":" + std::to_string(e.line) +
                                         ": unknown config key '" + k + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace rapidnn
