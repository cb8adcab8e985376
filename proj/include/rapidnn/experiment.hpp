#pragma once

// End-to-end experiment driver: dataset -> baseline training -> lookup-table
// composition -> accelerator simulation -> sweep grid -> reports.  Every
// artifact lands in the configured output directory; a failure keeps what was
// already written and names the stage that broke.

#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rapidnn/config.hpp"
#include "rapidnn/model_io.hpp"
#include "rapidnn/report.hpp"
#include "rapidnn/rm_io.hpp"
#include "rapidnn/synth.hpp"

namespace rapidnn {

struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string st, const std::string& what)
        : std::runtime_error("stage " + st + ": " + what), stage(std::move(st)) {}
};

namespace detail {

template <class F>
auto run_stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Appends b's samples to a, keeping each sample's split tag.
inline void append_dataset(Dataset& a, const Dataset& b) {
    if (a.sample_dims() != b.sample_dims())
        throw std::invalid_argument("datasets have different sample shapes");
    a.samples.data.insert(a.samples.data.end(), b.samples.data.begin(), b.samples.data.end());
    a.samples.shape[0] += b.count();
    a.labels.insert(a.labels.end(), b.labels.begin(), b.labels.end());
    a.split.insert(a.split.end(), b.split.begin(), b.split.end());
    a.num_classes = std::max(a.num_classes, b.num_classes);
}

}  // namespace detail

inline Dataset open_experiment_dataset(const ExperimentConfig& cfg) {
    Dataset d;
    if (cfg.dataset_format == "synth") {
        d = cfg.dataset_path == "synth-digits"
                ? synth_digits(cfg.synth_train, cfg.synth_test, cfg.data_seed)
                : synth_patches(cfg.synth_train, cfg.synth_test, cfg.data_seed);
    } else {
        d = load_dataset(cfg.dataset_path, cfg.dataset_format, Split::train);
        if (!cfg.dataset_test_path.empty()) {
            Dataset t = load_dataset(cfg.dataset_test_path, cfg.dataset_format, Split::test);
            detail::append_dataset(d, t);
        }
    }
    if (d.count_of(Split::validation) == 0)
        d.carve_validation(cfg.validation_fraction, cfg.data_seed);
    d.validate();
    return d;
}

// The split the simulator exercises: prefer held-out test data, else the
// validation carve, else the training samples themselves.
inline Split eval_split(const Dataset& d) {
    if (d.count_of(Split::test) > 0) return Split::test;
    if (d.count_of(Split::validation) > 0) return Split::validation;
    return Split::train;
}

inline Tensor eval_batch(const Dataset& d, std::size_t cap) {
    Dataset s = d.subset(eval_split(d));
    if (cap == 0 || cap >= s.count()) return s.samples;
    std::vector<std::size_t> idx(cap);
    for (std::size_t i = 0; i < cap; ++i) idx[i] = i;
    return s.gather(idx).samples;
}

struct RunArtifacts {
    std::filesystem::path dir;
    std::filesystem::path baseline_path;
    std::filesystem::path model_path;
    std::filesystem::path compose_path;
    std::filesystem::path simulation_path;
    std::filesystem::path sweep_path;
    std::filesystem::path summary_path;
    double baseline_error = 0.0;
    ReinterpretReport compose_report;
    SimReport sim;
    std::vector<SweepRow> rows;
};

namespace detail {

inline std::string compose_report_text(const ReinterpretReport& rep) {
    std::ostringstream out;
    out << "iterations " << rep.iterations << ", best " << rep.best_iteration << ", "
        << (rep.converged ? "converged" : "not converged") << "\n";
    out << "baseline error " << g17(rep.e_baseline) << "\n";
    for (std::size_t i = 0; i < rep.e_clustered.size(); ++i)
        out << "  iteration " << i + 1 << ": error " << g17(rep.e_clustered[i]) << " (delta "
            << g17(rep.delta_e[i]) << ")\n";
    out << "model memory " << rep.memory_bytes << " B\n";
    return out.str();
}

}  // namespace detail

// One grid point of the sweep: compose at (w, u, q), simulate the evaluation
// batch, and distill the row.  Pure function of its arguments, so grid points
// can run concurrently.
inline SweepRow sweep_point(const Network& baseline, const Dataset& data, const Tensor& batch,
                            const ExperimentConfig& cfg, std::size_t w, std::size_t u,
                            std::size_t q, std::uint64_t seed) {
    ComposeConfig cc = cfg.compose;
    cc.w = w;
    cc.u = u;
    cc.q = q;
    cc.seed = seed;
    auto [rm, rep] = reinterpret(baseline, data, cc);
    SimResult sr = simulate(rm, batch, cfg.cost, cfg.sim);
    SweepRow row;
    row.w = w;
    row.u = u;
    row.q = q;
    row.seed = seed;
    row.delta_e = rep.best_delta_e();
    row.energy_j = sr.report.total_energy_j;
    row.cycles = sr.report.total_cycles;
    row.edp_js = sr.report.edp_js;
    row.memory_bytes = rep.memory_bytes;
    return row;
}

inline Network train_baseline(const ExperimentConfig& cfg, const Dataset& data,
                              std::uint64_t seed, std::ostream& log) {
    Network net = parse_topology(cfg.topology);
    init_weights(net, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    std::vector<double> losses;
    net = train(net, data, tc, &losses);
    log << "  seed " << seed << ": " << losses.size() << " epochs, final loss "
        << (losses.empty() ? 0.0 : losses.back()) << "\n";
    return net;
}

// All grid points for all seeds.  Baselines train once per seed; grid points
// then run independently, up to `workers` in flight.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const Dataset& data,
                                       const Tensor& batch, std::ostream& log,
                                       const Network* primary_baseline = nullptr) {
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> points;
    for (std::size_t w : cfg.sweep_w)
        for (std::size_t u : cfg.sweep_u)
            for (std::size_t q : cfg.sweep_q) points.emplace_back(w, u, q);

    std::vector<SweepRow> rows;
    for (std::uint64_t seed : cfg.seeds) {
        Network baseline = (primary_baseline && seed == cfg.seeds.front())
                               ? *primary_baseline
                               : train_baseline(cfg, data, seed, log);
        std::vector<std::future<SweepRow>> inflight;
        std::vector<SweepRow> seed_rows(points.size());
        std::size_t next = 0, done = 0;
        while (done < points.size()) {
            while (next < points.size() && inflight.size() < cfg.workers) {
                auto [w, u, q] = points[next];
                std::size_t slot = next++;
                inflight.push_back(std::async(std::launch::async, [&, w, u, q, slot, seed] {
                    SweepRow r = sweep_point(baseline, data, batch, cfg, w, u, q, seed);
                    seed_rows[slot] = r;
                    return r;
                }));
            }
            inflight.front().get();
            inflight.erase(inflight.begin());
            ++done;
        }
        for (const SweepRow& r : seed_rows) {
            log << "  (w=" << r.w << ", u=" << r.u << ", q=" << r.q << ", seed=" << r.seed
                << "): delta_e " << detail::g17(r.delta_e) << "\n";
            rows.push_back(r);
        }
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

namespace detail {

inline std::string markdown_summary(const ExperimentConfig& cfg, const RunArtifacts& art,
                                    const ReinterpretedModel& rm) {
    std::ostringstream md;
    md << "# Experiment summary\n\n";
    md << "- dataset: " << cfg.dataset_path << " (" << cfg.dataset_format << ")\n";
    md << "- topology: `" << cfg.topology << "`\n";
    md << "- clusters: w=" << cfg.compose.w << ", u=" << cfg.compose.u << ", q=" << cfg.compose.q
       << "\n";
    md << "- baseline test error: " << g17(art.baseline_error) << "\n";
    md << "- accuracy loss (delta_e): " << g17(art.compose_report.best_delta_e()) << " after "
       << art.compose_report.iterations << " iteration(s), "
       << (art.compose_report.converged ? "converged" : "not converged") << "\n\n";

    md << "## Composition\n\n";
    md << "| iteration | clustered error | delta_e |\n|---|---|---|\n";
    for (std::size_t i = 0; i < art.compose_report.e_clustered.size(); ++i)
        md << "| " << i + 1 << " | " << g17(art.compose_report.e_clustered[i]) << " | "
           << g17(art.compose_report.delta_e[i]) << " |\n";
    md << "\n";

    md << "## Simulation\n\n```\n" << sim_report_text(art.sim, cfg.cost) << "```\n\n";
    md << "## Reference designs\n\n```\n" << compare_reference(art.sim) << "```\n\n";
    md << "## Memory\n\n```\n" << memory_report(rm) << "```\n\n";

    md << "## Sweep\n\n";
    md << "| w | u | q | seed | delta_e | energy (J) | cycles | EDP (J*s) | memory (B) |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const SweepRow& r : art.rows)
        md << "| " << r.w << " | " << r.u << " | " << r.q << " | " << r.seed << " | "
           << g17(r.delta_e) << " | " << g17(r.energy_j) << " | " << r.cycles << " | "
           << g17(r.edp_js) << " | " << r.memory_bytes << " |\n";
    return md.str();
}

}  // namespace detail

inline RunArtifacts run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    detail::run_stage("config", [&] { cfg.validate(); return 0; });

    RunArtifacts art;
    art.dir = cfg.out_dir;
    detail::run_stage("setup", [&] {
        std::filesystem::create_directories(art.dir);
        return 0;
    });

    log << "stage dataset\n";
    Dataset data = detail::run_stage("dataset", [&] { return open_experiment_dataset(cfg); });
    log << "  " << data.count_of(Split::train) << " train / " << data.count_of(Split::validation)
        << " validation / " << data.count_of(Split::test) << " test samples\n";

    log << "stage train\n";
    Network net = detail::run_stage("train", [&] {
        Network n = parse_topology(cfg.topology);
        if (data.sample_dims() != n.input_dims()) data.reshape_samples(n.input_dims());
        Network trained = train_baseline(cfg, data, cfg.seeds.front(), log);
        art.baseline_error = evaluate(trained, data, eval_split(data));
        art.baseline_path = art.dir / "baseline.rnn";
        save_model(trained, art.baseline_path.string());
        return trained;
    });
    log << "  error " << detail::g17(art.baseline_error) << " on " << to_string(eval_split(data))
        << " split\n";

    log << "stage compose\n";
    ReinterpretedModel rm = detail::run_stage("compose", [&] {
        ComposeConfig cc = cfg.compose;
        cc.seed = cfg.seeds.front();
        auto [model, rep] = reinterpret(net, data, cc);
        art.compose_report = rep;
        art.model_path = art.dir / "model.rm";
        save_reinterpreted(model, art.model_path.string());
        art.compose_path = art.dir / "compose.txt";
        detail::write_text(art.compose_path, detail::compose_report_text(rep));
        return model;
    });
    log << "  delta_e " << detail::g17(art.compose_report.best_delta_e()) << " ("
        << (art.compose_report.converged ? "converged" : "not converged") << ")\n";

    log << "stage simulate\n";
    Tensor batch = eval_batch(data, cfg.sim_samples);
    detail::run_stage("simulate", [&] {
        SimResult sr = simulate(rm, batch, cfg.cost, cfg.sim);
        art.sim = sr.report;
        art.simulation_path = art.dir / "simulation.txt";
        detail::write_text(art.simulation_path, sim_report_text(art.sim, cfg.cost) + "\n" +
                                                    compare_reference(art.sim) + "\n" +
                                                    memory_report(rm));
        return 0;
    });
    log << "  " << detail::g17(art.sim.throughput_gops) << " GOP/s, "
        << detail::g17(art.sim.total_energy_j) << " J\n";

    log << "stage sweep\n";
    detail::run_stage("sweep", [&] {
        art.rows = run_sweep(cfg, data, batch, log, &net);
        art.sweep_path = art.dir / "sweep.csv";
        detail::write_text(art.sweep_path, sweep_csv(art.rows));
        return 0;
    });

    log << "stage summary\n";
    detail::run_stage("summary", [&] {
        art.summary_path = art.dir / "summary.md";
        detail::write_text(art.summary_path, detail::markdown_summary(cfg, art, rm));
        return 0;
    });
    return art;
}

}  // namespace rapidnn
