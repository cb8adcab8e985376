// Command-line front end: train baselines, compose lookup-table models,
// simulate the accelerator, run parameter sweeps, and print reports.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rapidnn/dataset.hpp"
#include "rapidnn/experiment.hpp"
#include "rapidnn/model_io.hpp"
#include "rapidnn/network.hpp"
#include "rapidnn/report.hpp"
#include "rapidnn/rm_io.hpp"
#include "rapidnn/rna_sim.hpp"
#include "rapidnn/synth.hpp"
#include "rapidnn/train.hpp"

namespace {

using namespace rapidnn;

// Loads either a real dataset file or one of the built-in synthetic tasks
// ("synth-digits", "synth-patches" with counts/seed from the options).
Dataset open_dataset(const std::string& data, const std::string& format, std::size_t n_train,
                     std::size_t n_test, std::uint64_t seed) {
    if (data == "synth-digits") return synth_digits(n_train, n_test, seed);
    if (data == "synth-patches") return synth_patches(n_train, n_test, seed);
    return load_dataset(data, format, Split::train);
}

void fit_dataset_to_network(Dataset& d, const Network& net) {
    if (d.sample_dims() != net.input_dims()) d.reshape_samples(net.input_dims());
}

int cmd_gen_data(const std::string& task, const std::string& out_prefix, std::size_t n_train,
                 std::size_t n_test, std::uint64_t seed) {
    Dataset d = task == "digits" ? synth_digits(n_train, n_test, seed)
                                 : synth_patches(n_train, n_test, seed);
    write_idx_dataset(d, Split::train, out_prefix + "-train-images-idx3-ubyte",
                      out_prefix + "-train-labels-idx1-ubyte");
    write_idx_dataset(d, Split::test, out_prefix + "-test-images-idx3-ubyte",
                      out_prefix + "-test-labels-idx1-ubyte");
    std::printf("wrote %zu train / %zu test samples under %s-*\n", d.count_of(Split::train),
                d.count_of(Split::test), out_prefix.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lookup-table neural network toolkit and accelerator simulator"};
    app.require_subcommand(1);

    // --- gen-data ------------------------------------------------------------
    std::string gd_task = "digits", gd_out = "data/synth";
    std::size_t gd_train = 10000, gd_test = 2000;
    std::uint64_t gd_seed = 1;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset as IDX files");
    gen->add_option("--task", gd_task, "digits | patches")
        ->check(CLI::IsMember({"digits", "patches"}));
    gen->add_option("--out", gd_out, "output path prefix");
    gen->add_option("--train", gd_train, "train sample count");
    gen->add_option("--test", gd_test, "test sample count");
    gen->add_option("--seed", gd_seed, "generator seed");

    // --- train ----------------------------------------------------------------
    std::string tr_topology = "in:784 fc:512:relu fc:512:relu fc:10:softmax";
    std::string tr_data = "synth-digits", tr_format = "idx", tr_out = "model.rnn";
    TrainConfig tr_cfg;
    std::size_t tr_ntrain = 10000, tr_ntest = 2000;
    std::uint64_t tr_dseed = 1;
    CLI::App* tr = app.add_subcommand("train", "train a baseline network");
    tr->add_option("--topology", tr_topology, "layer string, e.g. 'in:784 fc:512:relu fc:10'");
    tr->add_option("--data", tr_data, "dataset path, or synth-digits | synth-patches");
    tr->add_option("--format", tr_format, "idx | csv")->check(CLI::IsMember({"idx", "csv"}));
    tr->add_option("--out", tr_out, "model output path");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    tr->add_option("--momentum", tr_cfg.momentum, "momentum");
    tr->add_option("--dropout", tr_cfg.dropout_rate, "dropout rate on hidden fc layers");
    tr->add_option("--batch", tr_cfg.batch_size, "mini-batch size");
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--synth-train", tr_ntrain, "synthetic train sample count");
    tr->add_option("--synth-test", tr_ntest, "synthetic test sample count");
    tr->add_option("--data-seed", tr_dseed, "synthetic data seed");

    // --- compose ---------------------------------------------------------------
    std::string cp_model = "model.rnn", cp_data = "synth-digits", cp_format = "idx";
    std::string cp_out = "model.rm";
    ComposeConfig cp_cfg;
    std::size_t cp_ntrain = 10000, cp_ntest = 2000;
    std::uint64_t cp_dseed = 1;
    double cp_val = 0.1;
    CLI::App* cp = app.add_subcommand("compose", "reinterpret a trained network into tables");
    cp->add_option("--model", cp_model, "trained baseline model path");
    cp->add_option("--data", cp_data, "dataset path, or synth-digits | synth-patches");
    cp->add_option("--format", cp_format, "idx | csv")->check(CLI::IsMember({"idx", "csv"}));
    cp->add_option("--out", cp_out, "reinterpreted model output path");
    cp->add_option("--w", cp_cfg.w, "weight centroids per layer (power of two)");
    cp->add_option("--u", cp_cfg.u, "input centroids per layer (power of two)");
    cp->add_option("--q", cp_cfg.q, "activation table rows (power of two)");
    cp->add_option("--epsilon", cp_cfg.epsilon, "accuracy-loss tolerance");
    cp->add_option("--iters", cp_cfg.max_iters, "compose iteration budget");
    cp->add_option("--sample-fraction", cp_cfg.sample_fraction, "activation sampling fraction");
    cp->add_option("--retrain-epochs", cp_cfg.retrain_epochs, "epochs per retraining pass");
    cp->add_flag("--relu-comparator", cp_cfg.use_relu_comparator,
                 "use the exact comparator for relu instead of a table");
    cp->add_option("--seed", cp_cfg.seed, "clustering/retraining seed");
    cp->add_option("--validation", cp_val, "validation fraction carved when absent");
    cp->add_option("--synth-train", cp_ntrain, "synthetic train sample count");
    cp->add_option("--synth-test", cp_ntest, "synthetic test sample count");
    cp->add_option("--data-seed", cp_dseed, "synthetic data seed");

    // --- simulate ----------------------------------------------------------------
    std::string sm_model = "model.rm", sm_data = "synth-digits", sm_format = "idx";
    std::string sm_cost, sm_out;
    std::size_t sm_samples = 0, sm_ntrain = 10000, sm_ntest = 2000;
    std::uint64_t sm_dseed = 1;
    SimOptions sm_opt;
    CLI::App* sm = app.add_subcommand("simulate", "run a reinterpreted model on the accelerator");
    sm->add_option("--model", sm_model, "reinterpreted model path");
    sm->add_option("--data", sm_data, "dataset path, or synth-digits | synth-patches");
    sm->add_option("--format", sm_format, "idx | csv")->check(CLI::IsMember({"idx", "csv"}));
    sm->add_option("--cost", sm_cost, "cost override file (key = value lines)");
    sm->add_option("--out", sm_out, "also write the report to this file");
    sm->add_option("--samples", sm_samples, "cap on simulated samples (0 = whole split)");
    sm->add_flag("--sharing", sm_opt.allow_sharing, "time-share neuron blocks if oversubscribed");
    sm->add_flag("--cmos-pool", sm_opt.cmos_pooling, "comparator pooling instead of associative");
    sm->add_option("--synth-train", sm_ntrain, "synthetic train sample count");
    sm->add_option("--synth-test", sm_ntest, "synthetic test sample count");
    sm->add_option("--data-seed", sm_dseed, "synthetic data seed");

    // --- sweep -------------------------------------------------------------------
    std::string sw_config, sw_out;
    std::uint64_t sw_seed = 0;
    CLI::App* sw = app.add_subcommand("sweep", "full experiment: train, compose, simulate, sweep");
    sw->add_option("--config", sw_config, "experiment config file")->required();
    sw->add_option("--out", sw_out, "override the config's output directory");
    sw->add_option("--seed", sw_seed, "run a single seed instead of the config's list");

    // --- report --------------------------------------------------------------------
    std::string rp_model = "model.rm", rp_cost;
    CLI::App* rp = app.add_subcommand("report", "memory and cost breakdown of a composed model");
    rp->add_option("--model", rp_model, "reinterpreted model path");
    rp->add_option("--cost", rp_cost, "cost override file (key = value lines)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gd_task, gd_out, gd_train, gd_test, gd_seed);
        if (tr->parsed()) {
            Network net = parse_topology(tr_topology);
            init_weights(net, tr_cfg.seed);
            Dataset data = open_dataset(tr_data, tr_format, tr_ntrain, tr_ntest, tr_dseed);
            fit_dataset_to_network(data, net);
            std::vector<double> losses;
            net = train(net, data, tr_cfg, &losses);
            for (std::size_t e = 0; e < losses.size(); ++e)
                std::printf("epoch %zu loss %.6f\n", e + 1, losses[e]);
            if (data.count_of(Split::test) > 0)
                std::printf("test error %.4f\n", evaluate(net, data, Split::test));
            save_model(net, tr_out);
            std::printf("saved %s\n", tr_out.c_str());
            return 0;
        }
        if (cp->parsed()) {
            Network net = load_model(cp_model);
            Dataset data = open_dataset(cp_data, cp_format, cp_ntrain, cp_ntest, cp_dseed);
            fit_dataset_to_network(data, net);
            if (data.count_of(Split::validation) == 0) data.carve_validation(cp_val, cp_dseed);
            auto [rm, rep] = reinterpret(net, data, cp_cfg);
            std::fputs(detail::compose_report_text(rep).c_str(), stdout);
            save_reinterpreted(rm, cp_out);
            std::printf("saved %s\n", cp_out.c_str());
            return 0;
        }
        if (sm->parsed()) {
            ReinterpretedModel rm = load_reinterpreted(sm_model);
            Dataset data = open_dataset(sm_data, sm_format, sm_ntrain, sm_ntest, sm_dseed);
            if (data.sample_dims() != rm.input_dims()) data.reshape_samples(rm.input_dims());
            RnaCostModel cost;
            if (!sm_cost.empty()) cost = load_cost_model(sm_cost);
            Tensor batch = eval_batch(data, sm_samples);
            SimResult res = simulate(rm, batch, cost, sm_opt);
            std::string text = sim_report_text(res.report, cost) + "\n" +
                               compare_reference(res.report) + "\n" + memory_report(rm);
            std::fputs(text.c_str(), stdout);
            if (!sm_out.empty()) {
                detail::write_text(sm_out, text);
                std::printf("saved %s\n", sm_out.c_str());
            }
            return 0;
        }
        if (sw->parsed()) {
            ExperimentConfig cfg = parse_experiment_config(sw_config);
            if (!sw_out.empty()) cfg.out_dir = sw_out;
            if (sw->count("--seed") > 0) cfg.seeds = {sw_seed};
            RunArtifacts art = run_experiment(cfg, std::cout);
            std::printf("artifacts in %s\n", art.dir.string().c_str());
            return 0;
        }
        if (rp->parsed()) {
            ReinterpretedModel rm = load_reinterpreted(rp_model);
            RnaCostModel cost;
            if (!rp_cost.empty()) cost = load_cost_model(rp_cost);
            std::fputs(memory_report(rm).c_str(), stdout);
            std::fputs(area_breakdown(cost).c_str(), stdout);
            std::puts("reference designs (published figures):");
            for (const ReferenceRow& row : reference_rows())
                std::printf("  %-11s %7.1f GOP/s/mm2  %7.1f GOP/s/W\n", row.design.c_str(),
                            row.gops_per_mm2, row.gops_per_w);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
