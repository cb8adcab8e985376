#pragma once

// Report emission: sweep CSV rows, per-layer memory accounting with the
// formula spelled out, energy/area breakdown tables, and the contrast table
// against published accelerator efficiency figures.  Every number printed
// here is either a field of a report struct or a ratio of two such fields.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "rapidnn/compose.hpp"
#include "rapidnn/rna_sim.hpp"

namespace rapidnn {

struct SweepRow {
    std::size_t w = 0, u = 0, q = 0;
    std::uint64_t seed = 0;
    double delta_e = 0.0;
    double energy_j = 0.0;
    std::uint64_t cycles = 0;
    double edp_js = 0.0;
    std::size_t memory_bytes = 0;
};

inline bool operator<(const SweepRow& a, const SweepRow& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.u != b.u) return a.u < b.u;
    if (a.q != b.q) return a.q < b.q;
    return a.seed < b.seed;
}

namespace detail {

// Shortest decimal that round-trips the double, for diff-stable CSV output.
inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fixed_digits(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

// Rows are sorted by (w, u, q, seed) so reruns diff cleanly.
inline std::string sweep_csv(std::vector<SweepRow> rows) {
    std::sort(rows.begin(), rows.end());
    std::ostringstream out;
    out << "w,u,q,seed,delta_e,energy_j,cycles,edp_js,memory_bytes\n";
    for (const SweepRow& r : rows)
        out << r.w << "," << r.u << "," << r.q << "," << r.seed << "," << detail::g17(r.delta_e)
            << "," << detail::g17(r.energy_j) << "," << r.cycles << ","
            << detail::g17(r.edp_js) << "," << r.memory_bytes << "\n";
    return out.str();
}

// Per-layer memory walk.  Uses the same entry widths as the model's own
// accounting: 4-byte fixed-point entries for tables and codebooks, and
// 8 bytes per activation row (a y/z pair of entries).
inline std::string memory_report(const ReinterpretedModel& rm) {
    constexpr std::size_t entry = 4;
    std::ostringstream out;
    out << "memory accounting (table/codebook entries " << entry
        << " B, activation rows 2 entries):\n";
    std::size_t total = 0;
    for (std::size_t i = 0; i < rm.layers.size(); ++i) {
        const RmLayer& l = rm.layers[i];
        std::size_t tables = 0, books = 0, lut = 0;
        for (const Tensor& t : l.product_tables) tables += t.size() * entry;
        for (const Codebook& cb : l.weight_codebooks) books += cb.size() * entry;
        if (l.owns_codebook()) books += l.input_codebook.size() * entry;
        if (l.has_lut && !l.lut.exact_relu) lut = l.lut.rows() * 2 * entry;
        std::size_t layer_total = tables + books + lut;
        total += layer_total;
        out << "  layer " << i << " (" << to_string(l.kind) << "): product tables " << tables
            << " B + codebooks " << books << " B + activation " << lut << " B = " << layer_total
            << " B\n";
    }
    out << "  total " << total << " B\n";
    return out.str();
}

// Published efficiency figures for whole accelerator designs, printed beside
// this run's simulated numbers.  The published rows describe peak throughput
// of full-size silicon; the simulated row is whatever workload was given, so
// the table is a frame of reference, not a claim of parity.
struct ReferenceRow {
    std::string design;
    double gops_per_mm2 = 0.0;
    double gops_per_w = 0.0;
    std::string basis;
};

inline std::vector<ReferenceRow> reference_rows() {
    return {
        {"RAPIDNN", 1904.6, 839.1, "published"},
        {"ISAAC", 479.0, 380.7, "published"},
        {"PipeLayer", 1485.1, 142.9, "published"},
    };
}

inline std::string compare_reference(const SimReport& r) {
    std::vector<ReferenceRow> rows = reference_rows();
    ReferenceRow mine;
    mine.design = "this run";
    mine.basis = "simulated";
    mine.gops_per_mm2 = r.area_mm2 > 0.0 ? r.throughput_gops / r.area_mm2 : 0.0;
    double avg_power_w = r.wall_time_s > 0.0 ? r.total_energy_j / r.wall_time_s : 0.0;
    mine.gops_per_w = avg_power_w > 0.0 ? r.throughput_gops / avg_power_w : 0.0;
    rows.push_back(mine);

    std::ostringstream out;
    out << "design      GOP/s/mm2   GOP/s/W     basis\n";
    for (const ReferenceRow& row : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%-11s %-11.1f %-11.1f %s\n", row.design.c_str(),
                      row.gops_per_mm2, row.gops_per_w, row.basis.c_str());
        out << line;
    }
    return out.str();
}

inline std::string energy_breakdown(const SimReport& r) {
    struct Part {
        const char* name;
        double j;
    } parts[] = {
        {"accumulation", r.energy_accumulation_j},
        {"activation", r.energy_activation_j},
        {"encoding/pooling", r.energy_encoding_pooling_j},
        {"other", r.energy_other_j},
    };
    std::ostringstream out;
    out << "energy by block class:\n";
    for (const Part& p : parts) {
        double share = r.total_energy_j > 0.0 ? 100.0 * p.j / r.total_energy_j : 0.0;
        char line[96];
        std::snprintf(line, sizeof line, "  %-17s %.4e J  %5.1f%%\n", p.name, p.j, share);
        out << line;
    }
    char totl[64];
    std::snprintf(totl, sizeof totl, "  %-17s %.4e J\n", "total", r.total_energy_j);
    out << totl;
    return out.str();
}

inline std::string area_breakdown(const RnaCostModel& cost) {
    struct Part {
        const char* name;
        double um2;
    } parts[] = {
        {"product crossbar", cost.crossbar.area_um2},
        {"counters", cost.counter.area_um2},
        {"activation AM", cost.activation_am.area_um2},
        {"encoder AM", cost.encoder_am.area_um2},
    };
    std::ostringstream out;
    out << "area per neuron block (" << detail::fixed_digits(cost.rna_area_um2(), 1) << " um2):\n";
    for (const Part& p : parts) {
        char line[96];
        std::snprintf(line, sizeof line, "  %-17s %8.1f um2  %5.1f%%\n", p.name, p.um2,
                      100.0 * p.um2 / cost.rna_area_um2());
        out << line;
    }
    out << "tile: " << cost.tile_rnas << " blocks + buffer "
        << detail::fixed_digits(cost.buffer_area_um2, 1) << " um2 = "
        << detail::fixed_digits(cost.tile_area_um2(), 1) << " um2\n";
    out << "chip: " << cost.chip_tiles << " tiles = "
        << detail::fixed_digits(cost.chip_area_mm2(), 4) << " mm2\n";
    out << "chip power: " << detail::fixed_digits(cost.chip_power_w(), 2)
        << " W from per-block figures; " << detail::fixed_digits(cost.quoted_chip_power_w, 1)
        << " W quoted for the design\n";
    return out.str();
}

inline std::string sim_report_text(const SimReport& r, const RnaCostModel& cost) {
    std::ostringstream out;
    out << "workload: " << r.samples << " samples, " << r.ops_per_sample << " ops each\n";
    out << "timing: " << r.total_cycles << " accumulation cycles; sample latency "
        << detail::g17(r.sample_latency_s * 1e9) << " ns; wall time "
        << detail::g17(r.wall_time_s * 1e9) << " ns\n";
    out << "throughput: " << detail::g17(r.throughput_samples_s) << " samples/s = "
        << detail::g17(r.throughput_gops) << " GOP/s\n";
    out << "energy-delay product: " << detail::g17(r.edp_js) << " J*s\n";
    out << "model memory: " << r.memory_bytes << " B\n";
    out << "capacity: " << r.rnas_used << " neuron blocks on " << r.tiles_used << " tile(s)";
    if (r.sharing_factor > 1) out << ", time-shared x" << r.sharing_factor;
    out << "\n";
    if (r.saturated_sums > 0)
        out << "warning: " << r.saturated_sums << " fixed-point accumulator saturations\n";
    if (r.counter_saturations > 0)
        out << "warning: " << r.counter_saturations << " neuron sums overflowed a "
            << cost.counter_width_bits << "-bit counter\n";
    out << "\npipeline stages (worst case):\n";
    for (const LayerTiming& t : r.layers) {
        char line[160];
        std::snprintf(line, sizeof line,
                      "  %2zu %-14s %6zu unit(s)  count %6llu + adder %6llu cycles, "
                      "%zu search(es), %s ns\n",
                      t.layer, t.label.c_str(), t.neurons,
                      static_cast<unsigned long long>(t.worst_count_cycles),
                      static_cast<unsigned long long>(t.worst_adder_cycles), t.searches,
                      detail::g17(t.stage_ns).c_str());
        out << line;
    }
    out << "\n" << energy_breakdown(r);
    out << "\n" << area_breakdown(cost);
    return out.str();
}

}  // namespace rapidnn
