#pragma once

// Container for reinterpreted models: a versioned text manifest carrying the
// structure, codebooks and activation tables (decimal, 17 significant digits
// so doubles survive the trip bit-exactly), followed by one binary section
// with product tables, biases and weight codes in layer order.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rapidnn/compose.hpp"
#include "rapidnn/model_io.hpp"

namespace rapidnn {

inline constexpr int kRmVersion = 1;
inline constexpr const char* kRmMagic = "RAPIDNN-RM";

namespace detail {

inline void write_u16_le(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

inline std::uint16_t read_u16_le(std::istream& in, const std::string& path) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2))
        throw std::runtime_error(path + ": truncated code blob");
    return static_cast<std::uint16_t>(b[0] | (std::uint16_t(b[1]) << 8));
}

inline void write_values(std::ostream& out, const char* tag, const std::vector<double>& vs) {
    out << tag << " " << vs.size();
    out << std::setprecision(17);
    for (double v : vs) out << " " << v;
    out << "\n";
}

inline std::vector<double> read_values(std::istringstream& ls, const std::string& path) {
    std::size_t n = 0;
    if (!(ls >> n)) throw std::runtime_error(path + ": malformed value list");
    std::vector<double> vs(n);
    for (double& v : vs)
        if (!(ls >> v)) throw std::runtime_error(path + ": value list shorter than declared");
    return vs;
}

}  // namespace detail

inline void save_reinterpreted(const ReinterpretedModel& rm, const std::string& path) {
    rm.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << kRmMagic << "\n";
    out << "version " << kRmVersion << "\n";
    out << "params w " << rm.w << " u " << rm.u << " q " << rm.q << " tree_w " << rm.tree_depth_w
        << " tree_u " << rm.tree_depth_u << " fixed " << rm.fixed.total_bits << "."
        << rm.fixed.frac_bits << "\n";
    out << "layers " << rm.layers.size() << "\n";
    for (const RmLayer& l : rm.layers) {
        out << "layer " << to_string(l.kind) << " in " << shape_str(l.in_dims) << " out "
            << shape_str(l.out_dims);
        if (l.kind == LayerKind::convolution) out << " kernel " << l.kernel;
        if (l.kind == LayerKind::pooling) out << " mode " << to_string(l.pool_mode);
        out << " activation " << to_string(l.activation);
        out << " enc ";
        if (l.enc_owner == npos) out << "-";
        else out << l.enc_owner;
        out << " lut " << (l.has_lut ? (l.lut.exact_relu ? "comparator" : "table") : "none");
        out << " codes " << l.weight_codes.size();
        out << " bias ";
        if (l.bias.shape.empty()) out << "-";
        else out << shape_str(l.bias.shape);
        out << "\n";
        if (l.owns_codebook()) {
            detail::write_values(out, "icb", l.input_codebook.centroids);
            out << "books " << l.weight_codebooks.size() << "\n";
            for (const Codebook& cb : l.weight_codebooks)
                detail::write_values(out, "wcb", cb.centroids);
        }
        if (l.has_lut && !l.lut.exact_relu) {
            detail::write_values(out, "lys", l.lut.ys);
            detail::write_values(out, "lzs", l.lut.zs);
        }
    }
    out << "end\n";
    for (const RmLayer& l : rm.layers) {
        for (const Tensor& t : l.product_tables) detail::write_blob(out, t);
        detail::write_blob(out, l.bias);
        for (std::uint16_t c : l.weight_codes) detail::write_u16_le(out, c);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ReinterpretedModel load_reinterpreted(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::string line;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated manifest");
        return line;
    };
    if (next_line() != kRmMagic)
        throw std::runtime_error(path + ": not a reinterpreted-model file (bad magic)");
    {
        std::istringstream ls(next_line());
        std::string key;
        int version = -1;
        ls >> key >> version;
        if (key != "version" || !ls)
            throw std::runtime_error(path + ": malformed version line");
        if (version != kRmVersion)
            throw std::runtime_error(path + ": unsupported model version " +
                                     std::to_string(version) + " (expected " +
                                     std::to_string(kRmVersion) + ")");
    }
    ReinterpretedModel rm;
    {
        std::istringstream ls(next_line());
        std::string key, fixed;
        ls >> key;
        if (key != "params") throw std::runtime_error(path + ": expected params line");
        std::string name;
        while (ls >> name) {
            if (name == "w") ls >> rm.w;
            else if (name == "u") ls >> rm.u;
            else if (name == "q") ls >> rm.q;
            else if (name == "tree_w") ls >> rm.tree_depth_w;
            else if (name == "tree_u") ls >> rm.tree_depth_u;
            else if (name == "fixed") {
                ls >> fixed;
                std::size_t dot = fixed.find('.');
                if (dot == std::string::npos)
                    throw std::runtime_error(path + ": malformed fixed-point format");
                rm.fixed.total_bits = static_cast<unsigned>(std::stoul(fixed.substr(0, dot)));
                rm.fixed.frac_bits = static_cast<unsigned>(std::stoul(fixed.substr(dot + 1)));
            } else {
                throw std::runtime_error(path + ": unknown params field: " + name);
            }
            if (!ls) throw std::runtime_error(path + ": malformed params line");
        }
    }
    std::size_t n = 0;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> n;
        if (key != "layers" || !ls || n == 0)
            throw std::runtime_error(path + ": malformed layers line");
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream ls(next_line());
        std::string tag, kind;
        ls >> tag >> kind;
        if (tag != "layer") throw std::runtime_error(path + ": expected layer line, got: " + line);
        RmLayer l;
        if (kind == "input") l.kind = LayerKind::input;
        else if (kind == "fc") l.kind = LayerKind::fully_connected;
        else if (kind == "conv") l.kind = LayerKind::convolution;
        else if (kind == "pool") l.kind = LayerKind::pooling;
        else throw std::runtime_error(path + ": unknown layer kind: " + kind);
        std::size_t codes = 0;
        std::string lut_mode = "none", bias_dims = "-";
        std::string key, val;
        while (ls >> key >> val) {
            if (key == "in") l.in_dims = detail::parse_dims(val);
            else if (key == "out") l.out_dims = detail::parse_dims(val);
            else if (key == "kernel") l.kernel = std::stoull(val);
            else if (key == "mode") l.pool_mode = pool_mode_from_string(val);
            else if (key == "activation") l.activation = activation_from_string(val);
            else if (key == "enc") l.enc_owner = val == "-" ? npos : std::stoull(val);
            else if (key == "lut") lut_mode = val;
            else if (key == "codes") codes = std::stoull(val);
            else if (key == "bias") bias_dims = val;
            else throw std::runtime_error(path + ": unknown layer field: " + key);
        }
        if (l.in_dims.empty() || l.out_dims.empty())
            throw std::runtime_error(path + ": layer line missing dims: " + line);
        l.weight_codes.resize(codes);
        if (bias_dims != "-") l.bias = Tensor(detail::parse_dims(bias_dims));
        if (l.owns_codebook()) {
            std::istringstream vs(next_line());
            std::string vtag;
            vs >> vtag;
            if (vtag != "icb") throw std::runtime_error(path + ": expected input codebook line");
            l.input_codebook.centroids = detail::read_values(vs, path);
            std::istringstream bs(next_line());
            std::size_t books = 0;
            bs >> vtag >> books;
            if (vtag != "books" || !bs)
                throw std::runtime_error(path + ": malformed books line");
            for (std::size_t b = 0; b < books; ++b) {
                std::istringstream ws(next_line());
                ws >> vtag;
                if (vtag != "wcb")
                    throw std::runtime_error(path + ": expected weight codebook line");
                Codebook cb;
                cb.centroids = detail::read_values(ws, path);
                l.product_tables.push_back(Tensor({cb.size(), 0}));  // sized after icb known
                l.weight_codebooks.push_back(std::move(cb));
            }
            for (Tensor& t : l.product_tables)
                t = Tensor({t.shape[0], l.input_codebook.size()});
        }
        if (lut_mode == "table") {
            l.has_lut = true;
            l.lut.kind = l.activation;
            std::istringstream ys(next_line());
            std::string vtag;
            ys >> vtag;
            if (vtag != "lys") throw std::runtime_error(path + ": expected activation rows");
            l.lut.ys = detail::read_values(ys, path);
            std::istringstream zs(next_line());
            zs >> vtag;
            if (vtag != "lzs") throw std::runtime_error(path + ": expected activation values");
            l.lut.zs = detail::read_values(zs, path);
        } else if (lut_mode == "comparator") {
            l.has_lut = true;
            l.lut.kind = l.activation;
            l.lut.exact_relu = true;
        } else if (lut_mode != "none") {
            throw std::runtime_error(path + ": unknown lut mode: " + lut_mode);
        }
        rm.layers.push_back(std::move(l));
    }
    if (next_line() != "end") throw std::runtime_error(path + ": missing manifest terminator");
    for (RmLayer& l : rm.layers) {
        for (Tensor& t : l.product_tables) detail::read_blob(in, t, path);
        detail::read_blob(in, l.bias, path);
        for (std::uint16_t& c : l.weight_codes) c = detail::read_u16_le(in, path);
    }
    rm.validate();
    return rm;
}

}  // namespace rapidnn
