#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/network.hpp"
#include "rapidnn/tensor.hpp"

namespace rapidnn {

inline constexpr int kModelVersion = 1;
inline constexpr const char* kModelMagic = "RAPIDNN-MODEL";

namespace detail {

inline void write_f64_le(std::ostream& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64_le(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error(path + ": truncated weight blob");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void write_blob(std::ostream& out, const Tensor& t) {
    for (double v : t.data) write_f64_le(out, v);
}

inline void read_blob(std::istream& in, Tensor& t, const std::string& path) {
    for (double& v : t.data) v = read_f64_le(in, path);
}

}  // namespace detail

// Text header (magic, version, one line per layer) followed by one binary
// section holding all weights then biases in layer order, little-endian raw
// doubles so a round trip is bit-exact.
inline void save_model(const Network& net, const std::string& path) {
    if (net.layers.empty()) throw std::invalid_argument("refusing to save an empty network");
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << kModelMagic << "\n";
    out << "version " << kModelVersion << "\n";
    out << "layers " << net.layers.size() << "\n";
    for (const LayerSpec& l : net.layers) {
        out << "layer " << to_string(l.kind) << " in " << shape_str(l.in_dims) << " out "
            << shape_str(l.out_dims);
        switch (l.kind) {
            case LayerKind::fully_connected:
                out << " activation " << to_string(l.activation);
                break;
            case LayerKind::convolution:
                out << " kernel " << l.kernel << " activation " << to_string(l.activation);
                break;
            case LayerKind::pooling:
                out << " mode " << to_string(l.pool_mode);
                break;
            case LayerKind::input:
                break;
        }
        out << "\n";
    }
    out << "end\n";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        detail::write_blob(out, net.weights[i]);
        detail::write_blob(out, net.biases[i]);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Network load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::string line;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated model header");
        return line;
    };
    if (next_line() != kModelMagic)
        throw std::runtime_error(path + ": not a model file (bad magic)");
    {
        std::istringstream ls(next_line());
        std::string key;
        int version = -1;
        ls >> key >> version;
        if (key != "version" || !ls)
            throw std::runtime_error(path + ": malformed version line");
        if (version != kModelVersion)
            throw std::runtime_error(path + ": unsupported model version " +
                                     std::to_string(version) + " (expected " +
                                     std::to_string(kModelVersion) + ")");
    }
    std::size_t n = 0;
    {
        std::istringstream ls(next_line());
        std::string key;
        ls >> key >> n;
        if (key != "layers" || !ls || n == 0)
            throw std::runtime_error(path + ": malformed layers line");
    }
    Network net;
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream ls(next_line());
        std::string tag, kind;
        ls >> tag >> kind;
        if (tag != "layer") throw std::runtime_error(path + ": expected layer line, got: " + line);
        LayerSpec l;
        if (kind == "input") l.kind = LayerKind::input;
        else if (kind == "fc") l.kind = LayerKind::fully_connected;
        else if (kind == "conv") l.kind = LayerKind::convolution;
        else if (kind == "pool") l.kind = LayerKind::pooling;
        else throw std::runtime_error(path + ": unknown layer kind: " + kind);
        std::string key, val;
        while (ls >> key >> val) {
            if (key == "in") l.in_dims = detail::parse_dims(val);
            else if (key == "out") l.out_dims = detail::parse_dims(val);
            else if (key == "kernel") l.kernel = std::stoull(val);
            else if (key == "activation") l.activation = activation_from_string(val);
            else if (key == "mode") l.pool_mode = pool_mode_from_string(val);
            else throw std::runtime_error(path + ": unknown layer field: " + key);
        }
        if (l.in_dims.empty() || l.out_dims.empty())
            throw std::runtime_error(path + ": layer line missing dims: " + line);
        net.layers.push_back(l);
    }
    if (next_line() != "end") throw std::runtime_error(path + ": missing header terminator");
    net.weights.resize(n);
    net.biases.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind == LayerKind::fully_connected) {
            net.weights[i] = Tensor({l.out_count(), l.in_count()});
            net.biases[i] = Tensor({l.out_count()});
        } else if (l.kind == LayerKind::convolution) {
            net.weights[i] = Tensor({l.out_dims[2], l.kernel, l.kernel, l.in_dims[2]});
            net.biases[i] = Tensor({l.out_dims[2]});
        }
        detail::read_blob(in, net.weights[i], path);
        detail::read_blob(in, net.biases[i], path);
    }
    net.validate();
    return net;
}

}  // namespace rapidnn
