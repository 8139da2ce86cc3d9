#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"
#include "relu_preimage/stability.hpp"

namespace relu_preimage {

// Text model format, line oriented:
//
//   relu-mlp 1
//   layers <L>
//   layer <index> <rows> <cols> <relu|none|softmax>
//   weights text            (or: weights binary32 <count>)
//   <rows lines of cols decimal floats>
//   bias
//   <one line of rows decimal floats>
//
// repeated per layer. binary32 weight blocks hold count little-endian IEEE
// 32-bit floats as raw bytes, followed by one newline; they are widened to
// 64-bit on load, so saving in binary narrows the weights. Hidden layers must
// be tagged relu; the final tag is recorded and otherwise ignored. Floats are
// written with 17 significant digits, which makes text save/load lossless.
// The full grammar lives in docs/model_format.md.

namespace detail {

struct LineReader {
    std::istream& in;
    std::string path;
    std::size_t line_no = 0;

    bool next(std::string& line) {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return true;
    }

    std::string require(const std::string& what) {
        std::string line;
        if (!next(line)) throw ParseError(path, line_no + 1, "unexpected end of file, expected " + what);
        return line;
    }
};

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& tok, const std::string& path, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError(path, line, "not a number: '" + tok + "'");
    if (!std::isfinite(v)) throw NonFiniteValue(path, line, "non-finite value: '" + tok + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline Activation parse_activation(const std::string& tok, const std::string& path, std::size_t line) {
    if (tok == "relu") return Activation::Relu;
    if (tok == "none") return Activation::None;
    if (tok == "softmax") return Activation::Softmax;
    throw UnsupportedActivation(path, line, "unknown activation tag: '" + tok + "'");
}

inline void read_binary_weights(LineReader& rd, DenseMatrix& w, std::size_t count) {
    if (count != w.rows * w.cols)
        throw CountMismatch(rd.path, rd.line_no,
                            "binary32 block declares " + std::to_string(count) + " values for a " +
                                std::to_string(w.rows) + "x" + std::to_string(w.cols) + " matrix");
    std::vector<unsigned char> raw(count * 4);
    rd.in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(rd.in.gcount()) != raw.size())
        throw CountMismatch(rd.path, rd.line_no, "binary32 block truncated");
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned bits = static_cast<unsigned>(raw[4 * i]) |
                              static_cast<unsigned>(raw[4 * i + 1]) << 8 |
                              static_cast<unsigned>(raw[4 * i + 2]) << 16 |
                              static_cast<unsigned>(raw[4 * i + 3]) << 24;
        float f;
        std::memcpy(&f, &bits, sizeof f);
        if (!std::isfinite(f))
            throw NonFiniteValue(rd.path, rd.line_no, "non-finite value in binary32 block");
        w.entries[i] = static_cast<double>(f);
    }
    int ch = rd.in.get();
    if (ch == '\r') ch = rd.in.get();
    if (ch != '\n' && ch != std::char_traits<char>::eof())
        throw ParseError(rd.path, rd.line_no, "binary32 block not terminated by a newline");
    ++rd.line_no;
}

inline MlpModel load_model_stream(std::istream& in, const std::string& path) {
    LineReader rd{in, path};

    auto header = split_ws(rd.require("format header"));
    if (header.size() != 2 || header[0] != "relu-mlp")
        throw BadHeader(path, rd.line_no, "expected 'relu-mlp <version>'");
    if (header[1] != "1")
        throw BadHeader(path, rd.line_no, "unsupported format version '" + header[1] + "'");

    auto count_line = split_ws(rd.require("layer count"));
    if (count_line.size() != 2 || count_line[0] != "layers")
        throw BadHeader(path, rd.line_no, "expected 'layers <count>'");
    const long declared = std::strtol(count_line[1].c_str(), nullptr, 10);
    if (declared <= 0) throw BadHeader(path, rd.line_no, "layer count must be positive");

    MlpModel model;
    for (long l = 1; l <= declared; ++l) {
        auto hd = split_ws(rd.require("layer header"));
        if (hd.size() != 5 || hd[0] != "layer")
            throw ParseError(path, rd.line_no, "expected 'layer <index> <rows> <cols> <activation>'");
        if (std::strtol(hd[1].c_str(), nullptr, 10) != l)
            throw ParseError(path, rd.line_no, "layer index out of order, expected " + std::to_string(l));
        const long rows = std::strtol(hd[2].c_str(), nullptr, 10);
        const long cols = std::strtol(hd[3].c_str(), nullptr, 10);
        if (rows <= 0 || cols <= 0) throw ParseError(path, rd.line_no, "layer shape must be positive");
        const Activation act = parse_activation(hd[4], path, rd.line_no);
        if (l < declared && act != Activation::Relu)
            throw UnsupportedActivation(path, rd.line_no, "hidden layers must be tagged relu");

        AffineLayer layer;
        layer.weight = DenseMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));

        auto wh = split_ws(rd.require("weights header"));
        if (wh.size() == 2 && wh[0] == "weights" && wh[1] == "text") {
            for (long r = 0; r < rows; ++r) {
                auto toks = split_ws(rd.require("weight row"));
                if (static_cast<long>(toks.size()) != cols)
                    throw CountMismatch(path, rd.line_no,
                                        "weight row has " + std::to_string(toks.size()) +
                                            " values, expected " + std::to_string(cols));
                for (long c = 0; c < cols; ++c)
                    layer.weight(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                        parse_double(toks[static_cast<std::size_t>(c)], path, rd.line_no);
            }
        } else if (wh.size() == 3 && wh[0] == "weights" && wh[1] == "binary32") {
            const long cnt = std::strtol(wh[2].c_str(), nullptr, 10);
            if (cnt < 0) throw CountMismatch(path, rd.line_no, "negative binary32 count");
            read_binary_weights(rd, layer.weight, static_cast<std::size_t>(cnt));
        } else {
            throw ParseError(path, rd.line_no, "expected 'weights text' or 'weights binary32 <count>'");
        }

        auto bh = split_ws(rd.require("bias header"));
        if (bh.size() != 1 || bh[0] != "bias")
            throw ParseError(path, rd.line_no, "expected 'bias'");
        auto toks = split_ws(rd.require("bias row"));
        if (static_cast<long>(toks.size()) != rows)
            throw CountMismatch(path, rd.line_no, "bias has " + std::to_string(toks.size()) +
                                                      " values, expected " + std::to_string(rows));
        layer.bias.resize(static_cast<std::size_t>(rows));
        for (long r = 0; r < rows; ++r)
            layer.bias[static_cast<std::size_t>(r)] = parse_double(toks[static_cast<std::size_t>(r)], path, rd.line_no);

        if (!model.layers.empty() && layer.weight.cols != model.layers.back().weight.rows)
            throw DimensionMismatch(path + ":" + std::to_string(rd.line_no) + ": layer " +
                                    std::to_string(l) + " expects " + std::to_string(layer.weight.cols) +
                                    " inputs but the previous layer emits " +
                                    std::to_string(model.layers.back().weight.rows));
        model.layers.push_back(std::move(layer));
        if (l == declared) model.final_activation = act;
    }

    std::string extra;
    while (rd.next(extra))
        if (!split_ws(extra).empty())
            throw ParseError(path, rd.line_no, "trailing content after the last layer");
    return model;
}

}  // namespace detail

inline MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    return detail::load_model_stream(in, path);
}

struct SaveOptions {
    bool binary_weights = false;
};

inline void save_model_stream(const MlpModel& m, std::ostream& out, const SaveOptions& opt = {}) {
    validate_model(m);
    out << "relu-mlp 1\n";
    out << "layers " << m.layers.size() << "\n";
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const AffineLayer& layer = m.layers[l];
        const char* act = l + 1 < m.layers.size() ? "relu" : activation_name(m.final_activation);
        out << "layer " << (l + 1) << " " << layer.weight.rows << " " << layer.weight.cols << " "
            << act << "\n";
        if (opt.binary_weights) {
            out << "weights binary32 " << layer.weight.entries.size() << "\n";
            for (double v : layer.weight.entries) {
                const float f = static_cast<float>(v);
                unsigned bits;
                std::memcpy(&bits, &f, sizeof bits);
                const char raw[4] = {static_cast<char>(bits & 0xff), static_cast<char>(bits >> 8 & 0xff),
                                     static_cast<char>(bits >> 16 & 0xff), static_cast<char>(bits >> 24 & 0xff)};
                out.write(raw, 4);
            }
            out << "\n";
        } else {
            out << "weights text\n";
            for (std::size_t i = 0; i < layer.weight.rows; ++i) {
                for (std::size_t j = 0; j < layer.weight.cols; ++j) {
                    if (j) out << " ";
                    out << detail::format_double(layer.weight(i, j));
                }
                out << "\n";
            }
        }
        out << "bias\n";
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            if (i) out << " ";
            out << detail::format_double(layer.bias[i]);
        }
        out << "\n";
    }
}

inline void save_model(const MlpModel& m, const std::string& path, const SaveOptions& opt = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_model_stream(m, out, opt);
    if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline Vector parse_vector_line(const std::string& line, const std::string& path, std::size_t line_no) {
    std::string normalized = line;
    for (char& c : normalized)
        if (c == ',') c = ' ';
    Vector v;
    for (const auto& tok : split_ws(normalized)) v.push_back(parse_double(tok, path, line_no));
    return v;
}

}  // namespace detail

// One vector per nonempty line, entries separated by commas or whitespace.
inline std::vector<Vector> load_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vector file: " + path);
    detail::LineReader rd{in, path};
    std::vector<Vector> out;
    std::string line;
    while (rd.next(line)) {
        Vector v = detail::parse_vector_line(line, path, rd.line_no);
        if (!v.empty()) out.push_back(std::move(v));
    }
    return out;
}

// The whole file as one vector, independent of its line layout.
inline Vector load_vector(const std::string& path) {
    const auto rows = load_vectors(path);
    Vector flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    if (flat.empty()) throw ParseError(path, 1, "no numeric data");
    return flat;
}

inline void save_vectors_stream(const std::vector<Vector>& vs, std::ostream& out) {
    for (const auto& v : vs) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out << ",";
            out << detail::format_double(v[i]);
        }
        out << "\n";
    }
}

inline void save_vectors(const std::vector<Vector>& vs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_vectors_stream(vs, out);
    if (!out) throw IoError("write failed: " + path);
}

inline void save_report_stream(const SpectrumReport& report, std::ostream& out) {
    out << "layer_index,stage,stat,value,n_samples\n";
    for (const auto& row : report.rows)
        out << row.layer_index << "," << row.stage << "," << row.stat << ","
            << detail::format_double(row.value) << "," << row.n_samples << "\n";
}

inline void save_report(const SpectrumReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_report_stream(report, out);
    if (!out) throw IoError("write failed: " + path);
}

inline void save_sweep_stream(const CorrelationSweep& sweep, std::ostream& out) {
    out << "c,count,m_remaining,threshold_row_count\n";
    for (std::size_t i = 0; i < sweep.c_grid.size(); ++i)
        out << detail::format_double(sweep.c_grid[i]) << "," << sweep.counts[i] << ","
            << sweep.m_remaining << "," << sweep.threshold_row_count << "\n";
}

inline void save_sweep(const CorrelationSweep& sweep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_sweep_stream(sweep, out);
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace relu_preimage
