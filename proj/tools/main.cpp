// Command line front end: classify preimages, test omnidirectionality, run
// invariance probes, and emit spectrum or correlation reports for ReLU
// networks stored in the text model format.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relu_preimage/relu_preimage.hpp"

namespace rp = relu_preimage;
using nlohmann::json;

namespace {

std::size_t thread_cap() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RELU_PREIMAGE_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && v > 0) n = static_cast<std::size_t>(v);
    }
    return n;
}

void emit_text(const std::string& text, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(output_path, std::ios::binary);
    if (!out) throw rp::IoError("cannot open for writing: " + output_path);
    out << text;
    if (!out) throw rp::IoError("write failed: " + output_path);
}

void emit_json(const json& j, const std::string& output_path) {
    emit_text(j.dump(2) + "\n", output_path);
}

const rp::AffineLayer& pick_layer(const rp::MlpModel& model, std::size_t index) {
    if (index == 0 || index > model.layers.size())
        throw rp::InvalidInput("layer index " + std::to_string(index) + " out of range 1.." +
                               std::to_string(model.layers.size()));
    return model.layers[index - 1];
}

rp::DenseMatrix load_matrix(const std::string& path) {
    const auto rows = rp::load_vectors(path);
    if (rows.empty()) throw rp::ParseError(path, 1, "no numeric data");
    rp::DenseMatrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols)
            throw rp::ParseError(path, i + 1, "row has " + std::to_string(rows[i].size()) +
                                                  " values, expected " + std::to_string(m.cols));
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

rp::Vector parse_grid(const std::string& spec) {
    double lo = 0.0, hi = 0.0;
    long count = 0;
    char extra = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &count, &extra) != 3 || count < 1 ||
        hi < lo)
        throw rp::InvalidInput("grid must be lo:hi:count with hi >= lo and count >= 1, got '" +
                               spec + "'");
    rp::Vector g(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] =
            count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

json verdict_json(const rp::OmniVerdict& v) {
    json j;
    j["is_omni"] = v.is_omni;
    if (v.witness) j["witness"] = *v.witness;
    return j;
}

const char* kind_name(rp::PreimageKind k) {
    switch (k) {
        case rp::PreimageKind::Singleton: return "Singleton";
        case rp::PreimageKind::FiniteVolume: return "FiniteVolume";
        case rp::PreimageKind::InfiniteVolume: return "InfiniteVolume";
    }
    return "InfiniteVolume";
}

int run_classify(const std::string& model_path, std::size_t layer_index,
                 const std::string& input_path, bool input_is_output, double act_tol,
                 const std::string& output_path) {
    const rp::MlpModel model = rp::load_model(model_path);
    const rp::AffineLayer& layer = pick_layer(model, layer_index);
    const rp::Vector data = rp::load_vector(input_path);
    rp::Vector y;
    if (input_is_output) {
        if (data.size() != layer.weight.rows)
            throw rp::DimensionMismatch("output vector has length " + std::to_string(data.size()) +
                                        ", layer emits " + std::to_string(layer.weight.rows));
        y = data;
    } else {
        if (data.size() != layer.weight.cols)
            throw rp::DimensionMismatch("input vector has length " + std::to_string(data.size()) +
                                        ", layer expects " + std::to_string(layer.weight.cols));
        y = rp::forward(layer, data);
    }

    const rp::PreimageClass result = rp::classify_preimage(layer, y, act_tol);
    json j;
    j["layer"] = layer_index;
    j["kind"] = kind_name(result.kind);
    j["diagnostics"] = result.diagnostics;
    if (result.point) j["point"] = *result.point;
    if (result.reduced) {
        j["nullspace_dim"] = result.reduced->nullspace_dim;
        j["num_inequalities"] = result.reduced->num_inequalities;
    }
    emit_json(j, output_path);
    return 0;
}

int run_omni(const std::string& matrix_path, const std::string& method,
             const std::string& output_path) {
    const rp::DenseMatrix a = load_matrix(matrix_path);
    json j;
    j["rows"] = a.rows;
    j["cols"] = a.cols;
    if (method == "hull") {
        const auto v = rp::is_omnidirectional_hull(a);
        j["hull"] = verdict_json(v);
        j["is_omni"] = v.is_omni;
    } else if (method == "cone") {
        const auto v = rp::is_omnidirectional_cone(a);
        j["cone"] = verdict_json(v);
        j["is_omni"] = v.is_omni;
    } else if (method == "stiemke") {
        const auto v = rp::is_omnidirectional_stiemke(a);
        j["stiemke"] = verdict_json(v);
        j["is_omni"] = v.is_omni;
    } else {
        const auto hull = rp::is_omnidirectional_hull(a);
        const auto cone = rp::is_omnidirectional_cone(a);
        j["hull"] = verdict_json(hull);
        j["cone"] = verdict_json(cone);
        j["boundary_degenerate"] = hull.is_omni != cone.is_omni;
        j["is_omni"] = hull.is_omni == cone.is_omni ? hull.is_omni : cone.is_omni;
    }
    emit_json(j, output_path);
    return 0;
}

int run_probe(const std::string& model_path, std::size_t layer_index,
              const std::string& x_star_path, const std::string& direction_path, double lower,
              double upper, double act_tol, const std::string& output_path) {
    const rp::MlpModel model = rp::load_model(model_path);
    const rp::AffineLayer& layer = pick_layer(model, layer_index);
    const rp::Vector x_star = rp::load_vector(x_star_path);
    const rp::Vector direction = rp::load_vector(direction_path);
    const std::size_t n = layer.weight.cols;
    const rp::Vector lo(n, lower), hi(n, upper);
    const rp::Vector x = rp::invariance_probe(layer, x_star, direction, lo, hi, act_tol);
    json j;
    j["layer"] = layer_index;
    j["x"] = x;
    j["objective_value"] = rp::dot(direction, x);
    j["baseline_objective"] = rp::dot(direction, x_star);
    j["displacement_inf"] = [&] {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(x[i] - x_star[i]));
        return d;
    }();
    emit_json(j, output_path);
    return 0;
}

int run_spectrum(const std::string& model_path, const std::string& inputs_path,
                 long random_inputs, unsigned seed, double act_tol,
                 const std::string& output_path) {
    const rp::MlpModel model = rp::load_model(model_path);
    std::vector<rp::Vector> inputs;
    if (!inputs_path.empty()) {
        inputs = rp::load_vectors(inputs_path);
        for (std::size_t i = 0; i < inputs.size(); ++i)
            if (inputs[i].size() != rp::input_dim(model))
                throw rp::ParseError(inputs_path, i + 1,
                                     "input row has length " + std::to_string(inputs[i].size()) +
                                         ", model expects " + std::to_string(rp::input_dim(model)));
    } else {
        if (random_inputs < 1) throw rp::InvalidInput("need --inputs or --random-inputs >= 1");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        inputs.resize(static_cast<std::size_t>(random_inputs));
        for (auto& x : inputs) {
            x.resize(rp::input_dim(model));
            for (double& v : x) v = gauss(rng);
        }
    }
    const rp::SpectrumReport report = rp::layerwise_report(model, inputs, thread_cap(), act_tol);
    std::ostringstream csv;
    rp::save_report_stream(report, csv);
    emit_text(csv.str(), output_path);
    return 0;
}

int run_corr_sweep(const std::string& model_path, std::size_t layer_index,
                   const std::string& input_path, const std::string& grid_spec, double act_tol,
                   const std::string& output_path) {
    const rp::MlpModel model = rp::load_model(model_path);
    if (layer_index == 0 || layer_index + 1 > model.layers.size())
        throw rp::InvalidInput("corr-sweep needs a hidden layer index in 1.." +
                               std::to_string(model.layers.size() - 1) +
                               " (no ReLU follows the final layer)");
    const rp::Vector x = rp::load_vector(input_path);
    if (x.size() != rp::input_dim(model))
        throw rp::DimensionMismatch("input vector has length " + std::to_string(x.size()) +
                                    ", model expects " + std::to_string(rp::input_dim(model)));

    // Prefix linearization up to the chosen layer and the units its ReLU
    // removes there.
    rp::DenseMatrix prefix = model.layers.front().weight;
    rp::Vector h = rp::matvec(model.layers.front().weight, x);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += model.layers.front().bias[i];
    for (std::size_t l = 1; l < layer_index; ++l) {
        std::vector<std::size_t> off;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i] <= act_tol) off.push_back(i);
        for (std::size_t r : off)
            for (std::size_t j = 0; j < prefix.cols; ++j) prefix(r, j) = 0.0;
        for (double& v : h) v = std::max(v, 0.0);
        prefix = rp::matmul(model.layers[l].weight, prefix);
        h = rp::matvec(model.layers[l].weight, h);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += model.layers[l].bias[i];
    }
    std::vector<std::size_t> removed;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] <= act_tol) removed.push_back(i);

    const rp::CorrelationSweep sweep = rp::correlation_sweep(prefix, removed, parse_grid(grid_spec));
    std::ostringstream csv;
    rp::save_sweep_stream(sweep, csv);
    emit_text(csv.str(), output_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Invertibility analysis for ReLU layers and rectifier networks"};
    app.require_subcommand(1);

    std::string model_path, input_path, output_path, matrix_path, x_star_path, direction_path;
    std::string method = "both", grid_spec = "0:6:61", inputs_path;
    std::size_t layer_index = 1;
    double act_tol = rp::kActTol, lower = 0.0, upper = 1.0;
    long random_inputs = 0;
    unsigned seed = 0;
    bool input_is_output = false;

    auto* classify = app.add_subcommand("classify", "Classify the preimage of a layer output");
    classify->add_option("--model", model_path, "model file")->required();
    classify->add_option("--layer", layer_index, "1-based layer index");
    classify->add_option("--input", input_path, "input vector file (or output vector with --y)")
        ->required();
    classify->add_flag("--y", input_is_output, "treat --input as the output activation vector");
    classify->add_option("--act-tol", act_tol, "activation threshold");
    classify->add_option("--output", output_path, "write JSON here instead of stdout");

    auto* omni = app.add_subcommand("omni", "Test whether matrix rows are omnidirectional");
    omni->add_option("--matrix", matrix_path, "matrix file, one row per line")->required();
    omni->add_option("--method", method, "hull, cone, stiemke, or both")
        ->check(CLI::IsMember({"hull", "cone", "stiemke", "both"}));
    omni->add_option("--output", output_path, "write JSON here instead of stdout");

    auto* probe = app.add_subcommand("probe", "Extreme same-output input inside a box");
    probe->add_option("--model", model_path, "model file")->required();
    probe->add_option("--layer", layer_index, "1-based layer index");
    probe->add_option("--x-star", x_star_path, "probe point file")->required();
    probe->add_option("--direction", direction_path, "objective direction file")->required();
    probe->add_option("--lower", lower, "box lower bound (default 0)");
    probe->add_option("--upper", upper, "box upper bound (default 1)");
    probe->add_option("--act-tol", act_tol, "activation threshold");
    probe->add_option("--output", output_path, "write JSON here instead of stdout");

    auto* spectrum = app.add_subcommand("spectrum", "Layerwise linearization spectra (CSV)");
    spectrum->add_option("--model", model_path, "model file")->required();
    spectrum->add_option("--inputs", inputs_path, "batch file, one input per line");
    spectrum->add_option("--random-inputs", random_inputs, "draw this many standard normal inputs");
    spectrum->add_option("--seed", seed, "seed for --random-inputs");
    spectrum->add_option("--act-tol", act_tol, "activation threshold");
    spectrum->add_option("--output", output_path, "write CSV here instead of stdout");

    auto* sweep = app.add_subcommand("corr-sweep", "Correlation threshold sweep (CSV)");
    sweep->add_option("--model", model_path, "model file")->required();
    sweep->add_option("--layer", layer_index, "1-based hidden layer index");
    sweep->add_option("--input", input_path, "input vector file")->required();
    sweep->add_option("--grid", grid_spec, "threshold grid as lo:hi:count");
    sweep->add_option("--act-tol", act_tol, "activation threshold");
    sweep->add_option("--output", output_path, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(classify))
            return run_classify(model_path, layer_index, input_path, input_is_output, act_tol,
                                output_path);
        if (app.got_subcommand(omni)) return run_omni(matrix_path, method, output_path);
        if (app.got_subcommand(probe))
            return run_probe(model_path, layer_index, x_star_path, direction_path, lower, upper,
                             act_tol, output_path);
        if (app.got_subcommand(spectrum))
            return run_spectrum(model_path, inputs_path, random_inputs, seed, act_tol, output_path);
        if (app.got_subcommand(sweep))
            return run_corr_sweep(model_path, layer_index, input_path, grid_spec, act_tol,
                                  output_path);
    } catch (const rp::InconsistentOutput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const rp::SolverStalled& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const rp::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const rp::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const rp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
