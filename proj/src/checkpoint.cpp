#include "ovabench/checkpoint.hpp"

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace ovabench::nn {

std::string_view to_string(Activation activation) noexcept
{
    switch (activation) {
    case Activation::Relu: return "relu";
    case Activation::ReluHidden: return "relu_hidden";
    case Activation::Identity: return "identity";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name)
{
    for (const auto a : {Activation::Relu, Activation::ReluHidden, Activation::Identity}) {
        if (to_string(a) == name) {
            return a;
        }
    }
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

nlohmann::json to_json(const Checkpoint& checkpoint)
{
    nlohmann::json tensors = nlohmann::json::array();
    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols, std::span<const double> data,
                   bool vector) {
        nlohmann::json shape = vector ? nlohmann::json::array({cols}) : nlohmann::json::array({rows, cols});
        tensors.push_back({{"name", name}, {"shape", shape}, {"data", std::vector<double>(data.begin(), data.end())}});
    };
    const auto& p = checkpoint.params;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& layer = p.layers[i];
        const std::string prefix = "layer" + std::to_string(i);
        add(prefix + ".weight", layer.weight.rows(), layer.weight.cols(), layer.weight.flat(), false);
        add(prefix + ".bias", 1, layer.bias.size(), layer.bias, true);
    }
    add("head.weight", p.head_weights.rows(), p.head_weights.cols(), p.head_weights.flat(), false);
    if (p.head_biases) {
        add("head.bias", 1, p.head_biases->size(), *p.head_biases, true);
    }
    return {{"format", "ovabench-checkpoint"},
            {"version", 1},
            {"head", to_string(checkpoint.head)},
            {"activation", to_string(checkpoint.activation)},
            {"seed", checkpoint.seed},
            {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc)
{
    if (doc.value("format", "") != "ovabench-checkpoint") {
        throw std::invalid_argument("not an ovabench checkpoint");
    }
    Checkpoint out;
    out.head = parse_head_kind(doc.at("head").get<std::string>());
    out.activation = parse_activation(doc.at("activation").get<std::string>());
    out.seed = doc.at("seed").get<std::uint64_t>();

    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& t : doc.at("tensors")) {
        by_name[t.at("name").get<std::string>()] = &t;
    }
    auto matrix = [&](const std::string& name) {
        const auto& t = *by_name.at(name);
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) {
            throw ShapeError(name + ": expected a 2D shape");
        }
        return Matrix(shape[0], shape[1], t.at("data").get<std::vector<double>>());
    };
    auto vector = [&](const std::string& name) {
        const auto& t = *by_name.at(name);
        auto data = t.at("data").get<std::vector<double>>();
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 1 || shape[0] != data.size()) {
            throw ShapeError(name + ": shape does not match data");
        }
        return data;
    };

    for (std::size_t i = 0; by_name.contains("layer" + std::to_string(i) + ".weight"); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        out.params.layers.push_back({matrix(prefix + ".weight"), vector(prefix + ".bias")});
    }
    out.params.head_weights = matrix("head.weight");
    if (by_name.contains("head.bias")) {
        out.params.head_biases = vector("head.bias");
    }
    out.params.validate_shapes();
    check_finite(out.params);
    return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_json(checkpoint).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace ovabench::nn
