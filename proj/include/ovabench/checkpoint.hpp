#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ovabench/head_kind.hpp"
#include "ovabench/network.hpp"

namespace ovabench::nn {

struct Checkpoint {
    HeadKind head = HeadKind::SoftmaxAffine;
    Activation activation = Activation::ReluHidden;
    std::uint64_t seed = 0;
    ModelParams params;

    bool operator==(const Checkpoint&) const = default;
};

[[nodiscard]] std::string_view to_string(Activation activation) noexcept;
[[nodiscard]] Activation parse_activation(std::string_view name);

/// {"head", "activation", "seed", "tensors": [{"name", "shape", "data"}...]}
/// with data flattened row-major. Doubles are written in shortest round-trip form.
[[nodiscard]] nlohmann::json to_json(const Checkpoint& checkpoint);
[[nodiscard]] Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ovabench::nn
