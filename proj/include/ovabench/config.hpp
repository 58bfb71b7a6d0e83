#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovabench/data.hpp"
#include "ovabench/head_kind.hpp"
#include "ovabench/heads.hpp"
#include "ovabench/network.hpp"

namespace ovabench::harness {

struct OptimizerConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t steps = 10000;
    std::size_t log_every = 100;
};

struct LandscapeSpec {
    double xmin = -50.0;
    double xmax = 50.0;
    double ymin = -50.0;
    double ymax = 50.0;
    std::size_t resolution = 200;
    bool write_pgm = true;
};

struct ExperimentConfig {
    data::RingParams ring;
    /// 1.0 trains and evaluates on the full generated set.
    double train_fraction = 0.5;

    std::vector<std::size_t> hidden_widths{16, 16};
    nn::Activation activation = nn::Activation::ReluHidden;
    HeadKind head = HeadKind::SoftmaxAffine;
    heads::CenterInit center_init = heads::CenterInit::Zeros;
    OptimizerConfig optimizer;

    std::vector<data::CorruptionSpec> sweep = default_sweep();
    /// count == 0 means "same size as the in-distribution test set".
    data::OodParams ood;

    std::size_t ece_bins = 15;
    std::size_t threshold_count = 101;
    std::size_t histogram_bins = 20;
    LandscapeSpec landscape;

    /// Heads trained by run-all.
    std::vector<HeadKind> heads{all_heads.begin(), all_heads.end()};

    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs";

    /// gaussian_noise and rotation at intensities 1..5.
    static std::vector<data::CorruptionSpec> default_sweep();
};

/// Throws std::invalid_argument describing the first violated precondition.
void validate(const ExperimentConfig& config);

/// Missing keys keep their defaults; unknown head or corruption names throw.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& config);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Independent sub-seeds derived from the root seed.
enum class SeedStream : std::uint64_t {
    Data = 1,
    Split = 2,
    Init = 3,
    Batches = 4,
    Ood = 5,
    Corruption = 100,  // + index into the sweep
};

[[nodiscard]] std::uint64_t derive_seed(std::uint64_t root, SeedStream stream, std::uint64_t offset = 0);

}  // namespace ovabench::harness
