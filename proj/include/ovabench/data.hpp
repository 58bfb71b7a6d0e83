#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovabench/matrix.hpp"

namespace ovabench::data {

struct Dataset {
    Matrix features;  // n x d
    std::vector<int> labels;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;
    nlohmann::json provenance;  // generator name and parameters

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    /// Throws if rows and labels disagree or a label is outside [0, num_classes).
    void validate() const;
};

struct RingParams {
    std::size_t num_classes = 10;
    std::size_t per_class = 1000;
    double radius = 20.0;
    double variance = 2.0;
    /// Use the angle j / (K * 2 pi) as printed instead of 2 pi j / K.
    bool literal_angle = false;
};

/// Angle of class j's mean on the ring.
[[nodiscard]] double ring_angle(const RingParams& params, std::size_t j);

/// K x 2 matrix of class means.
[[nodiscard]] Matrix ring_means(const RingParams& params);

/// Isotropic 2D Gaussian blobs centered on a circle; rows are grouped by class.
[[nodiscard]] Dataset gen_ring(const RingParams& params, std::uint64_t seed);

enum class CorruptionKind { GaussianNoise, Rotation };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int intensity = 1;  // 1..5; 0 is the identity

    bool operator==(const CorruptionSpec&) const = default;
};

[[nodiscard]] std::string_view to_string(CorruptionKind kind) noexcept;
[[nodiscard]] CorruptionKind parse_corruption_kind(std::string_view name);

/// Noise standard deviation for gaussian_noise: 0.5 * intensity * sqrt(2).
[[nodiscard]] double noise_sigma(int intensity);
/// Rotation angle in degrees: 5 * intensity.
[[nodiscard]] double rotation_degrees(int intensity);

[[nodiscard]] Dataset corrupt(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed);

struct OodParams {
    std::size_t count = 0;
    double box_halfwidth = 50.0;
    double exclusion_radius = 8.0;
};

struct OodCloud {
    Matrix points;  // n x 2
    std::size_t attempts = 0;
};

/// Uniform samples on the square [-h, h]^2 rejecting anything within the
/// exclusion radius of a class mean. Gives up after 1000 * n attempts.
[[nodiscard]] OodCloud gen_ood(const OodParams& params, const Matrix& class_means, std::uint64_t seed);

/// Stratified split: each class is shuffled and floor(train_fraction * count)
/// of its rows go to the training side.
[[nodiscard]] std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// CSV with header x0,x1,...,label.
void write_csv(const Dataset& data, const std::filesystem::path& path);
[[nodiscard]] Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes);

/// Sidecar metadata: generator, parameters, seed and PRNG algorithm.
void write_metadata(const Dataset& data, const std::filesystem::path& path);

}  // namespace ovabench::data
