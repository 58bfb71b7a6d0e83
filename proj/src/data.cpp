#include "ovabench/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ovabench/csv.hpp"
#include "ovabench/random.hpp"

namespace ovabench::data {

void Dataset::validate() const
{
    if (features.rows() != labels.size()) {
        throw ShapeError("dataset has " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw std::out_of_range("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
        }
    }
}

double ring_angle(const RingParams& params, std::size_t j)
{
    const auto jj = static_cast<double>(j);
    const auto k = static_cast<double>(params.num_classes);
    if (params.literal_angle) {
        return jj / (k * 2.0 * std::numbers::pi);
    }
    return 2.0 * std::numbers::pi * jj / k;
}

Matrix ring_means(const RingParams& params)
{
    Matrix means(params.num_classes, 2);
    for (std::size_t j = 0; j < params.num_classes; ++j) {
        const double theta = ring_angle(params, j);
        means(j, 0) = params.radius * std::cos(theta);
        means(j, 1) = params.radius * std::sin(theta);
    }
    return means;
}

Dataset gen_ring(const RingParams& params, std::uint64_t seed)
{
    if (params.num_classes < 2) {
        throw std::invalid_argument("gen_ring: need at least 2 classes");
    }
    if (params.per_class < 1) {
        throw std::invalid_argument("gen_ring: need at least 1 point per class");
    }
    if (!(params.radius > 0.0) || !(params.variance > 0.0)) {
        throw std::invalid_argument("gen_ring: radius and variance must be positive");
    }

    const Matrix means = ring_means(params);
    const double sd = std::sqrt(params.variance);
    Rng rng(seed);
    Dataset out;
    out.num_classes = params.num_classes;
    out.seed = seed;
    out.features = Matrix(params.num_classes * params.per_class, 2);
    out.labels.reserve(out.features.rows());
    std::size_t row = 0;
    for (std::size_t j = 0; j < params.num_classes; ++j) {
        for (std::size_t i = 0; i < params.per_class; ++i, ++row) {
            out.features(row, 0) = means(j, 0) + sd * rng.normal();
            out.features(row, 1) = means(j, 1) + sd * rng.normal();
            out.labels.push_back(static_cast<int>(j));
        }
    }
    out.provenance = {{"generator", "gen_ring"},
                      {"num_classes", params.num_classes},
                      {"per_class", params.per_class},
                      {"radius", params.radius},
                      {"variance", params.variance},
                      {"literal_angle", params.literal_angle}};
    return out;
}

std::string_view to_string(CorruptionKind kind) noexcept
{
    switch (kind) {
    case CorruptionKind::GaussianNoise: return "gaussian_noise";
    case CorruptionKind::Rotation: return "rotation";
    }
    return "unknown";
}

CorruptionKind parse_corruption_kind(std::string_view name)
{
    if (name == "gaussian_noise") {
        return CorruptionKind::GaussianNoise;
    }
    if (name == "rotation") {
        return CorruptionKind::Rotation;
    }
    throw std::invalid_argument("unknown corruption kind '" + std::string(name) + "'");
}

double noise_sigma(int intensity)
{
    return 0.5 * intensity * std::numbers::sqrt2;
}

double rotation_degrees(int intensity)
{
    return 5.0 * intensity;
}

Dataset corrupt(const Dataset& data, const CorruptionSpec& spec, std::uint64_t seed)
{
    if (spec.intensity < 0 || spec.intensity > 5) {
        throw std::invalid_argument("corruption intensity " + std::to_string(spec.intensity) +
                                    " outside [0, 5]");
    }
    Dataset out = data;
    out.provenance = {{"generator", "corrupt"},
                      {"kind", to_string(spec.kind)},
                      {"intensity", spec.intensity},
                      {"seed", seed},
                      {"source", data.provenance}};
    if (spec.intensity == 0) {
        return out;
    }
    switch (spec.kind) {
    case CorruptionKind::GaussianNoise: {
        const double sigma = noise_sigma(spec.intensity);
        Rng rng(seed);
        for (double& v : out.features.flat()) {
            v += sigma * rng.normal();
        }
        break;
    }
    case CorruptionKind::Rotation: {
        if (out.features.cols() != 2) {
            throw ShapeError("rotation corruption needs 2D features");
        }
        const double angle = rotation_degrees(spec.intensity) * std::numbers::pi / 180.0;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        for (std::size_t r = 0; r < out.features.rows(); ++r) {
            const double x = out.features(r, 0);
            const double y = out.features(r, 1);
            out.features(r, 0) = c * x - s * y;
            out.features(r, 1) = s * x + c * y;
        }
        break;
    }
    }
    return out;
}

OodCloud gen_ood(const OodParams& params, const Matrix& class_means, std::uint64_t seed)
{
    if (!(params.box_halfwidth > 0.0) || params.exclusion_radius < 0.0) {
        throw std::invalid_argument("gen_ood: box half-width must be positive and exclusion radius non-negative");
    }
    if (class_means.cols() != 2) {
        throw ShapeError("gen_ood: class means must be K x 2");
    }
    Rng rng(seed);
    OodCloud out;
    out.points = Matrix(params.count, 2);
    const std::size_t max_attempts = 1000 * params.count;
    const double r2 = params.exclusion_radius * params.exclusion_radius;
    std::size_t accepted = 0;
    while (accepted < params.count) {
        if (out.attempts >= max_attempts) {
            throw std::runtime_error("gen_ood: rejection sampling exceeded " + std::to_string(max_attempts) +
                                     " attempts; exclusion zones cover the box");
        }
        ++out.attempts;
        const double x = rng.uniform(-params.box_halfwidth, params.box_halfwidth);
        const double y = rng.uniform(-params.box_halfwidth, params.box_halfwidth);
        bool excluded = false;
        for (std::size_t j = 0; j < class_means.rows() && !excluded; ++j) {
            const double dx = x - class_means(j, 0);
            const double dy = y - class_means(j, 1);
            excluded = dx * dx + dy * dy <= r2 && params.exclusion_radius > 0.0;
        }
        if (!excluded) {
            out.points(accepted, 0) = x;
            out.points(accepted, 1) = y;
            ++accepted;
        }
    }
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    }
    data.validate();
    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }

    Rng rng(seed);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.size() < 2) {
            throw std::invalid_argument("split: class " + std::to_string(c) + " has fewer than 2 points");
        }
        // Fisher-Yates with our own generator; std::shuffle's use of the engine is unspecified.
        for (std::size_t i = rows.size() - 1; i > 0; --i) {
            std::swap(rows[i], rows[rng.below(i + 1)]);
        }
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows.size())));
        train_idx.insert(train_idx.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.insert(test_idx.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    }

    auto take = [&](const std::vector<std::size_t>& idx, std::string_view side) {
        Dataset out;
        out.features = gather_rows(data.features, idx);
        out.labels.reserve(idx.size());
        for (const auto i : idx) {
            out.labels.push_back(data.labels[i]);
        }
        out.num_classes = data.num_classes;
        out.seed = data.seed;
        out.provenance = {{"generator", "split"},
                          {"side", side},
                          {"train_fraction", train_fraction},
                          {"seed", seed},
                          {"source", data.provenance}};
        return out;
    };
    return {take(train_idx, "train"), take(test_idx, "test")};
}

void write_csv(const Dataset& data, const std::filesystem::path& path)
{
    std::vector<std::string> header;
    for (std::size_t c = 0; c < data.features.cols(); ++c) {
        header.push_back("x" + std::to_string(c));
    }
    header.emplace_back("label");
    auto out = csv::open_with_header(path, header);
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (const double v : data.features.row(r)) {
            out << csv::format_double(v) << ',';
        }
        out << data.labels[r] << '\n';
    }
}

Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes)
{
    const auto table = csv::read(path);
    const std::size_t label_col = table.column("label");
    const std::size_t dim = table.header.size() - 1;
    Dataset out;
    out.num_classes = num_classes;
    out.features = Matrix(table.rows.size(), dim);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::size_t c = 0;
        for (std::size_t f = 0; f < table.header.size(); ++f) {
            if (f == label_col) {
                out.labels.push_back(static_cast<int>(csv::parse_int(table.rows[r][f])));
            } else {
                out.features(r, c++) = csv::parse_double(table.rows[r][f]);
            }
        }
    }
    out.provenance = {{"generator", "read_csv"}, {"path", path.string()}};
    out.validate();
    return out;
}

void write_metadata(const Dataset& data, const std::filesystem::path& path)
{
    nlohmann::json meta = data.provenance;
    meta["seed"] = data.seed;
    meta["prng"] = Rng::algorithm;
    meta["rows"] = data.size();
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << meta.dump(2) << '\n';
}

}  // namespace ovabench::data
