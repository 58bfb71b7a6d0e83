#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ovabench/matrix.hpp"

namespace ovabench::metrics {

struct PredictionRecord {
    double confidence = 0.0;
    int predicted_label = 0;
    std::optional<int> true_label;  // empty for out-of-distribution inputs

    [[nodiscard]] bool is_ood() const noexcept { return !true_label.has_value(); }
    /// OOD records are never correct.
    [[nodiscard]] bool correct() const noexcept { return true_label && *true_label == predicted_label; }
};

/// Bin of `value` among `num_bins` equal-width bins on [0, 1]. Values on an
/// interior edge go to the upper bin; 1.0 goes to the top bin.
[[nodiscard]] std::size_t bin_index(double value, std::size_t num_bins);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;  // 0 when empty
    double accuracy = 0.0;         // 0 when empty
};

struct CalibrationTable {
    std::vector<double> edges;  // num_bins + 1
    std::vector<CalibrationBin> bins;
};

struct EceResult {
    double ece = 0.0;
    CalibrationTable table;  // also the reliability diagram
};

/// Expected calibration error over equal-width bins:
/// sum_i (|B_i| / N) * |acc(B_i) - conf(B_i)| with N the record count.
[[nodiscard]] EceResult ece(std::span<const PredictionRecord> records, std::size_t num_bins = 15);

struct ThresholdPoint {
    double threshold = 0.0;
    std::size_t retained = 0;
    std::optional<double> accuracy;  // undefined when nothing is retained
};

using ThresholdCurve = std::vector<ThresholdPoint>;

/// Accuracy of the records with confidence >= tau, for each tau. OOD records count as errors.
[[nodiscard]] ThresholdCurve accuracy_vs_confidence(std::span<const PredictionRecord> records,
                                                    std::span<const double> thresholds);

/// `count` evenly spaced thresholds from 0 to 1 inclusive.
[[nodiscard]] std::vector<double> uniform_thresholds(std::size_t count = 101);

struct RankingResult {
    double auroc = 0.0;
    double auprc = 0.0;
    std::vector<std::pair<double, double>> roc_points;  // (false positive rate, true positive rate)
    std::vector<std::pair<double, double>> pr_points;   // (recall, precision)
};

/// Ranking quality of `scores` for separating positives from negatives.
/// AUROC integrates the ROC curve over tied-score groups, which equals the
/// Mann-Whitney statistic with ties counted as one half. AUPRC is the
/// step-wise sum of precision times recall increments.
[[nodiscard]] RankingResult auroc_auprc(std::span<const double> scores, const std::vector<bool>& is_positive);

struct ConfidenceHistograms {
    std::vector<double> edges;
    std::vector<std::size_t> correct_id;
    std::vector<std::size_t> incorrect_id;
    std::vector<std::size_t> ood;
};

[[nodiscard]] ConfidenceHistograms confidence_histograms(std::span<const double> correct_id,
                                                         std::span<const double> incorrect_id,
                                                         std::span<const double> ood, std::size_t num_bins);

struct BoxStats {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Five-number summary; quartiles interpolate linearly between order statistics
/// at position q * (n - 1).
[[nodiscard]] BoxStats boxplot_stats(std::span<const double> values);

struct Pca2Result {
    Matrix projected;        // n x 2
    Matrix extra_projected;  // m x 2
    Matrix components;       // 2 x d, orthonormal rows
    std::array<double, 2> eigenvalues{};
    std::vector<double> mean;
};

/// Projects `points` and `extra_points` onto the top two principal axes of
/// `points`. Axes come from power iteration with deflation on the sample
/// covariance; each axis is signed so its largest-magnitude entry is positive.
[[nodiscard]] Pca2Result pca2(const Matrix& points, const Matrix& extra_points);

/// CSV with header confidence,predicted_label,true_label,is_ood.
void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path);
[[nodiscard]] std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace ovabench::metrics
