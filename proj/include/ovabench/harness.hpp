#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovabench/checkpoint.hpp"
#include "ovabench/config.hpp"
#include "ovabench/data.hpp"
#include "ovabench/metrics.hpp"

namespace ovabench::harness {

/// A trained model and how to run it.
struct Model {
    HeadKind head = HeadKind::SoftmaxAffine;
    nn::Activation activation = nn::Activation::ReluHidden;
    nn::ModelParams params;

    [[nodiscard]] Matrix probabilities(const Matrix& inputs) const;
    [[nodiscard]] heads::Predictions predict(const Matrix& inputs) const;
};

[[nodiscard]] Model model_from_checkpoint(const nn::Checkpoint& checkpoint);

/// Train/test split, OOD cloud and class means, all derived from the config seed.
struct ExperimentData {
    data::Dataset train;
    data::Dataset test;
    Matrix ood;
    Matrix class_means;
};

[[nodiscard]] ExperimentData prepare_data(const ExperimentConfig& config);

struct TrainLogEntry {
    std::size_t step = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<TrainLogEntry> log;
    double final_train_accuracy = 0.0;
};

/// Mini-batch SGD with batches drawn with replacement. Logs the batch loss and
/// full training accuracy every log_every steps and after the last step.
/// Throws NumericError naming the step and head on a non-finite loss.
[[nodiscard]] TrainResult train(const ExperimentConfig& config, const data::Dataset& train_data);

[[nodiscard]] double accuracy(const Model& model, const data::Dataset& dataset);

struct EvaluationResult {
    std::vector<metrics::PredictionRecord> records;  // in-distribution rows first, then OOD
    double accuracy = 0.0;
    metrics::EceResult ece;
    metrics::ThresholdCurve curve;
    std::optional<metrics::RankingResult> ranking;  // absent without OOD points
    metrics::ConfidenceHistograms histograms;
    nlohmann::json summary;
};

[[nodiscard]] std::vector<metrics::PredictionRecord> prediction_records(const Model& model,
                                                                        const data::Dataset& dataset,
                                                                        const Matrix& ood);

/// Every metric of an evaluation, computed from prediction records alone.
[[nodiscard]] EvaluationResult evaluate_records(std::vector<metrics::PredictionRecord> records,
                                                const ExperimentConfig& config);

[[nodiscard]] EvaluationResult evaluate(const Model& model, const data::Dataset& dataset, const Matrix& ood,
                                        const ExperimentConfig& config);

/// predictions.csv, calibration.csv, curve.csv, histograms.csv, metrics.json.
void write_evaluation(const EvaluationResult& result, const std::filesystem::path& dir);

struct SweepRow {
    std::string kind;  // "clean" for the intensity-0 row
    int intensity = 0;
    double accuracy = 0.0;
    double ece = 0.0;
};

struct IntensitySummary {
    int intensity = 0;
    metrics::BoxStats accuracy;
    metrics::BoxStats ece;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<IntensitySummary> by_intensity;
};

/// Corrupts the test set once per sweep entry and evaluates accuracy and ECE.
/// Box-plot statistics aggregate across corruption kinds per intensity.
[[nodiscard]] SweepResult shift_sweep(const Model& model, const data::Dataset& test,
                                      std::span<const data::CorruptionSpec> sweep, const ExperimentConfig& config);

/// sweep.csv and sweep_summary.csv.
void write_sweep(const SweepResult& result, const std::filesystem::path& dir);

struct LandscapeGrid {
    LandscapeSpec spec;
    Matrix confidence;        // resolution x resolution; row i is y_i, column j is x_j
    std::vector<int> labels;  // row-major like confidence

    [[nodiscard]] double x(std::size_t j) const;
    [[nodiscard]] double y(std::size_t i) const;
    [[nodiscard]] int label(std::size_t i, std::size_t j) const { return labels[i * spec.resolution + j]; }
};

/// Grid points in the order the landscape evaluates them (y-major).
[[nodiscard]] Matrix grid_points(const LandscapeSpec& spec);

[[nodiscard]] LandscapeGrid landscape(const Model& model, const LandscapeSpec& spec);

/// landscape.csv (x,y,confidence,label) and, if requested, landscape.pgm.
void write_landscape(const LandscapeGrid& grid, const std::filesystem::path& dir);

/// Binary 8-bit PGM; confidence 0 maps to 0 and 1 to 255; the first row is ymax.
void write_pgm(const LandscapeGrid& grid, const std::filesystem::path& path);

struct CenterReport {
    Matrix projected_embeddings;  // n x 2
    std::vector<int> labels;
    Matrix projected_centers;  // K x 2
    std::vector<double> alignment_errors;
    double mean_alignment_error = 0.0;
};

/// Compares per-class mean embeddings to the learned centers, and projects both
/// onto the top two principal axes of the embeddings. Distance heads only.
[[nodiscard]] CenterReport centers_report(const Model& model, const data::Dataset& train_data);

void write_centers(const CenterReport& report, const std::filesystem::path& path);

void write_train_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);

/// Outcome of one head in run_all.
struct HeadRun {
    HeadKind head = HeadKind::SoftmaxAffine;
    double train_accuracy = 0.0;
    EvaluationResult evaluation;
    SweepResult sweep;
};

struct RunAllResult {
    std::vector<HeadRun> runs;
    bool ok = false;
    std::string error;
};

/// Full pipeline for every configured head under config.output_dir:
/// one subdirectory per head, comparison.csv and MANIFEST.json at the top.
/// Stage failures are recorded in the manifest and reported through `ok`.
[[nodiscard]] RunAllResult run_all(const ExperimentConfig& config);

/// Files every head directory holds after a successful run_all.
[[nodiscard]] std::vector<std::string> expected_head_artifacts();

}  // namespace ovabench::harness
