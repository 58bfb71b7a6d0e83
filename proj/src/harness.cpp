#include "ovabench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ovabench/csv.hpp"
#include "ovabench/random.hpp"

namespace ovabench::harness {

using nlohmann::json;
namespace fs = std::filesystem;

Matrix Model::probabilities(const Matrix& inputs) const
{
    return heads::infer(head, params, inputs, activation);
}

heads::Predictions Model::predict(const Matrix& inputs) const
{
    return heads::predict(probabilities(inputs));
}

Model model_from_checkpoint(const nn::Checkpoint& checkpoint)
{
    heads::validate_head(checkpoint.head, checkpoint.params);
    return {checkpoint.head, checkpoint.activation, checkpoint.params};
}

ExperimentData prepare_data(const ExperimentConfig& config)
{
    validate(config);
    ExperimentData out;
    auto full = data::gen_ring(config.ring, derive_seed(config.seed, SeedStream::Data));
    if (config.train_fraction >= 1.0) {
        out.train = full;
        out.test = std::move(full);
    } else {
        std::tie(out.train, out.test) =
            data::split(full, config.train_fraction, derive_seed(config.seed, SeedStream::Split));
    }
    out.class_means = data::ring_means(config.ring);
    data::OodParams ood = config.ood;
    if (ood.count == 0) {
        ood.count = out.test.size();
    }
    out.ood = data::gen_ood(ood, out.class_means, derive_seed(config.seed, SeedStream::Ood)).points;
    return out;
}

double accuracy(const Model& model, const data::Dataset& dataset)
{
    const auto pred = model.predict(dataset.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        correct += pred.labels[i] == dataset.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train(const ExperimentConfig& config, const data::Dataset& train_data)
{
    validate(config);
    train_data.validate();
    if (train_data.size() == 0) {
        throw std::invalid_argument("train: empty training set");
    }
    Rng init_rng(derive_seed(config.seed, SeedStream::Init));
    TrainResult out;
    out.model.head = config.head;
    out.model.activation = config.activation;
    out.model.params = heads::init_model(config.head, train_data.features.cols(), config.hidden_widths,
                                         train_data.num_classes, init_rng, config.center_init);

    const auto& opt = config.optimizer;
    auto state = nn::OptimizerState::for_params(out.model.params, opt.learning_rate, opt.momentum);
    Rng batch_rng(derive_seed(config.seed, SeedStream::Batches));
    std::vector<std::size_t> rows(opt.batch_size);
    std::vector<int> labels(opt.batch_size);
    const std::string head_name(to_string(config.head));

    double last_loss = std::nan("");
    for (std::size_t step = 0; step < opt.steps; ++step) {
        for (std::size_t i = 0; i < opt.batch_size; ++i) {
            rows[i] = batch_rng.below(train_data.size());
            labels[i] = train_data.labels[rows[i]];
        }
        const Matrix batch = gather_rows(train_data.features, rows);
        try {
            auto obj = heads::objective(config.head, out.model.params, batch, labels, config.activation);
            last_loss = obj.loss;
            nn::sgd_step(out.model.params, obj.grads, state);
        } catch (const NumericError& e) {
            throw NumericError("training head '" + head_name + "' diverged at step " + std::to_string(step) + ": " +
                               e.what());
        }
        if ((step + 1) % opt.log_every == 0 || step + 1 == opt.steps) {
            out.log.push_back({step + 1, last_loss, accuracy(out.model, train_data)});
        }
    }
    out.final_train_accuracy = out.log.empty() ? accuracy(out.model, train_data) : out.log.back().train_accuracy;
    if (out.log.empty()) {
        out.log.push_back({0, last_loss, out.final_train_accuracy});
    }
    return out;
}

std::vector<metrics::PredictionRecord> prediction_records(const Model& model, const data::Dataset& dataset,
                                                          const Matrix& ood)
{
    std::vector<metrics::PredictionRecord> records;
    records.reserve(dataset.size() + ood.rows());
    const auto id = model.predict(dataset.features);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        records.push_back({id.confidence[i], id.labels[i], dataset.labels[i]});
    }
    if (ood.rows() > 0) {
        const auto out = model.predict(ood);
        for (std::size_t i = 0; i < ood.rows(); ++i) {
            records.push_back({out.confidence[i], out.labels[i], std::nullopt});
        }
    }
    return records;
}

EvaluationResult evaluate_records(std::vector<metrics::PredictionRecord> records, const ExperimentConfig& config)
{
    EvaluationResult out;
    out.records = std::move(records);

    std::vector<metrics::PredictionRecord> id;
    std::vector<double> correct_conf;
    std::vector<double> incorrect_conf;
    std::vector<double> ood_conf;
    std::vector<double> scores;
    std::vector<bool> positive;
    for (const auto& r : out.records) {
        scores.push_back(r.confidence);
        positive.push_back(!r.is_ood());
        if (r.is_ood()) {
            ood_conf.push_back(r.confidence);
            continue;
        }
        id.push_back(r);
        (r.correct() ? correct_conf : incorrect_conf).push_back(r.confidence);
    }
    if (id.empty()) {
        throw std::invalid_argument("evaluate: no in-distribution records");
    }

    out.accuracy = static_cast<double>(correct_conf.size()) / static_cast<double>(id.size());
    out.ece = metrics::ece(id, config.ece_bins);
    const auto thresholds = metrics::uniform_thresholds(config.threshold_count);
    out.curve = metrics::accuracy_vs_confidence(out.records, thresholds);
    out.histograms = metrics::confidence_histograms(correct_conf, incorrect_conf, ood_conf, config.histogram_bins);

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (const double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };
    std::vector<double> id_conf = correct_conf;
    id_conf.insert(id_conf.end(), incorrect_conf.begin(), incorrect_conf.end());

    out.summary = {{"num_id", id.size()},
                   {"num_ood", ood_conf.size()},
                   {"accuracy", out.accuracy},
                   {"ece", out.ece.ece},
                   {"ece_bins", config.ece_bins},
                   {"mean_confidence_id", mean(id_conf)}};
    if (!ood_conf.empty()) {
        out.ranking = metrics::auroc_auprc(scores, positive);
        out.summary["auroc"] = out.ranking->auroc;
        out.summary["auprc"] = out.ranking->auprc;
        out.summary["mean_confidence_ood"] = mean(ood_conf);
    }
    return out;
}

EvaluationResult evaluate(const Model& model, const data::Dataset& dataset, const Matrix& ood,
                          const ExperimentConfig& config)
{
    if (dataset.features.cols() != model.params.input_dim() ||
        (ood.rows() > 0 && ood.cols() != model.params.input_dim())) {
        throw ShapeError("evaluate: input dimension does not match the model");
    }
    auto result = evaluate_records(prediction_records(model, dataset, ood), config);
    result.summary["head"] = to_string(model.head);
    return result;
}

void write_evaluation(const EvaluationResult& result, const fs::path& dir)
{
    fs::create_directories(dir);
    metrics::write_predictions(result.records, dir / "predictions.csv");
    {
        auto out = csv::open_with_header(dir / "calibration.csv",
                                         {"bin", "lower", "upper", "count", "mean_confidence", "accuracy"});
        for (std::size_t b = 0; b < result.ece.table.bins.size(); ++b) {
            const auto& bin = result.ece.table.bins[b];
            out << b << ',' << csv::format_double(bin.lower) << ',' << csv::format_double(bin.upper) << ','
                << bin.count << ',';
            if (bin.count > 0) {
                out << csv::format_double(bin.mean_confidence) << ',' << csv::format_double(bin.accuracy);
            } else {
                out << ',';
            }
            out << '\n';
        }
    }
    {
        auto out = csv::open_with_header(dir / "curve.csv", {"threshold", "retained", "accuracy"});
        for (const auto& p : result.curve) {
            out << csv::format_double(p.threshold) << ',' << p.retained << ','
                << (p.accuracy ? csv::format_double(*p.accuracy) : "") << '\n';
        }
    }
    {
        const auto& h = result.histograms;
        auto out = csv::open_with_header(dir / "histograms.csv",
                                         {"lower", "upper", "correct_id", "incorrect_id", "ood"});
        for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
            out << csv::format_double(h.edges[b]) << ',' << csv::format_double(h.edges[b + 1]) << ','
                << h.correct_id[b] << ',' << h.incorrect_id[b] << ',' << h.ood[b] << '\n';
        }
    }
    std::ofstream out(dir / "metrics.json");
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / "metrics.json").string());
    }
    out << result.summary.dump(2) << '\n';
}

SweepResult shift_sweep(const Model& model, const data::Dataset& test, std::span<const data::CorruptionSpec> sweep,
                        const ExperimentConfig& config)
{
    if (sweep.empty()) {
        throw std::invalid_argument("shift_sweep: empty sweep");
    }
    auto score = [&](const data::Dataset& ds) {
        const auto r = evaluate_records(prediction_records(model, ds, Matrix()), config);
        return std::pair{r.accuracy, r.ece.ece};
    };

    SweepResult out;
    const auto [clean_acc, clean_ece] = score(test);
    out.rows.push_back({"clean", 0, clean_acc, clean_ece});
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const auto shifted = data::corrupt(test, sweep[i], derive_seed(config.seed, SeedStream::Corruption, i));
        const auto [acc, e] = score(shifted);
        out.rows.push_back({std::string(data::to_string(sweep[i].kind)), sweep[i].intensity, acc, e});
    }

    std::vector<int> intensities;
    for (const auto& row : out.rows) {
        if (std::ranges::find(intensities, row.intensity) == intensities.end()) {
            intensities.push_back(row.intensity);
        }
    }
    std::ranges::sort(intensities);
    for (const int level : intensities) {
        std::vector<double> accs;
        std::vector<double> eces;
        for (const auto& row : out.rows) {
            if (row.intensity == level) {
                accs.push_back(row.accuracy);
                eces.push_back(row.ece);
            }
        }
        out.by_intensity.push_back({level, metrics::boxplot_stats(accs), metrics::boxplot_stats(eces)});
    }
    return out;
}

void write_sweep(const SweepResult& result, const fs::path& dir)
{
    fs::create_directories(dir);
    {
        auto out = csv::open_with_header(dir / "sweep.csv", {"kind", "intensity", "accuracy", "ece"});
        for (const auto& row : result.rows) {
            out << row.kind << ',' << row.intensity << ',' << csv::format_double(row.accuracy) << ','
                << csv::format_double(row.ece) << '\n';
        }
    }
    auto out = csv::open_with_header(dir / "sweep_summary.csv", {"intensity", "metric", "min", "q1", "median", "q3",
                                                                 "max"});
    for (const auto& s : result.by_intensity) {
        for (const auto& [name, stats] : {std::pair{"accuracy", s.accuracy}, std::pair{"ece", s.ece}}) {
            out << s.intensity << ',' << name << ',' << csv::format_double(stats.min) << ','
                << csv::format_double(stats.q1) << ',' << csv::format_double(stats.median) << ','
                << csv::format_double(stats.q3) << ',' << csv::format_double(stats.max) << '\n';
        }
    }
}

double LandscapeGrid::x(std::size_t j) const
{
    return spec.xmin + (spec.xmax - spec.xmin) * static_cast<double>(j) / static_cast<double>(spec.resolution - 1);
}

double LandscapeGrid::y(std::size_t i) const
{
    return spec.ymin + (spec.ymax - spec.ymin) * static_cast<double>(i) / static_cast<double>(spec.resolution - 1);
}

Matrix grid_points(const LandscapeSpec& spec)
{
    if (spec.resolution < 2) {
        throw std::invalid_argument("landscape: resolution must be >= 2");
    }
    const LandscapeGrid probe{spec, {}, {}};
    Matrix points(spec.resolution * spec.resolution, 2);
    for (std::size_t i = 0; i < spec.resolution; ++i) {
        for (std::size_t j = 0; j < spec.resolution; ++j) {
            points(i * spec.resolution + j, 0) = probe.x(j);
            points(i * spec.resolution + j, 1) = probe.y(i);
        }
    }
    return points;
}

LandscapeGrid landscape(const Model& model, const LandscapeSpec& spec)
{
    if (model.params.input_dim() != 2) {
        throw ShapeError("landscape: model input must be 2-dimensional");
    }
    const Matrix points = grid_points(spec);
    const auto pred = model.predict(points);
    LandscapeGrid grid{spec, Matrix(spec.resolution, spec.resolution, pred.confidence), pred.labels};
    return grid;
}

void write_landscape(const LandscapeGrid& grid, const fs::path& dir)
{
    fs::create_directories(dir);
    auto out = csv::open_with_header(dir / "landscape.csv", {"x", "y", "confidence", "label"});
    for (std::size_t i = 0; i < grid.spec.resolution; ++i) {
        for (std::size_t j = 0; j < grid.spec.resolution; ++j) {
            out << csv::format_double(grid.x(j)) << ',' << csv::format_double(grid.y(i)) << ','
                << csv::format_double(grid.confidence(i, j)) << ',' << grid.label(i, j) << '\n';
        }
    }
    if (grid.spec.write_pgm) {
        write_pgm(grid, dir / "landscape.pgm");
    }
}

void write_pgm(const LandscapeGrid& grid, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    const std::size_t res = grid.spec.resolution;
    out << "P5\n" << res << ' ' << res << "\n255\n";
    std::vector<unsigned char> row(res);
    for (std::size_t i = res; i-- > 0;) {
        for (std::size_t j = 0; j < res; ++j) {
            const double c = std::clamp(grid.confidence(i, j), 0.0, 1.0);
            row[j] = static_cast<unsigned char>(std::lround(c * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

CenterReport centers_report(const Model& model, const data::Dataset& train_data)
{
    if (!is_distance_head(model.head)) {
        throw std::invalid_argument("centers_report: head '" + std::string(to_string(model.head)) +
                                    "' has no class centers");
    }
    train_data.validate();
    const auto trace = nn::forward(model.params, train_data.features, model.activation);
    const Matrix& emb = trace.embedding();
    const Matrix& w = model.params.head_weights;
    const std::size_t k = w.cols();
    const std::size_t dim = w.rows();

    Matrix class_mean(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < emb.rows(); ++r) {
        const auto c = static_cast<std::size_t>(train_data.labels[r]);
        ++counts[c];
        for (std::size_t i = 0; i < dim; ++i) {
            class_mean(c, i) += emb(r, i);
        }
    }

    CenterReport out;
    out.alignment_errors.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            throw std::invalid_argument("centers_report: class " + std::to_string(c) + " has no training points");
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            class_mean(c, i) /= static_cast<double>(counts[c]);
            const double diff = class_mean(c, i) - w(i, c);
            sq += diff * diff;
        }
        out.alignment_errors[c] = std::sqrt(sq);
        out.mean_alignment_error += out.alignment_errors[c] / static_cast<double>(k);
    }

    Matrix centers(k, dim);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < dim; ++i) {
            centers(c, i) = w(i, c);
        }
    }
    auto pca = metrics::pca2(emb, centers);
    out.projected_embeddings = std::move(pca.projected);
    out.projected_centers = std::move(pca.extra_projected);
    out.labels = train_data.labels;
    return out;
}

void write_centers(const CenterReport& report, const fs::path& path)
{
    auto out = csv::open_with_header(path, {"kind", "label", "pc1", "pc2", "alignment_error"});
    for (std::size_t r = 0; r < report.projected_embeddings.rows(); ++r) {
        out << "embedding," << report.labels[r] << ',' << csv::format_double(report.projected_embeddings(r, 0))
            << ',' << csv::format_double(report.projected_embeddings(r, 1)) << ",\n";
    }
    for (std::size_t c = 0; c < report.projected_centers.rows(); ++c) {
        out << "center," << c << ',' << csv::format_double(report.projected_centers(c, 0)) << ','
            << csv::format_double(report.projected_centers(c, 1)) << ','
            << csv::format_double(report.alignment_errors[c]) << '\n';
    }
}

void write_train_log(const std::vector<TrainLogEntry>& log, const fs::path& path)
{
    auto out = csv::open_with_header(path, {"step", "loss", "train_accuracy"});
    for (const auto& e : log) {
        out << e.step << ',' << (std::isfinite(e.loss) ? csv::format_double(e.loss) : "") << ','
            << csv::format_double(e.train_accuracy) << '\n';
    }
}

std::vector<std::string> expected_head_artifacts()
{
    return {"checkpoint.json", "train_log.csv", "metrics.json", "predictions.csv", "calibration.csv",
            "curve.csv",       "sweep.csv",     "landscape.csv"};
}

namespace {

class Manifest {
public:
    explicit Manifest(fs::path path) : path_(std::move(path)) { flush(); }

    void record(std::string_view head, std::string_view stage, std::string_view status, std::string_view detail = {})
    {
        json entry = {{"head", head}, {"stage", stage}, {"status", status}};
        if (!detail.empty()) {
            entry["detail"] = detail;
        }
        doc_["stages"].push_back(entry);
        flush();
    }

    void finish(bool ok)
    {
        doc_["complete"] = ok;
        flush();
    }

private:
    void flush() const
    {
        std::ofstream out(path_);
        out << doc_.dump(2) << '\n';
    }

    fs::path path_;
    json doc_ = {{"complete", false}, {"stages", json::array()}};
};

}  // namespace

RunAllResult run_all(const ExperimentConfig& config)
{
    validate(config);
    const fs::path root = config.output_dir;
    fs::create_directories(root);
    {
        std::ofstream out(root / "config.json");
        out << to_json(config).dump(2) << '\n';
    }
    Manifest manifest(root / "MANIFEST.json");
    RunAllResult result;
    std::string current_head = "-";
    std::string current_stage = "data";
    try {
        const auto data = prepare_data(config);
        data::write_csv(data.train, root / "train.csv");
        data::write_csv(data.test, root / "test.csv");
        data::write_metadata(data.train, root / "train.json");
        data::write_metadata(data.test, root / "test.json");
        {
            auto out = csv::open_with_header(root / "ood.csv", {"x0", "x1"});
            for (std::size_t r = 0; r < data.ood.rows(); ++r) {
                out << csv::format_double(data.ood(r, 0)) << ',' << csv::format_double(data.ood(r, 1)) << '\n';
            }
        }
        manifest.record(current_head, current_stage, "done");

        for (const HeadKind head : config.heads) {
            current_head = to_string(head);
            const fs::path dir = root / current_head;
            fs::create_directories(dir);
            ExperimentConfig head_config = config;
            head_config.head = head;
            HeadRun run;
            run.head = head;

            current_stage = "train";
            const auto trained = train(head_config, data.train);
            run.train_accuracy = trained.final_train_accuracy;
            nn::save_checkpoint({head, config.activation, config.seed, trained.model.params}, dir / "checkpoint.json");
            write_train_log(trained.log, dir / "train_log.csv");
            manifest.record(current_head, current_stage, "done");

            current_stage = "evaluate";
            run.evaluation = evaluate(trained.model, data.test, data.ood, head_config);
            write_evaluation(run.evaluation, dir);
            manifest.record(current_head, current_stage, "done");

            current_stage = "sweep";
            run.sweep = shift_sweep(trained.model, data.test, config.sweep, head_config);
            write_sweep(run.sweep, dir);
            manifest.record(current_head, current_stage, "done");

            current_stage = "landscape";
            write_landscape(landscape(trained.model, config.landscape), dir);
            manifest.record(current_head, current_stage, "done");

            if (is_distance_head(head)) {
                current_stage = "centers";
                write_centers(centers_report(trained.model, data.train), dir / "centers.csv");
                manifest.record(current_head, current_stage, "done");
            }
            result.runs.push_back(std::move(run));
        }

        current_head = "-";
        current_stage = "comparison";
        auto out = csv::open_with_header(root / "comparison.csv",
                                         {"head", "train_accuracy", "test_accuracy", "test_ece", "auroc", "auprc",
                                          "shift5_median_accuracy", "shift5_median_ece"});
        for (const auto& run : result.runs) {
            const auto& s = run.evaluation.summary;
            out << to_string(run.head) << ',' << csv::format_double(run.train_accuracy) << ','
                << csv::format_double(run.evaluation.accuracy) << ',' << csv::format_double(run.evaluation.ece.ece)
                << ',' << (s.contains("auroc") ? csv::format_double(s["auroc"].get<double>()) : "") << ','
                << (s.contains("auprc") ? csv::format_double(s["auprc"].get<double>()) : "") << ',';
            const auto top = std::ranges::find_if(run.sweep.by_intensity,
                                                  [](const IntensitySummary& i) { return i.intensity == 5; });
            if (top != run.sweep.by_intensity.end()) {
                out << csv::format_double(top->accuracy.median) << ',' << csv::format_double(top->ece.median);
            } else {
                out << ',';
            }
            out << '\n';
        }
        manifest.record(current_head, current_stage, "done");
        result.ok = true;
    } catch (const std::exception& e) {
        result.error = current_head + "/" + current_stage + ": " + e.what();
        manifest.record(current_head, current_stage, "failed", e.what());
    }
    manifest.finish(result.ok);
    return result;
}

}  // namespace ovabench::harness
