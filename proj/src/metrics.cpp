#include "ovabench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ovabench/csv.hpp"

namespace ovabench::metrics {

namespace {

double edge(std::size_t i, std::size_t num_bins)
{
    return static_cast<double>(i) / static_cast<double>(num_bins);
}

void check_unit_interval(double value, const char* what)
{
    if (!(value >= 0.0 && value <= 1.0)) {
        throw std::domain_error(std::string(what) + " " + std::to_string(value) + " outside [0, 1]");
    }
}

std::vector<double> uniform_edges(std::size_t num_bins)
{
    std::vector<double> edges(num_bins + 1);
    for (std::size_t i = 0; i <= num_bins; ++i) {
        edges[i] = edge(i, num_bins);
    }
    return edges;
}

}  // namespace

std::size_t bin_index(double value, std::size_t num_bins)
{
    if (num_bins == 0) {
        throw std::invalid_argument("need at least one bin");
    }
    check_unit_interval(value, "value");
    auto idx = static_cast<std::size_t>(std::floor(value * static_cast<double>(num_bins)));
    idx = std::min(idx, num_bins - 1);
    // value * num_bins can round across an edge; settle against the edges themselves.
    if (idx + 1 < num_bins && value >= edge(idx + 1, num_bins)) {
        ++idx;
    } else if (idx > 0 && value < edge(idx, num_bins)) {
        --idx;
    }
    return idx;
}

EceResult ece(std::span<const PredictionRecord> records, std::size_t num_bins)
{
    if (records.empty()) {
        throw std::invalid_argument("ece: no records");
    }
    if (num_bins == 0) {
        throw std::invalid_argument("ece: need at least one bin");
    }
    EceResult out;
    out.table.edges = uniform_edges(num_bins);
    out.table.bins.resize(num_bins);
    std::vector<double> conf_sum(num_bins, 0.0);
    std::vector<std::size_t> correct(num_bins, 0);
    for (const auto& r : records) {
        if (r.is_ood()) {
            throw std::invalid_argument("ece: out-of-distribution record supplied");
        }
        const std::size_t b = bin_index(r.confidence, num_bins);
        ++out.table.bins[b].count;
        conf_sum[b] += r.confidence;
        correct[b] += r.correct() ? 1 : 0;
    }
    const auto n = static_cast<double>(records.size());
    for (std::size_t b = 0; b < num_bins; ++b) {
        auto& bin = out.table.bins[b];
        bin.lower = out.table.edges[b];
        bin.upper = out.table.edges[b + 1];
        if (bin.count == 0) {
            continue;
        }
        const auto count = static_cast<double>(bin.count);
        bin.mean_confidence = conf_sum[b] / count;
        bin.accuracy = static_cast<double>(correct[b]) / count;
        out.ece += count / n * std::abs(bin.accuracy - bin.mean_confidence);
    }
    return out;
}

ThresholdCurve accuracy_vs_confidence(std::span<const PredictionRecord> records, std::span<const double> thresholds)
{
    ThresholdCurve curve;
    curve.reserve(thresholds.size());
    for (const double tau : thresholds) {
        ThresholdPoint point{tau, 0, std::nullopt};
        std::size_t correct = 0;
        for (const auto& r : records) {
            if (r.confidence >= tau) {
                ++point.retained;
                correct += r.correct() ? 1 : 0;
            }
        }
        if (point.retained > 0) {
            point.accuracy = static_cast<double>(correct) / static_cast<double>(point.retained);
        }
        curve.push_back(point);
    }
    return curve;
}

std::vector<double> uniform_thresholds(std::size_t count)
{
    if (count < 2) {
        throw std::invalid_argument("need at least two thresholds");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

RankingResult auroc_auprc(std::span<const double> scores, const std::vector<bool>& is_positive)
{
    if (scores.size() != is_positive.size()) {
        throw ShapeError("auroc_auprc: score and label counts differ");
    }
    const auto positives = static_cast<std::size_t>(std::ranges::count(is_positive, true));
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("auroc_auprc: need at least one positive and one negative");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto p = static_cast<double>(positives);
    const auto n = static_cast<double>(negatives);
    RankingResult out;
    out.roc_points.emplace_back(0.0, 0.0);
    std::size_t tp = 0;
    std::size_t fp = 0;
    double prev_fpr = 0.0;
    double prev_tpr = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        // Consume one group of tied scores.
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (is_positive[order[i]] ? tp : fp) += 1;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / n;
        const double tpr = static_cast<double>(tp) / p;
        out.auroc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        out.roc_points.emplace_back(fpr, tpr);

        const double recall = tpr;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        out.auprc += (recall - prev_recall) * precision;
        out.pr_points.emplace_back(recall, precision);

        prev_fpr = fpr;
        prev_tpr = tpr;
        prev_recall = recall;
    }
    return out;
}

ConfidenceHistograms confidence_histograms(std::span<const double> correct_id, std::span<const double> incorrect_id,
                                           std::span<const double> ood, std::size_t num_bins)
{
    if (num_bins == 0) {
        throw std::invalid_argument("confidence_histograms: need at least one bin");
    }
    auto count = [&](std::span<const double> values) {
        std::vector<std::size_t> h(num_bins, 0);
        for (const double v : values) {
            ++h[bin_index(v, num_bins)];
        }
        return h;
    };
    return {uniform_edges(num_bins), count(correct_id), count(incorrect_id), count(ood)};
}

BoxStats boxplot_stats(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("boxplot_stats: no values");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::ranges::sort(sorted);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    };
    return {sorted.front(), quantile(0.25), quantile(0.5), quantile(0.75), sorted.back()};
}

namespace {

using Vec = std::vector<double>;

Vec mat_vec(const Matrix& m, const Vec& v)
{
    Vec out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out[i] += row[j] * v[j];
        }
    }
    return out;
}

double dot(const Vec& a, const Vec& b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Dominant eigenpair of a symmetric PSD matrix by power iteration.
std::pair<double, Vec> dominant_eigenpair(const Matrix& cov, double scale)
{
    const std::size_t d = cov.rows();
    // Start from the covariance column with the largest norm: it lies in the
    // range of cov and is not orthogonal to the dominant axis unless cov is degenerate.
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            s += cov(i, j) * cov(i, j);
        }
        if (s > best_norm) {
            best_norm = s;
            best = j;
        }
    }
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) {
        v[i] = cov(i, best) + 1e-3 * static_cast<double>(i + 1) / static_cast<double>(d);
    }

    const double tol = 1e-10 * std::max(1.0, scale);
    constexpr int kMaxIterations = 2'000'000;
    double lambda = 0.0;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double norm = std::sqrt(dot(v, v));
        if (norm == 0.0) {
            return {0.0, v};
        }
        for (double& x : v) {
            x /= norm;
        }
        const Vec cv = mat_vec(cov, v);
        lambda = dot(v, cv);
        double residual = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = cv[i] - lambda * v[i];
            residual += r * r;
        }
        if (std::sqrt(residual) < tol) {
            return {lambda, v};
        }
        v = cv;
    }
    throw NumericError("pca2: power iteration did not converge");
}

}  // namespace

Pca2Result pca2(const Matrix& points, const Matrix& extra_points)
{
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (n < 3 || d < 2) {
        throw std::invalid_argument("pca2: need at least 3 points of dimension >= 2");
    }
    if (extra_points.rows() > 0 && extra_points.cols() != d) {
        throw ShapeError("pca2: extra points have dimension " + std::to_string(extra_points.cols()) + ", expected " +
                         std::to_string(d));
    }

    Pca2Result out;
    out.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            out.mean[c] += points(r, c);
        }
    }
    for (double& m : out.mean) {
        m /= static_cast<double>(n);
    }

    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = points.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = row[i] - out.mean[i];
            for (std::size_t j = i; j < d; ++j) {
                cov(i, j) += ci * (row[j] - out.mean[j]);
            }
        }
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            cov(i, j) /= static_cast<double>(n - 1);
            cov(j, i) = cov(i, j);
        }
        trace += cov(i, i);
    }

    out.components = Matrix(2, d);
    Matrix deflated = cov;
    for (std::size_t k = 0; k < 2; ++k) {
        auto [lambda, v] = dominant_eigenpair(deflated, trace);
        if (!(lambda > 1e-12 * std::max(trace, 1e-300))) {
            throw std::domain_error("pca2: covariance has fewer than 2 nonzero eigenvalues");
        }
        if (k == 1) {
            // Re-orthogonalize against the first axis to remove leakage from the deflation.
            const auto first = out.components.row(0);
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                proj += v[i] * first[i];
            }
            for (std::size_t i = 0; i < d; ++i) {
                v[i] -= proj * first[i];
            }
            const double norm = std::sqrt(dot(v, v));
            for (double& x : v) {
                x /= norm;
            }
        }
        const auto largest = std::ranges::max_element(v, [](double a, double b) { return std::abs(a) < std::abs(b); });
        if (*largest < 0.0) {
            for (double& x : v) {
                x = -x;
            }
        }
        std::ranges::copy(v, out.components.row(k).begin());
        out.eigenvalues[k] = lambda;
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                deflated(i, j) -= lambda * v[i] * v[j];
            }
        }
    }

    auto project = [&](const Matrix& src) {
        Matrix dst(src.rows(), 2);
        for (std::size_t r = 0; r < src.rows(); ++r) {
            const auto row = src.row(r);
            for (std::size_t k = 0; k < 2; ++k) {
                const auto axis = out.components.row(k);
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    acc += (row[i] - out.mean[i]) * axis[i];
                }
                dst(r, k) = acc;
            }
        }
        return dst;
    };
    out.projected = project(points);
    out.extra_projected = project(extra_points);
    return out;
}

void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path)
{
    auto out = csv::open_with_header(path, {"confidence", "predicted_label", "true_label", "is_ood"});
    for (const auto& r : records) {
        out << csv::format_double(r.confidence) << ',' << r.predicted_label << ',';
        if (r.true_label) {
            out << *r.true_label << ",0\n";
        } else {
            out << ",1\n";
        }
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    const std::size_t c_conf = table.column("confidence");
    const std::size_t c_pred = table.column("predicted_label");
    const std::size_t c_true = table.column("true_label");
    const std::size_t c_ood = table.column("is_ood");
    std::vector<PredictionRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        PredictionRecord r;
        r.confidence = csv::parse_double(row[c_conf]);
        r.predicted_label = static_cast<int>(csv::parse_int(row[c_pred]));
        const auto ood = csv::parse_int(row[c_ood]);
        if (ood == 0) {
            r.true_label = static_cast<int>(csv::parse_int(row[c_true]));
        } else if (ood != 1 || !row[c_true].empty()) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(i + 1) +
                                     ": is_ood must be 0, or 1 with an empty true_label");
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace ovabench::metrics
