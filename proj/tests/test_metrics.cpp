#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "ovabench/metrics.hpp"
#include "test_support.hpp"

using namespace ovabench;
using metrics::PredictionRecord;

namespace {

double pairwise_auroc(std::span<const double> s, const std::vector<bool>& pos)
{
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (pos[i] && !pos[j]) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
        }
    }
    return wins / pairs;
}

// Average precision by thresholding at every distinct score.
double threshold_auprc(std::span<const double> s, const std::vector<bool>& pos)
{
    std::vector<double> cuts(s.begin(), s.end());
    std::sort(cuts.begin(), cuts.end(), std::greater<>());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const double total_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
    double prev_recall = 0.0;
    double ap = 0.0;
    for (const double t : cuts) {
        double tp = 0.0;
        double kept = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                kept += 1.0;
                tp += pos[i] ? 1.0 : 0.0;
            }
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / kept);
        prev_recall = recall;
    }
    return ap;
}

// Eigenvalues of a symmetric 3x3 matrix, descending, via the trigonometric cubic solution.
std::array<double, 3> symmetric_eigenvalues3(const Matrix& a)
{
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) +
                      2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Matrix b(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
        }
    }
    const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                       b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                       b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    return {e1, 3.0 * q - e1 - e3, e3};
}

Matrix sample_covariance(const Matrix& x)
{
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            mean[c] += x(r, c) / static_cast<double>(n);
        }
    }
    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                cov(i, j) += (x(r, i) - mean[i]) * (x(r, j) - mean[j]) / static_cast<double>(n - 1);
            }
        }
    }
    return cov;
}

double quad_form(const Matrix& cov, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) {
            s += v[i] * cov(i, j) * v[j];
        }
    }
    return s;
}

std::vector<PredictionRecord> random_records(std::size_t n, Rng& rng, bool with_ood)
{
    std::vector<PredictionRecord> out(n);
    for (auto& r : out) {
        r.confidence = rng.uniform();
        r.predicted_label = static_cast<int>(rng.below(4));
        if (!with_ood || rng.uniform() < 0.7) {
            r.true_label = static_cast<int>(rng.below(4));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("bin edges go to the upper bin and 1.0 to the top bin")
{
    CHECK(metrics::bin_index(0.0, 2) == 0);
    CHECK(metrics::bin_index(0.5, 2) == 1);
    CHECK(metrics::bin_index(1.0, 2) == 1);
    for (std::size_t i = 0; i < 15; ++i) {
        CHECK(metrics::bin_index(static_cast<double>(i) / 15.0, 15) == i);
    }
    CHECK(metrics::bin_index(std::nextafter(1.0 / 15.0, 0.0), 15) == 0);
}

TEST_CASE("perfectly calibrated records have zero ECE")
{
    std::vector<PredictionRecord> all_right(20, PredictionRecord{1.0, 2, 2});
    CHECK(metrics::ece(all_right).ece == 0.0);

    std::vector<PredictionRecord> ninety;
    for (int i = 0; i < 10; ++i) {
        ninety.push_back({0.9, 0, i < 9 ? 0 : 1});
    }
    CHECK(metrics::ece(ninety).ece == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("ECE on a two-bin example")
{
    const std::vector<PredictionRecord> r{{0.2, 0, 1}, {0.8, 1, 1}};
    const auto res = metrics::ece(r, 2);
    CHECK(res.ece == doctest::Approx(0.2));
    CHECK(res.table.bins[0].count == 1);
    CHECK(res.table.bins[0].accuracy == 0.0);
    CHECK(res.table.bins[1].mean_confidence == doctest::Approx(0.8));
    CHECK(res.table.edges == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("ECE matches brute-force binning")
{
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const auto recs = random_records(200, rng, false);
        const std::size_t nb = 1 + rng.below(20);
        double expect = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const double lo = static_cast<double>(b) / static_cast<double>(nb);
            const double hi = static_cast<double>(b + 1) / static_cast<double>(nb);
            double n = 0.0;
            double conf = 0.0;
            double acc = 0.0;
            for (const auto& r : recs) {
                if (r.confidence >= lo && (r.confidence < hi || (b + 1 == nb && r.confidence <= hi))) {
                    n += 1.0;
                    conf += r.confidence;
                    acc += r.correct() ? 1.0 : 0.0;
                }
            }
            if (n > 0) {
                expect += std::abs(acc - conf) / static_cast<double>(recs.size());
            }
        }
        CHECK(metrics::ece(recs, nb).ece == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("ECE rejects OOD and empty input")
{
    const std::vector<PredictionRecord> none;
    CHECK_THROWS((void)metrics::ece(none));
    const std::vector<PredictionRecord> ood{{0.5, 0, std::nullopt}};
    CHECK_THROWS((void)metrics::ece(ood));
}

TEST_CASE("accuracy vs confidence counts OOD as errors")
{
    const std::vector<PredictionRecord> r{{0.9, 0, 0}, {0.8, 1, std::nullopt}, {0.3, 2, 1}, {0.95, 1, 1}};
    const std::vector<double> taus{0.0, 0.85, 0.96};
    const auto curve = metrics::accuracy_vs_confidence(r, taus);
    CHECK(curve[0].retained == 4);
    CHECK(*curve[0].accuracy == doctest::Approx(0.5));
    CHECK(curve[1].retained == 2);
    CHECK(*curve[1].accuracy == 1.0);
    CHECK(curve[2].retained == 0);
    CHECK_FALSE(curve[2].accuracy.has_value());

    const auto t = metrics::uniform_thresholds(101);
    CHECK(t.size() == 101);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 1.0);
    CHECK(t[50] == doctest::Approx(0.5));
}

TEST_CASE("AUROC and AUPRC on a small example")
{
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<bool> pos{false, false, true, true};
    const auto res = metrics::auroc_auprc(s, pos);
    CHECK(res.auroc == doctest::Approx(0.75));
    CHECK(res.auprc == doctest::Approx(0.5 * 1.0 + 0.5 * (2.0 / 3.0)));

    const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    const auto perfect = metrics::auroc_auprc(sep, pos);
    CHECK(perfect.auroc == 1.0);
    CHECK(perfect.auprc == 1.0);
}

TEST_CASE("AUROC and AUPRC match brute force on random instances with ties")
{
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.below(60);
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(8)) / 8.0;  // coarse grid forces ties
            pos[i] = rng.uniform() < 0.4;
        }
        pos[0] = true;
        pos[1] = false;
        const auto res = metrics::auroc_auprc(s, pos);
        CHECK(res.auroc == doctest::Approx(pairwise_auroc(s, pos)).epsilon(1e-12));
        CHECK(res.auprc == doctest::Approx(threshold_auprc(s, pos)).epsilon(1e-12));
    }
}

TEST_CASE("ranking needs both classes")
{
    const std::vector<double> s{0.1, 0.2};
    CHECK_THROWS((void)metrics::auroc_auprc(s, std::vector<bool>{true, true}));
}

TEST_CASE("confidence histograms match a counting loop")
{
    Rng rng(3);
    std::vector<double> a(300), b(100), c(200);
    for (auto* v : {&a, &b, &c}) {
        for (double& x : *v) {
            x = rng.uniform();
        }
    }
    a[0] = 1.0;
    c[0] = 0.0;
    const std::size_t nb = 20;
    const auto h = metrics::confidence_histograms(a, b, c, nb);
    auto count = [&](const std::vector<double>& v, std::size_t bin) {
        const double lo = static_cast<double>(bin) / nb;
        const double hi = static_cast<double>(bin + 1) / nb;
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double x) {
            return x >= lo && (x < hi || (bin + 1 == nb && x <= hi));
        }));
    };
    for (std::size_t bin = 0; bin < nb; ++bin) {
        CHECK(h.correct_id[bin] == count(a, bin));
        CHECK(h.incorrect_id[bin] == count(b, bin));
        CHECK(h.ood[bin] == count(c, bin));
    }
    CHECK(h.edges.size() == nb + 1);
}

TEST_CASE("box statistics")
{
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    const auto s = metrics::boxplot_stats(v);
    CHECK(s.min == 1.0);
    CHECK(s.q1 == doctest::Approx(1.75));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.q3 == doctest::Approx(3.25));
    CHECK(s.max == 4.0);

    const std::vector<double> one{7.0};
    const auto t = metrics::boxplot_stats(one);
    CHECK(t.min == 7.0);
    CHECK(t.median == 7.0);
    CHECK(t.max == 7.0);

    CHECK_THROWS((void)metrics::boxplot_stats(std::vector<double>{}));
}

TEST_CASE("box statistics of an odd-length sample")
{
    // numpy.percentile([3, 9, 1, 7, 5], [25, 50, 75]) == [3, 5, 7]
    const std::vector<double> v{3.0, 9.0, 1.0, 7.0, 5.0};
    const auto s = metrics::boxplot_stats(v);
    CHECK(s.q1 == 3.0);
    CHECK(s.median == 5.0);
    CHECK(s.q3 == 7.0);
}

TEST_CASE("PCA eigenvalues match the closed-form cubic solution")
{
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix x(400, 3);
        const double mix = rng.uniform(-1.0, 1.0);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double a = 5.0 * rng.normal();
            const double b = 2.0 * rng.normal();
            const double c = 0.5 * rng.normal();
            x(r, 0) = a + mix * b + 3.0;
            x(r, 1) = b - mix * c;
            x(r, 2) = c + 0.3 * a - 1.0;
        }
        const Matrix cov = sample_covariance(x);
        const auto eig = symmetric_eigenvalues3(cov);
        const auto res = metrics::pca2(x, Matrix(0, 3));
        CHECK(res.eigenvalues[0] == doctest::Approx(eig[0]).epsilon(1e-8));
        CHECK(res.eigenvalues[1] == doctest::Approx(eig[1]).epsilon(1e-8));

        // Orthonormal rows, each an eigenvector, with the largest entry positive.
        for (std::size_t i = 0; i < 2; ++i) {
            const auto ci = res.components.row(i);
            double dot01 = 0.0;
            double norm = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                norm += ci[k] * ci[k];
                dot01 += res.components(0, k) * res.components(1, k);
            }
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(dot01) < 1e-8);
            CHECK(quad_form(cov, ci) == doctest::Approx(res.eigenvalues[i]).epsilon(1e-8));
            const auto biggest = std::max_element(ci.begin(), ci.end(),
                                                  [](double a, double b) { return std::abs(a) < std::abs(b); });
            CHECK(*biggest > 0.0);
        }

        // No orthonormal 2-frame captures more variance.
        const double best = res.eigenvalues[0] + res.eigenvalues[1];
        for (int f = 0; f < 100; ++f) {
            std::array<double, 3> u{rng.normal(), rng.normal(), rng.normal()};
            std::array<double, 3> v{rng.normal(), rng.normal(), rng.normal()};
            auto normalize = [](std::array<double, 3>& w) {
                const double n = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
                for (double& e : w) {
                    e /= n;
                }
            };
            normalize(u);
            const double d = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            for (std::size_t k = 0; k < 3; ++k) {
                v[k] -= d * u[k];
            }
            normalize(v);
            CHECK(quad_form(cov, u) + quad_form(cov, v) <= best * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("PCA projections are centered and extra points use the same frame")
{
    Rng rng(5);
    const Matrix x = testing::random_matrix(50, 4, rng, 2.0);
    Matrix extra(2, 4);
    const auto res0 = metrics::pca2(x, Matrix(0, 4));
    for (std::size_t k = 0; k < 4; ++k) {
        extra(0, k) = res0.mean[k];
        extra(1, k) = x(7, k);
    }
    const auto res = metrics::pca2(x, extra);
    CHECK(std::abs(res.extra_projected(0, 0)) < 1e-12);
    CHECK(std::abs(res.extra_projected(0, 1)) < 1e-12);
    CHECK(res.extra_projected(1, 0) == doctest::Approx(res.projected(7, 0)).epsilon(1e-12));
    CHECK(res.extra_projected(1, 1) == doctest::Approx(res.projected(7, 1)).epsilon(1e-12));
    for (std::size_t c = 0; c < 2; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            s += res.projected(r, c);
        }
        CHECK(std::abs(s) < 1e-9);
    }
}

TEST_CASE("PCA of isotropic noise has unit eigenvalues")
{
    Rng rng(6);
    const Matrix x = testing::random_matrix(5000, 2, rng);
    const auto res = metrics::pca2(x, Matrix(0, 2));
    CHECK(res.eigenvalues[0] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(res.eigenvalues[1] == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("PCA rejects rank-deficient input")
{
    Matrix x(10, 3);
    for (std::size_t r = 0; r < 10; ++r) {
        x(r, 0) = static_cast<double>(r);
        x(r, 1) = 2.0 * static_cast<double>(r);
    }
    CHECK_THROWS_AS((void)metrics::pca2(x, Matrix(0, 3)), std::domain_error);
}

TEST_CASE("prediction CSV round trip preserves values and metrics")
{
    Rng rng(7);
    const auto recs = random_records(500, rng, true);
    const auto path = std::filesystem::temp_directory_path() / "ovabench_predictions_test.csv";
    metrics::write_predictions(recs, path);
    const auto back = metrics::read_predictions(path);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].confidence == recs[i].confidence);
        CHECK(back[i].predicted_label == recs[i].predicted_label);
        CHECK(back[i].true_label == recs[i].true_label);
    }
    std::filesystem::remove(path);
}
