// Acceptance checks for the toy experiment. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "ovabench/harness.hpp"
#include "ovabench/random.hpp"

using namespace ovabench;
using namespace ovabench::harness;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeeds[] = {0, 1, 2};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

ExperimentConfig seeded(std::uint64_t seed)
{
    ExperimentConfig c;
    c.seed = seed;
    return c;
}

// Models trained with the default configuration, cached per (seed, head).
class Trained {
public:
    const Model& get(std::uint64_t seed, HeadKind head)
    {
        const auto key = std::pair{seed, head};
        if (auto it = models_.find(key); it != models_.end()) {
            return it->second;
        }
        auto c = seeded(seed);
        c.head = head;
        return models_.emplace(key, train(c, data(seed).train).model).first->second;
    }

    const ExperimentData& data(std::uint64_t seed)
    {
        if (auto it = data_.find(seed); it != data_.end()) {
            return it->second;
        }
        return data_.emplace(seed, prepare_data(seeded(seed))).first->second;
    }

private:
    std::map<std::pair<std::uint64_t, HeadKind>, Model> models_;
    std::map<std::uint64_t, ExperimentData> data_;
};

double min_distance(const Matrix& means, double x, double y)
{
    double best = INFINITY;
    for (std::size_t j = 0; j < means.rows(); ++j) {
        best = std::min(best, std::hypot(x - means(j, 0), y - means(j, 1)));
    }
    return best;
}

Outcome training_accuracy()
{
    auto c = seeded(0);
    c.train_fraction = 1.0;
    const auto d = prepare_data(c);
    Outcome out{true, "train size " + std::to_string(d.train.size())};
    for (const HeadKind h : all_heads) {
        c.head = h;
        const auto start = std::chrono::steady_clock::now();
        const auto r = train(c, d.train);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double acc = accuracy(r.model, d.train);
        out.pass = out.pass && acc == 1.0 && secs < 300.0;
        out.detail += "; " + std::string(to_string(h)) + " acc " + fmt(acc) + " in " + fmt(secs) + "s";
    }
    return out;
}

Outcome landscape_dichotomy(Trained& t)
{
    const auto& d = t.data(0);
    const LandscapeSpec spec;
    const auto dm = landscape(t.get(0, HeadKind::SoftmaxDM), spec);
    const auto ova = landscape(t.get(0, HeadKind::OvaDM), spec);
    std::size_t far = 0;
    std::size_t dm_confident = 0;
    double ova_max = 0.0;
    for (std::size_t i = 0; i < spec.resolution; ++i) {
        for (std::size_t j = 0; j < spec.resolution; ++j) {
            if (min_distance(d.class_means, dm.x(j), dm.y(i)) <= 40.0) {
                continue;
            }
            ++far;
            dm_confident += dm.confidence(i, j) > 0.9 ? 1 : 0;
            ova_max = std::max(ova_max, ova.confidence(i, j));
        }
    }
    const double total = static_cast<double>(spec.resolution * spec.resolution);
    const double dm_fraction = static_cast<double>(dm_confident) / total;
    return {far > 0 && dm_fraction >= 0.01 && ova_max < 0.05,
            std::to_string(far) + " far points; dm confident " + fmt(100.0 * dm_fraction) + "% of grid (" +
                fmt(100.0 * static_cast<double>(dm_confident) / static_cast<double>(std::max<std::size_t>(far, 1))) +
                "% of far); ova_dm max " + fmt(ova_max)};
}

Outcome ova_dm_closed_form(Trained& t)
{
    const auto& m = t.get(0, HeadKind::OvaDM);
    const LandscapeSpec spec;
    const auto grid = landscape(m, spec);
    const auto trace = nn::forward(m.params, grid_points(spec), m.activation);
    const Matrix& emb = trace.embedding();
    const Matrix& w = m.params.head_weights;
    double worst = 0.0;
    for (std::size_t r = 0; r < emb.rows(); ++r) {
        double dmin = INFINITY;
        for (std::size_t k = 0; k < w.cols(); ++k) {
            double sq = 0.0;
            for (std::size_t i = 0; i < w.rows(); ++i) {
                const double diff = emb(r, i) - w(i, k);
                sq += diff * diff;
            }
            dmin = std::min(dmin, std::sqrt(sq));
        }
        const double expect = 2.0 / (1.0 + std::exp(dmin));
        worst = std::max(worst, std::abs(grid.confidence.flat()[r] - expect));
    }
    return {worst <= 1e-9, "max deviation " + fmt(worst) + " over " + std::to_string(emb.rows()) + " points"};
}

Outcome center_alignment(Trained& t)
{
    Outcome out{true, ""};
    for (const auto seed : kSeeds) {
        const auto& d = t.data(seed);
        const double ova = centers_report(t.get(seed, HeadKind::OvaDM), d.train).mean_alignment_error;
        const double dm = centers_report(t.get(seed, HeadKind::SoftmaxDM), d.train).mean_alignment_error;
        out.pass = out.pass && ova < dm;
        out.detail += "seed " + std::to_string(seed) + " ova_dm " + fmt(ova) + " vs dm " + fmt(dm) + "; ";
    }
    return out;
}

// Central differences are only meaningful where every ReLU stays on one side
// of its kink across the perturbation.
bool clear_of_kinks(const nn::ModelParams& params, const Matrix& x, nn::Activation act)
{
    const auto trace = nn::forward(params, x, act);
    for (std::size_t li = 0; li + 1 < trace.pre_activations.size(); ++li) {
        for (const double z : trace.pre_activations[li].flat()) {
            if (std::abs(z) < 1e-3) {
                return false;
            }
        }
    }
    return true;
}

Outcome gradient_suite()
{
    const auto start = std::chrono::steady_clock::now();
    Rng rng(2024);
    double worst = 0.0;
    std::string where;
    std::size_t redrawn = 0;
    std::size_t checked = 0;
    const std::vector<std::size_t> widths{16, 16};
    const auto act = nn::Activation::ReluHidden;
    for (const HeadKind h : all_heads) {
        for (int trial = 0; trial < 10; ++trial) {
            nn::ModelParams params;
            Matrix x(8, 2);
            std::vector<int> y(8);
            while (true) {
                Rng init(rng.next_u64());
                params = heads::init_model(h, 2, widths, 10, init, heads::CenterInit::Random);
                for (std::size_t r = 0; r < 8; ++r) {
                    y[r] = static_cast<int>(rng.below(10));
                    x(r, 0) = 3.0 * rng.normal();
                    x(r, 1) = 3.0 * rng.normal();
                }
                if (clear_of_kinks(params, x, act)) {
                    break;
                }
                ++redrawn;
            }
            const auto obj = heads::objective(h, params, x, y, act);
            auto loss_fn = [&](const nn::ModelParams& q) { return heads::objective(h, q, x, y, act).loss; };
            const auto check = nn::gradient_check(loss_fn, obj.grads, params, 1e-5);
            ++checked;
            if (check.max_relative_error > worst) {
                worst = check.max_relative_error;
                where = std::string(to_string(h)) + " " + check.worst_entry;
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst < 1e-4 && secs < 30.0, std::to_string(checked) + " batches (" + std::to_string(redrawn) +
                                             " redrawn near a ReLU kink); max relative error " + fmt(worst) + " (" +
                                             where + ") in " + fmt(secs) + "s"};
}

double pairwise_auroc(const std::vector<double>& s, const std::vector<bool>& pos)
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

double interpolated_quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

Outcome metric_oracles()
{
    bool ok = true;
    // Single-bin cases: every record in one bin, so ECE is |accuracy - mean confidence|.
    {
        const std::vector<metrics::PredictionRecord> r{{0.75, 0, 0}, {0.75, 1, 1}, {0.75, 2, 0}, {0.75, 0, 0}};
        ok = ok && metrics::ece(r, 1).ece == 0.0;
        const std::vector<metrics::PredictionRecord> s{{0.6, 0, 1}, {0.8, 1, 0}};
        ok = ok && metrics::ece(s, 1).ece == 0.7;
        const std::vector<metrics::PredictionRecord> u{{1.0, 3, 3}};
        ok = ok && metrics::ece(u, 15).ece == 0.0;
    }
    const bool ece_ok = ok;

    Rng rng(99);
    double auroc_worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 2 == 0 ? rng.uniform() : static_cast<double>(rng.below(10)) / 10.0;
            pos[i] = rng.uniform() < 0.5;
        }
        pos[0] = true;
        pos[1] = false;
        auroc_worst = std::max(auroc_worst, std::abs(metrics::auroc_auprc(s, pos).auroc - pairwise_auroc(s, pos)));
    }
    ok = ok && auroc_worst <= 1e-12;

    bool box_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng.below(40));
        for (double& x : v) {
            x = rng.normal();
        }
        const auto b = metrics::boxplot_stats(v);
        box_ok = box_ok && b.min == *std::min_element(v.begin(), v.end()) &&
                 b.max == *std::max_element(v.begin(), v.end()) && b.q1 == interpolated_quantile(v, 0.25) &&
                 b.median == interpolated_quantile(v, 0.5) && b.q3 == interpolated_quantile(v, 0.75);
    }
    ok = ok && box_ok;
    return {ok, std::string("ece single-bin ") + (ece_ok ? "exact" : "MISMATCH") + "; auroc max deviation " +
                    fmt(auroc_worst) + "; box stats " + (box_ok ? "exact" : "MISMATCH")};
}

Outcome shift_degradation(Trained& t)
{
    int passing = 0;
    std::string detail;
    for (const auto seed : kSeeds) {
        const auto c = seeded(seed);
        const std::vector<data::CorruptionSpec> sweep{{data::CorruptionKind::GaussianNoise, 1},
                                                      {data::CorruptionKind::GaussianNoise, 5}};
        bool accuracy_drops = true;
        std::map<HeadKind, double> ece5;
        for (const HeadKind h : all_heads) {
            const auto s = shift_sweep(t.get(seed, h), t.data(seed).test, sweep, c);
            accuracy_drops = accuracy_drops && s.rows[2].accuracy < s.rows[1].accuracy;
            ece5[h] = s.rows[2].ece;
        }
        const double base = ece5[HeadKind::SoftmaxAffine];
        const bool calib = ece5[HeadKind::OvaAffine] < base && ece5[HeadKind::OvaDM] < base;
        passing += accuracy_drops && calib ? 1 : 0;
        detail += "seed " + std::to_string(seed) + (accuracy_drops ? " acc drops" : " acc NOT dropping") +
                  ", ece@5 softmax " + fmt(base) + " dm " + fmt(ece5[HeadKind::SoftmaxDM]) + " ova " +
                  fmt(ece5[HeadKind::OvaAffine]) + " ova_dm " + fmt(ece5[HeadKind::OvaDM]) + "; ";
    }
    return {passing >= 2, std::to_string(passing) + "/3 seeds pass; " + detail};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& a, const fs::path& b)
{
    std::size_t compared = 0;
    std::string mismatch;
    for (const HeadKind h : all_heads) {
        for (const auto* f : {"metrics.json", "checkpoint.json"}) {
            const auto rel = fs::path(std::string(to_string(h))) / f;
            const auto x = slurp(a / rel);
            ++compared;
            if (x.empty() || x != slurp(b / rel)) {
                mismatch += rel.string() + " ";
            }
        }
    }
    return {mismatch.empty(), std::to_string(compared) + " files compared" +
                                  (mismatch.empty() ? ", all identical" : "; differ: " + mismatch)};
}

Outcome round_trip(const fs::path& dir)
{
    const auto config = load_config(dir / "config.json");
    double worst = 0.0;
    std::size_t fields = 0;
    bool same_keys = true;
    for (const HeadKind h : all_heads) {
        const auto head_dir = dir / std::string(to_string(h));
        const auto written = nlohmann::json::parse(slurp(head_dir / "metrics.json"));
        const auto again = evaluate_records(metrics::read_predictions(head_dir / "predictions.csv"), config).summary;
        for (const auto& [key, value] : written.items()) {
            if (!value.is_number()) {
                continue;
            }
            if (!again.contains(key)) {
                same_keys = false;
                continue;
            }
            ++fields;
            worst = std::max(worst, std::abs(value.get<double>() - again[key].get<double>()));
        }
    }
    return {same_keys && worst <= 1e-12,
            std::to_string(fields) + " summary values recomputed; max deviation " + fmt(worst)};
}

}  // namespace

int main()
{
    Trained trained;
    const auto scratch = fs::temp_directory_path() / "ovabench_acceptance";
    fs::remove_all(scratch);

    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("criterion %d %s: %s | %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };
    auto guarded = [&](int id, const char* name, auto&& fn) {
        try {
            report(id, name, fn());
        } catch (const std::exception& e) {
            report(id, name, {false, std::string("exception: ") + e.what()});
        }
    };

    guarded(1, "toy training accuracy", [&] { return training_accuracy(); });
    guarded(2, "landscape dichotomy", [&] { return landscape_dichotomy(trained); });
    guarded(3, "ova_dm closed-form confidence", [&] { return ova_dm_closed_form(trained); });
    guarded(4, "center alignment", [&] { return center_alignment(trained); });
    guarded(5, "gradient correctness", [&] { return gradient_suite(); });
    guarded(6, "metric oracles", [&] { return metric_oracles(); });
    guarded(7, "shift degradation", [&] { return shift_degradation(trained); });

    std::array<fs::path, 2> runs{scratch / "run_a", scratch / "run_b"};
    bool runs_ok = true;
    std::string run_error;
    for (const auto& dir : runs) {
        auto c = seeded(0);
        c.output_dir = dir;
        try {
            const auto r = run_all(c);
            runs_ok = runs_ok && r.ok;
            if (!r.ok) {
                run_error = r.error;
            }
        } catch (const std::exception& e) {
            runs_ok = false;
            run_error = e.what();
        }
    }
    if (runs_ok) {
        guarded(8, "determinism", [&] { return determinism(runs[0], runs[1]); });
        guarded(9, "round trip", [&] { return round_trip(runs[0]); });
    } else {
        report(8, "determinism", {false, "run-all failed: " + run_error});
        report(9, "round trip", {false, "run-all failed: " + run_error});
    }
    fs::remove_all(scratch);

    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
