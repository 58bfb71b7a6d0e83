#include "ovabench/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ovabench/random.hpp"

namespace ovabench {

std::string_view to_string(HeadKind head) noexcept
{
    switch (head) {
    case HeadKind::SoftmaxAffine: return "softmax";
    case HeadKind::SoftmaxDM: return "dm";
    case HeadKind::OvaAffine: return "ova";
    case HeadKind::OvaDM: return "ova_dm";
    }
    return "unknown";
}

HeadKind parse_head_kind(std::string_view name)
{
    for (const HeadKind head : all_heads) {
        if (to_string(head) == name) {
            return head;
        }
    }
    throw std::invalid_argument("unknown head '" + std::string(name) + "' (expected softmax, dm, ova or ova_dm)");
}

}  // namespace ovabench

namespace ovabench::heads {

namespace {

// Probability clamp for OvaDM near zero distance.
constexpr double kProbEps = 1e-12;

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log p and log(1 - p) for p = 2 / (1 + e^d), d >= 0, with p clamped to at
// most 1 - kProbEps. `clamped_*` report where the clamp is active.
struct OvaDmLogs {
    double log_p;
    double log_1mp;
    bool clamped_p;
    bool clamped_1mp;
};

OvaDmLogs ova_dm_logs(double d)
{
    static const double max_log_p = std::log1p(-kProbEps);
    static const double min_log_1mp = std::log(kProbEps);
    const double log_p = std::numbers::ln2 - softplus(d);
    const double log_1mp = std::log(-std::expm1(-d)) - std::log1p(std::exp(-d));
    OvaDmLogs out{log_p, log_1mp, false, false};
    if (!(log_p < max_log_p)) {
        out.log_p = max_log_p;
        out.clamped_p = true;
    }
    if (!(log_1mp > min_log_1mp)) {
        out.log_1mp = min_log_1mp;
        out.clamped_1mp = true;
    }
    return out;
}

void check_labels(const Matrix& logits, std::span<const int> labels)
{
    if (labels.size() != logits.rows()) {
        throw ShapeError("label count " + std::to_string(labels.size()) + " != batch size " +
                         std::to_string(logits.rows()));
    }
    const auto k = static_cast<int>(logits.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k) {
            throw std::out_of_range("label " + std::to_string(labels[i]) + " at batch index " + std::to_string(i) +
                                    " outside [0, " + std::to_string(k) + ")");
        }
    }
}

void check_distance_logit(double z, std::size_t row, std::size_t col)
{
    if (z > 0.0) {
        throw std::domain_error("distance-head logit must be <= 0, got " + std::to_string(z) + " at (" +
                                std::to_string(row) + ", " + std::to_string(col) + ")");
    }
}

double log_sum_exp(std::span<const double> z)
{
    const double m = *std::ranges::max_element(z);
    double s = 0.0;
    for (const double v : z) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

// Per-example loss from one row of logits.
double row_loss(HeadKind head, std::span<const double> z, int label, std::size_t row)
{
    const auto k = static_cast<std::size_t>(label);
    switch (head) {
    case HeadKind::SoftmaxAffine:
    case HeadKind::SoftmaxDM: return log_sum_exp(z) - z[k];
    case HeadKind::OvaAffine: {
        // -log sigma(z_k) - sum_{j != k} log(1 - sigma(z_j))
        double total = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            total += j == k ? softplus(-z[j]) : softplus(z[j]);
        }
        return total;
    }
    case HeadKind::OvaDM: {
        double total = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            check_distance_logit(z[j], row, j);
            const auto logs = ova_dm_logs(-z[j]);
            total -= j == k ? logs.log_p : logs.log_1mp;
        }
        return total;
    }
    }
    return 0.0;
}

}  // namespace

void validate_head(HeadKind head, const nn::ModelParams& params)
{
    const bool want_bias = !is_distance_head(head);
    if (params.head_biases.has_value() != want_bias) {
        throw std::invalid_argument(std::string("head '") + std::string(to_string(head)) +
                                    (want_bias ? "' requires head biases" : "' must not have head biases"));
    }
}

Matrix logits(HeadKind head, const nn::ModelParams& params, const Matrix& embeddings)
{
    validate_head(head, params);
    const Matrix& w = params.head_weights;
    if (embeddings.cols() != w.rows()) {
        throw ShapeError("logits: embedding dim " + std::to_string(embeddings.cols()) + " != head weight rows " +
                         std::to_string(w.rows()));
    }
    const std::size_t dim = w.rows();
    const std::size_t k = w.cols();
    Matrix z(embeddings.rows(), k);
    for (std::size_t r = 0; r < embeddings.rows(); ++r) {
        const auto f = embeddings.row(r);
        auto out = z.row(r);
        if (is_distance_head(head)) {
            for (std::size_t j = 0; j < k; ++j) {
                double sq = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double diff = f[i] - w(i, j);
                    sq += diff * diff;
                }
                out[j] = -std::sqrt(sq);
            }
        } else {
            std::ranges::copy(*params.head_biases, out.begin());
            for (std::size_t i = 0; i < dim; ++i) {
                const auto wi = w.row(i);
                for (std::size_t j = 0; j < k; ++j) {
                    out[j] += f[i] * wi[j];
                }
            }
        }
    }
    return z;
}

Matrix probabilities(HeadKind head, const Matrix& logits)
{
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto z = logits.row(r);
        auto out = p.row(r);
        switch (head) {
        case HeadKind::SoftmaxAffine:
        case HeadKind::SoftmaxDM: {
            const double m = *std::ranges::max_element(z);
            double s = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) {
                out[j] = std::exp(z[j] - m);
                s += out[j];
            }
            for (double& v : out) {
                v /= s;
            }
            break;
        }
        case HeadKind::OvaAffine:
            for (std::size_t j = 0; j < z.size(); ++j) {
                out[j] = sigmoid(z[j]);
            }
            break;
        case HeadKind::OvaDM:
            for (std::size_t j = 0; j < z.size(); ++j) {
                check_distance_logit(z[j], r, j);
                out[j] = 2.0 / (1.0 + std::exp(-z[j]));
            }
            break;
        }
    }
    return p;
}

double loss(HeadKind head, const Matrix& logits, std::span<const int> labels)
{
    check_labels(logits, labels);
    if (logits.rows() == 0) {
        throw ShapeError("loss: empty batch");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double l = row_loss(head, logits.row(r), labels[r], r);
        if (!std::isfinite(l)) {
            throw NumericError("non-finite loss at batch index " + std::to_string(r));
        }
        total += l;
    }
    return total / static_cast<double>(logits.rows());
}

Matrix logit_gradient(HeadKind head, const Matrix& logits, std::span<const int> labels)
{
    check_labels(logits, labels);
    const double inv_batch = 1.0 / static_cast<double>(logits.rows());
    Matrix g(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto z = logits.row(r);
        auto out = g.row(r);
        const auto k = static_cast<std::size_t>(labels[r]);
        switch (head) {
        case HeadKind::SoftmaxAffine:
        case HeadKind::SoftmaxDM: {
            const double lse = log_sum_exp(z);
            for (std::size_t j = 0; j < z.size(); ++j) {
                out[j] = std::exp(z[j] - lse) - (j == k ? 1.0 : 0.0);
            }
            break;
        }
        case HeadKind::OvaAffine:
            for (std::size_t j = 0; j < z.size(); ++j) {
                out[j] = sigmoid(z[j]) - (j == k ? 1.0 : 0.0);
            }
            break;
        case HeadKind::OvaDM:
            // Loss terms as functions of d = -z:
            //   -log p       has derivative sigmoid(d)
            //   -log(1 - p)  has derivative -1 / sinh(d)
            for (std::size_t j = 0; j < z.size(); ++j) {
                check_distance_logit(z[j], r, j);
                const double d = -z[j];
                const auto logs = ova_dm_logs(d);
                double dl_dd = 0.0;
                if (j == k) {
                    dl_dd = logs.clamped_p ? 0.0 : sigmoid(d);
                } else if (!logs.clamped_1mp) {
                    dl_dd = -2.0 * std::exp(-d) / -std::expm1(-2.0 * d);
                }
                out[j] = -dl_dd;
            }
            break;
        }
        for (double& v : out) {
            v *= inv_batch;
        }
    }
    return g;
}

LossGradient loss_gradient(HeadKind head, const nn::ModelParams& params, const nn::ForwardTrace& trace,
                           std::span<const int> labels)
{
    const Matrix& f = trace.embedding();
    const Matrix z = logits(head, params, f);
    LossGradient out;
    out.loss = loss(head, z, labels);
    const Matrix g = logit_gradient(head, z, labels);

    const Matrix& w = params.head_weights;
    const std::size_t dim = w.rows();
    const std::size_t k = w.cols();
    out.head_weights = Matrix(dim, k);
    out.embedding_grad = Matrix(f.rows(), dim);

    if (is_distance_head(head)) {
        // z_j = -||f - w_j||: dz_j/df = -(f - w_j)/d_j, dz_j/dw_j = (f - w_j)/d_j,
        // with subgradient 0 at d_j = 0.
        std::vector<double> diff(dim);
        for (std::size_t r = 0; r < f.rows(); ++r) {
            const auto fr = f.row(r);
            auto ef = out.embedding_grad.row(r);
            for (std::size_t j = 0; j < k; ++j) {
                const double d = -z(r, j);
                if (!(d > 0.0)) {
                    continue;
                }
                const double scale = g(r, j) / d;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double delta = fr[i] - w(i, j);
                    ef[i] -= scale * delta;
                    out.head_weights(i, j) += scale * delta;
                }
            }
        }
    } else {
        out.head_biases = std::vector<double>(k, 0.0);
        for (std::size_t r = 0; r < f.rows(); ++r) {
            const auto fr = f.row(r);
            const auto gr = g.row(r);
            auto ef = out.embedding_grad.row(r);
            for (std::size_t j = 0; j < k; ++j) {
                (*out.head_biases)[j] += gr[j];
            }
            for (std::size_t i = 0; i < dim; ++i) {
                const auto wi = w.row(i);
                auto gw = out.head_weights.row(i);
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    gw[j] += fr[i] * gr[j];
                    acc += wi[j] * gr[j];
                }
                ef[i] = acc;
            }
        }
    }
    return out;
}

Predictions predict(const Matrix& probs)
{
    if (probs.cols() == 0) {
        throw ShapeError("predict: no classes");
    }
    Predictions out;
    out.labels.reserve(probs.rows());
    out.confidence.reserve(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto p = probs.row(r);
        std::size_t best = 0;
        for (std::size_t j = 1; j < p.size(); ++j) {
            if (p[j] > p[best]) {
                best = j;
            }
        }
        out.labels.push_back(static_cast<int>(best));
        out.confidence.push_back(p[best]);
    }
    return out;
}

nn::ModelParams init_model(HeadKind head, std::size_t input_dim, std::span<const std::size_t> hidden_widths,
                           std::size_t num_classes, Rng& rng, CenterInit center_init)
{
    nn::ModelParams params = nn::init_body(input_dim, hidden_widths, rng);
    const std::size_t dim = params.embed_dim();
    params.head_weights = Matrix(dim, num_classes);
    const double limit = std::sqrt(6.0 / static_cast<double>(dim + num_classes));
    if (!is_distance_head(head) || center_init == CenterInit::Random) {
        for (double& w : params.head_weights.flat()) {
            w = rng.uniform(-limit, limit);
        }
    }
    if (!is_distance_head(head)) {
        params.head_biases = std::vector<double>(num_classes, 0.0);
    }
    return params;
}

Objective objective(HeadKind head, const nn::ModelParams& params, const Matrix& inputs, std::span<const int> labels,
                    nn::Activation activation)
{
    const auto trace = nn::forward(params, inputs, activation);
    auto lg = loss_gradient(head, params, trace, labels);
    Objective out{lg.loss, nn::backward(params, trace, lg.embedding_grad, activation)};
    out.grads.head_weights = std::move(lg.head_weights);
    out.grads.head_biases = std::move(lg.head_biases);
    return out;
}

Matrix infer(HeadKind head, const nn::ModelParams& params, const Matrix& inputs, nn::Activation activation)
{
    const auto trace = nn::forward(params, inputs, activation);
    return probabilities(head, logits(head, params, trace.embedding()));
}

}  // namespace ovabench::heads
