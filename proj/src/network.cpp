#include "ovabench/network.hpp"

#include <algorithm>
#include <cmath>

#include "ovabench/random.hpp"

namespace ovabench::nn {

namespace {

std::string indexed(std::string_view name, std::size_t i)
{
    return std::string(name) + "[" + std::to_string(i) + "]";
}

// out = in * weight + bias, row by row.
void affine(const Matrix& in, const DenseLayer& layer, Matrix& out)
{
    const std::size_t fan_in = layer.weight.rows();
    const std::size_t fan_out = layer.weight.cols();
    out = Matrix(in.rows(), fan_out);
    for (std::size_t r = 0; r < in.rows(); ++r) {
        auto dst = out.row(r);
        std::ranges::copy(layer.bias, dst.begin());
        const auto src = in.row(r);
        for (std::size_t k = 0; k < fan_in; ++k) {
            const double x = src[k];
            const auto w = layer.weight.row(k);
            for (std::size_t j = 0; j < fan_out; ++j) {
                dst[j] += x * w[j];
            }
        }
    }
}

bool activated(Activation activation, std::size_t layer, std::size_t num_layers)
{
    return activation == Activation::Relu || (activation == Activation::ReluHidden && layer + 1 < num_layers);
}

}  // namespace

std::size_t ModelParams::input_dim() const
{
    return layers.empty() ? head_weights.rows() : layers.front().weight.rows();
}

std::size_t ModelParams::embed_dim() const
{
    return layers.empty() ? head_weights.rows() : layers.back().weight.cols();
}

void ModelParams::validate_shapes() const
{
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        if (layer.bias.size() != layer.weight.cols()) {
            throw ShapeError("layer" + std::to_string(i) + ": bias size " + std::to_string(layer.bias.size()) +
                             " != fan_out " + std::to_string(layer.weight.cols()));
        }
        if (i + 1 < layers.size() && layers[i + 1].weight.rows() != layer.weight.cols()) {
            throw ShapeError("layer" + std::to_string(i + 1) + ": fan_in " +
                             std::to_string(layers[i + 1].weight.rows()) + " != previous fan_out " +
                             std::to_string(layer.weight.cols()));
        }
    }
    if (head_weights.rows() != embed_dim()) {
        throw ShapeError("head: weight rows " + std::to_string(head_weights.rows()) + " != embed_dim " +
                         std::to_string(embed_dim()));
    }
    if (head_biases && head_biases->size() != head_weights.cols()) {
        throw ShapeError("head: bias size " + std::to_string(head_biases->size()) + " != num_classes " +
                         std::to_string(head_weights.cols()));
    }
}

void for_each_tensor(ModelParams& params, const std::function<void(std::string_view, std::span<double>)>& fn)
{
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        fn(prefix + ".weight", params.layers[i].weight.flat());
        fn(prefix + ".bias", params.layers[i].bias);
    }
    fn("head.weight", params.head_weights.flat());
    if (params.head_biases) {
        fn("head.bias", *params.head_biases);
    }
}

void for_each_tensor(const ModelParams& params,
                     const std::function<void(std::string_view, std::span<const double>)>& fn)
{
    for_each_tensor(const_cast<ModelParams&>(params),
                    [&](std::string_view name, std::span<double> values) { fn(name, values); });
}

ModelParams zeros_like(const ModelParams& params)
{
    ModelParams out = params;
    for_each_tensor(out, [](std::string_view, std::span<double> v) { std::ranges::fill(v, 0.0); });
    return out;
}

std::size_t parameter_count(const ModelParams& params)
{
    std::size_t n = 0;
    for_each_tensor(params, [&](std::string_view, std::span<const double> v) { n += v.size(); });
    return n;
}

void check_finite(const ModelParams& params, std::string_view what)
{
    for_each_tensor(params, [&](std::string_view name, std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) {
                throw NumericError("non-finite " + std::string(what) + " at " + indexed(name, i));
            }
        }
    });
}

ModelParams init_body(std::size_t input_dim, std::span<const std::size_t> hidden_widths, Rng& rng)
{
    ModelParams params;
    std::size_t fan_in = input_dim;
    for (const std::size_t fan_out : hidden_widths) {
        DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weight.flat()) {
            w = rng.uniform(-limit, limit);
        }
        params.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    params.head_weights = Matrix(fan_in, 0);
    return params;
}

ForwardTrace forward(const ModelParams& params, const Matrix& inputs, Activation activation)
{
    if (inputs.rows() == 0) {
        throw ShapeError("forward: empty batch");
    }
    ForwardTrace trace;
    trace.input = inputs;
    trace.pre_activations.resize(params.layers.size());
    trace.activations.resize(params.layers.size());
    const Matrix* current = &trace.input;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        if (current->cols() != layer.weight.rows()) {
            throw ShapeError("forward: layer" + std::to_string(i) + " expects fan_in " +
                             std::to_string(layer.weight.rows()) + ", got " + std::to_string(current->cols()));
        }
        affine(*current, layer, trace.pre_activations[i]);
        Matrix post = trace.pre_activations[i];
        if (activated(activation, i, params.layers.size())) {
            for (double& v : post.flat()) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        trace.activations[i] = std::move(post);
        current = &trace.activations[i];
    }
    return trace;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& embedding_grad,
                   Activation activation)
{
    const Matrix& embedding = trace.embedding();
    if (embedding_grad.rows() != embedding.rows() || embedding_grad.cols() != embedding.cols()) {
        throw ShapeError("backward: embedding gradient is " + std::to_string(embedding_grad.rows()) + "x" +
                         std::to_string(embedding_grad.cols()) + ", trace embedding is " +
                         std::to_string(embedding.rows()) + "x" + std::to_string(embedding.cols()));
    }
    if (trace.activations.size() != params.layers.size()) {
        throw ShapeError("backward: trace does not match parameter layer count");
    }

    Gradients grads = zeros_like(params);
    Matrix upstream = embedding_grad;  // d loss / d post-activation of layer i
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        const Matrix& pre = trace.pre_activations[li];
        const Matrix& below = li == 0 ? trace.input : trace.activations[li - 1];

        // Through the activation; subgradient of ReLU at 0 is 0.
        Matrix delta = upstream;
        if (activated(activation, li, params.layers.size())) {
            auto d = delta.flat();
            const auto z = pre.flat();
            for (std::size_t k = 0; k < d.size(); ++k) {
                if (!(z[k] > 0.0)) {
                    d[k] = 0.0;
                }
            }
        }

        auto& gw = grads.layers[li].weight;
        auto& gb = grads.layers[li].bias;
        const std::size_t fan_in = layer.weight.rows();
        const std::size_t fan_out = layer.weight.cols();
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const auto dr = delta.row(r);
            const auto xr = below.row(r);
            for (std::size_t j = 0; j < fan_out; ++j) {
                gb[j] += dr[j];
            }
            for (std::size_t k = 0; k < fan_in; ++k) {
                const double x = xr[k];
                auto g = gw.row(k);
                for (std::size_t j = 0; j < fan_out; ++j) {
                    g[j] += x * dr[j];
                }
            }
        }

        if (li > 0) {
            Matrix next(delta.rows(), fan_in);
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const auto dr = delta.row(r);
                auto out = next.row(r);
                for (std::size_t k = 0; k < fan_in; ++k) {
                    const auto w = layer.weight.row(k);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < fan_out; ++j) {
                        acc += w[j] * dr[j];
                    }
                    out[k] = acc;
                }
            }
            upstream = std::move(next);
        }
    }
    return grads;
}

GradCheckResult gradient_check(const std::function<double(const ModelParams&)>& loss_fn, const Gradients& analytic,
                               const ModelParams& params, double step)
{
    if (!(step > 0.0)) {
        throw std::invalid_argument("gradient_check: step must be positive");
    }
    if (parameter_count(analytic) != parameter_count(params)) {
        throw ShapeError("gradient_check: analytic gradient does not match parameter layout");
    }

    // Flatten the analytic gradient in tensor order so it can be walked alongside params.
    std::vector<double> flat_analytic;
    for_each_tensor(analytic, [&](std::string_view, std::span<const double> v) {
        flat_analytic.insert(flat_analytic.end(), v.begin(), v.end());
    });

    ModelParams probe = params;
    GradCheckResult result;
    std::size_t offset = 0;
    for_each_tensor(probe, [&](std::string_view name, std::span<double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = loss_fn(probe);
            values[i] = saved - step;
            const double down = loss_fn(probe);
            values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("gradient_check: non-finite loss when perturbing " + indexed(name, i));
            }
            const double numeric = (up - down) / (2.0 * step);
            const double a = flat_analytic[offset + i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_relative_error || result.worst_entry.empty()) {
                result = {rel, indexed(name, i), a, numeric};
            }
        }
        offset += values.size();
    });
    return result;
}

OptimizerState OptimizerState::for_params(const ModelParams& params, double learning_rate, double momentum)
{
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must lie in [0, 1)");
    }
    return {zeros_like(params), learning_rate, momentum};
}

void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state)
{
    if (parameter_count(grads) != parameter_count(params) ||
        parameter_count(state.velocity) != parameter_count(params)) {
        throw ShapeError("sgd_step: gradient or velocity layout does not match parameters");
    }
    check_finite(grads, "gradient");

    std::vector<std::span<const double>> grad_tensors;
    for_each_tensor(grads, [&](std::string_view, std::span<const double> v) { grad_tensors.push_back(v); });
    std::vector<std::span<double>> velocity_tensors;
    for_each_tensor(state.velocity, [&](std::string_view, std::span<double> v) { velocity_tensors.push_back(v); });

    std::size_t t = 0;
    for_each_tensor(params, [&](std::string_view name, std::span<double> values) {
        const auto g = grad_tensors[t];
        auto vel = velocity_tensors[t];
        if (g.size() != values.size() || vel.size() != values.size()) {
            throw ShapeError("sgd_step: shape mismatch at " + std::string(name));
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            vel[i] = state.momentum * vel[i] - state.learning_rate * g[i];
            values[i] += vel[i];
        }
        ++t;
    });
    check_finite(params);
}

}  // namespace ovabench::nn
