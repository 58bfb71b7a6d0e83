#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ovabench/harness.hpp"

namespace py = pybind11;
using namespace ovabench;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a)
{
    if (a.ndim() != 2) {
        throw ShapeError("expected a 2D array, got " + std::to_string(a.ndim()) + "D");
    }
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m)
{
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

std::vector<int> to_labels(const IntArray& a)
{
    if (a.ndim() != 1) {
        throw ShapeError("labels must be 1D");
    }
    return {a.data(), a.data() + a.size()};
}

std::vector<double> to_vector(const Array& a)
{
    if (a.ndim() != 1) {
        throw ShapeError("expected a 1D array");
    }
    return {a.data(), a.data() + a.size()};
}

std::vector<metrics::PredictionRecord> to_records(const Array& confidence, const IntArray& predicted,
                                                  const IntArray& true_label)
{
    const auto conf = to_vector(confidence);
    const auto pred = to_labels(predicted);
    const auto truth = to_labels(true_label);
    if (pred.size() != conf.size() || truth.size() != conf.size()) {
        throw ShapeError("confidence, predicted and true_label must have equal length");
    }
    std::vector<metrics::PredictionRecord> out(conf.size());
    for (std::size_t i = 0; i < conf.size(); ++i) {
        out[i].confidence = conf[i];
        out[i].predicted_label = pred[i];
        if (truth[i] >= 0) {
            out[i].true_label = truth[i];
        }
    }
    return out;
}

py::tuple dataset_tuple(const data::Dataset& d)
{
    IntArray labels(static_cast<py::ssize_t>(d.labels.size()), d.labels.data());
    return py::make_tuple(to_array(d.features), labels);
}

data::Dataset from_arrays(const Array& x, const IntArray& y, std::size_t num_classes)
{
    data::Dataset d;
    d.features = to_matrix(x);
    d.labels = to_labels(y);
    d.num_classes = num_classes;
    d.validate();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Softmax and one-vs-all probability heads on a 2D toy task";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.attr("HEADS") = py::make_tuple("softmax", "dm", "ova", "ova_dm");

    m.def(
        "probabilities",
        [](const std::string& head, const Array& logits) {
            return to_array(heads::probabilities(parse_head_kind(head), to_matrix(logits)));
        },
        py::arg("head"), py::arg("logits"));
    m.def(
        "loss",
        [](const std::string& head, const Array& logits, const IntArray& labels) {
            return heads::loss(parse_head_kind(head), to_matrix(logits), to_labels(labels));
        },
        py::arg("head"), py::arg("logits"), py::arg("labels"));
    m.def(
        "logit_gradient",
        [](const std::string& head, const Array& logits, const IntArray& labels) {
            return to_array(heads::logit_gradient(parse_head_kind(head), to_matrix(logits), to_labels(labels)));
        },
        py::arg("head"), py::arg("logits"), py::arg("labels"));

    m.def(
        "gen_ring",
        [](std::size_t num_classes, std::size_t per_class, double radius, double variance, std::uint64_t seed) {
            return dataset_tuple(data::gen_ring({num_classes, per_class, radius, variance, false}, seed));
        },
        py::arg("num_classes") = 10, py::arg("per_class") = 1000, py::arg("radius") = 20.0,
        py::arg("variance") = 2.0, py::arg("seed") = 0);
    m.def(
        "ring_means",
        [](std::size_t num_classes, double radius) {
            data::RingParams p;
            p.num_classes = num_classes;
            p.radius = radius;
            return to_array(data::ring_means(p));
        },
        py::arg("num_classes") = 10, py::arg("radius") = 20.0);
    m.def(
        "corrupt",
        [](const Array& x, const std::string& kind, int intensity, std::uint64_t seed) {
            data::Dataset d;
            d.features = to_matrix(x);
            d.labels.assign(d.features.rows(), 0);
            d.num_classes = 1;
            return to_array(data::corrupt(d, {data::parse_corruption_kind(kind), intensity}, seed).features);
        },
        py::arg("x"), py::arg("kind"), py::arg("intensity"), py::arg("seed") = 0);
    m.def(
        "gen_ood",
        [](std::size_t count, const Array& means, std::uint64_t seed, double box_halfwidth, double exclusion_radius) {
            return to_array(data::gen_ood({count, box_halfwidth, exclusion_radius}, to_matrix(means), seed).points);
        },
        py::arg("count"), py::arg("means"), py::arg("seed") = 0, py::arg("box_halfwidth") = 50.0,
        py::arg("exclusion_radius") = 8.0);

    m.def(
        "ece",
        [](const Array& confidence, const IntArray& predicted, const IntArray& true_label, std::size_t bins) {
            const auto res = metrics::ece(to_records(confidence, predicted, true_label), bins);
            py::list table;
            for (const auto& b : res.table.bins) {
                table.append(py::dict(py::arg("lower") = b.lower, py::arg("upper") = b.upper,
                                      py::arg("count") = b.count, py::arg("mean_confidence") = b.mean_confidence,
                                      py::arg("accuracy") = b.accuracy));
            }
            return py::make_tuple(res.ece, table);
        },
        py::arg("confidence"), py::arg("predicted"), py::arg("true_label"), py::arg("bins") = 15);
    m.def(
        "auroc_auprc",
        [](const Array& scores, const py::array_t<bool>& positive) {
            const auto s = to_vector(scores);
            std::vector<bool> pos(positive.data(), positive.data() + positive.size());
            const auto r = metrics::auroc_auprc(s, pos);
            return py::make_tuple(r.auroc, r.auprc);
        },
        py::arg("scores"), py::arg("is_positive"));
    m.def(
        "boxplot_stats",
        [](const Array& values) {
            const auto b = metrics::boxplot_stats(to_vector(values));
            return py::dict(py::arg("min") = b.min, py::arg("q1") = b.q1, py::arg("median") = b.median,
                            py::arg("q3") = b.q3, py::arg("max") = b.max);
        },
        py::arg("values"));
    m.def(
        "pca2",
        [](const Array& points, std::optional<Array> extra) {
            const Matrix x = to_matrix(points);
            const Matrix e = extra ? to_matrix(*extra) : Matrix(0, x.cols());
            const auto r = metrics::pca2(x, e);
            return py::dict(py::arg("projected") = to_array(r.projected),
                            py::arg("extra_projected") = to_array(r.extra_projected),
                            py::arg("components") = to_array(r.components),
                            py::arg("eigenvalues") = py::make_tuple(r.eigenvalues[0], r.eigenvalues[1]));
        },
        py::arg("points"), py::arg("extra") = py::none());

    py::class_<harness::Model>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& p) { return harness::model_from_checkpoint(nn::load_checkpoint(p)); },
            py::arg("path"))
        .def_property_readonly("head", [](const harness::Model& self) { return std::string(to_string(self.head)); })
        .def("probabilities", [](const harness::Model& self, const Array& x) { return to_array(self.probabilities(to_matrix(x))); })
        .def("predict", [](const harness::Model& self, const Array& x) {
            const auto p = self.predict(to_matrix(x));
            return py::make_tuple(IntArray(static_cast<py::ssize_t>(p.labels.size()), p.labels.data()),
                                  Array(static_cast<py::ssize_t>(p.confidence.size()), p.confidence.data()));
        });

    // Configs cross the boundary as JSON text so the Python side can pass plain dicts.
    m.def(
        "train",
        [](const std::string& config_json, const Array& x, const IntArray& y) {
            const auto c = harness::config_from_json(nlohmann::json::parse(config_json));
            py::gil_scoped_release release;
            auto r = harness::train(c, from_arrays(x, y, c.ring.num_classes));
            return std::pair{std::move(r.model), r.final_train_accuracy};
        },
        py::arg("config_json"), py::arg("x"), py::arg("y"));
    m.def(
        "run_all",
        [](const std::string& config_json) {
            const auto c = harness::config_from_json(nlohmann::json::parse(config_json));
            py::gil_scoped_release release;
            const auto r = harness::run_all(c);
            return std::pair{r.ok, r.error};
        },
        py::arg("config_json"));
    m.def("default_config", [] { return harness::to_json(harness::ExperimentConfig{}).dump(); });
}
