#include "ovabench/config.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "ovabench/checkpoint.hpp"
#include "ovabench/random.hpp"

namespace ovabench::harness {

using nlohmann::json;

std::vector<data::CorruptionSpec> ExperimentConfig::default_sweep()
{
    std::vector<data::CorruptionSpec> out;
    for (const auto kind : {data::CorruptionKind::GaussianNoise, data::CorruptionKind::Rotation}) {
        for (int level = 1; level <= 5; ++level) {
            out.push_back({kind, level});
        }
    }
    return out;
}

void validate(const ExperimentConfig& c)
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw std::invalid_argument("invalid config: " + what);
        }
    };
    require(c.ring.num_classes >= 2, "dataset.num_classes must be >= 2");
    require(c.ring.per_class >= 2, "dataset.per_class must be >= 2");
    require(c.ring.radius > 0.0, "dataset.radius must be positive");
    require(c.ring.variance > 0.0, "dataset.variance must be positive");
    require(c.train_fraction > 0.0 && c.train_fraction <= 1.0, "train_fraction must lie in (0, 1]");
    require(!c.hidden_widths.empty(), "model.hidden_widths must not be empty");
    for (const auto w : c.hidden_widths) {
        require(w > 0, "model.hidden_widths entries must be positive");
    }
    require(c.optimizer.learning_rate > 0.0, "optimizer.learning_rate must be positive");
    require(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0, "optimizer.momentum must lie in [0, 1)");
    require(c.optimizer.batch_size > 0, "optimizer.batch_size must be positive");
    require(c.optimizer.log_every > 0, "optimizer.log_every must be positive");
    for (const auto& s : c.sweep) {
        require(s.intensity >= 1 && s.intensity <= 5, "sweep intensities must lie in [1, 5]");
    }
    require(c.ood.box_halfwidth > 0.0, "ood.box_halfwidth must be positive");
    require(c.ood.exclusion_radius >= 0.0, "ood.exclusion_radius must be non-negative");
    require(c.ece_bins >= 1, "metrics.ece_bins must be >= 1");
    require(c.threshold_count >= 2, "metrics.threshold_count must be >= 2");
    require(c.histogram_bins >= 1, "metrics.histogram_bins must be >= 1");
    require(c.landscape.resolution >= 2, "landscape.resolution must be >= 2");
    require(c.landscape.xmax > c.landscape.xmin && c.landscape.ymax > c.landscape.ymin,
            "landscape bounds must be increasing");
    require(!c.heads.empty(), "heads must not be empty");
}

namespace {

// A misspelled key would otherwise fall back to its default without a word.
void reject_unknown_keys(const json& doc, const json& reference, const std::string& path)
{
    if (!doc.is_object() || !reference.is_object()) {
        return;
    }
    for (const auto& [key, value] : doc.items()) {
        const auto name = path.empty() ? key : path + "." + key;
        const auto it = reference.find(key);
        if (it == reference.end()) {
            throw std::invalid_argument("unknown config key '" + name + "'");
        }
        if (value.is_array() && it->is_array() && !it->empty()) {
            for (const auto& item : value) {
                reject_unknown_keys(item, it->front(), name);
            }
        } else {
            reject_unknown_keys(value, *it, name);
        }
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& doc)
{
    if (!doc.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    reject_unknown_keys(doc, to_json(ExperimentConfig{}), "");
    ExperimentConfig c;
    if (const auto it = doc.find("dataset"); it != doc.end()) {
        c.ring.num_classes = it->value("num_classes", c.ring.num_classes);
        c.ring.per_class = it->value("per_class", c.ring.per_class);
        c.ring.radius = it->value("radius", c.ring.radius);
        c.ring.variance = it->value("variance", c.ring.variance);
        c.ring.literal_angle = it->value("literal_angle", c.ring.literal_angle);
        c.train_fraction = it->value("train_fraction", c.train_fraction);
    }
    if (const auto it = doc.find("model"); it != doc.end()) {
        c.hidden_widths = it->value("hidden_widths", c.hidden_widths);
        if (it->contains("activation")) {
            c.activation = nn::parse_activation(it->at("activation").get<std::string>());
        }
        if (it->contains("center_init")) {
            const auto name = it->at("center_init").get<std::string>();
            if (name == "zeros") {
                c.center_init = heads::CenterInit::Zeros;
            } else if (name == "random") {
                c.center_init = heads::CenterInit::Random;
            } else {
                throw std::invalid_argument("unknown center_init '" + name + "'");
            }
        }
    }
    if (doc.contains("head")) {
        c.head = parse_head_kind(doc.at("head").get<std::string>());
    }
    if (const auto it = doc.find("heads"); it != doc.end()) {
        c.heads.clear();
        for (const auto& h : *it) {
            c.heads.push_back(parse_head_kind(h.get<std::string>()));
        }
    }
    if (const auto it = doc.find("optimizer"); it != doc.end()) {
        c.optimizer.learning_rate = it->value("learning_rate", c.optimizer.learning_rate);
        c.optimizer.momentum = it->value("momentum", c.optimizer.momentum);
        c.optimizer.batch_size = it->value("batch_size", c.optimizer.batch_size);
        c.optimizer.steps = it->value("steps", c.optimizer.steps);
        c.optimizer.log_every = it->value("log_every", c.optimizer.log_every);
    }
    if (const auto it = doc.find("sweep"); it != doc.end()) {
        c.sweep.clear();
        for (const auto& s : *it) {
            c.sweep.push_back({data::parse_corruption_kind(s.at("kind").get<std::string>()),
                               s.at("intensity").get<int>()});
        }
    }
    if (const auto it = doc.find("ood"); it != doc.end()) {
        c.ood.count = it->value("count", c.ood.count);
        c.ood.box_halfwidth = it->value("box_halfwidth", c.ood.box_halfwidth);
        c.ood.exclusion_radius = it->value("exclusion_radius", c.ood.exclusion_radius);
    }
    if (const auto it = doc.find("metrics"); it != doc.end()) {
        c.ece_bins = it->value("ece_bins", c.ece_bins);
        c.threshold_count = it->value("threshold_count", c.threshold_count);
        c.histogram_bins = it->value("histogram_bins", c.histogram_bins);
    }
    if (const auto it = doc.find("landscape"); it != doc.end()) {
        c.landscape.xmin = it->value("xmin", c.landscape.xmin);
        c.landscape.xmax = it->value("xmax", c.landscape.xmax);
        c.landscape.ymin = it->value("ymin", c.landscape.ymin);
        c.landscape.ymax = it->value("ymax", c.landscape.ymax);
        c.landscape.resolution = it->value("resolution", c.landscape.resolution);
        c.landscape.write_pgm = it->value("write_pgm", c.landscape.write_pgm);
    }
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("output_dir")) {
        c.output_dir = doc.at("output_dir").get<std::string>();
    }
    validate(c);
    return c;
}

json to_json(const ExperimentConfig& c)
{
    json sweep = json::array();
    for (const auto& s : c.sweep) {
        sweep.push_back({{"kind", data::to_string(s.kind)}, {"intensity", s.intensity}});
    }
    json head_names = json::array();
    for (const auto h : c.heads) {
        head_names.push_back(to_string(h));
    }
    return {
        {"dataset",
         {{"num_classes", c.ring.num_classes},
          {"per_class", c.ring.per_class},
          {"radius", c.ring.radius},
          {"variance", c.ring.variance},
          {"literal_angle", c.ring.literal_angle},
          {"train_fraction", c.train_fraction}}},
        {"model",
         {{"hidden_widths", c.hidden_widths},
          {"activation", nn::to_string(c.activation)},
          {"center_init", c.center_init == heads::CenterInit::Zeros ? "zeros" : "random"}}},
        {"head", to_string(c.head)},
        {"heads", head_names},
        {"optimizer",
         {{"learning_rate", c.optimizer.learning_rate},
          {"momentum", c.optimizer.momentum},
          {"batch_size", c.optimizer.batch_size},
          {"steps", c.optimizer.steps},
          {"log_every", c.optimizer.log_every}}},
        {"sweep", sweep},
        {"ood",
         {{"count", c.ood.count},
          {"box_halfwidth", c.ood.box_halfwidth},
          {"exclusion_radius", c.ood.exclusion_radius}}},
        {"metrics",
         {{"ece_bins", c.ece_bins}, {"threshold_count", c.threshold_count}, {"histogram_bins", c.histogram_bins}}},
        {"landscape",
         {{"xmin", c.landscape.xmin},
          {"xmax", c.landscape.xmax},
          {"ymin", c.landscape.ymin},
          {"ymax", c.landscape.ymax},
          {"resolution", c.landscape.resolution},
          {"write_pgm", c.landscape.write_pgm}}},
        {"seed", c.seed},
        {"output_dir", c.output_dir.string()},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    return config_from_json(json::parse(in));
}

std::uint64_t derive_seed(std::uint64_t root, SeedStream stream, std::uint64_t offset)
{
    return mix_seed(root, static_cast<std::uint64_t>(stream) + offset);
}

}  // namespace ovabench::harness
