#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ovabench/harness.hpp"

using namespace ovabench;
using namespace ovabench::harness;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 a stage failed, 2 bad arguments or config.
constexpr int kStageFailure = 1;
constexpr int kUsageError = 2;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string head;
    std::string checkpoint;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExperimentConfig resolve_config(const CommonOptions& o)
{
    ExperimentConfig c;
    try {
        if (!o.config.empty()) {
            c = load_config(o.config);
        }
        if (o.seed) {
            c.seed = *o.seed;
        }
        if (!o.out.empty()) {
            c.output_dir = o.out;
        }
        if (!o.head.empty()) {
            c.head = parse_head_kind(o.head);
            c.heads = {c.head};
        }
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return c;
}

// The checkpoint's head wins over the config; --head must agree with it if given.
Model load_model(const CommonOptions& o, ExperimentConfig& c)
{
    const fs::path path = o.checkpoint.empty() ? c.output_dir / "checkpoint.json" : fs::path(o.checkpoint);
    if (!fs::exists(path)) {
        throw UsageError("checkpoint not found: " + path.string() + " (pass --checkpoint or run train first)");
    }
    const auto ck = nn::load_checkpoint(path);
    if (!o.head.empty() && ck.head != c.head) {
        throw UsageError("--head " + o.head + " does not match checkpoint head " + std::string(to_string(ck.head)));
    }
    c.head = ck.head;
    c.activation = ck.activation;
    return model_from_checkpoint(ck);
}

int cmd_train(const CommonOptions& o)
{
    const auto c = resolve_config(o);
    const auto d = prepare_data(c);
    const auto r = train(c, d.train);
    fs::create_directories(c.output_dir);
    nn::save_checkpoint({c.head, c.activation, c.seed, r.model.params}, c.output_dir / "checkpoint.json");
    write_train_log(r.log, c.output_dir / "train_log.csv");
    std::printf("%s: final train accuracy %.6f after %zu steps\n", std::string(to_string(c.head)).c_str(),
                r.final_train_accuracy, c.optimizer.steps);
    return 0;
}

int cmd_evaluate(const CommonOptions& o)
{
    auto c = resolve_config(o);
    const auto model = load_model(o, c);
    const auto d = prepare_data(c);
    const auto r = evaluate(model, d.test, d.ood, c);
    write_evaluation(r, c.output_dir);
    std::cout << r.summary.dump(2) << '\n';
    return 0;
}

int cmd_sweep(const CommonOptions& o)
{
    auto c = resolve_config(o);
    const auto model = load_model(o, c);
    const auto d = prepare_data(c);
    const auto s = shift_sweep(model, d.test, c.sweep, c);
    write_sweep(s, c.output_dir);
    for (const auto& row : s.rows) {
        std::printf("%-15s %d accuracy %.4f ece %.4f\n", row.kind.c_str(), row.intensity, row.accuracy, row.ece);
    }
    return 0;
}

int cmd_landscape(const CommonOptions& o)
{
    auto c = resolve_config(o);
    const auto model = load_model(o, c);
    write_landscape(landscape(model, c.landscape), c.output_dir);
    std::printf("wrote %s\n", (c.output_dir / "landscape.csv").string().c_str());
    return 0;
}

int cmd_centers(const CommonOptions& o)
{
    auto c = resolve_config(o);
    const auto model = load_model(o, c);
    if (!is_distance_head(model.head)) {
        throw UsageError("centers: head '" + std::string(to_string(model.head)) + "' has no class centers");
    }
    const auto d = prepare_data(c);
    const auto rep = centers_report(model, d.train);
    fs::create_directories(c.output_dir);
    write_centers(rep, c.output_dir / "centers.csv");
    std::printf("mean alignment error %.6f\n", rep.mean_alignment_error);
    return 0;
}

int cmd_run_all(const CommonOptions& o)
{
    const auto c = resolve_config(o);
    const auto r = run_all(c);
    if (!r.ok) {
        std::fprintf(stderr, "run-all failed: %s\n", r.error.c_str());
        return kStageFailure;
    }
    std::ifstream table(c.output_dir / "comparison.csv");
    std::cout << table.rdbuf();
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Softmax vs one-vs-all heads on a 2D toy task"};
    app.require_subcommand(1);
    CommonOptions opts;

    auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
        sub->add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "Root seed");
        sub->add_option("--out", opts.out, "Output directory");
        sub->add_option("--head", opts.head, "softmax, dm, ova or ova_dm");
        if (needs_checkpoint) {
            sub->add_option("--checkpoint", opts.checkpoint, "Checkpoint file (default: <out>/checkpoint.json)");
        }
    };

    struct Command {
        const char* name;
        const char* help;
        bool needs_checkpoint;
        int (*run)(const CommonOptions&);
    };
    const Command commands[] = {
        {"train", "Train one head and write checkpoint.json and train_log.csv", false, cmd_train},
        {"evaluate", "Evaluate a checkpoint on the test and OOD sets", true, cmd_evaluate},
        {"sweep", "Accuracy and ECE under gaussian noise and rotation", true, cmd_sweep},
        {"landscape", "Confidence over a 2D input grid", true, cmd_landscape},
        {"centers", "PCA of embeddings and learned class centers", true, cmd_centers},
        {"run-all", "Full pipeline for every head plus a comparison table", false, cmd_run_all},
    };
    const Command* chosen = nullptr;
    for (const auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        add_common(sub, cmd.needs_checkpoint);
        sub->callback([&chosen, &cmd] { chosen = &cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        return chosen->run(opts);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsageError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kStageFailure;
    }
}
