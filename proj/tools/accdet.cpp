// Command-line front end: synth | train | evaluate | sweep | separability.
// Configuration comes from a key-value file (--config) with --seed/--out
// overrides; every command writes its artifacts under the output directory.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "accdet/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value configuration file");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "run seed (overrides config)");
}

accdet::RunConfig resolve_config(const CommonArgs& args) {
    accdet::RunConfig cfg;
    if (!args.config_path.empty()) cfg = accdet::load_run_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM-based freeway accident detection pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, eval_args, sweep_args, sep_args;
    std::vector<std::string> model_paths;
    std::string sep_model;

    auto* synth = app.add_subcommand("synth", "generate a synthetic site dataset");
    add_common(synth, synth_args);
    auto* train = app.add_subcommand("train", "cross-validated training run");
    add_common(train, train_args);
    auto* evaluate = app.add_subcommand("evaluate", "apply trained models to a dataset");
    add_common(evaluate, eval_args);
    evaluate->add_option("--model", model_paths, "model file(s) to evaluate")->required();
    auto* sweep = app.add_subcommand("sweep", "train/evaluate a TSL x DAI grid");
    add_common(sweep, sweep_args);
    auto* separability = app.add_subcommand("separability", "raw vs encoded class separability");
    add_common(separability, sep_args);
    separability->add_option("--model", sep_model, "trained model file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto report = accdet::cmd_synth(resolve_config(synth_args));
            std::printf("synth: %llu readings, %llu crash reports\n",
                        report.at("readings").get<unsigned long long>(),
                        report.at("crashes").get<unsigned long long>());
        } else if (train->parsed()) {
            const auto report = accdet::cmd_train(resolve_config(train_args));
            std::printf("train: %s\n", report.at("averages").dump().c_str());
        } else if (evaluate->parsed()) {
            const auto report = accdet::cmd_evaluate(resolve_config(eval_args), model_paths);
            std::printf("evaluate: %s\n", report.at("averages").dump().c_str());
        } else if (sweep->parsed()) {
            const auto report = accdet::cmd_sweep(resolve_config(sweep_args));
            std::printf("sweep: %zu cells\n", report.at("cells").size());
        } else if (separability->parsed()) {
            const auto report = accdet::cmd_separability(resolve_config(sep_args), sep_model);
            std::printf("separability: %s\n", report.at("spaces").dump().c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
