#include "capepde/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "capepde/errors.hpp"
#include "capepde/experiment.hpp"

namespace capepde {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

ExperimentConfig load_with_overrides(const std::string& config_path, std::uint64_t seed,
                                     bool has_seed, const std::string& out, bool has_out) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config " + config_path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (has_seed) j["train"]["seed"] = seed;
    if (has_out) j["run"]["output_dir"] = out;
    return parse_experiment_config(j);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Parameter-conditioned neural PDE surrogates: data generation, training, "
                 "evaluation and ablation sweeps"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume_path, ckpt_path, data_dir;
    std::uint64_t seed = 0;
    bool dry_run = false, verbose = false;
    std::vector<double> lambdas;

    auto* gen = app.add_subcommand("generate", "Generate dataset files from a config");
    gen->add_option("--config", config_path, "Experiment config JSON")->required();
    gen->add_option("--out", out_dir, "Output directory (default: run.data_dir)");

    auto* train = app.add_subcommand("train", "Train a model per the config");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--seed", seed, "Override train.seed");
    train->add_option("--out", out_dir, "Override run.output_dir");
    train->add_option("--resume", resume_path, "Resume from a checkpoint");
    train->add_flag("--dry-run", dry_run, "Validate config, print parameter counts, exit");
    train->add_flag("--verbose", verbose, "Per-epoch progress on stderr");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--ckpt", ckpt_path, "NNCK1 checkpoint")->required();
    eval->add_option("--data", data_dir, "Dataset directory")->required();
    eval->add_option("--out", out_dir, "Report directory")->required();

    auto* abl = app.add_subcommand("ablate", "Run the configured ablation sweep");
    abl->add_option("--config", config_path, "Experiment config JSON")->required();
    abl->add_option("--out", out_dir, "Override run.output_dir");
    abl->add_flag("--verbose", verbose, "Per-epoch progress on stderr");

    auto* dump = app.add_subcommand("dump-kernels", "Write attention-gated depthwise kernels to CSV");
    dump->add_option("--ckpt", ckpt_path, "NNCK1 checkpoint")->required();
    dump->add_option("--out", out_dir, "Output directory")->required();
    dump->add_option("--lambda", lambdas, "Parameter values (default: config data params)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            ExperimentConfig cfg = load_with_overrides(config_path, 0, false, "", false);
            const std::string target = out_dir.empty() ? cfg.data_dir : out_dir;
            GenerateResult r = run_generate(cfg, target);
            std::cout << "wrote " << r.files.size() << " dataset files and " << r.manifest_path
                      << "\n";
        } else if (train->parsed()) {
            ExperimentConfig cfg = load_with_overrides(config_path, seed, train->count("--seed") > 0,
                                                       out_dir, train->count("--out") > 0);
            if (dry_run) {
                ModelBundle bundle = make_bundle(cfg.bundle);
                std::cout << "config ok (hash " << cfg.hash << ")\n";
                std::cout << "base parameters: " << bundle.base.param_count() << "\n";
                if (bundle.cape)
                    std::cout << "attention-module parameters: " << bundle.cape->param_count()
                              << "\n";
                std::cout << "total parameters: " << bundle.param_count() << "\n";
                return kExitOk;
            }
            TrainRunResult r = run_train(cfg, resume_path, verbose);
            std::cout << "run dir: " << r.run_dir << "\nfinal checkpoint: " << r.final_checkpoint
                      << "\n";
        } else if (eval->parsed()) {
            EvalReport r = run_eval(ckpt_path, data_dir, out_dir);
            std::cout << eval_report_csv(r);
        } else if (abl->parsed()) {
            ExperimentConfig cfg = load_with_overrides(config_path, 0, false, out_dir,
                                                       abl->count("--out") > 0);
            AblateResult r = run_ablate(cfg, verbose);
            std::cout << "summary: " << r.summary_path << "\n";
        } else if (dump->parsed()) {
            Checkpoint ckpt = load_checkpoint(ckpt_path);
            ExperimentConfig cfg;
            ModelBundle bundle = bundle_from_checkpoint(ckpt, &cfg);
            if (!bundle.cape) throw ConfigError("checkpoint has no attention module to dump");
            std::vector<double> values = lambdas;
            if (values.empty())
                for (const auto& p : cfg.data.params) values.push_back(p.value);
            auto paths = dump_gated_kernels(*bundle.cape, values, out_dir);
            for (const auto& p : paths) std::cout << p << "\n";
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace capepde
