#include "capepde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "capepde/dataset_io.hpp"
#include "capepde/errors.hpp"
#include "capepde/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace capepde {

namespace {

void require_keys(const json& j, const std::string& section,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad type for key '") + key + "'");
    }
}

std::vector<ParamCounts> default_params(PdeKind kind) {
    std::vector<ParamCounts> out;
    if (kind == PdeKind::advection) {
        for (double b : {0.2, 0.4, 0.7, 2.0, 4.0}) out.push_back({b, 200, 0});
        for (double b : {0.1, 1.0, 7.0}) out.push_back({b, 0, 50});
    } else {
        for (double v : {0.002, 0.007, 0.02, 0.04, 0.2, 0.4, 2.0}) out.push_back({v, 200, 0});
        for (double v : {0.001, 0.01, 0.1, 1.0, 4.0}) out.push_back({v, 0, 50});
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
    require_keys(j, "<root>", {"data", "model", "cape", "train", "run", "ablate"});
    ExperimentConfig cfg;

    // --- data ---
    const json data = j.value("data", json::object());
    require_keys(data, "data", {"kind", "grid", "params", "seed", "burgers"});
    cfg.data.kind = pde_kind_from_name(get_or<std::string>(data, "kind", "advection"));
    {
        const json grid = data.value("grid", json::object());
        require_keys(grid, "data.grid", {"n_x", "n_t", "dt", "length"});
        cfg.data.grid.n_x = get_or<std::int64_t>(grid, "n_x", 128);
        cfg.data.grid.n_t = get_or<std::int64_t>(grid, "n_t", 40);
        cfg.data.grid.dt = get_or<double>(grid, "dt", 0.05);
        cfg.data.grid.length = get_or<double>(grid, "length", 1.0);
        cfg.data.grid.validate();
    }
    if (data.contains("params")) {
        if (!data.at("params").is_array()) throw ConfigError("data.params must be an array");
        for (const json& p : data.at("params")) {
            require_keys(p, "data.params[]", {"value", "n_train", "n_test"});
            ParamCounts pc;
            pc.value = get_or<double>(p, "value", 0.0);
            pc.n_train = get_or<std::int64_t>(p, "n_train", 0);
            pc.n_test = get_or<std::int64_t>(p, "n_test", 0);
            if (pc.value <= 0) throw ConfigError("data.params[].value must be positive");
            if (pc.n_train < 0 || pc.n_test < 0) throw ConfigError("trajectory counts must be >= 0");
            cfg.data.params.push_back(pc);
        }
    } else {
        cfg.data.params = default_params(cfg.data.kind);
    }
    cfg.data.seed = get_or<std::uint64_t>(data, "seed", 7);
    {
        const json bg = data.value("burgers", json::object());
        require_keys(bg, "data.burgers", {"oversample", "cfl"});
        cfg.data.burgers.oversample = get_or<std::int64_t>(bg, "oversample", 8);
        cfg.data.burgers.cfl = get_or<double>(bg, "cfl", 0.4);
    }

    // --- model ---
    const json model = j.value("model", json::object());
    require_keys(model, "model", {"kind", "conditioning", "fno", "cnn"});
    cfg.bundle.kind = base_kind_from_name(get_or<std::string>(model, "kind", "fno"));
    cfg.bundle.conditioning =
        conditioning_from_name(get_or<std::string>(model, "conditioning", "vanilla"));
    {
        const json f = model.value("fno", json::object());
        require_keys(f, "model.fno", {"width", "modes", "n_layers"});
        const std::int64_t default_width = cfg.bundle.conditioning == Conditioning::cape ? 20 : 36;
        cfg.bundle.fno.width = get_or<std::int64_t>(f, "width", default_width);
        cfg.bundle.fno.modes = get_or<std::int64_t>(f, "modes", 12);
        cfg.bundle.fno.n_layers = get_or<std::int64_t>(f, "n_layers", 4);
    }
    {
        const json c = model.value("cnn", json::object());
        require_keys(c, "model.cnn", {"channels", "kernel"});
        cfg.bundle.cnn.channels = get_or<std::vector<std::int64_t>>(c, "channels", {32, 32, 32});
        cfg.bundle.cnn.kernel = get_or<std::int64_t>(c, "kernel", 5);
    }

    // --- cape ---
    const json cape = j.value("cape", json::object());
    require_keys(cape, "cape",
                 {"d", "ell", "kernel", "modes", "hidden", "variant", "ablation", "branch_order"});
    {
        // Sequential branch chaining is recognized but deliberately not built.
        const std::string order = get_or<std::string>(cape, "branch_order", "parallel");
        if (order == "sequential")
            throw ConfigError("cape.branch_order=sequential is not implemented; only the parallel"
                              " branch sum is supported");
        if (order != "parallel") throw ConfigError("unknown cape.branch_order '" + order + "'");
    }
    cfg.bundle.cape.d = get_or<std::int64_t>(cape, "d", 64);
    cfg.bundle.cape.ell = get_or<std::int64_t>(cape, "ell", 1);
    cfg.bundle.cape.kernel = get_or<std::int64_t>(cape, "kernel", 5);
    cfg.bundle.cape.modes = get_or<std::int64_t>(cape, "modes", 12);
    cfg.bundle.cape.hidden = get_or<std::int64_t>(cape, "hidden", 0);
    cfg.bundle.cape.n_x = cfg.data.grid.n_x;
    {
        // LayerNorm in the residual head hurts an FNO base; default follows the base kind.
        const std::string default_variant =
            cfg.bundle.kind == BaseKind::fno ? "no_layernorm" : "layernorm";
        cfg.bundle.cape.variant =
            cape_variant_from_name(get_or<std::string>(cape, "variant", default_variant));
    }
    if (cape.contains("ablation")) {
        for (const json& a : cape.at("ablation")) {
            CapeConfig next = ablate(cfg.bundle.cape, a.get<std::string>());
            cfg.bundle.cape = next;
        }
    }

    // --- train ---
    const json train = j.value("train", json::object());
    require_keys(train, "train",
                 {"lr0", "halve_every", "batch", "alpha", "warmup_epochs", "noise_rel", "mode",
                  "loss_norm", "seed", "epochs", "steepness", "ar_truncate", "n_threads",
                  "eval_every"});
    cfg.train.lr0 = get_or<double>(train, "lr0", 3e-3);
    cfg.train.halve_every = get_or<std::int64_t>(train, "halve_every", 20);
    cfg.train.batch = get_or<std::int64_t>(train, "batch", 50);
    cfg.train.alpha = get_or<double>(train, "alpha", 5.7e-5);
    cfg.train.warmup_epochs = get_or<std::int64_t>(train, "warmup_epochs", 3);
    cfg.train.noise_rel = get_or<double>(train, "noise_rel", 0.01);
    cfg.train.mode = train_mode_from_name(get_or<std::string>(train, "mode", "curriculum"));
    cfg.train.loss_norm = loss_norm_from_name(get_or<std::string>(train, "loss_norm", "frame"));
    cfg.train.seed = get_or<std::uint64_t>(train, "seed", 1);
    cfg.train.epochs = get_or<std::int64_t>(train, "epochs", 50);
    cfg.train.steepness = get_or<double>(train, "steepness", 0.2);
    cfg.train.ar_truncate = get_or<std::int64_t>(train, "ar_truncate", 0);
    cfg.train.n_threads = get_or<std::int64_t>(train, "n_threads", 0);
    cfg.train.eval_every = get_or<std::int64_t>(train, "eval_every", 0);
    cfg.train.validate();
    cfg.bundle.seed = cfg.train.seed;

    // --- run ---
    const json run = j.value("run", json::object());
    require_keys(run, "run", {"output_dir", "data_dir", "checkpoint_every"});
    cfg.output_dir = get_or<std::string>(run, "output_dir", "runs/run");
    cfg.data_dir = get_or<std::string>(run, "data_dir", "data");
    cfg.checkpoint_every = get_or<std::int64_t>(run, "checkpoint_every", 10);
    if (cfg.checkpoint_every < 1) throw ConfigError("run.checkpoint_every must be >= 1");

    // --- ablate ---
    const json abl = j.value("ablate", json::object());
    require_keys(abl, "ablate", {"drops", "modes", "seeds"});
    cfg.ablate_drops = get_or<std::vector<std::string>>(abl, "drops", {"none", "spectral", "conv1x1"});
    cfg.ablate_modes = get_or<std::vector<std::string>>(
        abl, "modes", {"curriculum", "autoregressive", "teacher_forcing"});
    cfg.ablate_seeds = get_or<std::vector<std::uint64_t>>(abl, "seeds", {cfg.train.seed});
    for (const auto& d : cfg.ablate_drops)
        if (d != "none") (void)ablate(cfg.bundle.cape, d);  // validate names
    for (const auto& m : cfg.ablate_modes) (void)train_mode_from_name(m);

    // Normalized document (defaults filled) for hashing and embedding.
    json raw;
    raw["data"]["kind"] = pde_kind_name(cfg.data.kind);
    raw["data"]["grid"] = {{"n_x", cfg.data.grid.n_x},
                           {"n_t", cfg.data.grid.n_t},
                           {"dt", cfg.data.grid.dt},
                           {"length", cfg.data.grid.length}};
    raw["data"]["params"] = json::array();
    for (const auto& p : cfg.data.params)
        raw["data"]["params"].push_back(
            {{"value", p.value}, {"n_train", p.n_train}, {"n_test", p.n_test}});
    raw["data"]["seed"] = cfg.data.seed;
    raw["data"]["burgers"] = {{"oversample", cfg.data.burgers.oversample},
                              {"cfl", cfg.data.burgers.cfl}};
    raw["model"]["kind"] = base_kind_name(cfg.bundle.kind);
    raw["model"]["conditioning"] = conditioning_name(cfg.bundle.conditioning);
    raw["model"]["fno"] = {{"width", cfg.bundle.fno.width},
                           {"modes", cfg.bundle.fno.modes},
                           {"n_layers", cfg.bundle.fno.n_layers}};
    raw["model"]["cnn"] = {{"channels", cfg.bundle.cnn.channels}, {"kernel", cfg.bundle.cnn.kernel}};
    raw["cape"] = {{"d", cfg.bundle.cape.d},
                   {"ell", cfg.bundle.cape.ell},
                   {"kernel", cfg.bundle.cape.kernel},
                   {"modes", cfg.bundle.cape.modes},
                   {"hidden", cfg.bundle.cape.hidden},
                   {"variant", cape_variant_name(cfg.bundle.cape.variant)},
                   {"ablation", json::array()}};
    if (cfg.bundle.cape.ablation.drop_spectral) raw["cape"]["ablation"].push_back("spectral");
    if (cfg.bundle.cape.ablation.drop_conv1x1) raw["cape"]["ablation"].push_back("conv1x1");
    if (cfg.bundle.cape.ablation.drop_depthwise) raw["cape"]["ablation"].push_back("depthwise");
    raw["train"] = {{"lr0", cfg.train.lr0},
                    {"halve_every", cfg.train.halve_every},
                    {"batch", cfg.train.batch},
                    {"alpha", cfg.train.alpha},
                    {"warmup_epochs", cfg.train.warmup_epochs},
                    {"noise_rel", cfg.train.noise_rel},
                    {"mode", train_mode_name(cfg.train.mode)},
                    {"loss_norm", loss_norm_name(cfg.train.loss_norm)},
                    {"seed", cfg.train.seed},
                    {"epochs", cfg.train.epochs},
                    {"steepness", cfg.train.steepness},
                    {"ar_truncate", cfg.train.ar_truncate},
                    {"n_threads", cfg.train.n_threads},
                    {"eval_every", cfg.train.eval_every}};
    raw["run"] = {{"output_dir", cfg.output_dir},
                  {"data_dir", cfg.data_dir},
                  {"checkpoint_every", cfg.checkpoint_every}};
    raw["ablate"] = {{"drops", cfg.ablate_drops},
                     {"modes", cfg.ablate_modes},
                     {"seeds", cfg.ablate_seeds}};
    cfg.raw = raw;
    cfg.hash = sha256_hex(raw.dump());
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

std::vector<double> seen_values(const DataConfig& data) {
    std::vector<double> out;
    for (const auto& p : data.params)
        if (p.n_train > 0) out.push_back(p.value);
    return out;
}

Dataset load_split(const ExperimentConfig& cfg, const std::string& split) {
    Dataset ds;
    ds.split = split;
    for (const auto& p : cfg.data.params) {
        const std::int64_t count = split == "train" ? p.n_train : p.n_test;
        if (count == 0) continue;
        const std::string path =
            cfg.data_dir + "/" + dataset_file_name(cfg.data.kind, p.value, split);
        if (!fs::exists(path)) throw DataError("missing dataset file " + path);
        TrajectorySet set = read_trajectory_set(path);
        if (static_cast<std::int64_t>(set.items.size()) != count)
            throw DataError("dataset file " + path + " holds " + std::to_string(set.items.size()) +
                            " trajectories, config expects " + std::to_string(count));
        ds.sets.push_back(std::move(set));
    }
    if (ds.sets.empty()) throw DataError("no dataset files for split " + split);
    return ds;
}

std::string dataset_hash(const ExperimentConfig& cfg) {
    std::string acc;
    for (const std::string split : {"train", "test"}) {
        for (const auto& p : cfg.data.params) {
            const std::int64_t count = split == std::string("train") ? p.n_train : p.n_test;
            if (count == 0) continue;
            const std::string path =
                cfg.data_dir + "/" + dataset_file_name(cfg.data.kind, p.value, split);
            if (fs::exists(path)) acc += sha256_file(path) + "\n";
        }
    }
    return sha256_hex(acc);
}

GenerateResult run_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    GenerateResult result;
    json manifest;
    manifest["config_hash"] = cfg.hash;
    manifest["files"] = json::array();
    for (const std::string split : {"train", "test"}) {
        Dataset ds = generate_dataset(cfg.data, split);
        for (const auto& set : ds.sets) {
            const std::string name = dataset_file_name(set.params.kind, set.params.value, split);
            const std::string path = out_dir + "/" + name;
            write_trajectory_set(set, path);
            manifest["files"].push_back({{"name", name},
                                         {"split", split},
                                         {"lambda", set.params.value},
                                         {"n_traj", set.items.size()},
                                         {"sha256", sha256_file(path)}});
            result.files.push_back(path);
        }
    }
    result.manifest_path = out_dir + "/manifest.json";
    write_file(result.manifest_path, manifest.dump(2) + "\n");
    return result;
}

TrainRunResult run_train(const ExperimentConfig& cfg, const std::string& resume_ckpt, bool verbose) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset train_data = load_split(cfg, "train");
    Dataset test_data = load_split(cfg, "test");
    const std::string ds_hash = dataset_hash(cfg);

    std::vector<const Trajectory*> trajs;
    for (const auto& set : train_data.sets)
        for (const auto& t : set.items) trajs.push_back(&t);

    Trainer trainer(make_bundle(cfg.bundle), cfg.train, cfg.data.grid.n_t);
    std::int64_t start_epoch = 0;
    if (!resume_ckpt.empty()) start_epoch = trainer.restore(load_checkpoint(resume_ckpt));

    fs::create_directories(cfg.output_dir);
    write_file(cfg.output_dir + "/config.json", cfg.raw.dump(2) + "\n");

    const EvalOptions eval_opts{seen_values(cfg.data), cfg.train.n_threads};
    std::vector<MetricsRow> metrics;
    auto append_eval_rows = [&](std::int64_t epoch) {
        EvalReport rep = evaluate(trainer.bundle(), test_data, eval_opts);
        for (const auto& row : rep.rows) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%g", row.lambda);
            metrics.push_back({epoch, "test", buf, row.nrmse_mean, trainer.lr_at(epoch),
                               trainer.k_trans_at(epoch)});
        }
        return rep;
    };

    for (std::int64_t epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
        const double loss = trainer.train_epoch(trajs, epoch);
        metrics.push_back(
            {epoch, "train", "all", loss, trainer.lr_at(epoch), trainer.k_trans_at(epoch)});
        if (verbose)
            std::cerr << "epoch " << epoch << " train loss/step " << loss << " lr "
                      << trainer.lr_at(epoch) << " k_trans " << trainer.k_trans_at(epoch) << "\n";
        const bool last = epoch + 1 == cfg.train.epochs;
        if (cfg.train.eval_every > 0 && (epoch + 1) % cfg.train.eval_every == 0 && !last)
            append_eval_rows(epoch);
        if ((epoch + 1) % cfg.checkpoint_every == 0 && !last) {
            Checkpoint ckpt = trainer.make_checkpoint(epoch + 1, {{"config", cfg.raw}});
            save_checkpoint(ckpt, cfg.output_dir + "/ckpt_" + std::to_string(epoch + 1) + ".nnck1");
        }
    }

    TrainRunResult result;
    result.run_dir = cfg.output_dir;
    result.final_report = append_eval_rows(cfg.train.epochs - 1);
    result.final_report.config_hash = cfg.hash;
    result.metrics = std::move(metrics);
    result.param_count = trainer.bundle().param_count();

    write_metrics_csv(result.metrics, cfg.output_dir + "/metrics.csv");
    write_eval_report(result.final_report, cfg.output_dir + "/eval_test.csv",
                      cfg.output_dir + "/eval_test.json");
    Checkpoint final_ckpt = trainer.make_checkpoint(cfg.train.epochs, {{"config", cfg.raw}});
    result.final_checkpoint = cfg.output_dir + "/final.nnck1";
    save_checkpoint(final_ckpt, result.final_checkpoint);

    json summary;
    summary["config_hash"] = cfg.hash;
    summary["dataset_hash"] = ds_hash;
    summary["param_count"] = result.param_count;
    summary["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    summary["final_test_nrmse_seen"] = [&] {
        try {
            return result.final_report.mean_over(seen_values(cfg.data));
        } catch (const DataError&) {
            return -1.0;
        }
    }();
    write_file(cfg.output_dir + "/summary.json", summary.dump(2) + "\n");
    return result;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt, ExperimentConfig* out_cfg) {
    if (!ckpt.meta.contains("config"))
        throw DataError("checkpoint has no embedded config; cannot rebuild the model");
    ExperimentConfig cfg = parse_experiment_config(ckpt.meta["config"]);
    ModelBundle bundle = make_bundle(cfg.bundle);
    for (const auto& [name, t] : bundle.named_params()) {
        Tensor src = ckpt.tensor(name);
        if (src.shape() != t.shape())
            throw DataError("checkpoint tensor '" + name + "' shape mismatch");
        Tensor dst = t;
        std::copy(src.value().begin(), src.value().end(), dst.raw_value().begin());
    }
    if (out_cfg) *out_cfg = std::move(cfg);
    return bundle;
}

EvalReport run_eval(const std::string& checkpoint_path, const std::string& data_dir,
                    const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    ExperimentConfig cfg;
    ModelBundle bundle = bundle_from_checkpoint(ckpt, &cfg);
    cfg.data_dir = data_dir;
    Dataset test_data = load_split(cfg, "test");
    EvalReport report =
        evaluate(bundle, test_data, EvalOptions{seen_values(cfg.data), cfg.train.n_threads});
    report.config_hash = cfg.hash;
    fs::create_directories(out_dir);
    write_eval_report(report, out_dir + "/eval_test.csv", out_dir + "/eval_test.json");
    return report;
}

AblateResult run_ablate(const ExperimentConfig& cfg, bool verbose) {
    AblateResult result;
    result.dataset_hash = dataset_hash(cfg);
    fs::create_directories(cfg.output_dir);

    // The full method (no drop, curriculum) anchors the deltas per seed.
    std::vector<std::string> drops = cfg.ablate_drops;
    if (std::find(drops.begin(), drops.end(), "none") == drops.end())
        drops.insert(drops.begin(), "none");
    std::vector<std::string> modes = cfg.ablate_modes;
    if (std::find(modes.begin(), modes.end(), "curriculum") == modes.end())
        modes.insert(modes.begin(), "curriculum");

    std::map<std::uint64_t, double> full_by_seed;
    auto run_one = [&](const std::string& drop, const std::string& mode, std::uint64_t seed) {
        ExperimentConfig sub = cfg;
        sub.train.seed = seed;
        sub.bundle.seed = seed;
        sub.train.mode = train_mode_from_name(mode);
        if (drop != "none") sub.bundle.cape = ablate(sub.bundle.cape, drop);
        sub.output_dir = cfg.output_dir + "/" + drop + "_" + mode + "_s" + std::to_string(seed);
        sub.raw["train"]["seed"] = seed;
        sub.raw["train"]["mode"] = mode;
        sub.raw["run"]["output_dir"] = sub.output_dir;
        if (drop != "none") sub.raw["cape"]["ablation"].push_back(drop);
        sub.hash = sha256_hex(sub.raw.dump());
        TrainRunResult r = run_train(sub, {}, verbose);
        return r.final_report.mean_over(seen_values(cfg.data));
    };

    for (std::uint64_t seed : cfg.ablate_seeds) full_by_seed[seed] = run_one("none", "curriculum", seed);
    for (const auto& drop : drops)
        for (const auto& mode : modes)
            for (std::uint64_t seed : cfg.ablate_seeds) {
                double value;
                if (drop == "none" && mode == "curriculum")
                    value = full_by_seed[seed];
                else
                    value = run_one(drop, mode, seed);
                result.rows.push_back({drop, mode, seed, value, value - full_by_seed[seed]});
            }

    std::string csv = "drop,mode,seed,nrmse,delta_vs_full,delta_formatted\n";
    for (const auto& r : result.rows) {
        char value[40], delta[48];
        std::snprintf(value, sizeof(value), "%.6g", r.nrmse);
        std::snprintf(delta, sizeof(delta), "(%+.2f)", r.delta);
        csv += r.drop + "," + r.mode + "," + std::to_string(r.seed) + "," + value + "," +
               std::to_string(r.delta) + "," + delta + "\n";
    }
    result.summary_path = cfg.output_dir + "/ablation_summary.csv";
    write_file(result.summary_path, csv);
    json spread;
    spread["dataset_hash"] = result.dataset_hash;
    write_file(cfg.output_dir + "/ablation_summary.json", spread.dump(2) + "\n");
    return result;
}

}  // namespace capepde
