#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "capepde/pde_data.hpp"
#include "capepde/trainer.hpp"

namespace capepde {

/// Every knob of a run in one schema-validated record. Unknown keys are
/// rejected; defaults follow the Appendix-B-style values baked into the
/// schema (see README). The normalized form (defaults filled) is what gets
/// hashed and embedded into run artifacts.
struct ExperimentConfig {
    DataConfig data;
    BundleSpec bundle;
    TrainConfig train;
    std::string output_dir = "runs/run";
    std::string data_dir = "data";
    std::int64_t checkpoint_every = 10;

    // cmd_ablate sweep axes.
    std::vector<std::string> ablate_drops;   // subset of {spectral, conv1x1, depthwise, layernorm, none}
    std::vector<std::string> ablate_modes;   // subset of {curriculum, autoregressive, teacher_forcing}
    std::vector<std::uint64_t> ablate_seeds;

    nlohmann::json raw;  // normalized config document
    std::string hash;    // sha256 of raw.dump()
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Reconstructs a bundle + conditioning from a checkpoint's embedded config.
ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt, ExperimentConfig* out_cfg = nullptr);

/// Seen parameter values (n_train > 0) in config order.
std::vector<double> seen_values(const DataConfig& data);

/// Loads one split from the data directory; missing files raise DataError.
Dataset load_split(const ExperimentConfig& cfg, const std::string& split);

/// SHA-256 over the referenced dataset files' hashes (order-stable).
std::string dataset_hash(const ExperimentConfig& cfg);

struct GenerateResult {
    std::vector<std::string> files;
    std::string manifest_path;
};
GenerateResult run_generate(const ExperimentConfig& cfg, const std::string& out_dir);

struct TrainRunResult {
    std::string run_dir;
    std::vector<MetricsRow> metrics;
    EvalReport final_report;
    std::string final_checkpoint;
    std::int64_t param_count = 0;
};
TrainRunResult run_train(const ExperimentConfig& cfg, const std::string& resume_ckpt = {},
                         bool verbose = false);

EvalReport run_eval(const std::string& checkpoint_path, const std::string& data_dir,
                    const std::string& out_dir);

struct AblateRunRow {
    std::string drop;
    std::string mode;
    std::uint64_t seed = 0;
    double nrmse = 0.0;
    double delta = 0.0;  // vs the full method (no drop, curriculum) at the same seed
};

struct AblateResult {
    std::vector<AblateRunRow> rows;
    std::string summary_path;
    std::string dataset_hash;
};
AblateResult run_ablate(const ExperimentConfig& cfg, bool verbose = false);

}  // namespace capepde
