#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "capepde/adam.hpp"
#include "capepde/cape.hpp"
#include "capepde/checkpoint.hpp"
#include "capepde/models.hpp"
#include "capepde/pde_data.hpp"

namespace capepde {

/// Epoch-indexed teacher-forcing/autoregressive split. n_epochs is the total
/// epoch count M, n_steps the per-trajectory step count N_t.
struct CurriculumSchedule {
    std::int64_t n_epochs = 50;
    std::int64_t n_steps = 40;
    double steepness = 0.2;
};

/// floor((N_t/2) * (1 + tanh((n/M - 0.5)/Delta))), clamped to [0, N_t-1].
/// Positions k <= k_trans train autoregressively, the rest teacher-forced.
std::int64_t k_trans(std::int64_t epoch, const CurriculumSchedule& s);

enum class TrainMode { teacher_forcing, autoregressive, curriculum };

std::string train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& s);

/// Denominator of the per-step normalized error. `frame` divides by the
/// current truth frame's norm; `trajectory` divides by the trajectory's mean
/// frame norm, which keeps strongly decaying solutions (large diffusion)
/// from dominating the loss with near-zero denominators. The two coincide
/// when frame norms are constant in time.
enum class LossNorm { frame, trajectory };

std::string loss_norm_name(LossNorm n);
LossNorm loss_norm_from_name(const std::string& s);

struct TrainConfig {
    double lr0 = 3e-3;
    std::int64_t halve_every = 20;  // epochs between halvings of the learning rate
    std::int64_t batch = 50;
    double alpha = 5.7e-5;          // auxiliary prediction-loss weight
    std::int64_t warmup_epochs = 3; // only attention-module updates at first
    double noise_rel = 0.01;        // input noise std as a fraction of the trajectory std
    TrainMode mode = TrainMode::curriculum;
    LossNorm loss_norm = LossNorm::frame;
    std::uint64_t seed = 1;
    std::int64_t epochs = 50;
    double steepness = 0.2;         // curriculum Delta
    std::int64_t ar_truncate = 0;   // detach the AR chain every k steps; 0 = full backprop
    std::int64_t n_threads = 0;     // 0 = hardware concurrency
    std::int64_t checkpoint_every = 10;
    std::int64_t eval_every = 0;    // test-eval cadence in epochs; 0 = final only

    void validate() const;
};

/// A base surrogate plus its conditioning mode and, for the cape mode, the
/// attached attention module.
struct ModelBundle {
    Conditioning conditioning = Conditioning::vanilla;
    BaseModel base;
    std::optional<CapeModule> cape;

    ModelBundle clone() const;
    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::int64_t param_count() const;
};

struct BundleSpec {
    BaseKind kind = BaseKind::fno;
    Conditioning conditioning = Conditioning::vanilla;
    FnoConfig fno;
    CnnConfig cnn;
    CapeConfig cape;
    std::uint64_t seed = 0;
};

/// Builds base (+ attention module) with input channels derived from the
/// conditioning mode: c, c+1, 2c, or c*(1+ell).
ModelBundle make_bundle(const BundleSpec& spec);

struct MetricsRow {
    std::int64_t epoch = 0;
    std::string split;   // "train" or "test"
    std::string lambda;  // "all" for aggregated training rows
    double nrmse = 0.0;
    double lr = 0.0;
    std::int64_t k_trans = 0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

struct EvalRow {
    double lambda = 0.0;
    bool seen = false;
    double nrmse_mean = 0.0;
    double nrmse_std = 0.0;
    std::int64_t n_traj = 0;
};

struct EvalReport {
    PdeKind kind = PdeKind::advection;
    std::string split;
    std::vector<EvalRow> rows;
    double wall_seconds = 0.0;
    std::string config_hash;

    double mean_over(const std::vector<double>& lambdas) const;
};

std::string eval_report_csv(const EvalReport& r);
void write_eval_report(const EvalReport& r, const std::string& csv_path,
                       const std::string& json_path);

/// Curriculum training loop. Owns the optimizer state; one epoch at a time so
/// orchestration (metrics, eval cadence, checkpoints, resume) stays outside.
class Trainer {
public:
    Trainer(ModelBundle bundle, const TrainConfig& cfg, std::int64_t n_steps);

    /// Runs one epoch over the trajectory list (pointers stay owned by the
    /// caller). Returns the mean per-step training loss.
    double train_epoch(const std::vector<const Trajectory*>& trajs, std::int64_t epoch);

    double lr_at(std::int64_t epoch) const;
    std::int64_t k_trans_at(std::int64_t epoch) const;

    ModelBundle& bundle() { return bundle_; }
    const ModelBundle& bundle() const { return bundle_; }
    Adam& base_opt() { return base_opt_; }
    Adam* cape_opt() { return cape_opt_ ? &*cape_opt_ : nullptr; }
    const TrainConfig& config() const { return cfg_; }
    const CurriculumSchedule& schedule() const { return sched_; }

    Checkpoint make_checkpoint(std::int64_t next_epoch, const nlohmann::json& extra_meta) const;
    /// Restores weights and optimizer state; returns the epoch to resume at.
    std::int64_t restore(const Checkpoint& ckpt);

private:
    ModelBundle bundle_;
    TrainConfig cfg_;
    CurriculumSchedule sched_;
    Adam base_opt_;
    std::optional<Adam> cape_opt_;
};

/// Autoregressive inference: N_t predicted frames from u0 (and u1 for the
/// prev2 mode, echoed as the first returned frame). No noise, no recording.
/// RolloutDivergedError on the first non-finite frame.
std::vector<std::vector<double>> rollout(const ModelBundle& bundle, std::span<const double> u0,
                                         std::span<const double> u1, double lambda_value,
                                         std::int64_t n_t);

struct EvalOptions {
    std::vector<double> seen_values;
    std::int64_t n_threads = 0;
};

/// Mean-over-frames rollout nRMSE per trajectory, aggregated per parameter.
EvalReport evaluate(const ModelBundle& bundle, const Dataset& data, const EvalOptions& opts);

}  // namespace capepde
