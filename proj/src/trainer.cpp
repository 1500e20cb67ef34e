#include "capepde/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "capepde/errors.hpp"
#include "capepde/loss.hpp"
#include "capepde/ops.hpp"
#include "capepde/parallel.hpp"

namespace capepde {

std::int64_t k_trans(std::int64_t epoch, const CurriculumSchedule& s) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(s.n_epochs);
    const double v = 0.5 * static_cast<double>(s.n_steps) *
                     (1.0 + std::tanh((frac - 0.5) / s.steepness));
    auto k = static_cast<std::int64_t>(std::floor(v));
    return std::clamp<std::int64_t>(k, 0, s.n_steps - 1);
}

std::string train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::teacher_forcing: return "teacher_forcing";
        case TrainMode::autoregressive: return "autoregressive";
        case TrainMode::curriculum: return "curriculum";
    }
    return "?";
}

TrainMode train_mode_from_name(const std::string& s) {
    if (s == "teacher_forcing") return TrainMode::teacher_forcing;
    if (s == "autoregressive") return TrainMode::autoregressive;
    if (s == "curriculum") return TrainMode::curriculum;
    throw ConfigError("unknown train mode '" + s + "'");
}

std::string loss_norm_name(LossNorm n) { return n == LossNorm::frame ? "frame" : "trajectory"; }

LossNorm loss_norm_from_name(const std::string& s) {
    if (s == "frame") return LossNorm::frame;
    if (s == "trajectory") return LossNorm::trajectory;
    throw ConfigError("unknown loss norm '" + s + "'");
}

void TrainConfig::validate() const {
    if (lr0 <= 0 || halve_every <= 0 || batch <= 0 || epochs <= 0 || steepness <= 0)
        throw ConfigError("train config values must be positive");
    if (alpha < 0 || warmup_epochs < 0 || noise_rel < 0 || ar_truncate < 0)
        throw ConfigError("train config values must be non-negative");
}

ModelBundle ModelBundle::clone() const {
    ModelBundle out;
    out.conditioning = conditioning;
    out.base = base.clone();
    if (cape) out.cape = cape->clone();
    return out;
}

std::vector<std::pair<std::string, Tensor>> ModelBundle::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [n, t] : base.named_params()) out.emplace_back("base." + n, t);
    if (cape)
        for (const auto& [n, t] : cape->named_params()) out.emplace_back("cape." + n, t);
    return out;
}

std::int64_t ModelBundle::param_count() const {
    return base.param_count() + (cape ? cape->param_count() : 0);
}

ModelBundle make_bundle(const BundleSpec& spec) {
    const std::int64_t c = spec.kind == BaseKind::fno ? spec.fno.out_channels : spec.cnn.out_channels;
    std::int64_t in_ch = c;
    switch (spec.conditioning) {
        case Conditioning::vanilla: in_ch = c; break;
        case Conditioning::conditional: in_ch = c + 1; break;
        case Conditioning::prev2: in_ch = 2 * c; break;
        case Conditioning::cape: in_ch = c * (1 + spec.cape.ell); break;
    }
    ModelBundle bundle;
    bundle.conditioning = spec.conditioning;
    Rng base_rng(Rng::mix(spec.seed, 0xba5e));
    if (spec.kind == BaseKind::fno) {
        FnoConfig cfg = spec.fno;
        cfg.in_channels = in_ch;
        bundle.base = BaseModel::make_fno(cfg, base_rng);
    } else {
        CnnConfig cfg = spec.cnn;
        cfg.in_channels = in_ch;
        bundle.base = BaseModel::make_cnn(cfg, base_rng);
    }
    if (spec.conditioning == Conditioning::cape) {
        CapeConfig cfg = spec.cape;
        cfg.channels = c;
        Rng cape_rng(Rng::mix(spec.seed, 0xca9e));
        bundle.cape.emplace(cfg, cape_rng);
    }
    return bundle;
}

namespace {

Tensor const_frame(std::span<const double> frame, std::int64_t n_x) {
    return Tensor::from({1, n_x}, std::vector<double>(frame.begin(), frame.end()));
}

double trajectory_std(const Trajectory& t) {
    double mean = 0.0;
    for (double v : t.u) mean += v;
    mean /= static_cast<double>(t.u.size());
    double var = 0.0;
    for (double v : t.u) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(t.u.size()));
}

Tensor model_step(const ModelBundle& m, const Tensor& cur, const Tensor& prev, double lambda,
                  CapeModule::Output* cape_out) {
    switch (m.conditioning) {
        case Conditioning::vanilla: return m.base.forward(cur);
        case Conditioning::conditional: return m.base.forward(make_conditional_input(cur, lambda));
        case Conditioning::prev2: return m.base.forward(make_prev2_input(cur, prev));
        case Conditioning::cape: {
            *cape_out = m.cape->forward(cur, lambda);
            return m.base.forward(CapeModule::assemble_base_input(cur, *cape_out));
        }
    }
    throw ConfigError("bad conditioning");
}

struct PassResult {
    double loss = 0.0;
    std::vector<double> grads;  // flattened over named_params order
};

// One trajectory: forward over all steps with the AR/TF split at kt, one
// backward, grads flattened out of the (cloned) bundle.
PassResult trajectory_pass(const ModelBundle& m, const Trajectory& traj, std::int64_t kt,
                           const TrainConfig& cfg, std::int64_t epoch, std::int64_t traj_index) {
    const std::int64_t n_x = traj.grid.n_x;
    const std::int64_t n_t = traj.grid.n_t;
    const double lambda = traj.params.value;
    Rng noise_rng(Rng::mix(Rng::mix(cfg.seed, 0x6e6f6973), Rng::mix(static_cast<std::uint64_t>(epoch),
                                                                    static_cast<std::uint64_t>(traj_index))));
    const double sigma = cfg.noise_rel > 0 ? cfg.noise_rel * trajectory_std(traj) : 0.0;
    const bool prev2 = m.conditioning == Conditioning::prev2;
    const std::int64_t k_start = prev2 ? 1 : 0;

    // Inverse norm shared by all steps under trajectory normalization: the
    // trajectory's mean frame norm (equals the frame norm when it is constant
    // in time).
    double traj_inv_norm = 0.0;
    if (cfg.loss_norm == LossNorm::trajectory) {
        double ss = 0.0;
        for (double v : traj.u) ss += v * v;
        const double mean_frame_norm =
            std::sqrt(ss / static_cast<double>(traj.frames()));
        if (mean_frame_norm == 0.0)
            throw DegenerateTargetError("trajectory norm is zero");
        traj_inv_norm = 1.0 / mean_frame_norm;
    }

    auto noisy = [&](const Tensor& t) {
        if (sigma == 0.0) return t;
        Tensor eps = Tensor::zeros(t.shape());
        for (auto& v : eps.node()->value) v = sigma * noise_rng.normal();
        return add(t, eps);
    };

    Tape tape;
    Tensor loss = Tensor::scalar(0.0);
    Tensor aux;
    Tensor pred = const_frame(traj.frame(k_start), n_x);
    Tensor pred_prev = prev2 ? const_frame(traj.frame(0), n_x) : Tensor{};
    std::int64_t chain_len = 0;

    for (std::int64_t k = k_start; k < n_t; ++k) {
        const bool ar = k <= kt;
        Tensor cur, prev;
        if (ar) {
            cur = pred;
            if (prev2) prev = pred_prev;
            if (cfg.ar_truncate > 0 && ++chain_len >= cfg.ar_truncate) {
                cur = Tensor::from(cur.shape(), {cur.value().begin(), cur.value().end()});
                chain_len = 0;
            }
        } else {
            cur = const_frame(traj.frame(k), n_x);
            if (prev2) prev = const_frame(traj.frame(k - 1), n_x);
        }
        Tensor cur_in = noisy(cur);
        Tensor prev_in = prev2 ? noisy(prev) : Tensor{};

        CapeModule::Output cape_out;
        Tensor out = model_step(m, cur_in, prev_in, lambda, &cape_out);
        Tensor target = const_frame(traj.frame(k + 1), n_x);
        Tensor step_loss = cfg.loss_norm == LossNorm::trajectory
                               ? l2_error_scaled(out, target, traj_inv_norm)
                               : nrmse(out, target);
        if (!std::isfinite(step_loss.item()))
            throw NumericError("non-finite loss (epoch " + std::to_string(epoch) + ", k " +
                               std::to_string(k) + ", lambda " + std::to_string(lambda) + ")");
        loss = add(loss, step_loss);

        if (m.cape && cfg.alpha > 0) {
            const std::int64_t avail =
                std::min<std::int64_t>(static_cast<std::int64_t>(cape_out.intermediates.size()), n_t - k);
            if (avail > 0) {
                std::vector<Tensor> future;
                future.reserve(static_cast<std::size_t>(avail));
                for (std::int64_t i = 1; i <= avail; ++i)
                    future.push_back(const_frame(traj.frame(k + i), n_x));
                Tensor term = cape_loss(cape_out.intermediates, future, traj_inv_norm);
                aux = aux.defined() ? add(aux, term) : term;
            }
        }

        if (prev2) pred_prev = pred;
        pred = out;
    }

    if (aux.defined()) loss = add(loss, scale(aux, cfg.alpha));
    if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss (epoch " + std::to_string(epoch) + ", lambda " +
                           std::to_string(lambda) + ")");
    tape.backward(loss);

    PassResult res;
    res.loss = loss.item();
    auto named = m.named_params();
    std::int64_t total = 0;
    for (const auto& [n, t] : named) total += t.numel();
    res.grads.assign(static_cast<std::size_t>(total), 0.0);
    std::int64_t off = 0;
    for (const auto& [n, t] : named) {
        if (t.has_grad()) {
            auto g = t.grad();
            std::copy(g.begin(), g.end(), res.grads.begin() + off);
        }
        off += t.numel();
    }
    return res;
}

}  // namespace

Trainer::Trainer(ModelBundle bundle, const TrainConfig& cfg, std::int64_t n_steps)
    : bundle_(std::move(bundle)),
      cfg_(cfg),
      sched_{cfg.epochs, n_steps, cfg.steepness},
      base_opt_(bundle_.base.params(), cfg.lr0) {
    cfg_.validate();
    if (bundle_.cape) cape_opt_.emplace(bundle_.cape->params(), cfg.lr0);
}

double Trainer::lr_at(std::int64_t epoch) const {
    return cfg_.lr0 / std::pow(2.0, static_cast<double>(epoch / cfg_.halve_every));
}

std::int64_t Trainer::k_trans_at(std::int64_t epoch) const {
    switch (cfg_.mode) {
        case TrainMode::teacher_forcing: return 0;
        case TrainMode::autoregressive: return sched_.n_steps;
        case TrainMode::curriculum: return k_trans(epoch, sched_);
    }
    return 0;
}

double Trainer::train_epoch(const std::vector<const Trajectory*>& trajs, std::int64_t epoch) {
    if (trajs.empty()) throw DataError("train_epoch: no trajectories");
    const std::int64_t kt = k_trans_at(epoch);
    const double lr = lr_at(epoch);
    base_opt_.set_lr(lr);
    if (cape_opt_) cape_opt_->set_lr(lr);

    const std::int64_t n = static_cast<std::int64_t>(trajs.size());
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::mix(Rng::mix(cfg_.seed, 0x0dda), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const int threads = resolve_threads(cfg_.n_threads);
    auto named = bundle_.named_params();
    std::int64_t total_params = 0;
    for (const auto& [nm, t] : named) total_params += t.numel();

    // Per-trajectory losses keyed by the stable index so the epoch total is
    // independent of shuffle and thread count.
    std::vector<double> loss_by_traj(static_cast<std::size_t>(n), 0.0);

    for (std::int64_t start = 0; start < n; start += cfg_.batch) {
        const std::int64_t bsz = std::min<std::int64_t>(cfg_.batch, n - start);
        std::vector<PassResult> slots(static_cast<std::size_t>(bsz));

        const int workers = static_cast<int>(std::min<std::int64_t>(threads, bsz));
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            const std::int64_t lo = bsz * w / workers;
            const std::int64_t hi = bsz * (w + 1) / workers;
            pool.emplace_back([&, lo, hi, w] {
                try {
                    ModelBundle local = bundle_.clone();
                    for (std::int64_t s = lo; s < hi; ++s) {
                        const std::int64_t ti = order[static_cast<std::size_t>(start + s)];
                        slots[static_cast<std::size_t>(s)] =
                            trajectory_pass(local, *trajs[static_cast<std::size_t>(ti)], kt, cfg_,
                                            epoch, ti);
                        for (auto& [nm, t] : local.named_params()) t.zero_grad();
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);

        // Mean gradient over the batch, accumulated in slot order.
        std::vector<double> mean_grad(static_cast<std::size_t>(total_params), 0.0);
        const double inv_b = 1.0 / static_cast<double>(bsz);
        for (std::int64_t s = 0; s < bsz; ++s) {
            const auto& g = slots[static_cast<std::size_t>(s)].grads;
            for (std::size_t i = 0; i < g.size(); ++i) mean_grad[i] += inv_b * g[i];
            loss_by_traj[static_cast<std::size_t>(order[static_cast<std::size_t>(start + s)])] =
                slots[static_cast<std::size_t>(s)].loss;
        }
        std::int64_t off = 0;
        for (auto& [nm, t] : named) {
            auto g = t.raw_grad();
            std::copy(mean_grad.begin() + off, mean_grad.begin() + off + t.numel(), g.begin());
            off += t.numel();
        }

        const bool warmup = bundle_.cape && epoch < cfg_.warmup_epochs;
        if (!warmup) base_opt_.step();
        if (cape_opt_) cape_opt_->step();
        for (auto& [nm, t] : named) t.zero_grad();
    }

    double total = 0.0;
    for (double v : loss_by_traj) total += v;
    const std::int64_t steps = sched_.n_steps - (bundle_.conditioning == Conditioning::prev2 ? 1 : 0);
    return total / static_cast<double>(n * steps);
}

Checkpoint Trainer::make_checkpoint(std::int64_t next_epoch, const nlohmann::json& extra_meta) const {
    Checkpoint ckpt;
    for (const auto& [name, t] : bundle_.named_params()) ckpt.tensors.emplace_back(name, t.clone());
    auto add_opt = [&](const Adam& opt, const std::string& prefix,
                       const std::vector<std::pair<std::string, Tensor>>& names) {
        auto& o = const_cast<Adam&>(opt);
        for (std::size_t i = 0; i < names.size(); ++i) {
            Shape shape = names[i].second.shape();
            ckpt.tensors.emplace_back(prefix + ".m." + names[i].first,
                                      Tensor::from(shape, o.moment1(i)));
            ckpt.tensors.emplace_back(prefix + ".v." + names[i].first,
                                      Tensor::from(shape, o.moment2(i)));
        }
    };
    add_opt(base_opt_, "adam.base", bundle_.base.named_params());
    if (cape_opt_) add_opt(*cape_opt_, "adam.cape", bundle_.cape->named_params());
    ckpt.meta = extra_meta;
    ckpt.meta["next_epoch"] = next_epoch;
    ckpt.meta["adam"] = {{"base_t", base_opt_.step_count()},
                         {"cape_t", cape_opt_ ? cape_opt_->step_count() : 0}};
    ckpt.meta["conditioning"] = conditioning_name(bundle_.conditioning);
    return ckpt;
}

std::int64_t Trainer::restore(const Checkpoint& ckpt) {
    auto load_into = [&](Tensor t, const std::string& name) {
        Tensor src = ckpt.tensor(name);
        if (src.shape() != t.shape())
            throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(src.shape()) +
                            ", expected " + shape_str(t.shape()));
        auto dst = t.raw_value();
        std::copy(src.value().begin(), src.value().end(), dst.begin());
    };
    for (const auto& [name, t] : bundle_.named_params()) load_into(t, name);
    auto load_opt = [&](Adam& opt, const std::string& prefix,
                        const std::vector<std::pair<std::string, Tensor>>& names,
                        std::int64_t step_count) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            Tensor m = ckpt.tensor(prefix + ".m." + names[i].first);
            Tensor v = ckpt.tensor(prefix + ".v." + names[i].first);
            opt.moment1(i).assign(m.value().begin(), m.value().end());
            opt.moment2(i).assign(v.value().begin(), v.value().end());
        }
        opt.set_step_count(step_count);
    };
    load_opt(base_opt_, "adam.base", bundle_.base.named_params(), ckpt.meta["adam"]["base_t"]);
    if (cape_opt_)
        load_opt(*cape_opt_, "adam.cape", bundle_.cape->named_params(), ckpt.meta["adam"]["cape_t"]);
    return ckpt.meta["next_epoch"];
}

std::vector<std::vector<double>> rollout(const ModelBundle& bundle, std::span<const double> u0,
                                         std::span<const double> u1, double lambda_value,
                                         std::int64_t n_t) {
    const std::int64_t n_x = static_cast<std::int64_t>(u0.size());
    const bool prev2 = bundle.conditioning == Conditioning::prev2;
    if (prev2 && u1.size() != u0.size())
        throw ShapeError("rollout: prev2 mode needs both start frames");

    std::vector<std::vector<double>> frames;
    frames.reserve(static_cast<std::size_t>(n_t));
    Tensor cur = const_frame(u0, n_x);
    Tensor prev;
    std::int64_t k = 0;
    if (prev2) {
        frames.emplace_back(u1.begin(), u1.end());  // echoed start frame
        prev = cur;
        cur = const_frame(u1, n_x);
        k = 1;
    }
    for (; k < n_t; ++k) {
        CapeModule::Output cape_out;
        Tensor out = model_step(bundle, cur, prev, lambda_value, &cape_out);
        double sq = 0.0;
        for (double v : out.value()) sq += v;
        if (!std::isfinite(sq)) throw RolloutDivergedError(static_cast<int>(k + 1));
        frames.emplace_back(out.value().begin(), out.value().end());
        prev = cur;
        cur = out;
    }
    return frames;
}

EvalReport evaluate(const ModelBundle& bundle, const Dataset& data, const EvalOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.split = data.split;
    if (!data.sets.empty()) report.kind = data.sets[0].params.kind;
    const bool prev2 = bundle.conditioning == Conditioning::prev2;

    for (const auto& set : data.sets) {
        const std::int64_t n_traj = static_cast<std::int64_t>(set.items.size());
        std::vector<double> per_traj(static_cast<std::size_t>(n_traj), 0.0);
        parallel_for(n_traj, resolve_threads(opts.n_threads), [&](std::int64_t i) {
            const Trajectory& traj = set.items[static_cast<std::size_t>(i)];
            const std::int64_t n_t = traj.grid.n_t;
            auto frames = rollout(bundle, traj.frame(0),
                                  prev2 ? traj.frame(1) : std::span<const double>{},
                                  traj.params.value, n_t);
            // Sequence-level norm ratio over all predicted frames. A
            // frame-wise mean would be dominated by the near-zero late
            // frames of strongly diffusive solutions.
            const std::int64_t k_first = prev2 ? 2 : 1;
            double num = 0.0, den = 0.0;
            for (std::int64_t k = k_first; k <= n_t; ++k) {
                const auto& pred = frames[static_cast<std::size_t>(k - 1)];
                const auto truth = traj.frame(k);
                for (std::size_t j = 0; j < pred.size(); ++j) {
                    const double d = pred[j] - truth[j];
                    num += d * d;
                    den += truth[j] * truth[j];
                }
            }
            if (den == 0.0) throw DegenerateTargetError("evaluate: zero-norm trajectory");
            per_traj[static_cast<std::size_t>(i)] = std::sqrt(num / den);
        });
        double mean = 0.0;
        for (double v : per_traj) mean += v;
        mean /= static_cast<double>(n_traj);
        double var = 0.0;
        for (double v : per_traj) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n_traj);

        EvalRow row;
        row.lambda = set.params.value;
        row.seen = std::find(opts.seen_values.begin(), opts.seen_values.end(), set.params.value) !=
                   opts.seen_values.end();
        row.nrmse_mean = mean;
        row.nrmse_std = std::sqrt(var);
        row.n_traj = n_traj;
        report.rows.push_back(row);
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const EvalRow& a, const EvalRow& b) { return a.lambda < b.lambda; });
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

double EvalReport::mean_over(const std::vector<double>& lambdas) const {
    double acc = 0.0;
    std::int64_t n = 0;
    for (const auto& row : rows) {
        if (std::find(lambdas.begin(), lambdas.end(), row.lambda) != lambdas.end()) {
            acc += row.nrmse_mean;
            ++n;
        }
    }
    if (n == 0) throw DataError("mean_over: no matching parameter rows");
    return acc / static_cast<double>(n);
}

namespace {
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "epoch,split,lambda,nrmse,lr,k_trans\n";
    for (const auto& r : rows) {
        out += std::to_string(r.epoch) + "," + r.split + "," + r.lambda + "," + fmt_double(r.nrmse) +
               "," + fmt_double(r.lr) + "," + std::to_string(r.k_trans) + "\n";
    }
    return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << metrics_csv(rows);
}

std::string eval_report_csv(const EvalReport& r) {
    std::string out = "kind,split,lambda,seen,nrmse_mean,nrmse_std,n_traj\n";
    for (const auto& row : r.rows) {
        out += pde_kind_name(r.kind) + "," + r.split + "," + fmt_double(row.lambda) + "," +
               (row.seen ? "1" : "0") + "," + fmt_double(row.nrmse_mean) + "," +
               fmt_double(row.nrmse_std) + "," + std::to_string(row.n_traj) + "\n";
    }
    return out;
}

void write_eval_report(const EvalReport& r, const std::string& csv_path,
                       const std::string& json_path) {
    {
        std::ofstream f(csv_path, std::ios::trunc);
        if (!f) throw DataError("cannot write " + csv_path);
        f << eval_report_csv(r);
    }
    nlohmann::json j;
    j["kind"] = pde_kind_name(r.kind);
    j["split"] = r.split;
    j["wall_seconds"] = r.wall_seconds;
    j["config_hash"] = r.config_hash;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        j["rows"].push_back({{"lambda", row.lambda},
                             {"seen", row.seen},
                             {"nrmse_mean", row.nrmse_mean},
                             {"nrmse_std", row.nrmse_std},
                             {"n_traj", row.n_traj}});
    }
    std::ofstream f(json_path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + json_path);
    f << j.dump(2) << "\n";
}

}  // namespace capepde
