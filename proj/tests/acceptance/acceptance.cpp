// Acceptance suite: end-to-end checks of the full pipeline, one PASS/FAIL
// line per criterion. Runs everything under ./acceptance_work. Criteria can
// be selected by number on the command line (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "capepde/dataset_io.hpp"
#include "capepde/errors.hpp"
#include "capepde/experiment.hpp"
#include "capepde/grad_check.hpp"
#include "capepde/loss.hpp"
#include "capepde/ops.hpp"
#include "capepde/sha256.hpp"
#include "capepde/trainer.hpp"

using namespace capepde;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int id;
    bool pass;
    std::string summary;
    double seconds;
};

std::vector<Outcome> g_results;

class Timer {
public:
    Timer() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

void report(int id, bool pass, const std::string& summary, double seconds) {
    g_results.push_back({id, pass, summary, seconds});
    std::printf("criterion %d [%s] %s (%.1fs)\n", id, pass ? "PASS" : "FAIL", summary.c_str(),
                seconds);
    std::fflush(stdout);
}

std::string work_dir() { return "acceptance_work"; }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness of every layer and the full composite.
// ---------------------------------------------------------------------------
void criterion_1() {
    Timer timer;
    double worst = 0.0;
    std::string worst_name = "-";
    auto track = [&](const std::string& name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
        Rng rng(seed);
        Tensor probe = Tensor::randn({2, 8}, rng, 1.0, false);
        auto weighted = [&](const Tensor& y) { return sum(mul(y, slice_channels(probe, 0, y.dim(0)).clone())); };

        Tensor x = Tensor::randn({2, 8}, rng, 1.0, false);
        Tensor w1 = Tensor::randn({2, 2}, rng, 0.7, false);
        Tensor b1 = Tensor::randn({2}, rng, 0.3, false);
        track("conv1x1", grad_check([&](const Tensor& t) { return weighted(conv1x1(t, w1, b1)); }, x));
        track("conv1x1.w", grad_check([&](const Tensor& t) { return weighted(conv1x1(x, t, b1)); }, w1));

        Tensor kd = Tensor::randn({2, 5}, rng, 0.7, false);
        track("depthwise", grad_check([&](const Tensor& t) { return weighted(depthwise_conv(x, t, Tensor{})); }, kd));
        track("depthwise.x", grad_check([&](const Tensor& t) { return weighted(depthwise_conv(t, kd, Tensor{})); }, x));

        Tensor sre = Tensor::randn({3, 2, 2}, rng, 0.5, false);
        Tensor sim = Tensor::randn({3, 2, 2}, rng, 0.5, false);
        track("spectral.x", grad_check([&](const Tensor& t) { return weighted(spectral_conv(t, sre, sim)); }, x));
        track("spectral.re", grad_check([&](const Tensor& t) { return weighted(spectral_conv(x, t, sim)); }, sre));
        track("spectral.im", grad_check([&](const Tensor& t) { return weighted(spectral_conv(x, sre, t)); }, sim));

        Tensor gam = Tensor::randn({2, 8}, rng, 0.5, false);
        Tensor bet = Tensor::randn({2, 8}, rng, 0.5, false);
        track("layer_norm", grad_check([&](const Tensor& t) { return weighted(layer_norm(t, gam, bet)); }, x));
        track("gelu", grad_check([&](const Tensor& t) { return weighted(gelu(t)); }, x));

        Tensor target = Tensor::randn({2, 8}, rng, 1.0, false);
        track("nrmse", grad_check([&](const Tensor& t) { return nrmse(t, target); }, x));

        // Full composite: attention module + FNO through the rollout loss.
        BundleSpec spec;
        spec.conditioning = Conditioning::cape;
        spec.fno = {4, 2, 2, 1, 1};
        spec.cape.d = 4;
        spec.cape.ell = 1;
        spec.cape.modes = 2;
        spec.cape.n_x = 8;
        spec.seed = seed;
        ModelBundle bundle = make_bundle(spec);
        // Nonzero head so its inputs influence the output path under test.
        {
            Rng hr(seed + 7);
            Tensor hw = bundle.cape->param("head.w");
            for (auto& v : hw.raw_value()) v = 0.3 * hr.normal();
        }
        Rng dr(seed + 1);
        Tensor u = Tensor::randn({1, 8}, dr, 1.0, false);
        Tensor tgt = Tensor::randn({1, 8}, dr, 1.0, false);
        std::vector<Tensor> params;
        for (auto& [n, t] : bundle.named_params()) params.push_back(t);
        const double err = grad_check_params(
            [&] {
                auto cape_out = bundle.cape->forward(u, 0.2);
                Tensor out = bundle.base.forward(CapeModule::assemble_base_input(u, cape_out));
                return add(nrmse(out, tgt), scale(nrmse(cape_out.intermediates[0], tgt), 5.7e-5));
            },
            params);
        track("cape+fno composite", err);
    }
    const double secs = timer.seconds();
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "gradient correctness: max rel err %.2e (%s), bound 1e-4, runtime bound 60s",
                  worst, worst_name.c_str());
    report(1, worst < 1e-4 && secs < 60.0, buf, secs);
}

// ---------------------------------------------------------------------------
// Criterion 2: transition-index schedule against an independent evaluation.
// ---------------------------------------------------------------------------
void criterion_2() {
    Timer timer;
    CurriculumSchedule sched{100, 40, 0.2};
    bool ok = true;
    std::int64_t prev = -1;
    for (std::int64_t n = 0; n <= 100; ++n) {
        // Independent scalar route: exp-based tanh.
        const double z = (static_cast<double>(n) / 100.0 - 0.5) / 0.2;
        const double th = (std::exp(2.0 * z) - 1.0) / (std::exp(2.0 * z) + 1.0);
        std::int64_t expect = static_cast<std::int64_t>(std::floor(20.0 * (1.0 + th)));
        expect = std::clamp<std::int64_t>(expect, 0, 39);
        const std::int64_t got = k_trans(n, sched);
        if (got != expect || got < prev) ok = false;
        prev = got;
    }
    ok = ok && k_trans(0, sched) == 0 && k_trans(50, sched) == 20 && k_trans(100, sched) == 39;
    report(2, ok, "schedule oracle: exact match over n=0..100, monotone, k(50)=20", timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 3: generator fidelity.
// ---------------------------------------------------------------------------
void criterion_3() {
    Timer timer;
    bool ok = true;
    std::string detail;
    Grid1D grid;  // defaults: 128 sites, 40 steps, dt 0.05

    double worst_adv = 0.0;
    for (double beta : {0.7, 4.0}) {
        InitialCondition ic;
        auto u0 = sample_initial_condition(1234, grid, &ic);
        auto traj = solve_advection(u0, beta, grid);
        for (std::int64_t k = 0; k <= grid.n_t; ++k) {
            std::vector<double> ref(static_cast<std::size_t>(grid.n_x));
            for (std::int64_t j = 0; j < grid.n_x; ++j) {
                const double xx = grid.length * static_cast<double>(j) / static_cast<double>(grid.n_x);
                ref[static_cast<std::size_t>(j)] = ic.eval(xx - beta * grid.dt * static_cast<double>(k), grid.length);
            }
            worst_adv = std::max(worst_adv, nrmse_value(traj.frame(k), ref));
        }
    }
    ok = ok && worst_adv < 1e-9;

    double worst_drift = 0.0;
    auto u0 = sample_initial_condition(77, grid);
    for (double nu : {0.002, 0.2, 2.0}) {
        auto traj = solve_burgers(u0, nu, grid);
        double m0 = 0.0;
        for (double v : traj.frame(0)) m0 += v;
        for (std::int64_t k = 1; k <= grid.n_t; ++k) {
            double m = 0.0;
            for (double v : traj.frame(k)) m += v;
            worst_drift = std::max(worst_drift, std::abs(m - m0) * grid.dx());
        }
    }
    ok = ok && worst_drift < 1e-8;

    double worst_conv = 0.0;
    for (double nu : {0.002, 0.2}) {
        BurgersOptions fine;
        fine.oversample = 16;
        auto a = solve_burgers(u0, nu, grid);
        auto b = solve_burgers(u0, nu, grid, fine);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.u.size(); ++i) {
            const double d = a.u[i] - b.u[i];
            num += d * d;
            den += b.u[i] * b.u[i];
        }
        worst_conv = std::max(worst_conv, std::sqrt(num / den));
    }
    ok = ok && worst_conv < 1e-3;

    const double secs = timer.seconds();
    ok = ok && secs < 300.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "generator fidelity: advection vs closed form %.1e (<1e-9), mass drift %.1e "
                  "(<1e-8), 2x refinement %.1e (<1e-3), runtime bound 300s",
                  worst_adv, worst_drift, worst_conv);
    report(3, ok, buf, secs);
}

// ---------------------------------------------------------------------------
// Criteria 4 and 6: trend reproduction and the generalization sweep.
// ---------------------------------------------------------------------------
struct TrendRun {
    double cape = 0.0, vanilla = 0.0, conditional = 0.0;
    EvalReport cape_report;
    double minutes = 0.0;
};

json pde_data_section(PdeKind kind, std::int64_t n_train, std::int64_t n_test,
                      const std::string& data_dir) {
    json params = json::array();
    if (kind == PdeKind::advection) {
        for (double b : {0.2, 0.4, 0.7, 2.0, 4.0})
            params.push_back({{"value", b}, {"n_train", n_train}, {"n_test", n_test}});
        for (double b : {0.1, 1.0, 7.0})
            params.push_back({{"value", b}, {"n_train", 0}, {"n_test", n_test}});
    } else {
        for (double v : {0.002, 0.007, 0.02, 0.04, 0.2, 0.4, 2.0})
            params.push_back({{"value", v}, {"n_train", n_train}, {"n_test", n_test}});
        for (double v : {0.001, 0.01, 0.1, 1.0, 4.0})
            params.push_back({{"value", v}, {"n_train", 0}, {"n_test", n_test}});
    }
    json data = {{"kind", pde_kind_name(kind)},
                 {"grid", {{"n_x", 64}, {"n_t", 40}, {"dt", 0.05}}},
                 {"params", params},
                 {"seed", 7}};
    json run = {{"data_dir", data_dir}, {"checkpoint_every", 50}};
    return json{{"data", data}, {"run", run}};
}

TrendRun run_trend(PdeKind kind) {
    Timer timer;
    const std::string tag = pde_kind_name(kind);
    const std::string base_dir = work_dir() + "/" + tag;
    const std::string data_dir = base_dir + "/data";

    json doc = pde_data_section(kind, 200, 50, data_dir);
    doc["train"] = {{"epochs", 50},         {"batch", 50},   {"warmup_epochs", 3},
                    {"noise_rel", 0.01},    {"seed", 1},     {"mode", "curriculum"},
                    {"loss_norm", "trajectory"}, {"n_threads", 2}, {"eval_every", 0}};

    const bool adv = kind == PdeKind::advection;
    json cape_model = {{"kind", "fno"},
                       {"conditioning", "cape"},
                       {"fno", {{"width", adv ? 12 : 10}, {"modes", adv ? 8 : 6}, {"n_layers", 3}}}};
    json cape_cfg = {{"d", adv ? 24 : 20}, {"ell", 1}, {"modes", 6}};
    json base_model = {{"kind", "fno"},
                       {"fno", {{"width", adv ? 16 : 14}, {"modes", adv ? 8 : 6}, {"n_layers", 3}}}};

    {
        json gen = doc;
        gen["model"] = base_model;
        gen["model"]["conditioning"] = "vanilla";
        gen["run"]["output_dir"] = base_dir + "/gen";
        ExperimentConfig cfg = parse_experiment_config(gen);
        run_generate(cfg, data_dir);
    }

    auto train_one = [&](const std::string& conditioning) {
        json j = doc;
        if (conditioning == "cape") {
            j["model"] = cape_model;
            j["cape"] = cape_cfg;
        } else {
            j["model"] = base_model;
            j["model"]["conditioning"] = conditioning;
        }
        j["run"]["output_dir"] = base_dir + "/" + conditioning;
        ExperimentConfig cfg = parse_experiment_config(j);
        return run_train(cfg);
    };

    TrendRun out;
    TrainRunResult cape = train_one("cape");
    TrainRunResult van = train_one("vanilla");
    TrainRunResult cond = train_one("conditional");

    const std::vector<double> seen =
        adv ? std::vector<double>{0.2, 0.4, 0.7, 2.0, 4.0}
            : std::vector<double>{0.002, 0.007, 0.02, 0.04, 0.2, 0.4, 2.0};
    out.cape = cape.final_report.mean_over(seen);
    out.vanilla = van.final_report.mean_over(seen);
    out.conditional = cond.final_report.mean_over(seen);
    out.cape_report = cape.final_report;
    out.minutes = timer.seconds() / 60.0;
    return out;
}

TrendRun g_burgers_trend;
bool g_have_burgers_trend = false;
TrendRun g_advection_trend;
bool g_have_advection_trend = false;

void criterion_4() {
    Timer timer;
    g_advection_trend = run_trend(PdeKind::advection);
    const TrendRun& a = g_advection_trend;
    g_have_advection_trend = true;
    std::printf("  advection: cape %.4f vanilla %.4f conditional %.4f (%.1f min)\n", a.cape,
                a.vanilla, a.conditional, a.minutes);
    std::fflush(stdout);
    g_burgers_trend = run_trend(PdeKind::burgers);
    const TrendRun& b = g_burgers_trend;
    g_have_burgers_trend = true;
    std::printf("  burgers:   cape %.4f vanilla %.4f conditional %.4f (%.1f min)\n", b.cape,
                b.vanilla, b.conditional, b.minutes);
    std::fflush(stdout);

    const bool trend_a = a.cape < 0.5 * a.vanilla && a.cape <= a.conditional;
    const bool trend_b = b.cape < 0.5 * b.vanilla && b.cape <= b.conditional;
    const bool time_ok = a.minutes < 30.0 && b.minutes < 30.0;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "trend: advection cape/vanilla %.2f (<0.5) cape<=cond %s; burgers cape/vanilla "
                  "%.2f (<0.5) cape<=cond %s; %.1f + %.1f min (<30 each)",
                  a.cape / a.vanilla, a.cape <= a.conditional ? "yes" : "no",
                  b.cape / b.vanilla, b.cape <= b.conditional ? "yes" : "no", a.minutes, b.minutes);
    report(4, trend_a && trend_b && time_ok, buf, timer.seconds());
}

void criterion_6() {
    Timer timer;
    if (!g_have_burgers_trend) {
        report(6, false, "generalization sweep skipped: criterion 4 burgers run unavailable", 0.0);
        return;
    }
    auto row_of = [&](const EvalReport& rep, double lam) -> const EvalRow* {
        for (const auto& r : rep.rows)
            if (std::abs(r.lambda - lam) < 1e-12) return &r;
        return nullptr;
    };
    const EvalReport& rep = g_burgers_trend.cape_report;
    struct Pair {
        double unseen, nearest;
    };
    const Pair pairs[] = {{0.01, 0.007}, {0.1, 0.04}};
    bool ok = true;
    std::string detail;
    for (const auto& p : pairs) {
        const EvalRow* u = row_of(rep, p.unseen);
        const EvalRow* s = row_of(rep, p.nearest);
        if (!u || !s) {
            ok = false;
            continue;
        }
        ok = ok && u->nrmse_mean <= 3.0 * s->nrmse_mean;
        char buf[100];
        std::snprintf(buf, sizeof(buf), " nu=%g: %.4f vs seen nu=%g: %.4f;", p.unseen,
                      u->nrmse_mean, p.nearest, s->nrmse_mean);
        detail += buf;
    }
    // The advection module is expected to overfit its trained velocities;
    // log the unseen-beta rows without asserting.
    if (g_have_advection_trend) {
        std::string log = "  advection unseen-beta (logged only):";
        for (double b : {0.1, 1.0, 7.0}) {
            if (const EvalRow* r = row_of(g_advection_trend.cape_report, b)) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), " beta=%g: %.3f", b, r->nrmse_mean);
                log += buf;
            }
        }
        std::printf("%s\n", log.c_str());
        std::fflush(stdout);
    }
    report(6, ok, "generalization sweep (within 3x of nearest seen):" + detail, timer.seconds());
}

// ---------------------------------------------------------------------------
// Criteria 5 and 7: curriculum and structural ablation trends on a reduced
// burgers task (3 seeds, medians).
// ---------------------------------------------------------------------------
struct AblationData {
    Dataset train, test;
    std::vector<const Trajectory*> trajs;
    std::vector<double> lambdas;
};

AblationData make_ablation_data() {
    AblationData out;
    Grid1D grid;
    grid.n_x = 64;
    grid.n_t = 40;
    grid.dt = 0.05;
    out.lambdas = {0.002, 0.007, 0.02, 0.04, 0.2, 0.4, 2.0};
    DataConfig dc;
    dc.kind = PdeKind::burgers;
    dc.grid = grid;
    dc.seed = 97;
    for (double l : out.lambdas) dc.params.push_back({l, 40, 10});
    out.train = generate_dataset(dc, "train");
    out.test = generate_dataset(dc, "test");
    for (const auto& s : out.train.sets)
        for (const auto& t : s.items) out.trajs.push_back(&t);
    return out;
}

double ablation_run(const AblationData& data, TrainMode mode, const std::string& drop,
                    std::uint64_t seed) {
    BundleSpec spec;
    spec.conditioning = Conditioning::cape;
    spec.fno = {8, 6, 3, 1, 1};
    spec.cape.d = 16;
    spec.cape.ell = 1;
    spec.cape.modes = 6;
    spec.cape.n_x = 64;
    spec.seed = seed;
    if (!drop.empty()) spec.cape = ablate(spec.cape, drop);
    TrainConfig cfg;
    cfg.epochs = 24;
    cfg.batch = 20;
    cfg.warmup_epochs = 3;
    cfg.mode = mode;
    cfg.loss_norm = LossNorm::trajectory;
    cfg.seed = seed;
    cfg.n_threads = 2;
    Trainer tr(make_bundle(spec), cfg, 40);
    for (std::int64_t e = 0; e < cfg.epochs; ++e) tr.train_epoch(data.trajs, e);
    EvalReport rep = evaluate(tr.bundle(), data.test, {data.lambdas, 2});
    return rep.mean_over(data.lambdas);
}

AblationData g_abl_data;
bool g_have_abl_data = false;
std::vector<double> g_curriculum_runs;

const AblationData& ablation_data() {
    if (!g_have_abl_data) {
        g_abl_data = make_ablation_data();
        g_have_abl_data = true;
    }
    return g_abl_data;
}

void criterion_5() {
    Timer timer;
    const auto& data = ablation_data();
    const std::uint64_t seeds[] = {201, 202, 203};
    std::vector<double> cur, ar, tf;
    for (std::uint64_t s : seeds) {
        cur.push_back(ablation_run(data, TrainMode::curriculum, "", s));
        ar.push_back(ablation_run(data, TrainMode::autoregressive, "", s));
        tf.push_back(ablation_run(data, TrainMode::teacher_forcing, "", s));
    }
    g_curriculum_runs = cur;
    const double mc = median(cur), ma = median(ar), mt = median(tf);
    const bool ok = mc <= std::min(ma, mt) * 1.10;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "curriculum ablation (medians over 3 seeds): curriculum %.4f vs AR %.4f, TF %.4f "
                  "(bound: min + 10%%)",
                  mc, ma, mt);
    report(5, ok, buf, timer.seconds());
}

void criterion_7() {
    Timer timer;
    const auto& data = ablation_data();
    const std::uint64_t seeds[] = {201, 202, 203};
    std::vector<double> no_spec, no_pw;
    for (std::uint64_t s : seeds) {
        no_spec.push_back(ablation_run(data, TrainMode::curriculum, "spectral", s));
        no_pw.push_back(ablation_run(data, TrainMode::curriculum, "conv1x1", s));
    }
    const double ms = median(no_spec), mp = median(no_pw);
    const double full = g_curriculum_runs.empty() ? 0.0 : median(g_curriculum_runs);
    const bool ok = ms >= mp;
    char buf[220];
    std::snprintf(buf, sizeof(buf),
                  "structural ablation (medians over 3 seeds): drop-spectral %.4f >= drop-1x1 %.4f "
                  "(full method %.4f)",
                  ms, mp, full);
    report(7, ok, buf, timer.seconds());
}

// ---------------------------------------------------------------------------
// Criterion 8: reproducibility and lossless containers.
// ---------------------------------------------------------------------------
void criterion_8() {
    Timer timer;
    const std::string base = work_dir() + "/repro";
    fs::remove_all(base);
    json doc;
    doc["data"] = {{"kind", "advection"},
                   {"grid", {{"n_x", 16}, {"n_t", 6}, {"dt", 0.05}}},
                   {"params", json::array({{{"value", 0.5}, {"n_train", 4}, {"n_test", 2}},
                                           {{"value", 2.0}, {"n_train", 4}, {"n_test", 2}}})},
                   {"seed", 11}};
    doc["model"] = {{"kind", "fno"},
                    {"conditioning", "cape"},
                    {"fno", {{"width", 6}, {"modes", 3}, {"n_layers", 2}}}};
    doc["cape"] = {{"d", 6}, {"ell", 1}, {"modes", 3}};
    doc["train"] = {{"epochs", 3}, {"batch", 4}, {"warmup_epochs", 1}, {"seed", 3},
                    {"n_threads", 2}, {"eval_every", 1}};
    doc["run"] = {{"output_dir", base + "/run_a"}, {"data_dir", base + "/data"},
                  {"checkpoint_every", 2}};

    ExperimentConfig cfg = parse_experiment_config(doc);
    GenerateResult g1 = run_generate(cfg, base + "/data");
    std::vector<std::string> h1;
    for (const auto& f : g1.files) h1.push_back(sha256_file(f));
    GenerateResult g2 = run_generate(cfg, base + "/data");
    bool gen_ok = true;
    for (std::size_t i = 0; i < g1.files.size(); ++i)
        gen_ok = gen_ok && sha256_file(g2.files[i]) == h1[i];

    run_train(cfg);
    json doc_b = doc;
    doc_b["run"]["output_dir"] = base + "/run_b";
    run_train(parse_experiment_config(doc_b));
    const bool metrics_ok =
        sha256_file(base + "/run_a/metrics.csv") == sha256_file(base + "/run_b/metrics.csv") &&
        sha256_file(base + "/run_a/eval_test.csv") == sha256_file(base + "/run_b/eval_test.csv");

    // Container round trips, bit for bit.
    TrajectorySet set = read_trajectory_set(g1.files[0]);
    const std::string copy_path = base + "/copy.pdeb1";
    write_trajectory_set(set, copy_path);
    const bool pdeb_ok = sha256_file(copy_path) == h1[0];

    Checkpoint ck = load_checkpoint(base + "/run_a/final.nnck1");
    const std::string ck_path = base + "/copy.nnck1";
    save_checkpoint(ck, ck_path);
    const bool nnck_ok = sha256_file(ck_path) == sha256_file(base + "/run_a/final.nnck1");

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "reproducibility: regen %s, metrics rerun %s, PDEB1 round trip %s, NNCK1 round "
                  "trip %s",
                  gen_ok ? "bit-identical" : "DIFFERS", metrics_ok ? "bit-identical" : "DIFFERS",
                  pdeb_ok ? "lossless" : "DIFFERS", nnck_ok ? "lossless" : "DIFFERS");
    report(8, gen_ok && metrics_ok && pdeb_ok && nnck_ok, buf, timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

    fs::create_directories(work_dir());
    Timer total;
    try {
        if (want(1)) criterion_1();
        if (want(2)) criterion_2();
        if (want(3)) criterion_3();
        if (want(8)) criterion_8();
        if (want(4)) criterion_4();
        if (want(6)) criterion_6();
        if (want(5)) criterion_5();
        if (want(7)) criterion_7();
    } catch (const std::exception& e) {
        std::printf("acceptance suite aborted: %s\n", e.what());
        return 99;
    }

    int failures = 0;
    for (const auto& r : g_results)
        if (!r.pass) ++failures;
    std::printf("acceptance: %zu criteria run, %d failed, %.1f min total\n", g_results.size(),
                failures, total.seconds() / 60.0);
    return failures;
}
