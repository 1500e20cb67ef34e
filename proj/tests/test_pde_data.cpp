#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "capepde/errors.hpp"
#include "capepde/fft.hpp"
#include "capepde/loss.hpp"
#include "capepde/pde_data.hpp"

using namespace capepde;

namespace {

double integral(std::span<const double> u, double dx) {
    double acc = 0.0;
    for (double v : u) acc += v;
    return acc * dx;
}

// Exact viscous Burgers reference via the heat-kernel (Cole-Hopf) integral
//   u(x,t) = int (x-y)/t e^{-S/(2 nu')} dy / int e^{-S/(2 nu')} dy,
//   S(y) = int_0^y u0 + (x-y)^2 / (2t),
// evaluated by fine trapezoid quadrature with the max-exponent factored out.
// Valid while the kernel width is far below the period (true here).
double cole_hopf_reference(double x, double t, double amplitude, double nu_eff) {
    const auto F0 = [&](double y) {
        return amplitude * (1.0 - std::cos(2.0 * M_PI * y)) / (2.0 * M_PI);
    };
    const int nq = 40000;
    const double lo = x - 0.5, hi = x + 0.5;
    const double dy = (hi - lo) / nq;
    std::vector<double> expo(nq + 1), w(nq + 1);
    double smin = 1e300;
    for (int i = 0; i <= nq; ++i) {
        const double y = lo + dy * i;
        const double s = F0(y) + (x - y) * (x - y) / (2.0 * t);
        expo[static_cast<std::size_t>(i)] = s;
        smin = std::min(smin, s);
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= nq; ++i) {
        const double y = lo + dy * i;
        const double g = std::exp(-(expo[static_cast<std::size_t>(i)] - smin) / (2.0 * nu_eff));
        const double trap = (i == 0 || i == nq) ? 0.5 : 1.0;
        num += trap * g * (x - y) / t;
        den += trap * g;
        (void)w;
    }
    return num / den;
}

}  // namespace

TEST_CASE("initial condition: determinism, normalization, band limit") {
    Grid1D grid;
    auto a = sample_initial_condition(99, grid);
    auto b = sample_initial_condition(99, grid);
    CHECK(a == b);
    auto c = sample_initial_condition(100, grid);
    CHECK(a != c);

    double mean = 0.0, max_abs = 0.0;
    for (double v : a) {
        mean += v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    mean /= static_cast<double>(a.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(max_abs == 1.0);

    auto spec = fft::rfft(a);
    for (std::size_t k = 5; k < spec.size(); ++k) CHECK(std::abs(spec[k]) < 1e-10);
}

TEST_CASE("advection: integer-cell shift equals a rolled field") {
    Grid1D grid;
    grid.n_x = 64;
    grid.n_t = 4;
    grid.dt = 0.25;  // beta=1 -> shift = 16 cells per step
    auto u0 = sample_initial_condition(5, grid);
    auto traj = solve_advection(u0, 1.0, grid);
    for (std::int64_t k = 0; k <= grid.n_t; ++k) {
        const std::int64_t shift = 16 * k;
        for (std::int64_t j = 0; j < grid.n_x; ++j) {
            const double expect = u0[static_cast<std::size_t>(((j - shift) % 64 + 64) % 64)];
            CHECK(traj.frame(k)[static_cast<std::size_t>(j)] ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
    }
    CHECK(std::equal(u0.begin(), u0.end(), traj.frame(0).begin()));
}

TEST_CASE("advection: sine shifts by the analytic phase") {
    Grid1D grid;
    grid.n_x = 128;
    grid.n_t = 10;
    grid.dt = 0.05;
    std::vector<double> u0(128);
    for (int j = 0; j < 128; ++j) u0[static_cast<std::size_t>(j)] = std::sin(2.0 * M_PI * j / 128.0);
    auto traj = solve_advection(u0, 1.0, grid);
    // t = 0.5 is frame 10: u = sin(2 pi (x - 0.5)).
    for (int j = 0; j < 128; ++j) {
        const double x = j / 128.0;
        CHECK(traj.frame(10)[static_cast<std::size_t>(j)] ==
              doctest::Approx(std::sin(2.0 * M_PI * (x - 0.5))).epsilon(1e-12));
    }
}

TEST_CASE("advection: full period returns the initial field") {
    Grid1D grid;  // dt*n_t = 2.0, beta=1 -> shift 2 periods
    auto u0 = sample_initial_condition(21, grid);
    auto traj = solve_advection(u0, 1.0, grid);
    for (std::int64_t j = 0; j < grid.n_x; ++j)
        CHECK(traj.frame(grid.n_t)[static_cast<std::size_t>(j)] ==
              doctest::Approx(u0[static_cast<std::size_t>(j)]).epsilon(1e-10));
}

TEST_CASE("advection matches the closed-form solution per frame to nRMSE < 1e-9") {
    Grid1D grid;
    InitialCondition ic;
    auto u0 = sample_initial_condition(33, grid, &ic);
    const double beta = 0.7;
    auto traj = solve_advection(u0, beta, grid);
    for (std::int64_t k = 0; k <= grid.n_t; ++k) {
        std::vector<double> ref(static_cast<std::size_t>(grid.n_x));
        for (std::int64_t j = 0; j < grid.n_x; ++j) {
            const double x = grid.length * static_cast<double>(j) / static_cast<double>(grid.n_x);
            ref[static_cast<std::size_t>(j)] = ic.eval(x - beta * grid.dt * static_cast<double>(k), grid.length);
        }
        CHECK(nrmse_value(traj.frame(k), ref) < 1e-9);
    }
}

TEST_CASE("burgers conserves the spatial integral to 1e-8") {
    Grid1D grid;
    grid.n_x = 128;
    auto u0 = sample_initial_condition(7, grid);
    for (double nu : {0.002, 0.2, 2.0}) {
        auto traj = solve_burgers(u0, nu, grid);
        const double m0 = integral(traj.frame(0), grid.dx());
        for (std::int64_t k = 1; k <= grid.n_t; ++k)
            CHECK(std::abs(integral(traj.frame(k), grid.dx()) - m0) < 1e-8);
    }
}

TEST_CASE("burgers: large nu decays far below the initial amplitude") {
    Grid1D grid;
    auto u0 = sample_initial_condition(13, grid);
    auto traj = solve_burgers(u0, 2.0, grid);
    double m0 = 0.0, mT = 0.0;
    for (double v : traj.frame(0)) m0 = std::max(m0, std::abs(v));
    for (double v : traj.frame(grid.n_t)) mT = std::max(mT, std::abs(v));
    CHECK(mT < 0.01 * m0);
}

TEST_CASE("burgers: strongly diffusive solve self-checks at 2x resolution to 1e-4") {
    Grid1D grid;
    auto u0 = sample_initial_condition(13, grid);
    BurgersOptions fine;
    fine.oversample = 16;
    auto a = solve_burgers(u0, 2.0, grid);
    auto b = solve_burgers(u0, 2.0, grid, fine);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        const double d = a.u[i] - b.u[i];
        num += d * d;
        den += b.u[i] * b.u[i];
    }
    CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("burgers is grid-convergent under 2x refinement") {
    Grid1D grid;
    grid.n_x = 128;
    auto u0 = sample_initial_condition(17, grid);
    for (double nu : {0.002, 0.2}) {
        BurgersOptions coarse;  // 8x
        BurgersOptions fine;
        fine.oversample = 16;
        auto a = solve_burgers(u0, nu, grid, coarse);
        auto b = solve_burgers(u0, nu, grid, fine);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.u.size(); ++i) {
            const double d = a.u[i] - b.u[i];
            num += d * d;
            den += b.u[i] * b.u[i];
        }
        CHECK(std::sqrt(num / den) < 1e-3);
    }
}

TEST_CASE("burgers matches the Cole-Hopf heat-kernel reference before shock formation") {
    Grid1D grid;
    grid.n_x = 128;
    grid.n_t = 4;
    grid.dt = 0.05;  // final time 0.2, before t* = 1/pi for amplitude 0.5
    const double nu = 0.002, amplitude = 0.5;
    std::vector<double> u0(static_cast<std::size_t>(grid.n_x));
    for (std::int64_t j = 0; j < grid.n_x; ++j)
        u0[static_cast<std::size_t>(j)] =
            amplitude * std::sin(2.0 * M_PI * static_cast<double>(j) / static_cast<double>(grid.n_x));
    auto traj = solve_burgers(u0, nu, grid);
    // Evaluate the reference on the fine grid and apply the solver's centered
    // box average so both sides observe the same cell-averaged quantity.
    const std::int64_t o = BurgersOptions{}.oversample;
    const std::int64_t nf = grid.n_x * o;
    std::vector<double> fine(static_cast<std::size_t>(nf));
    for (std::int64_t j = 0; j < nf; ++j)
        fine[static_cast<std::size_t>(j)] =
            cole_hopf_reference(static_cast<double>(j) / static_cast<double>(nf), 0.2, amplitude,
                                nu / M_PI);
    std::vector<double> ref(static_cast<std::size_t>(grid.n_x));
    for (std::int64_t i = 0; i < grid.n_x; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j <= o; ++j) {
            const double w = (j == 0 || j == o) ? 0.5 : 1.0;
            acc += w * fine[static_cast<std::size_t>((i * o + j - o / 2 + nf) % nf)];
        }
        ref[static_cast<std::size_t>(i)] = acc / static_cast<double>(o);
    }
    CHECK(nrmse_value(traj.frame(grid.n_t), ref) < 1e-3);
}

TEST_CASE("burgers stored frame 0 is the input verbatim; bad configs rejected") {
    Grid1D grid;
    auto u0 = sample_initial_condition(3, grid);
    auto traj = solve_burgers(u0, 0.1, grid);
    CHECK(std::equal(u0.begin(), u0.end(), traj.frame(0).begin()));
    CHECK_THROWS_AS(solve_burgers(u0, -1.0, grid), ConfigError);
    BurgersOptions opts;
    opts.oversample = 3;
    CHECK_THROWS_AS(solve_burgers(u0, 0.1, grid, opts), ConfigError);
    BurgersOptions tight;
    tight.max_substeps = 10;
    CHECK_THROWS_AS(solve_burgers(u0, 0.1, grid, tight), ConfigError);
}

TEST_CASE("generate_dataset: counts and determinism") {
    DataConfig cfg;
    cfg.kind = PdeKind::advection;
    cfg.grid.n_x = 64;
    cfg.grid.n_t = 8;
    cfg.seed = 1234;
    cfg.params = {{0.5, 3, 2}, {2.0, 4, 0}};
    Dataset train = generate_dataset(cfg, "train");
    CHECK(train.sets.size() == 2);
    CHECK(train.sets[0].items.size() == 3);
    CHECK(train.sets[1].items.size() == 4);
    Dataset test = generate_dataset(cfg, "test");
    CHECK(test.sets.size() == 1);
    CHECK(test.sets[0].items.size() == 2);

    Dataset train2 = generate_dataset(cfg, "train");
    for (std::size_t s = 0; s < train.sets.size(); ++s)
        for (std::size_t i = 0; i < train.sets[s].items.size(); ++i)
            CHECK(train.sets[s].items[i].u == train2.sets[s].items[i].u);

    // Train and test draws are disjoint streams.
    CHECK(train.sets[0].items[0].u != test.sets[0].items[0].u);
}

TEST_CASE("generated advection frames match a direct recomputation") {
    DataConfig cfg;
    cfg.kind = PdeKind::advection;
    cfg.grid.n_x = 64;
    cfg.grid.n_t = 8;
    cfg.seed = 77;
    cfg.params = {{0.4, 2, 0}};
    Dataset train = generate_dataset(cfg, "train");
    for (std::int64_t i = 0; i < 2; ++i) {
        auto u0 = sample_initial_condition(trajectory_seed(77, 0, false, i), cfg.grid);
        auto ref = solve_advection(u0, 0.4, cfg.grid);
        CHECK(train.sets[0].items[static_cast<std::size_t>(i)].u == ref.u);
    }
}
