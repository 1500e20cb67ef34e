#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capepde/rng.hpp"

namespace capepde {

/// Uniform periodic 1D grid and stored time discretization. Defaults give a
/// trajectory of 41 stored frames covering t in [0, 2].
struct Grid1D {
    std::int64_t n_x = 128;
    double length = 1.0;
    std::int64_t n_t = 40;
    double dt = 0.05;

    double dx() const { return length / static_cast<double>(n_x); }
    void validate() const;  // power-of-two n_x, positive extents
};

enum class PdeKind : std::uint8_t { advection = 0, burgers = 1 };

std::string pde_kind_name(PdeKind k);
PdeKind pde_kind_from_name(const std::string& s);

struct PdeParams {
    PdeKind kind = PdeKind::advection;
    double value = 1.0;  // advection velocity (beta) or diffusion coefficient (nu); > 0
};

/// One solution sequence u^0..u^{n_t} on the grid, single channel, row-major
/// frames of n_x values each.
struct Trajectory {
    Grid1D grid;
    PdeParams params;
    std::vector<double> u;  // (n_t+1) * n_x

    std::int64_t frames() const { return grid.n_t + 1; }
    std::span<const double> frame(std::int64_t k) const {
        return {u.data() + k * grid.n_x, static_cast<std::size_t>(grid.n_x)};
    }
    std::span<double> frame(std::int64_t k) {
        return {u.data() + k * grid.n_x, static_cast<std::size_t>(grid.n_x)};
    }
};

/// All trajectories sharing one (kind, parameter, split); the unit stored in
/// a single dataset file.
struct TrajectorySet {
    PdeParams params;
    Grid1D grid;
    std::vector<Trajectory> items;
    std::string meta_json;
};

struct Dataset {
    std::string split;  // "train" or "test"
    std::vector<TrajectorySet> sets;
};

/// Band-limited random initial condition: K sinusoids, wavenumbers in
/// {1..max_wavenumber}, amplitudes U(0,1), phases U(0,2pi), then shifted to
/// zero mean and scaled to unit max-abs on the grid.
struct InitialCondition {
    static constexpr int kModes = 4;
    static constexpr int kMaxWavenumber = 4;
    double amplitude[kModes];
    int wavenumber[kModes];
    double phase[kModes];
    double mean_shift = 0.0;  // subtracted after summing the modes
    double scale = 1.0;       // divisor after the shift

    /// Analytic normalized value at position x (periodic, length from grid).
    double eval(double x, double length) const;
};

std::vector<double> sample_initial_condition(std::uint64_t seed, const Grid1D& grid,
                                             InitialCondition* components = nullptr);

/// Exact advection by spectral phase shift: frame k is u0 shifted by
/// beta * k * dt (exact for band-limited u0, any fractional shift).
Trajectory solve_advection(std::span<const double> u0, double beta, const Grid1D& grid);

struct BurgersOptions {
    std::int64_t oversample = 8;       // fine grid = oversample * n_x
    double cfl = 0.4;                  // advective CFL number
    std::int64_t max_substeps = 10'000'000;
};

/// Viscous Burgers u_t + u u_x = (nu/pi) u_xx on the periodic domain.
/// Conservative finite-volume advection on the oversampled grid (MUSCL
/// reconstruction with a local Lax-Friedrichs flux, SSP-RK2); diffusion
/// applied exactly in Fourier space each substep (integrating factor), which
/// removes the quadratic diffusive time-step bound. Stored frames are box
/// averages on the coarse grid; frame 0 is the input field verbatim.
Trajectory solve_burgers(std::span<const double> u0, double nu, const Grid1D& grid,
                         const BurgersOptions& opts = {});

/// Per-parameter trajectory counts for dataset generation.
struct ParamCounts {
    double value = 1.0;
    std::int64_t n_train = 0;
    std::int64_t n_test = 0;
};

struct DataConfig {
    PdeKind kind = PdeKind::advection;
    Grid1D grid;
    std::vector<ParamCounts> params;
    std::uint64_t seed = 0;
    BurgersOptions burgers;
};

/// Deterministic per-(param, split, index) trajectory seed.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::size_t param_index, bool test_split,
                              std::int64_t traj_index);

/// Generates one split of the configured dataset in memory.
Dataset generate_dataset(const DataConfig& config, const std::string& split);

}  // namespace capepde
