#pragma once

#include <string>

#include "capepde/pde_data.hpp"

namespace capepde {

/// PDEB1 container, little-endian:
///   magic "PDEB1\0" (6 bytes); u16 version=1; u8 kind (0=advection,
///   1=burgers); f64 param; u32 n_traj, n_t_plus_1, c, n_x; f64 dt, dx;
///   n_traj*(n_t+1)*c*n_x f64 values row-major; u32 json_len; UTF-8 JSON
///   metadata (seed, generator settings).
void write_trajectory_set(const TrajectorySet& set, const std::string& path);
TrajectorySet read_trajectory_set(const std::string& path);

/// Header bytes before the sample data (fixed layout above).
constexpr std::size_t kPdebHeaderBytes = 6 + 2 + 1 + 8 + 4 * 4 + 2 * 8;

/// File name used by the generator for one (kind, param, split) set.
std::string dataset_file_name(PdeKind kind, double param, const std::string& split);

}  // namespace capepde
