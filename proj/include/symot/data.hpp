#pragma once

// Seeded 2-D toy distributions and the dataset CSV format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "symot/dense.hpp"

namespace symot {

enum class DatasetKind {
  moons,
  circles,
  gauss_pair_a,
  gauss_pair_b,
  eight_gauss_a,
  eight_gauss_b,
  linear_gauss_a,
  linear_gauss_b,
};

std::string_view to_string(DatasetKind kind);
// Throws ConfigError for unknown names.
DatasetKind parse_dataset_kind(std::string_view name);

// Shape parameters. Which fields matter depends on the kind:
//   moons           radius
//   circles         radius (outer), inner_radius
//   gauss_pair_*    center
//   eight_gauss_*   radius, rotation, components
//   linear_gauss_*  segment_start, segment_end, components
struct DatasetGeometry {
  double radius = 1.0;
  double inner_radius = 0.5;
  double rotation = 0.0;
  std::array<double, 2> center{0.0, 0.0};
  std::array<double, 2> segment_start{0.0, 0.0};
  std::array<double, 2> segment_end{0.0, 0.0};
  int components = 1;
};

// `noise` is the standard deviation of the isotropic Gaussian added to each
// point (for mixture kinds, the per-component standard deviation).
struct DatasetSpec {
  DatasetKind kind = DatasetKind::moons;
  Index n = 2000;
  double noise = 0.05;
  std::uint64_t seed = 0;
  DatasetGeometry geometry;
};

// Spec with the default noise and geometry for `kind`.
DatasetSpec default_spec(DatasetKind kind, Index n, std::uint64_t seed);
DatasetGeometry default_geometry(DatasetKind kind);
double default_noise(DatasetKind kind);

// Deterministic [n x 2] sample. Point placement and noise use separate
// streams, so the noise-free positions do not depend on `noise`.
Matrix generate(const DatasetSpec& spec);

// CSV with header "x0,x1" and 17-significant-digit values, one point per
// line, every line newline-terminated.
void save_points(const std::filesystem::path& path, const Matrix& points);
Matrix load_points(const std::filesystem::path& path);

std::string format_points_csv(const Matrix& points);
Matrix parse_points_csv(std::string_view text);

}  // namespace symot
