#include "symot/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "symot/errors.hpp"
#include "symot/random.hpp"

namespace symot {
namespace {

constexpr std::array<std::pair<DatasetKind, std::string_view>, 8> kKindNames{{
    {DatasetKind::moons, "moons"},
    {DatasetKind::circles, "circles"},
    {DatasetKind::gauss_pair_a, "gauss_pair_a"},
    {DatasetKind::gauss_pair_b, "gauss_pair_b"},
    {DatasetKind::eight_gauss_a, "eight_gauss_a"},
    {DatasetKind::eight_gauss_b, "eight_gauss_b"},
    {DatasetKind::linear_gauss_a, "linear_gauss_a"},
    {DatasetKind::linear_gauss_b, "linear_gauss_b"},
}};

}  // namespace

std::string_view to_string(DatasetKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

DatasetGeometry default_geometry(DatasetKind kind) {
  DatasetGeometry g;
  switch (kind) {
    case DatasetKind::moons:
      g.radius = 1.0;
      break;
    case DatasetKind::circles:
      g.radius = 1.0;
      g.inner_radius = 0.5;
      break;
    case DatasetKind::gauss_pair_a:
      g.center = {-3.0, -3.0};
      break;
    case DatasetKind::gauss_pair_b:
      g.center = {3.0, 3.0};
      break;
    case DatasetKind::eight_gauss_a:
      g.radius = 2.0;
      g.components = 8;
      break;
    case DatasetKind::eight_gauss_b:
      g.radius = 4.0;
      g.rotation = std::numbers::pi / 8.0;
      g.components = 8;
      break;
    case DatasetKind::linear_gauss_a:
      // y = x
      g.segment_start = {-4.0, -4.0};
      g.segment_end = {4.0, 4.0};
      g.components = 5;
      break;
    case DatasetKind::linear_gauss_b:
      // y = -x + 6
      g.segment_start = {-1.0, 7.0};
      g.segment_end = {7.0, -1.0};
      g.components = 5;
      break;
  }
  return g;
}

double default_noise(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::moons:
    case DatasetKind::circles:
      return 0.05;
    case DatasetKind::gauss_pair_a:
      return 1.0;
    case DatasetKind::gauss_pair_b:
      return std::sqrt(0.5);
    case DatasetKind::eight_gauss_a:
      return 0.2;
    case DatasetKind::eight_gauss_b:
    case DatasetKind::linear_gauss_a:
    case DatasetKind::linear_gauss_b:
      return 0.3;
  }
  return 0.0;
}

DatasetSpec default_spec(DatasetKind kind, Index n, std::uint64_t seed) {
  return DatasetSpec{kind, n, default_noise(kind), seed, default_geometry(kind)};
}

Matrix generate(const DatasetSpec& spec) {
  if (spec.n < 1) throw DomainError("generate: n must be at least 1");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw DomainError("generate: noise must be nonnegative");
  const DatasetGeometry& g = spec.geometry;
  Rng place(derive_seed(spec.seed, "placement"));
  Rng noise(derive_seed(spec.seed, "noise"));
  const double pi = std::numbers::pi;

  Matrix out(spec.n, 2);
  const Index first_half = spec.n / 2;
  for (Index i = 0; i < spec.n; ++i) {
    double px = 0.0;
    double py = 0.0;
    switch (spec.kind) {
      case DatasetKind::moons: {
        const double t = place.uniform(0.0, pi);
        if (i < first_half) {
          px = g.radius * std::cos(t);
          py = g.radius * std::sin(t);
        } else {
          px = g.radius * (1.0 - std::cos(t));
          py = g.radius * (0.5 - std::sin(t));
        }
        break;
      }
      case DatasetKind::circles: {
        const double t = place.uniform(0.0, 2.0 * pi);
        const double r = i < first_half ? g.radius : g.inner_radius;
        px = r * std::cos(t);
        py = r * std::sin(t);
        break;
      }
      case DatasetKind::gauss_pair_a:
      case DatasetKind::gauss_pair_b:
        px = g.center[0];
        py = g.center[1];
        break;
      case DatasetKind::eight_gauss_a:
      case DatasetKind::eight_gauss_b: {
        if (g.components < 1) throw DomainError("generate: components must be positive");
        const auto c = place.index(static_cast<std::size_t>(g.components));
        const double angle = g.rotation + 2.0 * pi * static_cast<double>(c) / g.components;
        px = g.radius * std::cos(angle);
        py = g.radius * std::sin(angle);
        break;
      }
      case DatasetKind::linear_gauss_a:
      case DatasetKind::linear_gauss_b: {
        if (g.components < 1) throw DomainError("generate: components must be positive");
        const auto c = place.index(static_cast<std::size_t>(g.components));
        const double f = g.components == 1 ? 0.5 : static_cast<double>(c) / (g.components - 1);
        px = g.segment_start[0] + f * (g.segment_end[0] - g.segment_start[0]);
        py = g.segment_start[1] + f * (g.segment_end[1] - g.segment_start[1]);
        break;
      }
    }
    out(i, 0) = px + spec.noise * noise.normal();
    out(i, 1) = py + spec.noise * noise.normal();
  }
  return out;
}

// --- CSV -------------------------------------------------------------------

std::string format_points_csv(const Matrix& points) {
  if (points.cols() != 2) throw DimensionError("dataset files hold 2-D points");
  std::string out = "x0,x1\n";
  char buf[64];
  for (Index i = 0; i < points.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", points(i, 0), points(i, 1));
    out += buf;
  }
  return out;
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw FormatError("line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) throw FormatError("line " + std::to_string(line) + ": non-finite value");
  return v;
}

}  // namespace

Matrix parse_points_csv(std::string_view text) {
  if (text.empty()) throw FormatError("dataset: empty file");
  if (text.back() != '\n') throw FormatError("dataset: last line is not terminated (truncated file?)");

  std::vector<double> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "x0,x1") throw FormatError("dataset: expected header 'x0,x1', got '" + std::string(line) + "'");
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 2 columns");
    }
    values.push_back(parse_double(line.substr(0, comma), line_no));
    values.push_back(parse_double(line.substr(comma + 1), line_no));
  }
  const auto rows = static_cast<Index>(values.size() / 2);
  if (rows == 0) throw FormatError("dataset: no points");
  return Eigen::Map<const Matrix>(values.data(), rows, 2);
}

void save_points(const std::filesystem::path& path, const Matrix& points) {
  const std::string text = format_points_csv(points);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix load_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_points_csv(buf.str());
}

}  // namespace symot
