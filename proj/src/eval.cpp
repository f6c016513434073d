#include "symot/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "symot/errors.hpp"
#include "symot/loss.hpp"

namespace symot {
namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

double MetricsReport::direction_asymmetry() const {
  return std::abs(ot_fwd - ot_bwd) / std::max({ot_fwd, ot_bwd, 1e-9});
}

MetricsReport evaluate(const FlowModel& model, const KernelBank& bank, const Matrix& x_test, const Matrix& z_test) {
  if (x_test.rows() == 0 || z_test.rows() == 0) throw DomainError("evaluate: test sets must be nonempty");
  if (x_test.cols() != model.dim() || z_test.cols() != model.dim()) throw DimensionError("evaluate: test data dimension differs from model");
  const Matrix tx = forward(model, x_test);
  const Matrix tz = inverse(model, z_test);
  MetricsReport r;
  r.ot_fwd = ot_cost(x_test, tx);
  r.ot_bwd = ot_cost(tz, z_test);
  r.mmd_fwd = mmd_distance(bank, tx, z_test);
  r.mmd_bwd = mmd_distance(bank, x_test, tz);
  r.n_test = std::min(x_test.rows(), z_test.rows());
  for (double v : {r.ot_fwd, r.ot_bwd, r.mmd_fwd, r.mmd_bwd}) {
    if (!std::isfinite(v)) throw NumericError("evaluate: non-finite metric");
  }
  return r;
}

// --- correspondence --------------------------------------------------------

std::string format_correspondence_csv(const FlowModel& model, const Matrix& x, const Matrix& z) {
  if (model.dim() != 2) throw DimensionError("correspondence export supports 2-D models");
  const Matrix tx = forward(model, x);
  const Matrix tz = inverse(model, z);
  std::string out = "src0,src1,dst0,dst1,direction\n";
  auto row = [&out](const auto& src, const auto& dst, const char* dir) {
    out += fmt17(src(0)) + "," + fmt17(src(1)) + "," + fmt17(dst(0)) + "," + fmt17(dst(1)) + "," + dir + "\n";
  };
  for (Index i = 0; i < x.rows(); ++i) row(x.row(i), tx.row(i), "fwd");
  for (Index i = 0; i < z.rows(); ++i) row(tz.row(i), z.row(i), "bwd");
  return out;
}

void export_correspondence(const FlowModel& model, const Matrix& x, const Matrix& z, const std::filesystem::path& path) {
  write_text(path, format_correspondence_csv(model, x, z));
}

std::vector<CorrespondenceRow> parse_correspondence_csv(std::string_view text) {
  std::vector<CorrespondenceRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (header) {
      if (line != "src0,src1,dst0,dst1,direction") throw FormatError("correspondence: bad header");
      header = false;
      continue;
    }
    CorrespondenceRow r{};
    char dir[8] = {};
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%7s", &r.src0, &r.src1, &r.dst0, &r.dst1, dir) != 5) {
      throw FormatError("correspondence: malformed row '" + line + "'");
    }
    r.direction = dir;
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- SVG -------------------------------------------------------------------

std::string format_scatter_svg(const FlowModel& model, const Matrix& x, const Matrix& z, std::size_t max_links) {
  if (model.dim() != 2) throw DimensionError("scatter plot supports 2-D models");
  const Matrix tx = forward(model, x);
  const double size = 600.0;
  const double margin = 20.0;

  double lo0 = INFINITY, hi0 = -INFINITY, lo1 = INFINITY, hi1 = -INFINITY;
  for (const Matrix* m : {&x, &tx, &z}) {
    if (m->rows() == 0) continue;
    lo0 = std::min(lo0, m->col(0).minCoeff());
    hi0 = std::max(hi0, m->col(0).maxCoeff());
    lo1 = std::min(lo1, m->col(1).minCoeff());
    hi1 = std::max(hi1, m->col(1).maxCoeff());
  }
  const double span = std::max({hi0 - lo0, hi1 - lo1, 1e-9});
  auto px = [&](double v) { return margin + (v - lo0) / span * (size - 2 * margin); };
  auto py = [&](double v) { return size - margin - (v - lo1) / span * (size - 2 * margin); };

  char buf[160];
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof buf, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                size, size, size, size);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const Index links = std::min<Index>(x.rows(), static_cast<Index>(max_links));
  out += "<g stroke=\"#2ca02c\" stroke-width=\"0.6\" stroke-opacity=\"0.6\">\n";
  for (Index i = 0; i < links; ++i) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n", px(x(i, 0)), py(x(i, 1)),
                  px(tx(i, 0)), py(tx(i, 1)));
    out += buf;
  }
  out += "</g>\n";
  auto dots = [&](const Matrix& m, const char* color, const char* opacity) {
    out += std::string("<g fill=\"") + color + "\" fill-opacity=\"" + opacity + "\">\n";
    for (Index i = 0; i < m.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.6\"/>\n", px(m(i, 0)), py(m(i, 1)));
      out += buf;
    }
    out += "</g>\n";
  };
  dots(z, "#9467bd", "0.25");
  dots(x, "#1f77b4", "0.7");
  dots(tx, "#ff7f0e", "0.7");
  out += "</svg>\n";
  return out;
}

void write_scatter_svg(const FlowModel& model, const Matrix& x, const Matrix& z, const std::filesystem::path& path) {
  write_text(path, format_scatter_svg(model, x, z));
}

// --- tables ----------------------------------------------------------------

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "dataset,method,beta,ot_fwd,ot_bwd,mmd_fwd,mmd_bwd,seed\n";
  for (const MetricsRow& r : rows) {
    out += r.dataset + "," + r.method + "," + fmt17(r.beta) + "," + fmt17(r.report.ot_fwd) + "," + fmt17(r.report.ot_bwd) +
           "," + fmt17(r.report.mmd_fwd) + "," + fmt17(r.report.mmd_bwd) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "beta,ot,mmd\n";
  for (const SweepRow& r : rows) {
    if (!r.ok()) continue;
    out += fmt17(r.beta) + "," + fmt17(r.report.ot_fwd) + "," + fmt17(r.report.mmd_fwd) + "\n";
  }
  return out;
}

std::vector<SweepRow> sweep_beta(const TrainConfig& base, const std::vector<double>& betas, const SweepData& data,
                                 std::size_t threads) {
  if (betas.empty()) throw ConfigError("sweep_beta: beta list is empty");
  std::vector<SweepRow> rows(betas.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < betas.size(); i = next++) {
      SweepRow& row = rows[i];
      row.beta = betas[i];
      try {
        TrainConfig cfg = base;
        cfg.beta = betas[i];
        const TrainResult run = train(data.x_train, data.z_train, cfg);
        row.report = evaluate(run.model, run.bank, data.x_test, data.z_test);
      } catch (const std::exception& e) {
        row.error = "beta=" + fmt17(betas[i]) + ": " + e.what();
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, betas.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

}  // namespace symot
