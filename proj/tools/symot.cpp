// symot: command-line driver for data generation, training, evaluation,
// beta sweeps and invertibility checks.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 numeric failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "symot/config.hpp"
#include "symot/data.hpp"
#include "symot/errors.hpp"
#include "symot/eval.hpp"
#include "symot/experiment.hpp"
#include "symot/flow.hpp"
#include "symot/hash.hpp"
#include "symot/random.hpp"

namespace fs = std::filesystem;
using namespace symot;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_beta_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) {
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (end != item.c_str() + item.size()) throw ConfigError("--betas: '" + item + "' is not a number");
      out.push_back(v);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("--betas: empty beta list");
  return out;
}

std::size_t sweep_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SYMOT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw ConfigError("SYMOT_THREADS must be a positive integer");
    n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Settings s = Settings::load(path);
  for (const std::string& o : overrides) s.apply_override(o);
  return experiment_from_settings(s);
}

void print_metrics(const MetricsReport& r) {
  std::printf("ot_fwd %s\not_bwd %s\nmmd_fwd %s\nmmd_bwd %s\n", fmt17(r.ot_fwd).c_str(), fmt17(r.ot_bwd).c_str(),
              fmt17(r.mmd_fwd).c_str(), fmt17(r.mmd_bwd).c_str());
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string kind;
  Index n = 2000;
  std::optional<double> noise;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  DatasetSpec spec = default_spec(parse_dataset_kind(a.kind), a.n, a.seed);
  if (a.n < 1) throw ConfigError("--n must be positive");
  if (a.noise) {
    if (!(*a.noise >= 0.0)) throw ConfigError("--noise must be nonnegative");
    spec.noise = *a.noise;
  }
  save_points(a.out, generate(spec));
  std::printf("%s  %s\n", sha256_file(a.out).c_str(), a.out.c_str());
  return 0;
}

// --- init -------------------------------------------------------------------

struct InitArgs {
  Index dim = 2;
  std::size_t blocks = 8;
  Index width = 128;
  std::size_t hidden_layers = 2;
  double gamma = 2.0;
  std::uint64_t seed = 0;
  bool identity = false;
  std::string out;
};

int cmd_init(const InitArgs& a) {
  FlowModel model = init_model({a.dim, a.blocks, a.width, a.hidden_layers, a.gamma}, a.seed);
  if (a.identity) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(a.dim));
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    for (std::size_t b = 0; b < model.size(); ++b) model.block(b).set_permutation(perm);
  }
  save_checkpoint(model, a.out);
  std::printf("%s  %s\n", sha256_file(a.out).c_str(), a.out.c_str());
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::vector<std::string> overrides;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (!a.manifest.empty()) {
    if (!a.overrides.empty()) throw ConfigError("--override cannot be combined with --manifest");
    cfg = config_from_manifest(load_manifest(a.manifest));
  } else {
    cfg = load_config(a.config, a.overrides);
  }
  if (!a.out.empty()) cfg.output_dir = a.out;
  const RunOutputs run = run_experiment(cfg);
  const LossBreakdown& last = run.result.trace.back();
  std::printf("run %s (%s)\n", cfg.name.c_str(), run.manifest.config_hash.c_str());
  std::printf("final epoch loss %s\n", fmt17(last.total).c_str());
  print_metrics(run.metrics);
  std::printf("outputs in %s\n", cfg.output_dir.string().c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string x;
  std::string z;
  std::string manifest;
  std::uint64_t seed = 0;
  std::string metrics;
  std::string correspondence;
  std::string svg;
};

int cmd_eval(const EvalArgs& a) {
  const FlowModel model = load_checkpoint(a.checkpoint);
  const Matrix x = load_points(a.x);
  const Matrix z = load_points(a.z);
  if (x.cols() != model.dim() || z.cols() != model.dim()) {
    throw DimensionError("checkpoint expects " + std::to_string(model.dim()) + "-D points, data has " +
                         std::to_string(x.cols()) + " and " + std::to_string(z.cols()) + " columns");
  }

  std::optional<KernelBank> bank;
  double beta = 0.0;
  std::uint64_t seed = a.seed;
  if (!a.manifest.empty()) {
    const RunManifest m = load_manifest(a.manifest);
    bank.emplace(m.bandwidths, m.weights);
    const ExperimentConfig cfg = config_from_manifest(m);
    beta = cfg.train.beta;
    seed = cfg.seed;
  } else {
    bank.emplace(default_bank(median_heuristic(x, z, derive_seed(a.seed, "bandwidth"))));
  }

  const MetricsReport r = evaluate(model, *bank, x, z);
  print_metrics(r);
  if (!a.metrics.empty()) {
    const std::string name = fs::path(a.x).stem().string() + "->" + fs::path(a.z).stem().string();
    const std::string text = format_metrics_csv({{name, "eval", beta, r, seed}});
    std::FILE* f = std::fopen(a.metrics.c_str(), "wb");
    if (!f) throw IoError("cannot open " + a.metrics + " for writing");
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("failed writing " + a.metrics);
  }
  if (!a.correspondence.empty()) export_correspondence(model, x, z, a.correspondence);
  if (!a.svg.empty()) write_scatter_svg(model, x, z, a.svg);
  return 0;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string betas;
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  const std::vector<double> betas = parse_beta_list(a.betas);
  const ExperimentConfig cfg = load_config(a.config, a.overrides);
  const ExperimentData d = prepare_data(cfg);
  const std::vector<SweepRow> rows =
      sweep_beta(cfg.train, betas, {d.x_train, d.z_train, d.x_test, d.z_test}, sweep_threads());

  const fs::path out = a.out.empty() ? cfg.output_dir / "sweep.csv" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const std::string text = format_sweep_csv(rows);
  std::FILE* f = std::fopen(out.c_str(), "wb");
  if (!f) throw IoError("cannot open " + out.string() + " for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("failed writing " + out.string());

  std::cout << text;
  std::size_t failed = 0;
  for (const SweepRow& r : rows) {
    if (r.ok()) continue;
    ++failed;
    std::fprintf(stderr, "failed: %s\n", r.error.c_str());
  }
  if (failed) {
    std::fprintf(stderr, "%zu of %zu beta values failed; partial table written to %s\n", failed, rows.size(),
                 out.c_str());
    return 3;
  }
  return 0;
}

// --- roundtrip --------------------------------------------------------------

struct RoundtripArgs {
  std::string checkpoint;
  Index n = 1000;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
};

int cmd_roundtrip(const RoundtripArgs& a) {
  if (a.n < 1) throw ConfigError("--n must be positive");
  const FlowModel model = load_checkpoint(a.checkpoint);
  Rng rng(derive_seed(a.seed, "roundtrip"));
  Matrix x(a.n, model.dim());
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-4.0, 4.0);
  const double err = (inverse(model, forward(model, x)) - x).cwiseAbs().maxCoeff();
  std::printf("max roundtrip error %s over %ld points\n", fmt17(err).c_str(), static_cast<long>(a.n));
  if (!(err <= a.tolerance)) {
    std::fprintf(stderr, "roundtrip error exceeds %s\n", fmt17(a.tolerance).c_str());
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric OT-regularized normalizing flows on 2-D toy data"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a seeded toy dataset as CSV");
  g->add_option("--kind", gen.kind, "moons, circles, gauss_pair_a, ...")->required();
  g->add_option("--n", gen.n, "Number of points");
  g->add_option("--noise", gen.noise, "Noise standard deviation (default per kind)");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Output CSV path")->required();

  InitArgs ini;
  auto* i = app.add_subcommand("init", "Write an untrained checkpoint");
  i->add_option("--dim", ini.dim, "Data dimension");
  i->add_option("--blocks", ini.blocks, "Coupling blocks");
  i->add_option("--width", ini.width, "Hidden width of each subnet");
  i->add_option("--hidden-layers", ini.hidden_layers, "Hidden layers per subnet");
  i->add_option("--gamma", ini.gamma, "Log-scale clamp");
  i->add_option("--seed", ini.seed, "Initialization seed");
  i->add_flag("--identity", ini.identity, "Use identity permutations, so the flow is the identity map");
  i->add_option("--out", ini.out, "Checkpoint path")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train from a config file or re-run a manifest");
  auto* t_cfg = t->add_option("--config", tr.config, "Config file");
  auto* t_man = t->add_option("--manifest", tr.manifest, "Manifest of an earlier run");
  t_cfg->excludes(t_man);
  t->add_option("--override", tr.overrides, "key=value, repeatable (bare keys mean train.<key>)");
  t->add_option("--out", tr.out, "Output directory (overrides output.dir)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on two point sets");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  e->add_option("--x", ev.x, "Source points CSV")->required();
  e->add_option("--z", ev.z, "Target points CSV")->required();
  e->add_option("--manifest", ev.manifest, "Take the kernel bank from this run manifest");
  e->add_option("--seed", ev.seed, "Seed for the bandwidth heuristic when no manifest is given");
  e->add_option("--metrics", ev.metrics, "Write metrics CSV");
  e->add_option("--correspondence", ev.correspondence, "Write correspondence CSV");
  e->add_option("--svg", ev.svg, "Write scatter plot SVG");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train one model per beta and tabulate forward metrics");
  s->add_option("--config", sw.config, "Config file")->required();
  s->add_option("--betas", sw.betas, "Comma-separated beta values")->required();
  s->add_option("--override", sw.overrides, "key=value, repeatable");
  s->add_option("--out", sw.out, "Sweep CSV path (default <output.dir>/sweep.csv)");

  RoundtripArgs rt;
  auto* r = app.add_subcommand("roundtrip", "Check T^-1(T(x)) = x on random points in [-4, 4]^d");
  r->add_option("--checkpoint", rt.checkpoint, "Checkpoint path")->required();
  r->add_option("--n", rt.n, "Number of points");
  r->add_option("--seed", rt.seed, "Sampling seed");
  r->add_option("--tolerance", rt.tolerance, "Largest accepted max-norm error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*i) return cmd_init(ini);
    if (*t) {
      if (tr.config.empty() && tr.manifest.empty()) throw ConfigError("train needs --config or --manifest");
      return cmd_train(tr);
    }
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_sweep(sw);
    if (*r) return cmd_roundtrip(rt);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return exit_code(ex);
  }
  return 1;
}
