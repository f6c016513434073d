#include "symot/experiment.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symot/errors.hpp"
#include "symot/hash.hpp"

namespace symot {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix load_or_generate(const DatasetSource& src, bool test, Index n_test) {
  if (!test && src.path) return load_points(*src.path);
  if (test && src.test_path) return load_points(*src.test_path);
  DatasetSpec spec = src.spec;
  if (test) {
    spec.seed = src.test_seed;
    spec.n = n_test;
  }
  return generate(spec);
}

std::string describe(const DatasetSource& src, bool test, Index n_test) {
  if (!test && src.path) return "file:" + src.path->string();
  if (test && src.test_path) return "file:" + src.test_path->string();
  const DatasetSpec& s = src.spec;
  return std::string("generate:") + std::string(to_string(s.kind)) + " n=" + std::to_string(test ? n_test : s.n) +
         " noise=" + format_double(s.noise) + " seed=" + std::to_string(test ? src.test_seed : s.seed);
}

}  // namespace

ExperimentData prepare_data(const ExperimentConfig& config) {
  ExperimentData d{load_or_generate(config.x, false, config.n_test), load_or_generate(config.z, false, config.n_test),
                   load_or_generate(config.x, true, config.n_test), load_or_generate(config.z, true, config.n_test)};
  if (d.x_train.cols() != d.z_train.cols()) throw DimensionError("x and z datasets have different dimensions");
  return d;
}

std::string config_hash(const ExperimentConfig& config) {
  return sha256_hex(to_settings(config).to_text()).substr(0, 16);
}

std::string format_trace_csv(const std::vector<LossBreakdown>& trace) {
  std::string out = "epoch,mmd_fwd,mmd_bwd,ot_fwd,ot_bwd,total\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const LossBreakdown& b = trace[e];
    out += std::to_string(e + 1) + "," + format_double(b.mmd_fwd) + "," + format_double(b.mmd_bwd) + "," +
           format_double(b.ot_fwd) + "," + format_double(b.ot_bwd) + "," + format_double(b.total) + "\n";
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["version"] = m.version;
  j["config"] = m.config_text;
  j["config_hash"] = m.config_hash;
  j["datasets"] = json::array();
  for (const DatasetRecord& d : m.datasets) {
    j["datasets"].push_back({{"role", d.role}, {"source", d.source}, {"file", d.file.string()}, {"sha256", d.sha256}});
  }
  j["checkpoints"] = json::array();
  for (const auto& c : m.checkpoints) j["checkpoints"].push_back(c.string());
  j["trace"] = m.trace.string();
  j["metrics"] = m.metrics.string();
  j["kernel_bandwidths"] = m.bandwidths;
  j["kernel_weights"] = m.weights;
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& d : j.at("datasets")) {
      m.datasets.push_back({d.at("role").get<std::string>(), d.at("source").get<std::string>(),
                            d.at("file").get<std::string>(), d.at("sha256").get<std::string>()});
    }
    for (const auto& c : j.at("checkpoints")) m.checkpoints.emplace_back(c.get<std::string>());
    m.trace = j.at("trace").get<std::string>();
    m.metrics = j.at("metrics").get<std::string>();
    m.bandwidths = j.at("kernel_bandwidths").get<std::vector<double>>();
    m.weights = j.at("kernel_weights").get<std::vector<double>>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

ExperimentConfig config_from_manifest(const RunManifest& manifest) {
  return experiment_from_settings(Settings::parse(manifest.config_text, "<manifest>"));
}

RunOutputs run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir / "data");

  const ExperimentData data = prepare_data(config);
  RunManifest manifest;
  manifest.config_text = to_settings(config).to_text();
  manifest.config_hash = config_hash(config);

  const std::pair<const char*, const Matrix*> sets[] = {
      {"x_train", &data.x_train}, {"z_train", &data.z_train}, {"x_test", &data.x_test}, {"z_test", &data.z_test}};
  for (const auto& [role, points] : sets) {
    const std::filesystem::path file = dir / "data" / (std::string(role) + ".csv");
    save_points(file, *points);
    const bool test = std::string_view(role).ends_with("test");
    const DatasetSource& src = role[0] == 'x' ? config.x : config.z;
    manifest.datasets.push_back({role, describe(src, test, config.n_test), file, sha256_file(file)});
  }

  EpochCallback on_epoch;
  if (config.checkpoint_every > 0) {
    on_epoch = [&](std::size_t epoch, const FlowModel& model, const LossBreakdown&) {
      if (epoch % config.checkpoint_every != 0) return;
      char name[32];
      std::snprintf(name, sizeof name, "checkpoint_e%04zu.bin", epoch);
      save_checkpoint(model, dir / name);
      manifest.checkpoints.push_back(dir / name);
    };
  }

  RunOutputs out{train(data.x_train, data.z_train, config.train, on_epoch), {}, {}};
  save_checkpoint(out.result.model, dir / "model.bin");
  manifest.checkpoints.push_back(dir / "model.bin");

  manifest.trace = dir / "trace.csv";
  write_text(manifest.trace, format_trace_csv(out.result.trace));

  out.metrics = evaluate(out.result.model, out.result.bank, data.x_test, data.z_test);
  out.metrics.config_hash = manifest.config_hash;
  manifest.metrics = dir / "metrics.csv";
  const std::string dataset_name = std::string(to_string(config.x.spec.kind)) + "->" + std::string(to_string(config.z.spec.kind));
  const std::string method = config.train.beta == 0.0 ? "single_mmd" : (config.train.symmetric ? "symot" : "one_direction");
  write_text(manifest.metrics, format_metrics_csv({{dataset_name, method, config.train.beta, out.metrics, config.seed}}));
  export_correspondence(out.result.model, data.x_test, data.z_test, dir / "correspondence.csv");

  manifest.bandwidths = out.result.bank.bandwidths();
  manifest.weights = out.result.bank.weights();
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(dir / "manifest.json", manifest_to_json(manifest));
  out.manifest = std::move(manifest);
  return out;
}

}  // namespace symot
