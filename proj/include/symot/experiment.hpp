#pragma once

// End-to-end runs: data preparation, training with on-disk outputs, and the
// run manifest that allows a bit-identical re-run.

#include <filesystem>
#include <string>
#include <vector>

#include "symot/config.hpp"
#include "symot/eval.hpp"
#include "symot/train.hpp"

namespace symot {

inline constexpr const char* kLibraryVersion = "1.0.0";

struct ExperimentData {
  Matrix x_train;
  Matrix z_train;
  Matrix x_test;
  Matrix z_test;
};

ExperimentData prepare_data(const ExperimentConfig& config);

struct DatasetRecord {
  std::string role;  // x_train, z_train, x_test, z_test
  std::string source;  // generator description or file path
  std::filesystem::path file;
  std::string sha256;
};

struct RunManifest {
  std::string version = kLibraryVersion;
  std::string config_text;  // Settings::to_text() of the resolved config
  std::string config_hash;
  std::vector<DatasetRecord> datasets;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path trace;
  std::filesystem::path metrics;
  std::vector<double> bandwidths;
  std::vector<double> weights;
  double wall_seconds = 0.0;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);
RunManifest load_manifest(const std::filesystem::path& path);

// Config recorded in a manifest.
ExperimentConfig config_from_manifest(const RunManifest& manifest);

// Short identifier of a resolved configuration.
std::string config_hash(const ExperimentConfig& config);

// Loss trace CSV: "epoch,mmd_fwd,mmd_bwd,ot_fwd,ot_bwd,total".
std::string format_trace_csv(const std::vector<LossBreakdown>& trace);

// Trains per `config` and writes into config.output_dir:
//   data/{x,z}_{train,test}.csv, checkpoint_eNNNN.bin (every
//   checkpoint_every epochs), model.bin, trace.csv, metrics.csv,
//   correspondence.csv, manifest.json
struct RunOutputs {
  TrainResult result;
  MetricsReport metrics;
  RunManifest manifest;
};
RunOutputs run_experiment(const ExperimentConfig& config);

}  // namespace symot
