#pragma once

// Experiment configuration: flat "key = value" text with '#' comments and
// dotted sections (train.lr = 1e-3). Every randomized stream of a run is
// derived from the single top-level `seed`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "symot/data.hpp"
#include "symot/train.hpp"

namespace symot {

class Settings {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0 when set programmatically
  };

  // Throws ConfigError("<source>:<line>: ...") on malformed lines, unknown
  // keys, or duplicates.
  static Settings parse(std::string_view text, std::string_view source = "<config>");
  static Settings load(const std::filesystem::path& path);

  // "key=value"; a key without a section is looked up under "train." first.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, std::string value);

  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  // Sorted "key = value" lines.
  std::string to_text() const;

 private:
  std::string source_ = "<config>";
  std::map<std::string, Entry> entries_;
};

bool is_known_key(std::string_view key);

struct DatasetSource {
  DatasetSpec spec;  // used when generating; spec.seed is the training seed
  std::uint64_t test_seed = 0;
  std::optional<std::filesystem::path> path;       // training points file
  std::optional<std::filesystem::path> test_path;  // test points file
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DatasetSource x;
  DatasetSource z;
  Index n_test = 2000;
  TrainConfig train;
  std::filesystem::path output_dir = "run";
  std::size_t checkpoint_every = 0;  // 0 writes only the final checkpoint
};

// Resolves defaults: unspecified dataset seeds derive from `seed`, dataset
// noise/geometry default per kind.
ExperimentConfig experiment_from_settings(const Settings& settings);

// Fully resolved settings; experiment_from_settings(to_settings(c)) == c.
Settings to_settings(const ExperimentConfig& config);

std::string format_double(double v);

}  // namespace symot
