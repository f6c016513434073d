#include "symot/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "symot/errors.hpp"
#include "symot/random.hpp"

namespace symot {
namespace {

constexpr std::array<std::string_view, 13> kDatasetFields{
    "kind", "n",        "noise",         "seed",        "path",       "test_path", "radius",
    "inner_radius", "rotation", "center", "segment_start", "segment_end", "components"};

constexpr std::array<std::string_view, 18> kOtherKeys{
    "name",           "seed",          "data.n_test",         "train.beta",          "train.symmetric",
    "train.epochs",   "train.batch_size", "train.lr",         "train.weight_decay",  "train.blocks",
    "train.subnet_width", "train.hidden_layers", "train.gamma", "train.kernel_scales", "train.grad_clip",
    "output.dir",     "output.checkpoint_every", "train.seed"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Typed access with "<source>:<line>: key" diagnostics.
class Reader {
 public:
  explicit Reader(const Settings& s) : s_(s) {}

  bool has(const std::string& key) const { return s_.get(key).has_value(); }

  std::string str(const std::string& key, std::string fallback) const {
    auto v = s_.get(key);
    return v ? *v : std::move(fallback);
  }

  double num(const std::string& key, double fallback) const {
    auto v = s_.get(key);
    if (!v) return fallback;
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) fail(key, "expected a number, got '" + *v + "'");
    return out;
  }

  std::uint64_t uint(const std::string& key, std::uint64_t fallback) const {
    auto v = s_.get(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) fail(key, "expected a nonnegative integer, got '" + *v + "'");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto v = s_.get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(key, "expected true/false, got '" + *v + "'");
  }

  std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
    auto v = s_.get(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::string_view rest = *v;
    while (true) {
      const auto comma = rest.find(',');
      const std::string item = trim(rest.substr(0, comma));
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), d);
      if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
        fail(key, "expected a comma-separated list of numbers, got '" + *v + "'");
      }
      out.push_back(d);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return out;
  }

  std::array<double, 2> pair(const std::string& key, std::array<double, 2> fallback) const {
    if (!has(key)) return fallback;
    const auto l = list(key, {});
    if (l.size() != 2) fail(key, "expected two comma-separated numbers");
    return {l[0], l[1]};
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto& e = s_.entries().at(key);
    std::string where = s_.source();
    if (e.line) where += ":" + std::to_string(e.line);
    throw ConfigError(where + ": " + key + ": " + msg);
  }

 private:
  const Settings& s_;
};

DatasetSource read_dataset(const Reader& r, const std::string& prefix, std::uint64_t seed, const std::string& role) {
  DatasetSource src;
  const std::string p = "data." + prefix + ".";
  if (r.has(p + "path")) src.path = r.str(p + "path", "");
  if (r.has(p + "test_path")) src.test_path = r.str(p + "test_path", "");

  if (!r.has(p + "kind") && !(src.path && src.test_path)) {
    throw ConfigError("data." + prefix + ".kind is required unless both path and test_path are given");
  }
  const DatasetKind kind = parse_dataset_kind(r.str(p + "kind", role == "x" ? "moons" : "circles"));
  const auto n = static_cast<Index>(r.uint(p + "n", 2000));
  src.spec = default_spec(kind, n, r.uint(p + "seed", derive_seed(seed, "data." + prefix + ".train")));
  src.test_seed = r.uint(p + "test_seed", derive_seed(seed, "data." + prefix + ".test"));
  src.spec.noise = r.num(p + "noise", src.spec.noise);
  DatasetGeometry& g = src.spec.geometry;
  g.radius = r.num(p + "radius", g.radius);
  g.inner_radius = r.num(p + "inner_radius", g.inner_radius);
  g.rotation = r.num(p + "rotation", g.rotation);
  g.center = r.pair(p + "center", g.center);
  g.segment_start = r.pair(p + "segment_start", g.segment_start);
  g.segment_end = r.pair(p + "segment_end", g.segment_end);
  g.components = static_cast<int>(r.uint(p + "components", static_cast<std::uint64_t>(g.components)));
  return src;
}

void write_dataset(Settings& s, const std::string& prefix, const DatasetSource& src) {
  const std::string p = "data." + prefix + ".";
  const DatasetSpec& spec = src.spec;
  s.set(p + "kind", std::string(to_string(spec.kind)));
  s.set(p + "n", std::to_string(spec.n));
  s.set(p + "noise", format_double(spec.noise));
  s.set(p + "seed", std::to_string(spec.seed));
  s.set(p + "test_seed", std::to_string(src.test_seed));
  s.set(p + "radius", format_double(spec.geometry.radius));
  s.set(p + "inner_radius", format_double(spec.geometry.inner_radius));
  s.set(p + "rotation", format_double(spec.geometry.rotation));
  s.set(p + "center", format_double(spec.geometry.center[0]) + "," + format_double(spec.geometry.center[1]));
  s.set(p + "segment_start",
        format_double(spec.geometry.segment_start[0]) + "," + format_double(spec.geometry.segment_start[1]));
  s.set(p + "segment_end", format_double(spec.geometry.segment_end[0]) + "," + format_double(spec.geometry.segment_end[1]));
  s.set(p + "components", std::to_string(spec.geometry.components));
  if (src.path) s.set(p + "path", src.path->string());
  if (src.test_path) s.set(p + "test_path", src.test_path->string());
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_known_key(std::string_view key) {
  if (std::find(kOtherKeys.begin(), kOtherKeys.end(), key) != kOtherKeys.end()) return true;
  for (std::string_view prefix : {"data.x.", "data.z."}) {
    if (key.starts_with(prefix)) {
      const auto field = key.substr(prefix.size());
      if (field == "test_seed") return true;
      return std::find(kDatasetFields.begin(), kDatasetFields.end(), field) != kDatasetFields.end();
    }
  }
  return false;
}

Settings Settings::parse(std::string_view text, std::string_view source) {
  Settings s;
  s.source_ = std::string(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = s.source_ + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!is_known_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (s.entries_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    s.entries_[key] = Entry{value, line_no};
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Settings::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  std::string key = trim(assignment.substr(0, eq));
  if (!is_known_key(key) && is_known_key("train." + key)) key = "train." + key;
  if (!is_known_key(key)) throw ConfigError("override: unknown key '" + key + "'");
  entries_[key] = Entry{trim(assignment.substr(eq + 1)), 0};
}

void Settings::set(const std::string& key, std::string value) {
  if (!is_known_key(key)) throw ConfigError("unknown key '" + key + "'");
  entries_[key] = Entry{std::move(value), 0};
}

std::optional<std::string> Settings::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string Settings::to_text() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + " = " + e.value + "\n";
  return out;
}

ExperimentConfig experiment_from_settings(const Settings& settings) {
  const Reader r(settings);
  ExperimentConfig c;
  c.name = r.str("name", c.name);
  c.seed = r.uint("seed", c.seed);
  c.x = read_dataset(r, "x", c.seed, "x");
  c.z = read_dataset(r, "z", c.seed, "z");
  c.n_test = static_cast<Index>(r.uint("data.n_test", static_cast<std::uint64_t>(c.n_test)));
  if (c.n_test < 1) throw ConfigError("data.n_test must be positive");

  TrainConfig& t = c.train;
  t.seed = r.uint("train.seed", c.seed);
  t.beta = r.num("train.beta", t.beta);
  t.symmetric = r.boolean("train.symmetric", t.symmetric);
  t.epochs = r.uint("train.epochs", t.epochs);
  t.batch_size = static_cast<Index>(r.uint("train.batch_size", static_cast<std::uint64_t>(t.batch_size)));
  t.lr = r.num("train.lr", t.lr);
  t.weight_decay = r.num("train.weight_decay", t.weight_decay);
  t.blocks = r.uint("train.blocks", t.blocks);
  t.subnet_width = static_cast<Index>(r.uint("train.subnet_width", static_cast<std::uint64_t>(t.subnet_width)));
  t.hidden_layers = r.uint("train.hidden_layers", t.hidden_layers);
  t.gamma = r.num("train.gamma", t.gamma);
  t.kernel_scales = r.list("train.kernel_scales", t.kernel_scales);
  if (auto clip = settings.get("train.grad_clip"); clip && *clip != "none") t.grad_clip = r.num("train.grad_clip", 0.0);

  c.output_dir = r.str("output.dir", c.output_dir.string());
  c.checkpoint_every = r.uint("output.checkpoint_every", c.checkpoint_every);
  if (t.epochs < 1) throw ConfigError("train.epochs must be at least 1");
  return c;
}

Settings to_settings(const ExperimentConfig& c) {
  Settings s;
  s.set("name", c.name);
  s.set("seed", std::to_string(c.seed));
  write_dataset(s, "x", c.x);
  write_dataset(s, "z", c.z);
  s.set("data.n_test", std::to_string(c.n_test));
  const TrainConfig& t = c.train;
  s.set("train.seed", std::to_string(t.seed));
  s.set("train.beta", format_double(t.beta));
  s.set("train.symmetric", t.symmetric ? "true" : "false");
  s.set("train.epochs", std::to_string(t.epochs));
  s.set("train.batch_size", std::to_string(t.batch_size));
  s.set("train.lr", format_double(t.lr));
  s.set("train.weight_decay", format_double(t.weight_decay));
  s.set("train.blocks", std::to_string(t.blocks));
  s.set("train.subnet_width", std::to_string(t.subnet_width));
  s.set("train.hidden_layers", std::to_string(t.hidden_layers));
  s.set("train.gamma", format_double(t.gamma));
  std::string scales;
  for (std::size_t i = 0; i < t.kernel_scales.size(); ++i) scales += (i ? "," : "") + format_double(t.kernel_scales[i]);
  s.set("train.kernel_scales", scales);
  s.set("train.grad_clip", t.grad_clip ? format_double(*t.grad_clip) : "none");
  s.set("output.dir", c.output_dir.string());
  s.set("output.checkpoint_every", std::to_string(c.checkpoint_every));
  return s;
}

}  // namespace symot
