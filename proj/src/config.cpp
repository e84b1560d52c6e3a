#include "coegan/config.hpp"

#include <functional>
#include <sstream>

namespace coegan {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : "; ") + p;
  return s;
}

void check_positive(std::vector<std::string>& out, const char* name, long long v) {
  if (v <= 0) out.push_back(std::string(name) + " must be positive (got " + std::to_string(v) + ")");
}

void check_rate(std::vector<std::string>& out, const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    out.push_back(std::string(name) + " must be in [0, 1] (got " + std::to_string(v) + ")");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> out;
  if (c.generations < 0) out.push_back("generations must be >= 0");
  check_positive(out, "pop_gen", c.pop_gen);
  check_positive(out, "pop_disc", c.pop_disc);
  check_rate(out, "add_rate", c.rates.add);
  check_rate(out, "remove_rate", c.rates.remove);
  check_rate(out, "change_rate", c.rates.change);
  check_rate(out, "crossover_rate", c.crossover_rate);
  if (c.ranges.min_features < 1 || c.ranges.min_features > c.ranges.max_features)
    out.push_back("feature_range must satisfy 1 <= min <= max");
  if (c.ranges.min_channels < 1 || c.ranges.min_channels > c.ranges.max_channels)
    out.push_back("channel_range must satisfy 1 <= min <= max");
  check_positive(out, "k", c.k);
  check_positive(out, "k_t", c.k_t);
  if (c.fid_samples < 2) out.push_back("fid_samples must be >= 2");
  check_positive(out, "genome_limit", c.genome_limit);
  check_positive(out, "species", c.species);
  check_positive(out, "batch_size", c.batch_size);
  check_positive(out, "batches_per_gen", c.batches_per_gen);
  if (c.optimizer != "rmsprop") out.push_back("optimizer must be \"rmsprop\"");
  if (!(c.learning_rate > 0.0)) out.push_back("learning_rate must be positive");
  if (c.dataset != "mnist" && c.dataset != "ring") out.push_back("dataset must be mnist or ring");
  if (c.extractor != "identity" && c.extractor != "flatten" && c.extractor != "convnet")
    out.push_back("extractor must be identity, flatten or convnet");
  if (c.dataset == "ring" && c.extractor == "convnet")
    out.push_back("extractor convnet needs an image dataset");
  check_positive(out, "latent_dim", c.latent_dim);
  check_positive(out, "base_channels", c.base_channels);
  if (c.initial_threshold < 0) out.push_back("initial_threshold must be >= 0");
  if (c.threshold_step < 0) out.push_back("threshold_step must be >= 0");
  check_positive(out, "ring_modes", c.ring.modes);
  if (!(c.ring.sigma > 0)) out.push_back("ring_sigma must be positive");
  if (c.ring.radius < 0) out.push_back("ring_radius must be >= 0");
  if (c.ring_samples < c.batch_size) out.push_back("ring_samples must be >= batch_size");
  if (c.keep_checkpoints < 0) out.push_back("keep_checkpoints must be >= 0");
  check_positive(out, "grid_rows", c.grid_rows);
  check_positive(out, "grid_cols", c.grid_cols);
  return out;
}

json config_to_json(const RunConfig& c) {
  return json{
      {"generations", c.generations},
      {"pop_gen", c.pop_gen},
      {"pop_disc", c.pop_disc},
      {"add_rate", c.rates.add},
      {"remove_rate", c.rates.remove},
      {"change_rate", c.rates.change},
      {"crossover_rate", c.crossover_rate},
      {"feature_range", {c.ranges.min_features, c.ranges.max_features}},
      {"channel_range", {c.ranges.min_channels, c.ranges.max_channels}},
      {"k", c.k},
      {"k_t", c.k_t},
      {"fid_samples", c.fid_samples},
      {"genome_limit", c.genome_limit},
      {"species", c.species},
      {"batch_size", c.batch_size},
      {"batches_per_gen", c.batches_per_gen},
      {"optimizer", c.optimizer},
      {"learning_rate", c.learning_rate},
      {"seed", c.seed},
      {"dataset", c.dataset},
      {"extractor", c.extractor},
      {"strategy", std::string(to_string(c.strategy))},
      {"latent_dim", c.latent_dim},
      {"base_channels", c.base_channels},
      {"elitism", c.elitism},
      {"initial_threshold", c.initial_threshold},
      {"threshold_step", c.threshold_step},
      {"ring_modes", c.ring.modes},
      {"ring_radius", c.ring.radius},
      {"ring_sigma", c.ring.sigma},
      {"ring_samples", c.ring_samples},
      {"data_root", c.data_root},
      {"keep_checkpoints", c.keep_checkpoints},
      {"grid_rows", c.grid_rows},
      {"grid_cols", c.grid_cols},
  };
}

RunConfig config_from_json(const json& j, const RunConfig& base) {
  if (!j.is_object()) throw ConfigError({"config document must be a JSON object"});
  RunConfig c = base;
  auto range = [](const json& v, int& lo, int& hi) {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument("expected [min, max]");
    lo = v.at(0).get<int>();
    hi = v.at(1).get<int>();
  };
  const std::map<std::string, std::function<void(const json&)>> setters{
      {"generations", [&](const json& v) { c.generations = v.get<int>(); }},
      {"pop_gen", [&](const json& v) { c.pop_gen = v.get<int>(); }},
      {"pop_disc", [&](const json& v) { c.pop_disc = v.get<int>(); }},
      {"add_rate", [&](const json& v) { c.rates.add = v.get<double>(); }},
      {"remove_rate", [&](const json& v) { c.rates.remove = v.get<double>(); }},
      {"change_rate", [&](const json& v) { c.rates.change = v.get<double>(); }},
      {"crossover_rate", [&](const json& v) { c.crossover_rate = v.get<double>(); }},
      {"feature_range", [&](const json& v) { range(v, c.ranges.min_features, c.ranges.max_features); }},
      {"channel_range", [&](const json& v) { range(v, c.ranges.min_channels, c.ranges.max_channels); }},
      {"k", [&](const json& v) { c.k = v.get<int>(); }},
      {"k_t", [&](const json& v) { c.k_t = v.get<int>(); }},
      {"fid_samples", [&](const json& v) { c.fid_samples = v.get<int>(); }},
      {"genome_limit", [&](const json& v) { c.genome_limit = v.get<int>(); }},
      {"species", [&](const json& v) { c.species = v.get<int>(); }},
      {"batch_size", [&](const json& v) { c.batch_size = v.get<int>(); }},
      {"batches_per_gen", [&](const json& v) { c.batches_per_gen = v.get<int>(); }},
      {"optimizer", [&](const json& v) { c.optimizer = v.get<std::string>(); }},
      {"learning_rate", [&](const json& v) { c.learning_rate = v.get<double>(); }},
      {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"dataset", [&](const json& v) { c.dataset = v.get<std::string>(); }},
      {"extractor", [&](const json& v) { c.extractor = v.get<std::string>(); }},
      {"strategy", [&](const json& v) { c.strategy = strategy_from_string(v.get<std::string>()); }},
      {"latent_dim", [&](const json& v) { c.latent_dim = v.get<int>(); }},
      {"base_channels", [&](const json& v) { c.base_channels = v.get<int>(); }},
      {"elitism", [&](const json& v) { c.elitism = v.get<bool>(); }},
      {"initial_threshold", [&](const json& v) { c.initial_threshold = v.get<double>(); }},
      {"threshold_step", [&](const json& v) { c.threshold_step = v.get<double>(); }},
      {"ring_modes", [&](const json& v) { c.ring.modes = v.get<int>(); }},
      {"ring_radius", [&](const json& v) { c.ring.radius = v.get<double>(); }},
      {"ring_sigma", [&](const json& v) { c.ring.sigma = v.get<double>(); }},
      {"ring_samples", [&](const json& v) { c.ring_samples = v.get<int>(); }},
      {"data_root", [&](const json& v) { c.data_root = v.get<std::string>(); }},
      {"keep_checkpoints", [&](const json& v) { c.keep_checkpoints = v.get<int>(); }},
      {"grid_rows", [&](const json& v) { c.grid_rows = v.get<int>(); }},
      {"grid_cols", [&](const json& v) { c.grid_cols = v.get<int>(); }},
  };
  std::vector<std::string> problems;
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      problems.push_back("unknown key \"" + key + "\"");
      continue;
    }
    try {
      it->second(value);
    } catch (const std::exception& e) {
      problems.push_back(key + ": " + e.what());
    }
  }
  for (auto& p : validate_config(c)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("generations");
  j.erase("keep_checkpoints");
  j.erase("grid_rows");
  j.erase("grid_cols");
  j.erase("data_root");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace coegan
