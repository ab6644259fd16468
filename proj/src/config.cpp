#include "ccftl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "ccftl/error.hpp"

namespace ccftl::config {

namespace {

const std::set<std::string> kTopKeys = {
    "seed",       "seeds",          "output_dir",   "lambda",           "lr",         "batch_size",
    "rounds",     "local_epochs",   "fine_tune_epochs", "label_fraction", "mode",     "key_bits",
    "scale_bits", "record_timing",  "fe_dims",      "dr_dims",          "dc_dims",    "utp_dims",
    "relation",   "sweep_kind",     "sweep_grid",   "sources",          "target"};

const std::set<std::string> kCityKeys = {"id",        "n_regions",   "poi_weights", "road_weights",
                                         "poi_volume_scale", "pop_scale", "noise_sigma", "label_skew",
                                         "cell_size", "seed"};

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  fail(ErrorKind::config, "config key '" + key + "': " + what);
}

template <typename T>
T as(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    bad(key, "wrong type");
  }
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& kv : map) {
    const auto key = as<std::string>(kv.first, where);
    if (!allowed.count(key)) fail(ErrorKind::config, "unknown config key '" + where + key + "'");
  }
}

double read_double(const YAML::Node& map, const std::string& key, const std::string& name, double lo, double hi,
                   bool lo_open, bool hi_open, double fallback) {
  if (!map[key]) return fallback;
  const double v = as<double>(map[key], name);
  const bool ok = std::isfinite(v) && (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  if (!ok) {
    std::ostringstream range;
    range << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
    bad(name, range.str());
  }
  return v;
}

std::int64_t read_int(const YAML::Node& map, const std::string& key, const std::string& name, std::int64_t lo,
                      std::int64_t hi, std::int64_t fallback) {
  if (!map[key]) return fallback;
  const auto v = as<std::int64_t>(map[key], name);
  if (v < lo || v > hi) bad(name, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "]");
  return v;
}

std::vector<double> read_doubles(const YAML::Node& node, const std::string& name) {
  if (!node.IsSequence()) bad(name, "expected a list");
  std::vector<double> out;
  for (const auto& v : node) out.push_back(as<double>(v, name));
  return out;
}

std::vector<std::size_t> read_dims(const YAML::Node& map, const std::string& key, std::vector<std::size_t> fallback) {
  if (!map[key]) return fallback;
  const auto& node = map[key];
  if (!node.IsSequence() || node.size() == 0) bad(key, "expected a non-empty list of layer widths");
  std::vector<std::size_t> out;
  for (const auto& v : node) {
    const auto w = as<std::int64_t>(v, key);
    if (w < 1 || w > 65536) bad(key, "layer width " + std::to_string(w) + " outside [1, 65536]");
    out.push_back(static_cast<std::size_t>(w));
  }
  return out;
}

std::vector<double> read_weights(const YAML::Node& map, const std::string& key, const std::string& name,
                                 std::vector<double> fallback) {
  if (!map[key]) return fallback;
  auto w = read_doubles(map[key], name);
  if (w.empty()) bad(name, "expected at least one weight");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad(name, "weights must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) bad(name, "weights must sum to 1");
  return w;
}

synth::CityGenConfig read_city(const YAML::Node& node, const std::string& where, synth::CityGenConfig c) {
  if (!node.IsMap()) bad(where, "expected a city block");
  check_keys(node, kCityKeys, where + ".");
  const auto name = [&](const char* k) { return where + "." + k; };
  if (node["id"]) {
    c.city_id = as<std::string>(node["id"], name("id"));
    if (c.city_id.empty() || c.city_id.find_first_of(",\n\r") != std::string::npos) {
      bad(name("id"), "must be non-empty and free of commas and newlines");
    }
  }
  c.n_regions = static_cast<std::size_t>(read_int(node, "n_regions", name("n_regions"), 1, 10'000'000,
                                                  static_cast<std::int64_t>(c.n_regions)));
  c.poi_category_weights = read_weights(node, "poi_weights", name("poi_weights"), c.poi_category_weights);
  c.road_category_weights = read_weights(node, "road_weights", name("road_weights"), c.road_category_weights);
  c.poi_volume_scale = read_double(node, "poi_volume_scale", name("poi_volume_scale"), 0.0, 1e9, true, false,
                                   c.poi_volume_scale);
  c.pop_scale = read_double(node, "pop_scale", name("pop_scale"), 0.0, 1e12, true, false, c.pop_scale);
  c.noise_sigma = read_double(node, "noise_sigma", name("noise_sigma"), 0.0, 10.0, false, false, c.noise_sigma);
  c.label_skew = read_double(node, "label_skew", name("label_skew"), 1.0, 1e6, true, false, c.label_skew);
  c.cell_size = read_double(node, "cell_size", name("cell_size"), 0.0, 1e7, true, false, c.cell_size);
  if (node["seed"]) c.seed = as<std::uint64_t>(node["seed"], name("seed"));
  return c;
}

ExperimentConfig from_yaml(const YAML::Node& root) {
  ExperimentConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) fail(ErrorKind::config, "config must be a mapping of keys to values");
  check_keys(root, kTopKeys, "");

  auto& s = cfg.settings;
  if (root["seed"]) cfg.seed = as<std::uint64_t>(root["seed"], "seed");
  if (root["seeds"]) {
    if (!root["seeds"].IsSequence() || root["seeds"].size() == 0) bad("seeds", "expected a non-empty list");
    for (const auto& v : root["seeds"]) cfg.seeds.push_back(as<std::uint64_t>(v, "seeds"));
  }
  if (root["output_dir"]) cfg.output_dir = as<std::string>(root["output_dir"], "output_dir");
  s.lambda = read_double(root, "lambda", "lambda", 0.0, 1.0, false, false, s.lambda);
  s.lr = read_double(root, "lr", "lr", 0.0, 10.0, true, false, s.lr);
  s.batch_size = static_cast<std::size_t>(read_int(root, "batch_size", "batch_size", 1, 1'000'000,
                                                   static_cast<std::int64_t>(s.batch_size)));
  s.rounds = static_cast<std::size_t>(read_int(root, "rounds", "rounds", 1, 1'000'000,
                                               static_cast<std::int64_t>(s.rounds)));
  s.local_epochs = static_cast<std::size_t>(read_int(root, "local_epochs", "local_epochs", 1, 100'000,
                                                     static_cast<std::int64_t>(s.local_epochs)));
  s.fine_tune_epochs = static_cast<std::size_t>(read_int(root, "fine_tune_epochs", "fine_tune_epochs", 0, 1'000'000,
                                                         static_cast<std::int64_t>(s.fine_tune_epochs)));
  s.label_fraction = read_double(root, "label_fraction", "label_fraction", 0.0, 1.0, true, true, s.label_fraction);
  if (root["mode"]) {
    try {
      s.mode = fed::parse_mode(as<std::string>(root["mode"], "mode"));
    } catch (const Error& e) {
      bad("mode", e.what());
    }
  }
  s.key_bits = static_cast<unsigned>(read_int(root, "key_bits", "key_bits", fed::kMinKeyBits, 16384, s.key_bits));
  if (s.key_bits % 2 != 0) bad("key_bits", "must be even");
  s.scale_bits = static_cast<int>(read_int(root, "scale_bits", "scale_bits", 1, 30, s.scale_bits));
  if (root["record_timing"]) s.record_timing = as<bool>(root["record_timing"], "record_timing");
  s.dims.feature_extractor = read_dims(root, "fe_dims", s.dims.feature_extractor);
  s.dims.data_regressor = read_dims(root, "dr_dims", s.dims.data_regressor);
  s.dims.domain_classifier = read_dims(root, "dc_dims", s.dims.domain_classifier);
  s.dims.task_predictor = read_dims(root, "utp_dims", s.dims.task_predictor);

  if (root["relation"]) {
    const auto beta = read_doubles(root["relation"], "relation");
    if (beta.size() != cfg.scenario.relation.beta.size()) bad("relation", "expected 5 coefficients");
    std::copy(beta.begin(), beta.end(), cfg.scenario.relation.beta.begin());
  }
  if (root["sweep_kind"]) {
    try {
      cfg.sweep_kind = transfer::parse_sweep_kind(as<std::string>(root["sweep_kind"], "sweep_kind"));
    } catch (const Error& e) {
      bad("sweep_kind", e.what());
    }
  }
  if (root["sweep_grid"]) {
    cfg.sweep_grid = read_doubles(root["sweep_grid"], "sweep_grid");
    try {
      transfer::validate_grid(cfg.sweep_kind, cfg.sweep_grid);
    } catch (const Error& e) {
      bad("sweep_grid", e.what());
    }
  }

  if (root["sources"]) {
    const auto& list = root["sources"];
    if (!list.IsSequence() || list.size() == 0) bad("sources", "expected a non-empty list of city blocks");
    const auto defaults = cfg.scenario.sources;
    cfg.scenario.sources.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      synth::CityGenConfig base = i < defaults.size() ? defaults[i] : synth::CityGenConfig{};
      if (i >= defaults.size()) {
        base.city_id = "src_" + std::to_string(i + 1);
        base.seed = 100 + i;
      }
      cfg.scenario.sources.push_back(read_city(list[i], "sources[" + std::to_string(i) + "]", base));
    }
  }
  if (root["target"]) cfg.scenario.target = read_city(root["target"], "target", cfg.scenario.target);

  std::set<std::string> ids;
  for (const auto& c : cfg.scenario.sources) ids.insert(c.city_id);
  ids.insert(cfg.scenario.target.city_id);
  if (ids.size() != cfg.scenario.sources.size() + 1) bad("sources", "city ids must be distinct");
  const auto& t = cfg.scenario.target;
  for (const auto& c : cfg.scenario.sources) {
    if (c.poi_category_weights.size() != t.poi_category_weights.size() ||
        c.road_category_weights.size() != t.road_category_weights.size()) {
      bad("sources", "every city needs the same number of POI and road categories");
    }
  }
  return cfg;
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::effective_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

std::vector<double> ExperimentConfig::effective_grid() const {
  return sweep_grid.empty() ? transfer::default_grid(sweep_kind) : sweep_grid;
}

ExperimentConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  return from_yaml(root);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

}  // namespace ccftl::config
