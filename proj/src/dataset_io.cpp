#include "ccftl/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ccftl/error.hpp"

namespace ccftl::io {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'C', 'F', 'T', 'L', 'C', 'K', '1'};

std::string version_line(const std::string& kind) {
  return "# ccftl-" + kind + " v" + std::to_string(kCsvVersion);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path, const std::string& kind) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::missing_artifact, "missing file " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, path.string() + ": empty file");
  const std::string prefix = "# ccftl-" + kind + " v";
  require(line.rfind(prefix, 0) == 0, ErrorKind::io, path.string() + ": not a ccftl " + kind + " file");
  require(line == version_line(kind), ErrorKind::io,
          path.string() + ": unsupported version '" + line.substr(prefix.size()) + "'");
  CsvTable t;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, path.string() + ": missing header");
  t.header = split_fields(line);
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    require(fields.size() == t.header.size(), ErrorKind::io,
            path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                " fields, got " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

double parse_double(const std::string& s, const fs::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::io,
          path.string() + ": malformed number '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, const fs::path& path) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::io,
          path.string() + ": malformed integer '" + s + "'");
  return v;
}

std::size_t column(const CsvTable& t, const std::string& name, const fs::path& path) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return i;
  }
  fail(ErrorKind::io, path.string() + ": missing column '" + name + "'");
}

std::size_t count_prefixed(const std::vector<std::string>& header, const std::string& prefix) {
  std::size_t n = 0;
  while (std::find(header.begin(), header.end(), prefix + std::to_string(n + 1)) != header.end()) ++n;
  return n;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), ErrorKind::io, path.string() + ": truncated checkpoint");
  return v;
}

void write_checkpoint(const fs::path& path, std::uint32_t kind, double lambda, const std::vector<const nn::Mlp*>& stacks,
                      const nn::ParamVector& params) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kind);
  put<double>(out, lambda);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(stacks.size()));
  for (const auto* mlp : stacks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mlp->layers.size()));
    for (const auto& l : mlp->layers) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.activation));
    }
  }
  put<std::uint64_t>(out, params.size());
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

struct RawCheckpoint {
  std::uint32_t kind = 0;
  double lambda = 0.0;
  std::vector<nn::Mlp> stacks;  // shapes only, zero weights
  std::vector<double> params;
};

RawCheckpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::missing_artifact, "missing checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorKind::io,
          path.string() + ": not a ccftl checkpoint");
  RawCheckpoint ck;
  ck.kind = get<std::uint32_t>(in, path);
  ck.lambda = get<double>(in, path);
  const auto n_stacks = get<std::uint32_t>(in, path);
  require(n_stacks <= 16, ErrorKind::io, path.string() + ": implausible stack count");
  std::size_t expected = 0;
  for (std::uint32_t s = 0; s < n_stacks; ++s) {
    nn::Mlp mlp;
    const auto n_layers = get<std::uint32_t>(in, path);
    require(n_layers >= 1 && n_layers <= 64, ErrorKind::io, path.string() + ": implausible layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      const auto in_dim = get<std::uint32_t>(in, path);
      const auto out_dim = get<std::uint32_t>(in, path);
      const auto act = get<std::uint32_t>(in, path);
      require(in_dim > 0 && out_dim > 0 && act <= static_cast<std::uint32_t>(nn::Activation::identity),
              ErrorKind::io, path.string() + ": malformed layer header");
      require(i == 0 || mlp.layers.back().out_dim() == in_dim, ErrorKind::io,
              path.string() + ": layer dimensions do not chain");
      nn::DenseLayer l;
      l.weights = nn::Tensor2D::Zero(out_dim, in_dim);
      l.bias = nn::Vector::Zero(out_dim);
      l.activation = static_cast<nn::Activation>(act);
      mlp.layers.push_back(std::move(l));
    }
    expected += mlp.param_count();
    ck.stacks.push_back(std::move(mlp));
  }
  const auto n_params = get<std::uint64_t>(in, path);
  require(n_params == expected, ErrorKind::io, path.string() + ": parameter count does not match header");
  ck.params.resize(n_params);
  in.read(reinterpret_cast<char*>(ck.params.data()), static_cast<std::streamsize>(n_params * sizeof(double)));
  require(in.good(), ErrorKind::io, path.string() + ": truncated parameters");
  return ck;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), ErrorKind::io, "format_double: conversion failed");
  return {buf, ptr};
}

void write_city_csv(const fs::path& path, const synth::CityDataset& city) {
  require(city.city_id.find(',') == std::string::npos, ErrorKind::invalid_argument, "city id may not contain ','");
  require(city.regions.size() == city.size() && city.labels.size() == city.size(), ErrorKind::invalid_argument,
          "write_city_csv: inconsistent city tables");
  auto out = open_out(path);
  const std::size_t n_poi = city.raw.empty() ? features::kDefaultPoiCategories : city.raw.front().poi_counts.size();
  const std::size_t n_road = city.raw.empty() ? features::kDefaultRoadCategories : city.raw.front().road_counts.size();
  out << version_line("city") << '\n' << "city_id,row,col";
  for (std::size_t k = 1; k <= n_poi; ++k) out << ",poi_c" << k;
  for (std::size_t k = 1; k <= n_road; ++k) out << ",road_c" << k;
  out << ",wp,rp,cp,label\n";
  for (std::size_t i = 0; i < city.size(); ++i) {
    const auto& r = city.raw[i];
    require(r.poi_counts.size() == n_poi && r.road_counts.size() == n_road, ErrorKind::invalid_argument,
            "write_city_csv: category counts vary between regions");
    out << city.city_id << ',' << city.regions[i].row << ',' << city.regions[i].col;
    for (double c : r.poi_counts) out << ',' << format_double(c);
    for (double c : r.road_counts) out << ',' << format_double(c);
    out << ',' << format_double(r.working_pop) << ',' << format_double(r.residential_pop) << ',';
    if (r.consumption_pop) out << format_double(*r.consumption_pop);
    out << ',';
    if (city.labels[i]) out << *city.labels[i];
    out << '\n';
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

synth::CityDataset read_city_csv(const fs::path& path) {
  const auto t = read_csv(path, "city");
  const std::size_t n_poi = count_prefixed(t.header, "poi_c");
  const std::size_t n_road = count_prefixed(t.header, "road_c");
  const std::size_t c_id = column(t, "city_id", path), c_row = column(t, "row", path), c_col = column(t, "col", path);
  const std::size_t c_wp = column(t, "wp", path), c_rp = column(t, "rp", path), c_cp = column(t, "cp", path);
  const std::size_t c_label = column(t, "label", path);
  require(n_poi > 0 && t.header.size() == 7 + n_poi + n_road, ErrorKind::io, path.string() + ": unexpected columns");

  synth::CityDataset city;
  for (const auto& f : t.rows) {
    if (city.city_id.empty()) city.city_id = f[c_id];
    require(f[c_id] == city.city_id, ErrorKind::io, path.string() + ": mixed city ids");
    city.regions.push_back({f[c_id], parse_int<std::size_t>(f[c_row], path), parse_int<std::size_t>(f[c_col], path)});
    features::RawRegionData r;
    for (std::size_t k = 0; k < n_poi; ++k) {
      r.poi_counts.push_back(parse_double(f[column(t, "poi_c" + std::to_string(k + 1), path)], path));
    }
    for (std::size_t k = 0; k < n_road; ++k) {
      r.road_counts.push_back(parse_double(f[column(t, "road_c" + std::to_string(k + 1), path)], path));
    }
    r.working_pop = parse_double(f[c_wp], path);
    r.residential_pop = parse_double(f[c_rp], path);
    if (!f[c_cp].empty()) r.consumption_pop = parse_double(f[c_cp], path);
    city.raw.push_back(std::move(r));
    if (f[c_label].empty()) {
      city.labels.emplace_back();
    } else {
      const int l = parse_int<int>(f[c_label], path);
      require(l >= 1 && l <= synth::kNumLevels, ErrorKind::io, path.string() + ": label outside 1..5");
      city.labels.emplace_back(l);
    }
  }
  for (const auto& r : city.raw) {
    city.ground_truth_cp.push_back(r.consumption_pop.value_or(0.0));
  }
  if (!city.has_consumption()) city.ground_truth_cp.clear();
  return city;
}

void write_truth_csv(const fs::path& path, const synth::CityDataset& city) {
  require(city.ground_truth_cp.size() == city.size(), ErrorKind::invalid_argument,
          "write_truth_csv: city has no ground truth");
  auto out = open_out(path);
  out << version_line("truth") << '\n' << "city_id,row,col,cp_true\n";
  for (std::size_t i = 0; i < city.size(); ++i) {
    out << city.city_id << ',' << city.regions[i].row << ',' << city.regions[i].col << ','
        << format_double(city.ground_truth_cp[i]) << '\n';
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

void read_truth_csv(const fs::path& path, synth::CityDataset& city) {
  const auto t = read_csv(path, "truth");
  require(t.rows.size() == city.size(), ErrorKind::io, path.string() + ": row count differs from city table");
  const std::size_t c_row = column(t, "row", path), c_col = column(t, "col", path), c_cp = column(t, "cp_true", path);
  city.ground_truth_cp.clear();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& f = t.rows[i];
    require(parse_int<std::size_t>(f[c_row], path) == city.regions[i].row &&
                parse_int<std::size_t>(f[c_col], path) == city.regions[i].col,
            ErrorKind::io, path.string() + ": region order differs from city table");
    city.ground_truth_cp.push_back(parse_double(f[c_cp], path));
  }
}

void save_checkpoint(const fs::path& path, const models::DarklModel& m) {
  write_checkpoint(path, 0, m.lambda, {&m.feature_extractor, &m.data_regressor, &m.domain_classifier},
                   models::flatten(m));
}

void save_checkpoint(const fs::path& path, const models::UtpModel& m) {
  write_checkpoint(path, 1, 0.0, {&m.net}, models::flatten(m));
}

models::DarklModel load_darkl_checkpoint(const fs::path& path) {
  auto ck = read_checkpoint(path);
  require(ck.kind == 0 && ck.stacks.size() == 3, ErrorKind::io, path.string() + ": not a DARKL checkpoint");
  models::DarklModel templ{ck.stacks[0], ck.stacks[1], ck.stacks[2], ck.lambda};
  require(templ.feature_extractor.output_dim() == templ.data_regressor.input_dim() &&
              templ.feature_extractor.output_dim() == templ.domain_classifier.input_dim(),
          ErrorKind::io, path.string() + ": stacks do not connect");
  return models::unflatten(templ, ck.params);
}

models::UtpModel load_utp_checkpoint(const fs::path& path) {
  auto ck = read_checkpoint(path);
  require(ck.kind == 1 && ck.stacks.size() == 1, ErrorKind::io, path.string() + ": not a task-predictor checkpoint");
  return models::unflatten(models::UtpModel{ck.stacks[0]}, ck.params);
}

void write_round_log(const fs::path& path, const std::vector<fed::RoundRecord>& log) {
  auto out = open_out(path);
  out << version_line("roundlog") << '\n' << "round,city_id,l1,l2,wall_time_s\n";
  for (const auto& r : log) {
    for (const auto& c : r.clients) {
      out << r.round << ',' << c.city_id << ',' << format_double(c.l1) << ',' << format_double(c.l2) << ',';
      if (r.wall_time_s > 0.0) out << format_double(r.wall_time_s);
      out << '\n';
    }
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

namespace {

void write_report_fields(std::ostream& out, const transfer::MetricsReport& r, bool with_timing) {
  out << ',' << format_double(r.mae) << ',' << format_double(r.mse) << ',' << format_double(r.precision) << ','
      << format_double(r.recall) << ',' << format_double(r.f1) << ',';
  if (with_timing) out << format_double(r.epoch_time_s);
  out << '\n';
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows, bool with_timing) {
  auto out = open_out(path);
  out << version_line("metrics") << '\n' << "variant,scenario,seed,mae,mse,precision,recall,f1,epoch_time_s\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.scenario << ',' << r.seed;
    write_report_fields(out, r.report, with_timing);
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  const auto t = read_csv(path, "metrics");
  std::vector<MetricsRow> rows;
  for (const auto& f : t.rows) {
    MetricsRow r;
    r.variant = f[column(t, "variant", path)];
    r.scenario = f[column(t, "scenario", path)];
    r.seed = parse_int<std::uint64_t>(f[column(t, "seed", path)], path);
    r.report.mae = parse_double(f[column(t, "mae", path)], path);
    r.report.mse = parse_double(f[column(t, "mse", path)], path);
    r.report.precision = parse_double(f[column(t, "precision", path)], path);
    r.report.recall = parse_double(f[column(t, "recall", path)], path);
    r.report.f1 = parse_double(f[column(t, "f1", path)], path);
    const auto& et = f[column(t, "epoch_time_s", path)];
    r.report.epoch_time_s = et.empty() ? 0.0 : parse_double(et, path);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_csv(const fs::path& path, const std::vector<transfer::SweepRow>& rows, bool with_timing) {
  auto out = open_out(path);
  out << version_line("sweep") << '\n' << "kind,value,seed,mae,mse,precision,recall,f1,epoch_time_s\n";
  for (const auto& r : rows) {
    out << transfer::to_string(r.kind) << ',' << format_double(r.value) << ',' << r.seed;
    write_report_fields(out, r.report, with_timing);
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

void write_predictions_csv(const fs::path& path, const std::vector<PredictionRow>& rows) {
  auto out = open_out(path);
  out << version_line("predictions") << '\n' << "city_id,row,col,predicted_level,cp_hat\n";
  for (const auto& r : rows) {
    out << r.city_id << ',' << r.row << ',' << r.col << ',' << r.predicted_level << ',' << format_double(r.cp_hat)
        << '\n';
  }
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

std::vector<PredictionRow> read_predictions_csv(const fs::path& path) {
  const auto t = read_csv(path, "predictions");
  std::vector<PredictionRow> rows;
  for (const auto& f : t.rows) {
    PredictionRow r;
    r.city_id = f[column(t, "city_id", path)];
    r.row = parse_int<std::size_t>(f[column(t, "row", path)], path);
    r.col = parse_int<std::size_t>(f[column(t, "col", path)], path);
    r.predicted_level = parse_int<int>(f[column(t, "predicted_level", path)], path);
    r.cp_hat = parse_double(f[column(t, "cp_hat", path)], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_split_csv(const fs::path& path, const transfer::TargetSplit& split, std::size_t n) {
  std::vector<char> labeled(n, 0);
  for (std::size_t i : split.labeled) labeled.at(i) = 1;
  auto out = open_out(path);
  out << version_line("split") << '\n' << "region_index,labeled\n";
  for (std::size_t i = 0; i < n; ++i) out << i << ',' << static_cast<int>(labeled[i]) << '\n';
  require(out.good(), ErrorKind::io, "failed writing " + path.string());
}

transfer::TargetSplit read_split_csv(const fs::path& path) {
  const auto t = read_csv(path, "split");
  transfer::TargetSplit s;
  const std::size_t c_idx = column(t, "region_index", path), c_lab = column(t, "labeled", path);
  for (const auto& f : t.rows) {
    const auto idx = parse_int<std::size_t>(f[c_idx], path);
    (f[c_lab] == "1" ? s.labeled : s.unlabeled).push_back(idx);
  }
  const std::size_t n = s.labeled.size() + s.unlabeled.size();
  s.label_fraction = n ? static_cast<double>(s.labeled.size()) / static_cast<double>(n) : 0.0;
  return s;
}

}  // namespace ccftl::io
