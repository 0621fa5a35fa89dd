#include "cvmdl/serialize.hpp"

#include <fstream>
#include <sstream>

namespace cvmdl {

using nlohmann::json;

Eigen::MatrixXd load_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(field, &pos));
        if (pos == 0) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (first && !numeric) { first = false; continue; }  // header line
    first = false;
    if (!numeric) throw ConfigError("non-numeric csv row in " + path + ": " + line);
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("ragged csv row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("empty csv file: " + path);
  Eigen::MatrixXd table(static_cast<long>(rows.size()),
                        static_cast<long>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
  return table;
}

namespace {

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing config key: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config key '") + key + "': " + e.what());
  }
}

}  // namespace

EnsembleHandle parse_ensemble(const json& j, const std::string& config_dir) {
  EnsembleHandle h;
  const auto kind = require<std::string>(j, "kind");
  if (kind == "gbm-extrema") h.kind = EnsembleKind::GbmExtrema;
  else if (kind == "linear-gaussian") h.kind = EnsembleKind::LinearGaussian;
  else if (kind == "pool") h.kind = EnsembleKind::Pool;
  else throw ConfigError("unknown ensemble kind: " + kind);

  for (const auto& m : require<json>(j, "models")) {
    ModelSpec spec;
    spec.id = require<int>(m, "id");
    spec.dim = require<int>(m, "dim");
    spec.cost = require<double>(m, "cost");
    h.specs.push_back(spec);
  }
  h.base_seed = j.value("base_seed", std::uint64_t{0});

  if (h.kind == EnsembleKind::GbmExtrema) {
    const json g = require<json>(j, "gbm");
    GbmParams p;
    p.mu = require<double>(g, "mu");
    p.sigma = require<double>(g, "sigma");
    p.s0 = require<double>(g, "s0");
    p.horizon = require<double>(g, "horizon");
    p.dt_levels = require<std::vector<double>>(g, "dt_levels");
    h.gbm = p;
  } else if (h.kind == EnsembleKind::LinearGaussian) {
    const json g = require<json>(j, "linear_gaussian");
    LinearGaussianParams p;
    p.mean = require<double>(g, "mean");
    p.stddev = require<double>(g, "stddev");
    p.coefs = require<std::vector<double>>(g, "coefs");
    p.noise_stds = require<std::vector<double>>(g, "noise_stds");
    h.linear_gaussian = p;
  } else {
    const json g = require<json>(j, "pool");
    PoolSource p;
    std::string csv = require<std::string>(g, "csv");
    if (!csv.empty() && csv.front() != '/' && !config_dir.empty())
      csv = config_dir + "/" + csv;
    p.table = load_csv_table(csv);
    p.replacement = g.value("replacement", false);
    h.pool = p;
  }

  try {
    validate(h);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid ensemble: ") + e.what());
  }
  return h;
}

WeightSpec parse_weight(const json& j) {
  WeightSpec w;
  const auto kind = j.value("kind", std::string("constant"));
  if (kind == "constant") w.kind = WeightKind::ConstantOne;
  else if (kind == "rectangle") w.kind = WeightKind::Rectangle;
  else throw ConfigError("unknown weight kind: " + kind);
  if (w.kind == WeightKind::Rectangle) {
    w.lower = require<std::vector<double>>(j, "lower");
    w.upper = require<std::vector<double>>(j, "upper");
    if (w.lower.size() != w.upper.size())
      throw ConfigError("weight box lower/upper length mismatch");
  }
  w.resolution = j.value("resolution", 128);
  if (w.resolution < 1) throw ConfigError("weight resolution must be positive");
  return w;
}

EvalGrid parse_grid(const json& j) {
  const auto lower = require<std::vector<double>>(j, "lower");
  const auto upper = require<std::vector<double>>(j, "upper");
  std::vector<int> res;
  if (j.at("resolution").is_array()) res = require<std::vector<int>>(j, "resolution");
  else res.assign(lower.size(), require<int>(j, "resolution"));
  try {
    return build_grid_uniform(lower, upper, res);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid grid: ") + e.what());
  }
}

json to_json(const CdfEstimate& est) {
  json j;
  j["breakpoints"] = est.grid.breakpoints;
  j["shape"] = est.values.shape;
  j["values"] = est.values.data;
  j["monotone"] = est.monotone;
  return j;
}

CdfEstimate cdf_from_json(const json& j) {
  CdfEstimate est;
  est.grid.breakpoints = require<std::vector<std::vector<double>>>(j, "breakpoints");
  est.values.shape = require<std::vector<int>>(j, "shape");
  est.values.data = require<std::vector<double>>(j, "values");
  est.monotone = j.value("monotone", false);
  std::size_t n = 1;
  for (int s : est.values.shape) n *= static_cast<std::size_t>(s);
  if (n != est.values.data.size() || est.values.shape != est.grid.shape())
    throw ConfigError("inconsistent cdf record");
  return est;
}

json to_json(const SubsetEvaluation& ev) {
  json j;
  j["subset"] = ev.subset;
  j["c_subset"] = ev.c_subset;
  j["k1_hat"] = ev.k1_hat;
  j["k2_hat"] = ev.k2_hat;
  j["gamma"] = ev.gamma;
  j["m_star"] = ev.m_star.m_star;
  j["m_star_unclamped"] = ev.m_star.unclamped;
  j["loss"] = ev.loss_at_selection;
  j["feasible"] = ev.feasible;
  return j;
}

json to_json(const IterationRecord& rec) {
  json j;
  j["m"] = rec.m;
  j["chosen"] = rec.chosen;
  j["growth_target"] = rec.growth_target;
  json table = json::array();
  for (const auto& ev : rec.table) table.push_back(to_json(ev));
  j["table"] = table;
  return j;
}

json to_json(const OracleStats& stats) {
  json j;
  json corr = json::array();
  for (long r = 0; r < stats.correlations.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < stats.correlations.cols(); ++c)
      row.push_back(stats.correlations(r, c));
    corr.push_back(row);
  }
  j["correlations"] = corr;
  j["rho_breakpoints"] = stats.rho_grid.breakpoints;
  json subsets = json::array();
  for (const auto& s : stats.subsets) {
    json e;
    e["subset"] = s.subset;
    e["k1_hat"] = s.k1_hat;
    e["k2_hat"] = s.k2_hat;
    e["gamma"] = s.gamma;
    e["m_star"] = s.m_star;
    e["rho"] = s.rho.data;
    subsets.push_back(e);
  }
  j["subsets"] = subsets;
  return j;
}

json to_json(const RiskReport& report) {
  json j;
  j["mean"] = report.mean;
  j["std"] = report.std;
  json cv = json::object(), qs = json::object();
  for (const auto& [a, v] : report.cvar) cv[std::to_string(a)] = v;
  for (const auto& [p, v] : report.quantiles) qs[std::to_string(p)] = v;
  j["cvar"] = cv;
  j["quantiles"] = qs;
  return j;
}

RiskReport risk_report_from_json(const json& j) {
  RiskReport report;
  report.mean = require<double>(j, "mean");
  report.std = require<double>(j, "std");
  const json cv = require<json>(j, "cvar");
  const json qs = require<json>(j, "quantiles");
  for (const auto& [k, v] : cv.items())
    report.cvar[std::stod(k)] = v.get<double>();
  for (const auto& [k, v] : qs.items())
    report.quantiles[std::stod(k)] = v.get<double>();
  return report;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid json in " + path + ": " + e.what());
  }
}

void write_trace_jsonl(const std::string& path,
                       const std::vector<IterationRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& rec : trace) out << to_json(rec).dump() << "\n";
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

std::string subset_label(const std::vector<int>& subset) {
  std::string s = "{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(subset[i]);
  }
  return s + "}";
}

}  // namespace cvmdl
