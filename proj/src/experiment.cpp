#include "cvmdl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cvmdl/metrics.hpp"

namespace cvmdl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Ecdf: return "ecdf";
    case EstimatorKind::Cvmdl: return "cvmdl";
    case EstimatorKind::CvmdlSorted: return "cvmdl-sorted";
    case EstimatorKind::CvmdlStar: return "cvmdl-star";
    case EstimatorKind::CvmdlStarSorted: return "cvmdl-star-sorted";
  }
  throw std::logic_error("unknown estimator kind");
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "ecdf") return EstimatorKind::Ecdf;
  if (name == "cvmdl") return EstimatorKind::Cvmdl;
  if (name == "cvmdl-sorted") return EstimatorKind::CvmdlSorted;
  if (name == "cvmdl-star") return EstimatorKind::CvmdlStar;
  if (name == "cvmdl-star-sorted") return EstimatorKind::CvmdlStarSorted;
  throw ConfigError("unknown estimator: " + name);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const json j = read_json_file(path);
  const std::string dir = fs::path(path).parent_path().string();

  ExperimentConfig cfg;
  if (!j.contains("ensemble")) throw ConfigError("missing config key: ensemble");
  cfg.ensemble = parse_ensemble(j.at("ensemble"), dir);

  cfg.budgets = j.value("budgets", std::vector<double>{});
  for (std::size_t i = 0; i < cfg.budgets.size(); ++i) {
    if (cfg.budgets[i] <= 0.0) throw ConfigError("budgets must be positive");
    if (i > 0 && cfg.budgets[i] <= cfg.budgets[i - 1])
      throw ConfigError("budgets must be strictly ascending");
  }
  cfg.trials = j.value("trials", 1);
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");

  for (const auto& name : j.value("estimators", std::vector<std::string>{"ecdf", "cvmdl-sorted"}))
    cfg.estimators.push_back(estimator_from_name(name));

  if (j.contains("weight")) cfg.weight = parse_weight(j.at("weight"));
  if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"));
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    if (o.contains("file")) cfg.oracle_file = o.at("file").get<std::string>();
    cfg.oracle_samples = o.value("samples", cfg.oracle_samples);
    if (cfg.oracle_samples < 1) throw ConfigError("oracle samples must be >= 1");
    if (cfg.oracle_file && !cfg.oracle_file->empty() &&
        cfg.oracle_file->front() != '/' && !dir.empty())
      cfg.oracle_file = dir + "/" + *cfg.oracle_file;
  }
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.tau = j.value("tau", 0.05);
  if (!(cfg.tau > 0.0) || !(cfg.tau < 0.5)) throw ConfigError("tau must lie in (0, 0.5)");
  cfg.out_dir = j.value("out", std::string("runs"));
  return cfg;
}

namespace {

EnsembleHandle trial_handle(const ExperimentConfig& config,
                            std::size_t budget_index, int trial,
                            std::uint64_t pass = 0) {
  EnsembleHandle h = config.ensemble;
  // distinct pool shuffles (and path seeds) per trial and pass
  h.base_seed = rng::combine(rng::combine(config.seed, h.base_seed),
                             rng::combine(budget_index, static_cast<std::uint64_t>(trial)));
  h.base_seed = rng::combine(h.base_seed, 0x50 + pass);
  return h;
}

std::optional<EvalGrid> effective_grid(const ExperimentConfig& config) {
  return config.grid;
}

bool wants(const ExperimentConfig& config, EstimatorKind kind) {
  return std::find(config.estimators.begin(), config.estimators.end(), kind) !=
         config.estimators.end();
}

}  // namespace

CdfEstimate compute_oracle(const ExperimentConfig& config) {
  if (config.oracle_file) return cdf_from_json(read_json_file(*config.oracle_file));

  EnsembleHandle h = config.ensemble;
  h.base_seed = rng::combine(config.seed, h.base_seed);
  Sampler sampler(h);
  Eigen::MatrixXd y = sampler.sample_highfid(
      static_cast<int>(config.oracle_samples),
      rng::derive(config.seed, rng::Purpose::Oracle));

  if (config.grid) return ecdf_on_grid(y, *config.grid);
  if (y.cols() == 1) {
    std::vector<double> vals(static_cast<std::size_t>(y.rows()));
    for (long r = 0; r < y.rows(); ++r) vals[static_cast<std::size_t>(r)] = y(r, 0);
    return ecdf_on_grid(y, build_grid_from_samples(std::move(vals)));
  }
  std::vector<double> lo, hi;
  if (config.weight.kind == WeightKind::Rectangle) {
    lo = config.weight.lower;
    hi = config.weight.upper;
  } else {
    for (long c = 0; c < y.cols(); ++c) {
      lo.push_back(y.col(c).minCoeff());
      hi.push_back(y.col(c).maxCoeff());
    }
  }
  const std::vector<int> res(static_cast<std::size_t>(y.cols()),
                             std::max(2, config.weight.resolution));
  return ecdf_on_grid(y, build_grid_uniform(lo, hi, res));
}

std::vector<TrialOutcome> run_trial(const ExperimentConfig& config,
                                    const CdfEstimate& oracle, double budget,
                                    std::size_t budget_index, int trial) {
  std::vector<TrialOutcome> out;
  auto record = [&](EstimatorKind kind, const CdfEstimate& est,
                    const CvmdlOutput* run) {
    TrialOutcome o;
    o.estimator = kind;
    o.budget = budget;
    o.trial = trial;
    o.error = weighted_l2_error(est, oracle, config.weight);
    if (run) {
      o.subset = run->subset;
      o.m = run->m;
      o.n_exploit = run->n_exploit;
      o.spent = run->ledger.spent();
    }
    out.push_back(std::move(o));
  };

  if (wants(config, EstimatorKind::Ecdf)) {
    Sampler sampler(trial_handle(config, budget_index, trial));
    const CdfEstimate est = run_ecdf_baseline(
        sampler, budget, effective_grid(config),
        rng::derive(config.seed, rng::Purpose::Baseline,
                    static_cast<std::uint64_t>(trial), budget_index),
        config.weight.resolution);
    record(EstimatorKind::Ecdf, est, nullptr);
    out.back().spent = std::floor(budget / sampler.descriptor().costs[0]) *
                       sampler.descriptor().costs[0];
  }

  const bool plain = wants(config, EstimatorKind::Cvmdl) ||
                     wants(config, EstimatorKind::CvmdlSorted);
  const bool star = wants(config, EstimatorKind::CvmdlStar) ||
                    wants(config, EstimatorKind::CvmdlStarSorted);

  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 0 && !plain) continue;
    if (pass == 1 && !star) continue;
    CvmdlOptions options;
    options.weight = config.weight;
    options.grid = effective_grid(config);
    options.tau = config.tau;
    options.alpha_mode = pass == 0 ? AlphaMode::Plain : AlphaMode::TailExtended;
    options.sort = true;

    Sampler sampler(trial_handle(config, budget_index, trial,
                                 static_cast<std::uint64_t>(pass)));
    CvmdlOutput run = run_cvmdl(
        sampler, budget, options,
        rng::derive(config.seed, rng::Purpose::Exploration,
                    static_cast<std::uint64_t>(trial), budget_index)
            .child(static_cast<std::uint64_t>(pass)));
    if (pass == 0) {
      if (wants(config, EstimatorKind::Cvmdl))
        record(EstimatorKind::Cvmdl, run.clipped, &run);
      if (wants(config, EstimatorKind::CvmdlSorted))
        record(EstimatorKind::CvmdlSorted, run.sorted, &run);
    } else {
      if (wants(config, EstimatorKind::CvmdlStar))
        record(EstimatorKind::CvmdlStar, run.clipped, &run);
      if (wants(config, EstimatorKind::CvmdlStarSorted))
        record(EstimatorKind::CvmdlStarSorted, run.sorted, &run);
    }
  }
  return out;
}

std::vector<TrialOutcome> run_sweep(const ExperimentConfig& config,
                                    const CdfEstimate& oracle, int workers) {
  if (workers < 1) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;

  std::vector<TrialOutcome> all;
  for (std::size_t b = 0; b < config.budgets.size(); ++b) {
    std::vector<std::vector<TrialOutcome>> per_trial(
        static_cast<std::size_t>(config.trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.trials));

    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int t = next.fetch_add(1);
        if (t >= config.trials) return;
        try {
          per_trial[static_cast<std::size_t>(t)] =
              run_trial(config, oracle, config.budgets[b], b, t);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, config.trials);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (auto& v : per_trial)
      all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

namespace {

double interp_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto j = static_cast<std::size_t>(std::floor(pos));
  if (j + 1 >= sorted.size()) return sorted.back();
  const double w = pos - static_cast<double>(j);
  return sorted[j] * (1.0 - w) + sorted[j + 1] * w;
}

}  // namespace

std::vector<SweepCell> aggregate_sweep(const std::vector<TrialOutcome>& outcomes) {
  std::map<std::pair<double, std::string>, std::vector<const TrialOutcome*>> groups;
  for (const auto& o : outcomes)
    groups[{o.budget, estimator_name(o.estimator)}].push_back(&o);

  std::vector<SweepCell> cells;
  for (const auto& [key, items] : groups) {
    SweepCell cell;
    cell.budget = key.first;
    cell.estimator = estimator_from_name(key.second);
    std::vector<double> errors;
    double sum_m = 0.0, sum_n = 0.0;
    for (const auto* o : items) {
      errors.push_back(o->error);
      sum_m += static_cast<double>(o->m);
      sum_n += static_cast<double>(o->n_exploit);
      if (!o->subset.empty()) cell.selection_freq[subset_label(o->subset)] += 1.0;
    }
    std::sort(errors.begin(), errors.end());
    const auto n = static_cast<double>(errors.size());
    double sum = 0.0;
    for (double e : errors) sum += e;
    cell.mean_error = sum / n;
    cell.q05 = interp_quantile(errors, 0.05);
    cell.q50 = interp_quantile(errors, 0.50);
    cell.q95 = interp_quantile(errors, 0.95);
    cell.mean_m = sum_m / n;
    cell.mean_n_exploit = sum_n / n;
    for (auto& [label, count] : cell.selection_freq) count /= n;
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "estimator,budget,mean_error,q05,q50,q95,mean_m,mean_n_exploit\n";
  out.precision(17);
  for (const auto& c : cells)
    out << estimator_name(c.estimator) << ',' << c.budget << ',' << c.mean_error
        << ',' << c.q05 << ',' << c.q50 << ',' << c.q95 << ',' << c.mean_m << ','
        << c.mean_n_exploit << "\n";
}

std::vector<SweepCell> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "estimator,budget,mean_error,q05,q50,q95,mean_m,mean_n_exploit")
    throw ConfigError("unexpected sweep csv header in " + path);
  std::vector<SweepCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    SweepCell c;
    std::getline(ss, field, ',');
    c.estimator = estimator_from_name(field);
    auto next = [&] {
      std::getline(ss, field, ',');
      return std::stod(field);
    };
    c.budget = next();
    c.mean_error = next();
    c.q05 = next();
    c.q50 = next();
    c.q95 = next();
    c.mean_m = next();
    c.mean_n_exploit = next();
    cells.push_back(std::move(c));
  }
  return cells;
}

void write_selection_csv(const std::string& path,
                         const std::vector<SweepCell>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "estimator,budget,subset,frequency\n";
  out.precision(17);
  for (const auto& c : cells)
    for (const auto& [label, freq] : c.selection_freq)
      out << estimator_name(c.estimator) << ',' << c.budget << ",\"" << label
          << "\"," << freq << "\n";
}

int cmd_run(const ExperimentConfig& config, double budget,
            std::uint64_t trial_seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const CdfEstimate oracle = compute_oracle(config);

  ExperimentConfig cfg = config;
  cfg.seed = rng::combine(config.seed, trial_seed);

  std::ofstream err(fs::path(out_dir) / "error.csv");
  err << "estimator,error\n";
  err.precision(17);

  auto write_estimate = [&](EstimatorKind kind, const CdfEstimate& est,
                            const CvmdlOutput* run) {
    const std::string name = estimator_name(kind);
    err << name << ',' << weighted_l2_error(est, oracle, cfg.weight) << "\n";
    json j = to_json(est);
    if (run) {
      j["subset"] = run->subset;
      j["m"] = run->m;
      j["n_exploit"] = run->n_exploit;
      j["spent"] = run->ledger.spent();
    }
    write_json_file((fs::path(out_dir) / (name + ".json")).string(), j);
    if (est.grid.dims() == 1) {
      CdfEstimate monotone = est.monotone ? est : clip_unit(alternating_sort(est));
      write_json_file((fs::path(out_dir) / (name + ".risk.json")).string(),
                      to_json(risk_report(make_cdf1d(monotone), {0.9, 0.95, 0.99},
                                          {0.05, 0.25, 0.5, 0.75, 0.95})));
    }
  };

  if (wants(cfg, EstimatorKind::Ecdf)) {
    Sampler sampler(trial_handle(cfg, 0, 0));
    const CdfEstimate est = run_ecdf_baseline(
        sampler, budget, effective_grid(cfg),
        rng::derive(cfg.seed, rng::Purpose::Baseline, 0, 0), cfg.weight.resolution);
    write_estimate(EstimatorKind::Ecdf, est, nullptr);
  }
  for (int pass = 0; pass < 2; ++pass) {
    const bool plain_pass = pass == 0;
    const bool wanted = plain_pass
        ? wants(cfg, EstimatorKind::Cvmdl) || wants(cfg, EstimatorKind::CvmdlSorted)
        : wants(cfg, EstimatorKind::CvmdlStar) || wants(cfg, EstimatorKind::CvmdlStarSorted);
    if (!wanted) continue;
    CvmdlOptions options;
    options.weight = cfg.weight;
    options.grid = effective_grid(cfg);
    options.tau = cfg.tau;
    options.alpha_mode = plain_pass ? AlphaMode::Plain : AlphaMode::TailExtended;
    Sampler sampler(trial_handle(cfg, 0, 0, static_cast<std::uint64_t>(pass)));
    CvmdlOutput run = run_cvmdl(
        sampler, budget, options,
        rng::derive(cfg.seed, rng::Purpose::Exploration, 0, 0)
            .child(static_cast<std::uint64_t>(pass)));
    const std::string trace_name = plain_pass ? "cvmdl.trace.jsonl" : "cvmdl-star.trace.jsonl";
    write_trace_jsonl((fs::path(out_dir) / trace_name).string(), run.trace);
    if (plain_pass) {
      if (wants(cfg, EstimatorKind::Cvmdl))
        write_estimate(EstimatorKind::Cvmdl, run.clipped, &run);
      if (wants(cfg, EstimatorKind::CvmdlSorted))
        write_estimate(EstimatorKind::CvmdlSorted, run.sorted, &run);
    } else {
      if (wants(cfg, EstimatorKind::CvmdlStar))
        write_estimate(EstimatorKind::CvmdlStar, run.clipped, &run);
      if (wants(cfg, EstimatorKind::CvmdlStarSorted))
        write_estimate(EstimatorKind::CvmdlStarSorted, run.sorted, &run);
    }
  }
  write_json_file((fs::path(out_dir) / "oracle.json").string(), to_json(oracle));
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, int workers,
              const std::string& out_dir) {
  if (config.budgets.empty()) throw ConfigError("sweep requires at least one budget");
  fs::create_directories(out_dir);
  const CdfEstimate oracle = compute_oracle(config);
  const std::vector<TrialOutcome> outcomes = run_sweep(config, oracle, workers);
  const std::vector<SweepCell> cells = aggregate_sweep(outcomes);
  write_sweep_csv((fs::path(out_dir) / "sweep.csv").string(), cells);
  write_selection_csv((fs::path(out_dir) / "selection.csv").string(), cells);
  return 0;
}

int cmd_oracle(const ExperimentConfig& config, const std::string& out_path) {
  EnsembleHandle h = config.ensemble;
  h.base_seed = rng::combine(config.seed, h.base_seed);
  Sampler sampler(h);
  const JointBatch batch = sampler.sample_joint(
      static_cast<int>(config.oracle_samples),
      rng::derive(config.seed, rng::Purpose::Oracle));
  const double budget = config.budgets.empty() ? 1e6 : config.budgets.back();
  const OracleStats stats =
      oracle_stats(batch, sampler.descriptor(), budget, config.weight);
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());
  write_json_file(out_path, to_json(stats));
  return 0;
}

int cmd_report(const std::string& run_dir, const std::vector<double>& levels,
               const std::string& out_path) {
  // prefer a monotone (sorted) estimate when one was produced
  static const char* candidates[] = {"cvmdl-star-sorted.json", "cvmdl-sorted.json",
                                     "cvmdl-star.json", "cvmdl.json", "ecdf.json"};
  fs::path found;
  for (const char* name : candidates) {
    const fs::path p = fs::path(run_dir) / name;
    if (fs::exists(p)) { found = p; break; }
  }
  if (found.empty()) throw ConfigError("no cdf estimate found in " + run_dir);

  CdfEstimate est = cdf_from_json(read_json_file(found.string()));
  if (est.grid.dims() != 1)
    throw ConfigError("risk report requires a 1-d estimate");
  if (!est.monotone) est = clip_unit(alternating_sort(std::move(est)));
  const RiskReport report =
      risk_report(make_cdf1d(est), levels, {0.05, 0.25, 0.5, 0.75, 0.95});
  write_json_file(out_path, to_json(report));
  return 0;
}

}  // namespace cvmdl
