#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "cvmdl/cdf.hpp"
#include "cvmdl/cv_estimator.hpp"
#include "cvmdl/driver.hpp"
#include "cvmdl/ensemble.hpp"
#include "cvmdl/metrics.hpp"

namespace cvmdl {

// Thrown on malformed configs and data files; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric table from a CSV file. A single header line is skipped when its
// first field is not numeric. Used for pool ensembles (columns: the
// high-fidelity output, then each low-fidelity output in model order).
Eigen::MatrixXd load_csv_table(const std::string& path);

EnsembleHandle parse_ensemble(const nlohmann::json& j,
                              const std::string& config_dir);
WeightSpec parse_weight(const nlohmann::json& j);
EvalGrid parse_grid(const nlohmann::json& j);

nlohmann::json to_json(const CdfEstimate& est);
CdfEstimate cdf_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SubsetEvaluation& ev);
nlohmann::json to_json(const IterationRecord& rec);
nlohmann::json to_json(const OracleStats& stats);
nlohmann::json to_json(const RiskReport& report);
RiskReport risk_report_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

// One JSON object per line, one line per exploration-loop iteration.
void write_trace_jsonl(const std::string& path,
                       const std::vector<IterationRecord>& trace);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

std::string subset_label(const std::vector<int>& subset);  // e.g. "{1,3}"

}  // namespace cvmdl
