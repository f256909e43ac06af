#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtedebias/debias.hpp"
#include "mtedebias/dgp.hpp"
#include "mtedebias/harness/config.hpp"
#include "mtedebias/harness/io.hpp"
#include "mtedebias/liv.hpp"
#include "mtedebias/pscore.hpp"

namespace mte::harness {

struct AnalysisOptions {
  EstimationOptions estimation;
  std::vector<dgp::ZPair> late_pairs;
  std::optional<double> delta_bar;
  bool bounds_mode = false;
  const dgp::ModelConfig* model = nullptr;  // needed only for the oracle propensity
  bool keep_curve = false;
};

AnalysisOptions analysis_options(const RunConfig& config);

struct LateResult {
  debias::LateEstimate estimate;
  std::string error;
};

struct CellResult {
  double x = 0.0;
  std::size_t n = 0;
  std::string status = "failed";  // ok, partial or failed
  std::string error;
  bool bounds_mode = false;

  pscore::Method method = pscore::Method::kKernel;
  std::optional<pscore::ProbitCoefficients> probit;
  double pscore_bandwidth = 0.0;  // kernel only
  std::optional<pscore::SupportEstimate> support;
  double avg_derivative = 0.0;
  std::optional<debias::Identified> ident;

  double liv_bandwidth = 0.0;
  std::pair<double, double> evaluable{0.0, 0.0};
  std::optional<debias::CateEstimate> cate;
  std::vector<LateResult> late;
  std::optional<debias::MprteEstimate> mprte;
  std::vector<std::pair<double, double>> mte_grid;  // (v, de-biased MTE); NaN outside the evaluable range
  std::optional<debias::BoundsReport> bounds;
  std::vector<liv::GridPoint> curve;

  bool ok() const { return status == "ok"; }
};

// Propensity, support, identification, outcome curve and every target for one
// cell. Errors are caught and recorded in the result.
CellResult analyze_cell(const dgp::ObservedData& data, double x, const AnalysisOptions& options);
std::vector<CellResult> analyze(const dgp::ObservedData& data, const std::vector<double>& x_grid,
                                const AnalysisOptions& options);

nlohmann::json to_json(const CellResult& cell);

CsvTable results_table(const std::vector<CellResult>& cells);
CsvTable late_table(const std::vector<CellResult>& cells);
CsvTable mte_grid_table(const std::vector<CellResult>& cells);
CsvTable bounds_table(const std::vector<CellResult>& cells);
CsvTable curve_table(const std::vector<CellResult>& cells);

struct ReplicationRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;
};

// Replication r simulates with derive_seed(run.seed, r); workers fill slots by r.
std::vector<ReplicationRecord> run_replications(const RunConfig& config);

CsvTable replication_table(const std::vector<ReplicationRecord>& records, std::size_t late_pairs);

// Per cell and quantity: mean, sd, bias and error summaries against the truth,
// failure counts, and interval coverage in bounds mode.
nlohmann::json replication_summary(const RunConfig& config, const std::vector<ReplicationRecord>& records);

}  // namespace mte::harness
