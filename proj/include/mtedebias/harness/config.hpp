#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtedebias/dgp.hpp"
#include "mtedebias/liv.hpp"
#include "mtedebias/pscore.hpp"
#include "mtedebias/weakiv.hpp"

namespace mte::harness {

inline constexpr int kSchemaVersion = 1;

// 0.05, 0.10, ..., 0.95
std::vector<double> default_v_grid();

struct EstimationOptions {
  pscore::Method pscore_method = pscore::Method::kKernel;
  double trim = 0.001;
  double max_gap = 0.1;   // largest admissible gap in fitted values, as a share of the support width
  double bw_mult = 1.0;   // propensity kernel bandwidth multiplier
  int liv_degree = 2;
  double liv_bw_mult = 1.0;
  double liv_bandwidth = 0.0;  // <= 0: rule of thumb
  std::size_t grid_points = 101;
  std::vector<double> mte_v_grid = default_v_grid();  // v values of the de-biased MTE table
  double delta_tolerance = 0.01;

  pscore::FitOptions fit_options() const;
  liv::CurveOptions curve_options() const;
};

struct WeakIvOptions {
  std::vector<double> nu{-0.25, -0.5};
  std::optional<double> fixed_delta;
  std::vector<std::size_t> n_grid{1000, 4000, 16000, 64000};
  std::size_t reps = 200;
  double x = 1.0;
  std::vector<weakiv::DriftMode> modes{weakiv::DriftMode::kOracle, weakiv::DriftMode::kEstimated};
};

struct RunOptions {
  std::size_t n = 100000;
  std::uint64_t seed = 1;
  std::size_t reps = 200;
  unsigned threads = 0;  // 0: available parallelism
  std::string out = "out";
  std::string input;  // sample CSV; empty means simulate inline
  bool latent = false;
};

// Everything a command needs. Precedence: built-in defaults, then the config
// file, then command-line flags.
struct RunConfig {
  dgp::ModelConfig model;
  EstimationOptions estimation;
  std::vector<dgp::ZPair> late_pairs{{0.5, -0.5}, {0.0, -1.0}};
  std::optional<double> delta_bar;
  bool limited_support = false;  // report bounds instead of point estimates
  WeakIvOptions weakiv;
  RunOptions run;

  // Throws ConfigError naming the offending key.
  void validate() const;
  unsigned threads() const;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Resolved configuration echo. The output directory and input path are left
// out so that manifests do not depend on where a run writes.
nlohmann::json to_json(const RunConfig& config);

}  // namespace mte::harness
