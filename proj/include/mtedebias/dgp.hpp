#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtedebias/curve.hpp"

namespace mte::dgp {

enum class OutcomeMode {
  kChosenTreatment,    // Y = D* Y(1) + (1 - D*) Y(0)
  kMisclassification,  // Y = D Y(1) + (1 - D) Y(0); D* is a misreported status
};

std::string to_string(OutcomeMode mode);
OutcomeMode outcome_mode_from_string(const std::string& name);

// Additive-normal generalized Roy model with non-responders.
//   responders:      D  = 1{ Phi(theta0 + theta1 z + theta2 x) >= U_D },  U_D ~ U(0,1)
//   non-responders:  D~ = 1{ p_tilde(x) >= V~ },                          V~  ~ U(0,1)
//   S ~ Bernoulli(1 - delta(x)),  Z | X ~ N(0, sigma_z^2)
//   Y(d) = alpha_d + beta_d x + rho_d Phi^-1(U_D) + eta_d,  eta_d ~ N(0, sigma_eta^2)
struct ModelConfig {
  std::vector<double> x_grid{0.0, 1.0};
  std::vector<double> x_probs;  // aligned with x_grid; empty means uniform
  std::map<double, double> delta{{0.0, 0.0}, {1.0, 0.0}};
  std::map<double, double> p_tilde{{0.0, 0.5}, {1.0, 0.5}};
  double theta0 = 0.0;
  double theta1 = 1.0;
  double theta2 = 0.0;
  double sigma_z = 3.0;
  double alpha0 = 0.0;
  double alpha1 = 1.0;
  double beta0 = 0.0;
  double beta1 = 0.5;
  double rho0 = 0.0;
  double rho1 = 1.0;
  double sigma_eta = 0.5;
  OutcomeMode outcome_mode = OutcomeMode::kChosenTreatment;

  // Throws ConfigError naming the offending key.
  void validate() const;

  // Throws DomainError when x is not a grid value.
  std::size_t cell_index(double x) const;
  double delta_at(double x) const;
  double p_tilde_at(double x) const;

  double d_alpha() const { return alpha1 - alpha0; }
  double d_beta() const { return beta1 - beta0; }
  double d_rho() const { return rho1 - rho0; }

  // Sets delta(x) = value for every grid point.
  void set_delta(double value);
};

// delta = 0.4, P~ = 0.25, sigma_z = 3 on x in {0, 1}; outcome in misclassification mode.
ModelConfig benchmark_config();
// Same model with sigma_z = 0.8 and delta = 0.3.
ModelConfig limited_support_config();

struct ObservedData {
  std::vector<double> y;
  std::vector<std::uint8_t> d_star;
  std::vector<double> x;
  std::vector<double> z;

  std::size_t size() const { return y.size(); }
};

// Latent draws, kept apart from ObservedData so that estimators cannot touch them.
struct LatentData {
  std::vector<std::uint8_t> s;
  std::vector<std::uint8_t> d;
  std::vector<std::uint8_t> d_tilde;
  std::vector<double> u_d;
  std::vector<double> v_tilde;
};

struct Sample {
  ObservedData observed;
  LatentData latent;
  std::uint64_t seed = 0;

  std::size_t size() const { return observed.size(); }
};

// Rows of `data` whose covariate equals x exactly.
std::vector<std::size_t> cell_rows(const ObservedData& data, double x);

Sample simulate(const ModelConfig& config, std::size_t n, std::uint64_t seed);

// mu(x, z) = theta0 + theta1 z + theta2 x
double responder_index(const ModelConfig& config, double x, double z);
double true_propensity_responder(const ModelConfig& config, double x, double z);
double true_propensity_observed(const ModelConfig& config, double x, double z);
double responder_propensity_dz(const ModelConfig& config, double x, double z);
double observed_propensity_dz(const ModelConfig& config, double x, double z);

// Closure of the support of P*(x, Z): [delta P~, 1 - delta + delta P~].
std::pair<double, double> observed_support(const ModelConfig& config, double x);

// MTE(u, x) = d_alpha + d_beta x + d_rho Phi^-1(u), u in (0,1).
double true_mte(const ModelConfig& config, double u, double x);

// MTE*(u, x; delta) = MTE((u - delta P~) / (1 - delta), x) / (1 - delta) on the
// open observed support.
double pseudo_mte_oracle(const ModelConfig& config, double u, double x);

// Population derivative of E[Y | P* = u, X = x] for the configured outcome
// mode. Equals pseudo_mte_oracle in misclassification mode; in
// chosen-treatment mode the non-responder share cancels the 1/(1-delta)
// stretch and the curve is MTE((u - delta P~)/(1 - delta), x).
double observable_mte(const ModelConfig& config, double u, double x);

// Population E[Y | P* = u, X = x] for the configured outcome mode.
double observable_level(const ModelConfig& config, double u, double x);

// Closed-form population curve, usable wherever an estimated curve is.
class OracleCurve final : public OutcomeCurve {
 public:
  OracleCurve(ModelConfig config, double x);
  double level(double u) const override;
  double derivative(double u) const override;
  double lower() const override { return lower_; }
  double upper() const override { return upper_; }

 private:
  ModelConfig config_;
  double x_;
  double lower_;
  double upper_;
};

struct LateTruth {
  double z = 0.0;
  double z_prime = 0.0;
  double p = 0.0;        // P(x, z)
  double p_prime = 0.0;  // P(x, z')
  double late = 0.0;
};

struct CellTruth {
  double x = 0.0;
  double cate = 0.0;
  double mprte = 0.0;
  std::vector<LateTruth> late;
  std::pair<double, double> responder_support{0.0, 1.0};
  std::pair<double, double> observed_support{0.0, 1.0};
};

struct TruthReport {
  ModelConfig config;
  std::vector<CellTruth> cells;

  const CellTruth& cell(double x) const;
  double mte(double u, double x) const { return true_mte(config, u, x); }
};

using ZPair = std::pair<double, double>;

// LATE for responders between propensities p and p' (closed form).
double true_late(const ModelConfig& config, double x, double z, double z_prime);

// MPRTE(x) by adaptive quadrature of E[MTE(P(x,Z),x) dP/dz] / E[dP/dz] over the
// normal density of Z.
double true_mprte(const ModelConfig& config, double x);

CellTruth true_targets(const ModelConfig& config, double x, std::span<const ZPair> z_pairs);
TruthReport truth_report(const ModelConfig& config, std::span<const ZPair> z_pairs);

}  // namespace mte::dgp
