#include "mtedebias/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/normal.hpp"
#include "mtedebias/quadrature.hpp"
#include "mtedebias/rng.hpp"

namespace mte::dgp {

namespace {

std::string key_name(const char* map, double x) {
  std::ostringstream os;
  os << map << "[" << x << "]";
  return os.str();
}

// E[Y | S = 1, P(x,Z) = p] = alpha0 + beta0 x + (d_alpha + d_beta x) p - d_rho phi(Phi^-1(p))
double responder_level(const ModelConfig& c, double p, double x) {
  const double tail = num::normal_pdf(num::normal_quantile(p));
  return c.alpha0 + c.beta0 * x + (c.d_alpha() + c.d_beta() * x) * p - c.d_rho() * tail;
}

}  // namespace

std::string to_string(OutcomeMode mode) {
  return mode == OutcomeMode::kChosenTreatment ? "chosen-treatment" : "misclassification";
}

OutcomeMode outcome_mode_from_string(const std::string& name) {
  if (name == "chosen-treatment") return OutcomeMode::kChosenTreatment;
  if (name == "misclassification") return OutcomeMode::kMisclassification;
  throw ConfigError("outcome_mode: expected 'chosen-treatment' or 'misclassification', got '" + name + "'");
}

void ModelConfig::validate() const {
  if (x_grid.empty()) throw ConfigError("x_grid: must list at least one covariate value");
  std::vector<double> sorted = x_grid;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("x_grid: duplicate covariate value");
  for (double x : x_grid) {
    if (!std::isfinite(x)) throw ConfigError("x_grid: non-finite value");
    const auto d = delta.find(x);
    if (d == delta.end()) throw ConfigError("delta: missing key " + key_name("delta", x));
    if (!(d->second >= 0.0 && d->second < 1.0))
      throw ConfigError(key_name("delta", x) + ": must lie in [0, 1)");
    const auto p = p_tilde.find(x);
    if (p == p_tilde.end()) throw ConfigError("p_tilde: missing key " + key_name("p_tilde", x));
    if (!(p->second > 0.0 && p->second < 1.0))
      throw ConfigError(key_name("p_tilde", x) + ": must lie strictly inside (0, 1)");
  }
  if (!x_probs.empty()) {
    if (x_probs.size() != x_grid.size()) throw ConfigError("x_probs: must align with x_grid");
    double total = 0.0;
    for (double p : x_probs) {
      if (!(p > 0.0)) throw ConfigError("x_probs: entries must be positive");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("x_probs: must sum to 1");
  }
  if (!(sigma_z > 0.0) || !std::isfinite(sigma_z)) throw ConfigError("sigma_z: must be positive");
  if (theta1 == 0.0 || !std::isfinite(theta1))
    throw ConfigError("theta1: must be non-zero (instrument relevance)");
  if (!(sigma_eta >= 0.0)) throw ConfigError("sigma_eta: must be non-negative");
  for (double v : {theta0, theta2, alpha0, alpha1, beta0, beta1, rho0, rho1})
    if (!std::isfinite(v)) throw ConfigError("model coefficients must be finite");
}

std::size_t ModelConfig::cell_index(double x) const {
  const auto it = std::find(x_grid.begin(), x_grid.end(), x);
  if (it == x_grid.end()) {
    std::ostringstream os;
    os << "covariate value " << x << " is not in x_grid";
    throw DomainError(os.str());
  }
  return static_cast<std::size_t>(it - x_grid.begin());
}

double ModelConfig::delta_at(double x) const {
  cell_index(x);
  return delta.at(x);
}

double ModelConfig::p_tilde_at(double x) const {
  cell_index(x);
  return p_tilde.at(x);
}

void ModelConfig::set_delta(double value) {
  for (double x : x_grid) delta[x] = value;
}

ModelConfig benchmark_config() {
  ModelConfig c;
  c.x_grid = {0.0, 1.0};
  c.delta = {{0.0, 0.4}, {1.0, 0.4}};
  c.p_tilde = {{0.0, 0.25}, {1.0, 0.25}};
  c.theta0 = 0.0;
  c.theta1 = 1.0;
  c.theta2 = 0.5;
  c.sigma_z = 3.0;
  c.alpha0 = 0.0;
  c.alpha1 = 1.0;
  c.beta0 = 0.0;
  c.beta1 = 0.5;
  c.rho0 = 0.0;
  c.rho1 = 1.0;
  c.sigma_eta = 0.5;
  c.outcome_mode = OutcomeMode::kMisclassification;
  return c;
}

ModelConfig limited_support_config() {
  ModelConfig c = benchmark_config();
  c.sigma_z = 0.8;
  c.set_delta(0.3);
  return c;
}

std::vector<std::size_t> cell_rows(const ObservedData& data, double x) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.x.size(); ++i)
    if (data.x[i] == x) rows.push_back(i);
  return rows;
}

Sample simulate(const ModelConfig& config, std::size_t n, std::uint64_t seed) {
  config.validate();
  if (n == 0) throw ConfigError("n: sample size must be at least 1");

  const std::size_t cells = config.x_grid.size();
  std::vector<double> cumulative(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    const double p = config.x_probs.empty() ? 1.0 / static_cast<double>(cells) : config.x_probs[k];
    cumulative[k] = (k == 0 ? 0.0 : cumulative[k - 1]) + p;
  }
  cumulative.back() = 1.0;
  std::vector<double> delta(cells), p_tilde(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    delta[k] = config.delta.at(config.x_grid[k]);
    p_tilde[k] = config.p_tilde.at(config.x_grid[k]);
  }

  Sample out;
  out.seed = seed;
  auto& obs = out.observed;
  auto& lat = out.latent;
  obs.y.resize(n);
  obs.d_star.resize(n);
  obs.x.resize(n);
  obs.z.resize(n);
  lat.s.resize(n);
  lat.d.resize(n);
  lat.d_tilde.resize(n);
  lat.u_d.resize(n);
  lat.v_tilde.resize(n);

  num::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    // Fixed draw order per record: x, z, s, U_D, V~, eta0, eta1.
    const double ux = rng.uniform();
    const std::size_t k = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end() - 1, ux) - cumulative.begin());
    const double x = config.x_grid[k];
    const double z = config.sigma_z * rng.normal();
    const bool responder = rng.uniform() < 1.0 - delta[k];
    const double u_d = rng.uniform();
    const double v_tilde = rng.uniform();
    const double eta0 = config.sigma_eta * rng.normal();
    const double eta1 = config.sigma_eta * rng.normal();

    const bool d = num::normal_cdf(responder_index(config, x, z)) >= u_d;
    const bool d_tilde = p_tilde[k] >= v_tilde;
    const bool d_star = responder ? d : d_tilde;
    const double q = num::normal_quantile(u_d);
    const double y0 = config.alpha0 + config.beta0 * x + config.rho0 * q + eta0;
    const double y1 = config.alpha1 + config.beta1 * x + config.rho1 * q + eta1;
    const bool treated = config.outcome_mode == OutcomeMode::kChosenTreatment ? d_star : d;

    obs.y[i] = treated ? y1 : y0;
    obs.d_star[i] = d_star;
    obs.x[i] = x;
    obs.z[i] = z;
    lat.s[i] = responder;
    lat.d[i] = d;
    lat.d_tilde[i] = d_tilde;
    lat.u_d[i] = u_d;
    lat.v_tilde[i] = v_tilde;
  }
  return out;
}

double responder_index(const ModelConfig& config, double x, double z) {
  return config.theta0 + config.theta1 * z + config.theta2 * x;
}

double true_propensity_responder(const ModelConfig& config, double x, double z) {
  config.cell_index(x);
  return num::normal_cdf(responder_index(config, x, z));
}

double true_propensity_observed(const ModelConfig& config, double x, double z) {
  const double delta = config.delta_at(x);
  return (1.0 - delta) * true_propensity_responder(config, x, z) + delta * config.p_tilde_at(x);
}

double responder_propensity_dz(const ModelConfig& config, double x, double z) {
  config.cell_index(x);
  return config.theta1 * num::normal_pdf(responder_index(config, x, z));
}

double observed_propensity_dz(const ModelConfig& config, double x, double z) {
  return (1.0 - config.delta_at(x)) * responder_propensity_dz(config, x, z);
}

std::pair<double, double> observed_support(const ModelConfig& config, double x) {
  const double delta = config.delta_at(x);
  const double floor = delta * config.p_tilde_at(x);
  return {floor, 1.0 - delta + floor};
}

double true_mte(const ModelConfig& config, double u, double x) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("true_mte: u must lie in (0, 1)");
  return config.d_alpha() + config.d_beta() * x + config.d_rho() * num::normal_quantile(u);
}

namespace {

double responder_coordinate(const ModelConfig& config, double u, double x, bool closed) {
  const auto [lo, hi] = observed_support(config, x);
  const bool inside = closed ? (u >= lo && u <= hi) : (u > lo && u < hi);
  if (!inside) {
    std::ostringstream os;
    os << "u = " << u << " outside the observed support (" << lo << ", " << hi << ")";
    throw DomainError(os.str());
  }
  const double delta = config.delta_at(x);
  return std::clamp((u - delta * config.p_tilde_at(x)) / (1.0 - delta), 0.0, 1.0);
}

}  // namespace

double pseudo_mte_oracle(const ModelConfig& config, double u, double x) {
  const double v = responder_coordinate(config, u, x, false);
  return true_mte(config, v, x) / (1.0 - config.delta_at(x));
}

double observable_mte(const ModelConfig& config, double u, double x) {
  if (config.outcome_mode == OutcomeMode::kMisclassification) return pseudo_mte_oracle(config, u, x);
  return true_mte(config, responder_coordinate(config, u, x, false), x);
}

double observable_level(const ModelConfig& config, double u, double x) {
  const double p = responder_coordinate(config, u, x, true);
  const double responders = responder_level(config, p, x);
  if (config.outcome_mode == OutcomeMode::kMisclassification) return responders;
  const double delta = config.delta_at(x);
  const double non_responders =
      config.alpha0 + config.beta0 * x + config.p_tilde_at(x) * (config.d_alpha() + config.d_beta() * x);
  return (1.0 - delta) * responders + delta * non_responders;
}

OracleCurve::OracleCurve(ModelConfig config, double x) : config_(std::move(config)), x_(x) {
  config_.validate();
  // the closed-form MTE diverges at the support ends; report a closed range just inside them
  const auto [lo, hi] = observed_support(config_, x_);
  lower_ = lo + 1e-12;
  upper_ = hi - 1e-12;
}

double OracleCurve::level(double u) const { return observable_level(config_, u, x_); }

double OracleCurve::derivative(double u) const { return observable_mte(config_, u, x_); }

const CellTruth& TruthReport::cell(double x) const {
  for (const auto& c : cells)
    if (c.x == x) return c;
  throw DomainError("TruthReport: no cell for the requested covariate value");
}

double true_late(const ModelConfig& config, double x, double z, double z_prime) {
  config.cell_index(x);
  const double mu = responder_index(config, x, z);
  const double mu_prime = responder_index(config, x, z_prime);
  const double p = num::normal_cdf(mu);
  const double p_prime = num::normal_cdf(mu_prime);
  if (p == p_prime) throw DomainError("true_late: degenerate pair, P(x,z) == P(x,z')");
  const double tail = (num::normal_pdf(mu_prime) - num::normal_pdf(mu)) / (p - p_prime);
  return config.d_alpha() + config.d_beta() * x + config.d_rho() * tail;
}

double true_mprte(const ModelConfig& config, double x) {
  config.cell_index(x);
  // Z = sigma_z W with W standard normal, so f_Z dz = phi(w) dw.
  // MTE(P(x,z), x) = d_alpha + d_beta x + d_rho mu(x,z), since Phi^-1(Phi(mu)) = mu.
  const double base = config.d_alpha() + config.d_beta() * x;
  auto weight = [&](double w) {
    const double mu = responder_index(config, x, config.sigma_z * w);
    return config.theta1 * num::normal_pdf(mu) * num::normal_pdf(w);
  };
  auto weighted_mte = [&](double w) {
    const double mu = responder_index(config, x, config.sigma_z * w);
    return (base + config.d_rho() * mu) * config.theta1 * num::normal_pdf(mu) * num::normal_pdf(w);
  };
  const auto numerator = num::integrate_real_line(weighted_mte, 1e-14, 1e-12);
  const auto denominator = num::integrate_real_line(weight, 1e-14, 1e-12);
  return numerator.value / denominator.value;
}

CellTruth true_targets(const ModelConfig& config, double x, std::span<const ZPair> z_pairs) {
  config.validate();
  CellTruth t;
  t.x = x;
  t.cate = config.d_alpha() + config.d_beta() * x;  // integral of Phi^-1 over (0,1) vanishes
  t.mprte = true_mprte(config, x);
  for (const auto& [z, z_prime] : z_pairs) {
    if (z == z_prime) throw DomainError("true_targets: z and z' must differ");
    LateTruth l;
    l.z = z;
    l.z_prime = z_prime;
    l.p = true_propensity_responder(config, x, z);
    l.p_prime = true_propensity_responder(config, x, z_prime);
    l.late = true_late(config, x, z, z_prime);
    t.late.push_back(l);
  }
  t.responder_support = {0.0, 1.0};
  t.observed_support = observed_support(config, x);
  return t;
}

TruthReport truth_report(const ModelConfig& config, std::span<const ZPair> z_pairs) {
  TruthReport r;
  r.config = config;
  for (double x : config.x_grid) r.cells.push_back(true_targets(config, x, z_pairs));
  return r;
}

}  // namespace mte::dgp
