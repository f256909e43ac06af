#pragma once

namespace mte {

// An outcome-on-propensity curve u -> E[Y | P*(X,Z) = u, X = x] for one
// covariate cell, evaluable for level and derivative on [lower(), upper()].
// Implemented by the local-polynomial estimate and by the closed-form oracle.
class OutcomeCurve {
 public:
  virtual ~OutcomeCurve() = default;
  virtual double level(double u) const = 0;
  virtual double derivative(double u) const = 0;
  virtual double lower() const = 0;
  virtual double upper() const = 0;
};

}  // namespace mte
