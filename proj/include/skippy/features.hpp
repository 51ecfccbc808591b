#pragma once

#include <string>
#include <vector>

#include "skippy/mdp.hpp"

namespace skippy {

// Feature map phi : S x [A] -> R^d with norm bounds L1 (features) and
// L2 (per-policy parameters).
struct FeatureTable {
  int dim = 0;
  double l1_bound = 1.0;
  double l2_bound = 1.0;
  std::vector<Mat> phi;  // per state: num_actions x dim

  Vec at(int s, int a) const { return phi[s].row(a).transpose(); }
  Vec diff(int s, int i, int j) const;  // phi(s,i) - phi(s,j)
};

std::vector<std::string> validate_features(const Mdp& mdp, const FeatureTable& ft);

// Per-stage Chebyshev parameters theta_h(pi) together with the achieved
// sup-norm error at each stage.
struct PolicyParameter {
  std::vector<Vec> theta;     // per stage
  std::vector<double> error;  // achieved Chebyshev error per stage
  std::vector<double> gap;    // solver certificate: upper - lower bound

  double max_error() const;
};

struct ChebyshevFit {
  Vec theta;
  double error = 0.0;        // max_i |a_i . theta - b_i|
  double lower_bound = 0.0;  // dual certificate
  double gap() const { return error - lower_bound; }
};

// min_{||theta|| <= radius} max_i |a_i^T theta - b_i|. Lawson-style
// iteratively reweighted least squares with a ball-constrained inner solve;
// every weight vector yields a dual lower bound, so the returned gap is a
// sound optimality certificate.
ChebyshevFit chebyshev_fit(const Mat& a, const Vec& b, double radius,
                           int max_iters = 400, double tol = 1e-9);

PolicyParameter fit_policy_parameters(const Mdp& mdp, const FeatureTable& ft,
                                      const MemorylessPolicy& pi);

struct MisspecReport {
  double eta_hat = 0.0;
  Mat per_policy_stage;  // policies x stages, achieved Chebyshev errors
  std::string sample_description;
};

// eta estimate over a finite policy sample; a lower bound on the true sup.
MisspecReport measure_misspecification(const Mdp& mdp, const FeatureTable& ft,
                                       const std::vector<MemorylessPolicy>& sample);

// Finite per-stage surrogate for the parameter sets Theta_h.
struct ThetaSample {
  std::vector<std::vector<Vec>> per_stage;

  int stages() const { return static_cast<int>(per_stage.size()); }
};

// range(s): max over sampled theta and action pairs of <phi(s,i)-phi(s,j), theta>.
double range_exact(const Mdp& mdp, const FeatureTable& ft, int s,
                   const ThetaSample& thetas);

}  // namespace skippy
