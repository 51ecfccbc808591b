#pragma once

#include <limits>
#include <string>
#include <vector>

#include "skippy/features.hpp"

namespace skippy {

// Q_h = (L2^{-2} I + sum_{v in C_h} v v^T)^{-1/2}. `dim` is required when the
// direction sequence is empty.
Mat q_from_sequence(const std::vector<Vec>& directions, double l2, int dim = -1);

// Per-stage preconditioning matrices with their defining direction sequences.
struct Preconditioning {
  double l2 = 1.0;
  double l3 = 1.0;
  std::vector<std::vector<Vec>> directions;  // C_h per stage
  std::vector<Mat> q;                        // Q_h per stage

  static Preconditioning initial(int dim, int horizon, double l2, double l3);

  int horizon() const { return static_cast<int>(q.size()); }
  int dim() const { return static_cast<int>(q.front().rows()); }
  // Appends Q_h^{-1} w to C_h and updates Q_h in place (incremental route).
  void append_direction(int h, const Vec& w);
  Mat base_matrix(int h) const;  // L2^{-2} I + sum v v^T
};

// Checks the three per-prefix direction conditions plus the enclosing
// ellipsoid bound sup_theta ||theta||_{Q_h^{-2}} <= sqrt(d1+1) against a
// finite parameter sample. Returns human-readable violations.
std::vector<std::string> validate_preconditioning(const Preconditioning& pc,
                                                  const ThetaSample& thetas,
                                                  double d1, double tol = 1e-8);

// Projector onto the span of eigenvectors of Q_h with eigenvalue >= L3^{-2}.
Mat z_projector(const Preconditioning& pc, int h);

// Near-optimal design over a point set: at most d0 support points with
// weights rho such that ||theta||^2_{V^dagger} <= 2d on the sample and
// kernel(V) is orthogonal to every sample point.
struct DesignSet {
  std::vector<Vec> points;       // ordered support in the preconditioned space
  std::vector<Vec> points_orig;  // same support mapped back by Q_h
  std::vector<int> support_indices;  // positions of the support in the input sample
  Vec weights;                   // rho over the support, sums to 1
  Mat v;                         // design matrix
  Mat v_pinv;
  Mat p_parallel;
  Mat p_perp;
  double gamma = 0.0;
  int support_size = 0;  // distinct points before padding up to d0

  bool empty() const { return points.empty(); }
};

struct DesignOptions {
  int max_iters = 10000;
  double margin = 1e-3;  // stop once max leverage <= 2d - margin
};

// Frank-Wolfe D-optimal design on the span of the points, then support
// reduction to at most d0 points (padded back up to exactly d0 by repetition).
// Throws with a diagnostic if the leverage target is not met within budget.
DesignSet compute_near_optimal_design(const std::vector<Vec>& points, int d0,
                                      const DesignOptions& opts = {});

// Eigen-split of the design matrix at threshold gamma; fills p_parallel/p_perp.
void parallel_perp_projectors(DesignSet& design, double gamma);

// Per-stage designs computed from a parameter sample under a preconditioning.
std::vector<DesignSet> designs_for_preconditioning(const Preconditioning& pc,
                                                   const ThetaSample& thetas,
                                                   int d0, double gamma);

// range_Q(s): like range but over the design support only.
double range_q(const Mdp& mdp, const FeatureTable& ft, int s,
               const std::vector<DesignSet>& designs);

Vec precondition_feature_at(const FeatureTable& ft, const Preconditioning& pc,
                            const Mdp& mdp, int s, int a);
Vec precondition_parameter(const Vec& theta, const Preconditioning& pc, int h);

enum class ConstantMode { kTheory, kPractical };

// Absolute overrides applied in practical mode; NaN keeps the theory value.
// Applied values are echoed into run metadata. The defaults are tuned so that
// desk-scale runs terminate by the uncertainty threshold within a few hundred
// iterations while the estimates are already accurate.
struct PracticalOverrides {
  double n = 200.0;
  double beta = 2.0;
  double omega = std::numeric_limits<double>::quiet_NaN();  // default 7 + 7/3
  double lambda = 1e-6;
  double m_max = 2000.0;
  double uncertainty_threshold_scale = 150.0;
  double discrepancy_threshold_scale = 1.0;
};

struct ConstantSet {
  // inputs
  double d = 0, horizon = 0, eps = 0, zeta = 0, l1 = 0, l2 = 0;
  ConstantMode mode = ConstantMode::kTheory;
  PracticalOverrides overrides;

  // derived
  double d0 = 0, d1 = 0, omega = 0, gamma = 0, beta = 0, alpha = 0, lambda = 0;
  double n = 0, m_max = 0, mprime_max = 0, l3 = 0;
  double eta_bound = 0, eta0 = 0, xi = 0;
  double uncertainty_threshold = 0;
  double discrepancy_base = 0;       // 3 eps / (d H^2)
  double discrepancy_scale = 1.0;
  int fixed_point_rounds = 0;

  double theta_bar_radius() const { return 4.0 * d0 * horizon * l2 / alpha; }
  double guess_radius() const { return std::sqrt(d1 + 1.0); }
  double uncertainty_cap() const { return 2.0 / (beta * omega * d * horizon); }
  double discrepancy_threshold(double sigma_bar_k) const {
    return discrepancy_scale * (sigma_bar_k * beta * omega + discrepancy_base);
  }

  std::string report() const;  // key-value text block
};

// Fixed-point evaluation of the mutually dependent constants. Theory mode
// reproduces the closed-form choices; practical mode applies the overrides
// after the fixed point and rescales the thresholds.
ConstantSet compute_constants(int d, int horizon, double eps, double zeta,
                              double l1, double l2,
                              ConstantMode mode = ConstantMode::kTheory,
                              const PracticalOverrides& overrides = {});

}  // namespace skippy
