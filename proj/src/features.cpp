#include "skippy/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skippy {

Vec FeatureTable::diff(int s, int i, int j) const {
  if (i < 0 || i >= phi[s].rows() || j < 0 || j >= phi[s].rows()) {
    throw std::invalid_argument("feature diff: invalid action index");
  }
  return (phi[s].row(i) - phi[s].row(j)).transpose();
}

std::vector<std::string> validate_features(const Mdp& mdp, const FeatureTable& ft) {
  std::vector<std::string> report;
  if (static_cast<int>(ft.phi.size()) != mdp.num_states()) {
    report.push_back("feature table state count mismatch");
    return report;
  }
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (ft.phi[s].rows() != mdp.num_actions || ft.phi[s].cols() != ft.dim) {
      report.push_back("feature block shape mismatch at state " + std::to_string(s));
      continue;
    }
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (ft.phi[s].row(a).norm() > ft.l1_bound + 1e-12) {
        report.push_back("feature norm exceeds L1 at state " + std::to_string(s) +
                         " action " + std::to_string(a + 1));
      }
    }
  }
  return report;
}

double PolicyParameter::max_error() const {
  double m = 0.0;
  for (double e : error) m = std::max(m, e);
  return m;
}

namespace {
bool exchange_polish(const Mat& a, const Vec& b, double radius, ChebyshevFit& fit);
}  // namespace

ChebyshevFit chebyshev_fit(const Mat& a, const Vec& b, double radius,
                           int max_iters, double tol) {
  if (radius <= 0.0) throw std::invalid_argument("chebyshev_fit: radius must be positive");
  const int n = static_cast<int>(a.rows());
  const int d = static_cast<int>(a.cols());
  ChebyshevFit fit;
  if (n == 0) {
    fit.theta = Vec::Zero(d);
    return fit;
  }

  auto sup_err = [&](const Vec& th) { return (a * th - b).cwiseAbs().maxCoeff(); };
  auto clamp_ball = [&](Vec th) {
    const double nrm = th.norm();
    if (nrm > radius) th *= radius / nrm;
    return th;
  };

  // Unweighted least squares start; exact-fit instances finish here.
  Vec theta = clamp_ball(solve_min_norm(a, b));
  double best_err = sup_err(theta);
  Vec best_theta = theta;
  double best_lb = 0.0;

  // Lawson iteration. Any simplex weight vector w certifies the lower bound
  // min_{||th||<=radius} sqrt(sum_i w_i r_i(th)^2) <= opt. The shrinking
  // additive floor lets support points dropped to zero weight re-enter.
  Vec w = Vec::Constant(n, 1.0 / n);
  for (int it = 0; it < max_iters; ++it) {
    Vec th = ball_constrained_wls(a, b, w, radius);
    Vec r = a * th - b;
    const double lb = std::sqrt(std::max(0.0, w.dot(r.cwiseAbs2())));
    best_lb = std::max(best_lb, lb);
    const double err = r.cwiseAbs().maxCoeff();
    if (err < best_err) {
      best_err = err;
      best_theta = th;
    }
    if (best_err - best_lb <= tol) break;
    const double floor = (best_err - best_lb) * 1e-4 / n + 1e-18;
    w = w.cwiseProduct(r.cwiseAbs()).array() + floor;
    const double total = w.sum();
    if (total <= 1e-300) {  // interpolating fit
      best_lb = std::max(best_lb, 0.0);
      break;
    }
    w /= total;
  }

  if (best_err - best_lb > tol) {
    ChebyshevFit polish;
    polish.theta = best_theta;
    polish.error = best_err;
    polish.lower_bound = best_lb;
    if (exchange_polish(a, b, radius, polish) && polish.error <= best_err + 1e-12) {
      best_theta = polish.theta;
      best_err = polish.error;
      best_lb = std::max(best_lb, polish.lower_bound);
    }
  }

  // Subgradient polish with Polyak steps against the certified lower bound.
  theta = best_theta;
  for (int it = 0; it < 200 && best_err - best_lb > tol; ++it) {
    Vec r = a * theta - b;
    int imax = 0;
    r.cwiseAbs().maxCoeff(&imax);
    Vec g = (r[imax] >= 0 ? 1.0 : -1.0) * a.row(imax).transpose();
    const double gn2 = g.squaredNorm();
    if (gn2 <= 1e-300) break;
    const double f = r.cwiseAbs().maxCoeff();
    theta = clamp_ball(theta - ((f - best_lb) / gn2) * g);
    const double err = sup_err(theta);
    if (err < best_err) {
      best_err = err;
      best_theta = theta;
    }
  }

  fit.theta = best_theta;
  fit.error = best_err;
  fit.lower_bound = std::min(best_lb, best_err);
  return fit;
}

namespace {

// Equioscillation polish: solve for (theta, t) on the d+1 largest residuals
// and verify optimality through nonnegative dual weights. When the
// certificate holds, t is an exact lower bound on the Chebyshev value.
bool exchange_polish(const Mat& a, const Vec& b, double radius, ChebyshevFit& fit) {
  const int n = static_cast<int>(a.rows());
  const int d = static_cast<int>(a.cols());
  if (n < d + 1) return false;

  Vec r = a * fit.theta - b;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return std::abs(r[i]) > std::abs(r[j]); });
  std::vector<int> active(order.begin(), order.begin() + d + 1);

  for (int iter = 0; iter < 60; ++iter) {
    Mat m(d + 1, d + 1);
    Vec rhs(d + 1);
    for (int i = 0; i <= d; ++i) {
      const int row = active[i];
      m.block(i, 0, 1, d) = a.row(row);
      m(i, d) = (r[row] >= 0.0) ? -1.0 : 1.0;
      rhs[i] = b[row];
    }
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible()) return false;
    Vec x = lu.solve(rhs);
    Vec theta = x.head(d);
    const double t = std::abs(x[d]);
    if (theta.norm() > radius + 1e-12) return false;

    Vec r_new = a * theta - b;
    int worst = 0;
    const double err = r_new.cwiseAbs().maxCoeff(&worst);
    if (err <= t + std::max(1e-12, 1e-9 * t)) {
      // Dual weights: mu >= 0 with sum mu_i s_i a_i = 0 certify t as optimal.
      Mat dual(d + 1, d + 1);
      for (int i = 0; i <= d; ++i) {
        const double s = (r_new[active[i]] >= 0.0) ? 1.0 : -1.0;
        dual.block(0, i, d, 1) = s * a.row(active[i]).transpose();
        dual(d, i) = 1.0;
      }
      Vec target = Vec::Zero(d + 1);
      target[d] = 1.0;
      Vec mu = dual.fullPivLu().solve(target);
      if ((dual * mu - target).norm() <= 1e-8 && mu.minCoeff() >= -1e-9) {
        fit.theta = theta;
        fit.error = err;
        fit.lower_bound = std::max(fit.lower_bound, std::min(t, err));
        return true;
      }
      return false;
    }
    // Swap the entering index for the active point with the smallest residual.
    r = r_new;
    int drop = 0;
    double smallest = std::abs(r[active[0]]);
    for (int i = 1; i <= d; ++i) {
      if (std::abs(r[active[i]]) < smallest) {
        smallest = std::abs(r[active[i]]);
        drop = i;
      }
    }
    if (std::find(active.begin(), active.end(), worst) != active.end()) return false;
    active[drop] = worst;
  }
  return false;
}

// Stacked stage design matrix: one row per (state-in-stage, action).
void stage_regression(const Mdp& mdp, const FeatureTable& ft, const ValueTables& vt,
                      int t, Mat& a, Vec& b) {
  const auto& st = mdp.stages[t];
  const int rows = static_cast<int>(st.size()) * mdp.num_actions;
  a.resize(rows, ft.dim);
  b.resize(rows);
  int r = 0;
  for (int s : st) {
    for (int act = 0; act < mdp.num_actions; ++act, ++r) {
      a.row(r) = ft.phi[s].row(act);
      b[r] = vt.q(s, act);
    }
  }
}
}  // namespace

PolicyParameter fit_policy_parameters(const Mdp& mdp, const FeatureTable& ft,
                                      const MemorylessPolicy& pi) {
  const ValueTables vt = evaluate_policy_exact(mdp, pi);
  PolicyParameter out;
  out.theta.resize(mdp.horizon);
  out.error.resize(mdp.horizon);
  out.gap.resize(mdp.horizon);
  Mat a;
  Vec b;
  for (int t = 0; t < mdp.horizon; ++t) {
    stage_regression(mdp, ft, vt, t, a, b);
    ChebyshevFit fit = chebyshev_fit(a, b, ft.l2_bound);
    out.theta[t] = fit.theta;
    out.error[t] = fit.error;
    out.gap[t] = fit.gap();
  }
  return out;
}

MisspecReport measure_misspecification(const Mdp& mdp, const FeatureTable& ft,
                                       const std::vector<MemorylessPolicy>& sample) {
  if (sample.empty()) throw std::invalid_argument("measure_misspecification: empty sample");
  MisspecReport rep;
  rep.per_policy_stage = Mat::Zero(static_cast<int>(sample.size()), mdp.horizon);
  for (int i = 0; i < static_cast<int>(sample.size()); ++i) {
    PolicyParameter pp = fit_policy_parameters(mdp, ft, sample[i]);
    for (int t = 0; t < mdp.horizon; ++t) rep.per_policy_stage(i, t) = pp.error[t];
  }
  rep.eta_hat = rep.per_policy_stage.maxCoeff();
  rep.sample_description = std::to_string(sample.size()) + " policies";
  return rep;
}

double range_exact(const Mdp& mdp, const FeatureTable& ft, int s,
                   const ThetaSample& thetas) {
  const int t = mdp.stage_of[s];
  if (t >= thetas.stages()) throw std::invalid_argument("range_exact: stage mismatch");
  double best = 0.0;  // i = j always gives 0
  for (const Vec& theta : thetas.per_stage[t]) {
    for (int i = 0; i < mdp.num_actions; ++i) {
      for (int j = 0; j < mdp.num_actions; ++j) {
        best = std::max(best, ft.diff(s, i, j).dot(theta));
      }
    }
  }
  return best;
}

}  // namespace skippy
