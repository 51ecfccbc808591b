#include "skippy/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace skippy {

Mat q_from_sequence(const std::vector<Vec>& directions, double l2, int dim) {
  if (l2 <= 0.0) throw std::invalid_argument("q_from_sequence: L2 must be positive");
  if (dim < 0) dim = directions.empty() ? 0 : static_cast<int>(directions.front().size());
  if (dim == 0) throw std::invalid_argument("q_from_sequence: empty dimension");
  Mat base = Mat::Identity(dim, dim) / (l2 * l2);
  for (const Vec& v : directions) base.noalias() += v * v.transpose();
  return psd_inv_sqrt(base);
}

Preconditioning Preconditioning::initial(int dim, int horizon, double l2, double l3) {
  Preconditioning pc;
  pc.l2 = l2;
  pc.l3 = l3;
  pc.directions.resize(horizon);
  pc.q.assign(horizon, l2 * Mat::Identity(dim, dim));
  return pc;
}

Mat Preconditioning::base_matrix(int h) const {
  Mat base = Mat::Identity(dim(), dim()) / (l2 * l2);
  for (const Vec& v : directions[h]) base.noalias() += v * v.transpose();
  return base;
}

void Preconditioning::append_direction(int h, const Vec& w) {
  if (w.norm() == 0.0) throw std::invalid_argument("append_direction: zero direction");
  Mat q_inv = q[h].ldlt().solve(Mat::Identity(dim(), dim()));
  Vec v = q_inv * w;
  directions[h].push_back(v);
  Mat new_base = q_inv * q_inv + v * v.transpose();
  q[h] = psd_inv_sqrt(new_base);
}

std::vector<std::string> validate_preconditioning(const Preconditioning& pc,
                                                  const ThetaSample& thetas,
                                                  double d1, double tol) {
  std::vector<std::string> report;
  const double bound = std::sqrt(d1 + 1.0);
  for (int h = 0; h < pc.horizon(); ++h) {
    const auto& seq = pc.directions[h];
    if (static_cast<double>(seq.size()) > d1 + 1e-9) {
      report.push_back("stage " + std::to_string(h + 1) + ": |C_h| exceeds d1");
    }
    Mat prefix = Mat::Identity(pc.dim(), pc.dim()) / (pc.l2 * pc.l2);
    for (size_t i = 0; i < seq.size(); ++i) {
      const Vec& v = seq[i];
      double sup_ip = 0.0;
      if (h < thetas.stages()) {
        for (const Vec& theta : thetas.per_stage[h]) {
          sup_ip = std::max(sup_ip, std::abs(theta.dot(v)));
        }
      }
      if (sup_ip > 1.0 + tol) {
        report.push_back("stage " + std::to_string(h + 1) + " direction " +
                         std::to_string(i + 1) + ": sup |<theta,v>| = " +
                         std::to_string(sup_ip) + " > 1");
      }
      const double informative = (psd_inv_sqrt(prefix) * v).squaredNorm();
      if (informative < 0.5 - tol) {
        report.push_back("stage " + std::to_string(h + 1) + " direction " +
                         std::to_string(i + 1) + ": prefix-whitened norm^2 = " +
                         std::to_string(informative) + " < 1/2");
      }
      if (v.norm() > pc.l3 + tol) {
        report.push_back("stage " + std::to_string(h + 1) + " direction " +
                         std::to_string(i + 1) + ": ||v|| exceeds L3");
      }
      prefix.noalias() += v * v.transpose();
    }
    if (h < thetas.stages()) {
      const Mat q_inv_sq = pc.base_matrix(h);
      for (const Vec& theta : thetas.per_stage[h]) {
        const double norm = quad_norm(theta, q_inv_sq);
        if (norm > bound + tol) {
          report.push_back("stage " + std::to_string(h + 1) +
                           ": ellipsoid bound violated, ||theta||_{Q^-2} = " +
                           std::to_string(norm));
        }
      }
    }
  }
  return report;
}

Mat z_projector(const Preconditioning& pc, int h) {
  return eigen_projector_at_least(pc.q[h], 1.0 / (pc.l3 * pc.l3));
}

namespace {

// Leverage of point i under weights w restricted to the span basis.
struct SubspaceDesign {
  Mat basis;        // dim x r, orthonormal columns spanning the points
  Mat pts;          // r x m, projected points
  int r = 0, m = 0;
};

SubspaceDesign project_to_span(const std::vector<Vec>& points) {
  SubspaceDesign sd;
  const int dim = static_cast<int>(points.front().size());
  sd.m = static_cast<int>(points.size());
  Mat all(dim, sd.m);
  for (int i = 0; i < sd.m; ++i) all.col(i) = points[i];
  Eigen::JacobiSVD<Mat> svd(all, Eigen::ComputeThinU);
  const double cut = 1e-10 * std::max(1.0, svd.singularValues().maxCoeff());
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > cut) ++r;
  }
  sd.r = r;
  sd.basis = svd.matrixU().leftCols(r);
  sd.pts = sd.basis.transpose() * all;
  return sd;
}

}  // namespace

DesignSet compute_near_optimal_design(const std::vector<Vec>& points, int d0,
                                      const DesignOptions& opts) {
  DesignSet ds;
  if (points.empty()) return ds;
  const int dim = static_cast<int>(points.front().size());
  const double d = static_cast<double>(dim);

  bool all_zero = true;
  for (const Vec& p : points) {
    if (p.norm() > 1e-14) all_zero = false;
  }
  if (all_zero) {
    // Degenerate sample: empty design, V = 0, everything projects to zero.
    ds.v = Mat::Zero(dim, dim);
    ds.v_pinv = Mat::Zero(dim, dim);
    ds.p_parallel = Mat::Zero(dim, dim);
    ds.p_perp = Mat::Identity(dim, dim);
    ds.weights = Vec::Zero(0);
    return ds;
  }

  SubspaceDesign sd = project_to_span(points);

  // Greedy linearly independent warm start.
  std::vector<int> support;
  {
    Mat picked(sd.r, 0);
    for (int i = 0; i < sd.m && static_cast<int>(support.size()) < sd.r; ++i) {
      Mat cand(sd.r, picked.cols() + 1);
      cand << picked, sd.pts.col(i);
      Eigen::JacobiSVD<Mat> svd(cand);
      const double smin = svd.singularValues().minCoeff();
      if (smin > 1e-9 * std::max(1.0, svd.singularValues().maxCoeff())) {
        support.push_back(i);
        picked = cand;
      }
    }
  }
  Vec w = Vec::Zero(sd.m);
  for (int i : support) w[i] = 1.0 / static_cast<double>(support.size());

  auto design_matrix = [&](const Vec& weights) {
    Mat v = Mat::Zero(sd.r, sd.r);
    for (int i = 0; i < sd.m; ++i) {
      if (weights[i] > 0.0) v.noalias() += weights[i] * sd.pts.col(i) * sd.pts.col(i).transpose();
    }
    return v;
  };

  // Frank-Wolfe on log det V with Wolfe step sizes.
  double max_lev = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Mat v_inv = design_matrix(w).ldlt().solve(Mat::Identity(sd.r, sd.r));
    int arg = 0;
    max_lev = -1.0;
    for (int i = 0; i < sd.m; ++i) {
      const double lev = sd.pts.col(i).dot(v_inv * sd.pts.col(i));
      if (lev > max_lev) {
        max_lev = lev;
        arg = i;
      }
    }
    if (max_lev <= 2.0 * d - opts.margin) break;
    // Also stop at the D-optimal certificate: max leverage close to r.
    if (max_lev <= sd.r + 1e-9) break;
    const double step = (max_lev / sd.r - 1.0) / (max_lev - 1.0);
    w *= (1.0 - step);
    w[arg] += step;
  }
  if (max_lev > 2.0 * d - opts.margin && max_lev > sd.r + 1e-9) {
    std::ostringstream oss;
    oss << "compute_near_optimal_design: Frank-Wolfe stalled with max leverage "
        << max_lev << " > 2d = " << 2.0 * d;
    throw std::runtime_error(oss.str());
  }

  // Support reduction: drop the smallest weights while the sample still
  // satisfies the 2d leverage bound.
  std::vector<int> active;
  for (int i = 0; i < sd.m; ++i) {
    if (w[i] > 1e-12) active.push_back(i);
  }
  auto sample_ok = [&](const std::vector<int>& idx, const Vec& weights) {
    Mat v = Mat::Zero(sd.r, sd.r);
    for (int i : idx) v.noalias() += weights[i] * sd.pts.col(i) * sd.pts.col(i).transpose();
    Eigen::JacobiSVD<Mat> svd(v);
    if (svd.singularValues().minCoeff() <
        1e-12 * std::max(1.0, svd.singularValues().maxCoeff())) {
      return false;  // rank dropped: kernel condition would fail on the sample
    }
    Mat v_inv = v.ldlt().solve(Mat::Identity(sd.r, sd.r));
    for (int i = 0; i < sd.m; ++i) {
      if (sd.pts.col(i).dot(v_inv * sd.pts.col(i)) > 2.0 * d - 0.5 * opts.margin) {
        return false;
      }
    }
    return true;
  };
  std::sort(active.begin(), active.end(), [&](int a, int b) { return w[a] < w[b]; });
  size_t cursor = 0;
  while (static_cast<int>(active.size()) > std::max(d0, 1) && cursor < active.size()) {
    std::vector<int> trial;
    for (size_t i = 0; i < active.size(); ++i) {
      if (i != cursor) trial.push_back(active[i]);
    }
    Vec tw = Vec::Zero(sd.m);
    double total = 0.0;
    for (int i : trial) total += w[i];
    for (int i : trial) tw[i] = w[i] / total;
    if (sample_ok(trial, tw)) {
      active = trial;
      for (int i = 0; i < sd.m; ++i) w[i] = tw[i];
      cursor = 0;
    } else {
      ++cursor;
    }
  }

  std::sort(active.begin(), active.end(), [&](int a, int b) { return w[a] > w[b]; });
  if (static_cast<int>(active.size()) > d0) {
    throw std::runtime_error(
        "compute_near_optimal_design: support reduction failed to reach d0");
  }

  ds.support_size = static_cast<int>(active.size());
  ds.weights = Vec::Zero(std::max<int>(d0, ds.support_size));
  for (int i = 0; i < ds.support_size; ++i) {
    ds.points.push_back(points[active[i]]);
    ds.support_indices.push_back(active[i]);
    ds.weights[i] = w[active[i]];
  }
  // Pad to exactly d0 entries by repeating the heaviest point at zero weight;
  // V and the range maxima are unaffected.
  while (static_cast<int>(ds.points.size()) < d0) {
    ds.points.push_back(ds.points.front());
    ds.support_indices.push_back(ds.support_indices.front());
  }

  ds.v = Mat::Zero(dim, dim);
  for (int i = 0; i < ds.support_size; ++i) {
    ds.v.noalias() += ds.weights[i] * ds.points[i] * ds.points[i].transpose();
  }
  ds.v_pinv = psd_pinv(ds.v);
  return ds;
}

void parallel_perp_projectors(DesignSet& design, double gamma) {
  design.gamma = gamma;
  const int dim = static_cast<int>(design.v.rows());
  if (dim == 0) return;
  design.p_parallel = eigen_projector_at_least(design.v, gamma);
  design.p_perp = Mat::Identity(dim, dim) - design.p_parallel;
}

std::vector<DesignSet> designs_for_preconditioning(const Preconditioning& pc,
                                                   const ThetaSample& thetas,
                                                   int d0, double gamma) {
  std::vector<DesignSet> out(pc.horizon());
  for (int h = 0; h < pc.horizon(); ++h) {
    if (h >= thetas.stages()) continue;
    Mat q_inv_factor;  // Q_h^{-1} theta for each sampled theta
    std::vector<Vec> pts;
    pts.reserve(thetas.per_stage[h].size());
    auto solver = pc.q[h].ldlt();
    for (const Vec& theta : thetas.per_stage[h]) {
      pts.push_back(solver.solve(theta));
    }
    if (pts.empty()) continue;
    out[h] = compute_near_optimal_design(pts, d0);
    for (const Vec& p : out[h].points) out[h].points_orig.push_back(pc.q[h] * p);
    parallel_perp_projectors(out[h], gamma);
  }
  return out;
}

double range_q(const Mdp& mdp, const FeatureTable& ft, int s,
               const std::vector<DesignSet>& designs) {
  const int t = mdp.stage_of[s];
  if (t >= static_cast<int>(designs.size())) {
    throw std::invalid_argument("range_q: stage mismatch");
  }
  double best = 0.0;
  for (const Vec& theta : designs[t].points_orig) {
    for (int i = 0; i < mdp.num_actions; ++i) {
      for (int j = 0; j < mdp.num_actions; ++j) {
        best = std::max(best, ft.diff(s, i, j).dot(theta));
      }
    }
  }
  return best;
}

Vec precondition_feature_at(const FeatureTable& ft, const Preconditioning& pc,
                            const Mdp& mdp, int s, int a) {
  return pc.q[mdp.stage_of[s]] * ft.at(s, a);
}

Vec precondition_parameter(const Vec& theta, const Preconditioning& pc, int h) {
  return pc.q[h].ldlt().solve(theta);
}

namespace {

struct TheoryState {
  double d0, d1, omega, gamma, beta, alpha, lambda, n, m_max, mprime_max, l3;
  double eta_bound, eta0, xi;
};

double compute_d0(double d) {
  const double raw = 4.0 * d * std::log(std::log(std::max(d, 3.0)));
  return std::max(16.0, std::ceil(raw) + 16.0);
}

double compute_d1(double d, double l2, double l3) {
  const double x = l3 * l3 * l2 * l2;
  const double inner = (x > 1e120) ? std::log(16.0) + 2.0 * std::log(x)
                                   : std::log1p(16.0 * x * x);
  return std::ceil(4.0 * d * inner);
}

}  // namespace

ConstantSet compute_constants(int d_in, int horizon_in, double eps, double zeta,
                              double l1, double l2, ConstantMode mode,
                              const PracticalOverrides& overrides) {
  if (d_in <= 0 || horizon_in <= 0 || eps <= 0 || zeta <= 0 || l1 <= 0 || l2 <= 0) {
    throw std::invalid_argument("compute_constants: inputs must be positive");
  }
  const double d = d_in, h = horizon_in;

  TheoryState st{};
  st.d0 = compute_d0(d);
  st.gamma = 1.0 / (8.0 * d);
  st.l3 = 1.0;
  st.d1 = compute_d1(d, l2, st.l3);
  st.n = 1.0;
  st.m_max = 1.0;
  st.mprime_max = 1.0;
  st.beta = 1.0;

  int rounds = 0;
  for (; rounds < 100; ++rounds) {
    TheoryState prev = st;

    st.omega = 7.0 * (st.d1 + 1.0) + 7.0 / 3.0;
    st.alpha = std::sqrt(st.gamma) * eps /
               (std::sqrt(2.0 * d) * std::sqrt(st.d1 + 1.0) * h * h);
    st.lambda = std::pow(st.alpha / (4.0 * st.d0 * l2), 2);

    st.n = std::ceil(64.0 * std::pow(d * h * h * st.omega / eps, 2) * h * h *
                     (2.0 * d * std::log(18.0 * d * h * h * h / eps) +
                      std::log(2.0 * st.mprime_max * h * h / zeta)));

    // eta smallness bound and the corresponding eta0 = 5 d0 eta / alpha.
    st.eta_bound =
        st.alpha / (10.0 * st.d0) *
        std::min(eps / (d * h * h * h * st.omega), 1.0 / std::sqrt(st.mprime_max * st.n * h));
    st.eta0 = 5.0 * st.d0 * st.eta_bound / st.alpha;
    st.xi = eps / (5.0 * std::sqrt(2.0 * d) * std::pow(h + 1.0, 3) * l1) *
            (std::min(eps / (d * h * h * st.omega), 1.0 / std::sqrt(st.mprime_max * st.n * h)) -
             st.eta0);

    st.beta = 2.0 + 2.0 * h *
                        std::sqrt(2.0 * d * h * (st.d0 + 1.0) *
                                      std::log(12.0 * st.d0 * h * l2 / (st.alpha * st.xi)) +
                                  2.0 * std::log(st.mprime_max * h * h / zeta) +
                                  d * std::log(st.lambda + st.mprime_max * st.n * h * l1 * l1 / d));

    // m_max is its own fixed point through the log term.
    double m = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double next =
          st.beta * st.beta * std::log(1.0 + h * m * st.n * l1 * l1 / (d * st.lambda)) + 1.0;
      if (std::abs(next - m) < 0.5) {
        m = next;
        break;
      }
      m = next;
    }
    st.m_max = std::ceil(m);
    st.mprime_max = st.m_max + h * st.d1;

    // Smallest L3 satisfying the projection-error budget
    // 8 L3^{-2} L1 sqrt(d1+1) sqrt(2d) H^2/eps (1 + L1 lambda^{-1/2}
    // sqrt(m_max n H d)) <= eps/(d H^2 omega).
    const double lhs_no_l3 = 8.0 * l1 * std::sqrt(st.d1 + 1.0) * std::sqrt(2.0 * d) * h * h /
                             eps *
                             (1.0 + l1 / std::sqrt(st.lambda) * std::sqrt(st.m_max * st.n * h * d));
    st.l3 = std::sqrt(lhs_no_l3 * d * h * h * st.omega / eps);
    st.d1 = compute_d1(d, l2, st.l3);

    const bool stable = std::abs(prev.d1 - st.d1) < 1.0 &&
                        std::abs(prev.m_max - st.m_max) < 1.0 &&
                        std::abs(prev.n - st.n) < 1.0 &&
                        std::abs(prev.l3 - st.l3) <= 1e-9 * std::max(1.0, prev.l3);
    if (stable && rounds > 1) break;
  }
  if (rounds >= 100) {
    throw std::runtime_error("compute_constants: fixed point did not converge in 100 rounds");
  }

  ConstantSet cs;
  cs.d = d;
  cs.horizon = h;
  cs.eps = eps;
  cs.zeta = zeta;
  cs.l1 = l1;
  cs.l2 = l2;
  cs.mode = mode;
  cs.overrides = overrides;
  cs.d0 = st.d0;
  cs.d1 = st.d1;
  cs.omega = st.omega;
  cs.gamma = st.gamma;
  cs.beta = st.beta;
  cs.alpha = st.alpha;
  cs.lambda = st.lambda;
  cs.n = st.n;
  cs.m_max = st.m_max;
  cs.mprime_max = st.mprime_max;
  cs.l3 = st.l3;
  cs.eta_bound = st.eta_bound;
  cs.eta0 = st.eta0;
  cs.xi = st.xi;
  cs.fixed_point_rounds = rounds + 1;

  if (mode == ConstantMode::kPractical) {
    auto apply = [](double& target, double value) {
      if (!std::isnan(value)) target = value;
    };
    apply(cs.n, overrides.n);
    apply(cs.beta, overrides.beta);
    cs.omega = std::isnan(overrides.omega) ? 7.0 + 7.0 / 3.0 : overrides.omega;
    apply(cs.lambda, overrides.lambda);
    apply(cs.m_max, overrides.m_max);
    cs.mprime_max = cs.m_max + h * cs.d1;
    cs.discrepancy_scale = overrides.discrepancy_threshold_scale;
  }

  cs.uncertainty_threshold = eps / (d * h * h * cs.beta * cs.omega);
  if (mode == ConstantMode::kPractical) {
    cs.uncertainty_threshold *= overrides.uncertainty_threshold_scale;
  }
  cs.discrepancy_base = 3.0 * eps / (d * h * h);
  return cs;
}

std::string ConstantSet::report() const {
  std::ostringstream os;
  os.precision(12);
  os << "mode " << (mode == ConstantMode::kTheory ? "theory" : "practical") << "\n";
  os << "d " << d << "\nH " << horizon << "\neps " << eps << "\nzeta " << zeta << "\n";
  os << "L1 " << l1 << "\nL2 " << l2 << "\nL3 " << l3 << "\n";
  os << "d0 " << d0 << "\nd1 " << d1 << "\nomega " << omega << "\ngamma " << gamma << "\n";
  os << "beta " << beta << "\nalpha " << alpha << "\nlambda " << lambda << "\n";
  os << "n " << n << "\nm_max " << m_max << "\nmprime_max " << mprime_max << "\n";
  os << "eta_bound " << eta_bound << "\neta0 " << eta0 << "\nxi " << xi << "\n";
  os << "uncertainty_threshold " << uncertainty_threshold << "\n";
  os << "discrepancy_base " << discrepancy_base << "\n";
  os << "fixed_point_rounds " << fixed_point_rounds << "\n";
  if (mode == ConstantMode::kPractical) {
    os << "override.n " << overrides.n << "\noverride.beta " << overrides.beta << "\n";
    os << "override.omega " << omega << "\noverride.lambda " << lambda << "\n";
    os << "override.m_max " << m_max << "\n";
    os << "override.uncertainty_threshold_scale " << overrides.uncertainty_threshold_scale
       << "\n";
    os << "override.discrepancy_threshold_scale " << overrides.discrepancy_threshold_scale
       << "\n";
  }
  return os.str();
}

}  // namespace skippy
