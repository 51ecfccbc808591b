#include "skippy/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace skippy {

namespace {
Eigen::SelfAdjointEigenSolver<Mat> eig_of(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  return es;
}
}  // namespace

Mat psd_sqrt(const Mat& a) {
  auto es = eig_of(a);
  Vec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat psd_inv_sqrt(const Mat& a) {
  auto es = eig_of(a);
  Vec d = es.eigenvalues();
  if (d.minCoeff() <= 0.0) {
    throw std::runtime_error("psd_inv_sqrt: matrix is not positive definite");
  }
  Vec inv = d.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Mat psd_pinv(const Mat& a, double floor_eig) {
  auto es = eig_of(a);
  Vec d = es.eigenvalues();
  Vec inv = Vec::Zero(d.size());
  const double cutoff = floor_eig * std::max(1.0, d.cwiseAbs().maxCoeff());
  for (int i = 0; i < d.size(); ++i) {
    if (d[i] > cutoff) inv[i] = 1.0 / d[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Mat eigen_projector_at_least(const Mat& a, double threshold) {
  auto es = eig_of(a);
  const Vec& d = es.eigenvalues();
  Vec sel = Vec::Zero(d.size());
  for (int i = 0; i < d.size(); ++i) {
    if (d[i] >= threshold - 1e-12) sel[i] = 1.0;
  }
  return es.eigenvectors() * sel.asDiagonal() * es.eigenvectors().transpose();
}

double quad_norm_sq(const Vec& x, const Mat& m) {
  return std::max(0.0, x.dot(m * x));
}

double quad_norm(const Vec& x, const Mat& m) { return std::sqrt(quad_norm_sq(x, m)); }

Vec solve_min_norm(const Mat& a, const Vec& b) {
  return a.completeOrthogonalDecomposition().solve(b);
}

Vec ball_constrained_wls(const Mat& a, const Vec& b, const Vec& w, double radius) {
  const int d = static_cast<int>(a.cols());
  Mat g = Mat::Zero(d, d);
  Vec h = Vec::Zero(d);
  for (int i = 0; i < a.rows(); ++i) {
    g.noalias() += w[i] * a.row(i).transpose() * a.row(i);
    h.noalias() += w[i] * b[i] * a.row(i).transpose();
  }
  auto es = eig_of(g);
  Vec lam = es.eigenvalues();
  Vec hb = es.eigenvectors().transpose() * h;

  auto x_of = [&](double mu) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = hb[i] / (lam[i] + mu);
    return y;
  };
  // Unconstrained solution if in the ball.
  {
    double eps = 1e-14 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    Vec y = Vec::Zero(d);
    bool singular = false;
    for (int i = 0; i < d; ++i) {
      if (lam[i] > eps) {
        y[i] = hb[i] / lam[i];
      } else if (std::abs(hb[i]) > eps) {
        singular = true;  // unbounded direction, fall through to constrained
      }
    }
    if (!singular && y.norm() <= radius) {
      return es.eigenvectors() * y;
    }
  }
  // Bisection + Newton on phi(mu) = ||x(mu)|| - radius, decreasing in mu.
  double lo = 0.0, hi = 1.0;
  while (x_of(hi).norm() > radius) hi *= 4.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (x_of(mid).norm() > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return es.eigenvectors() * x_of(hi);
}

}  // namespace skippy
