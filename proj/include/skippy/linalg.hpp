#pragma once

#include <Eigen/Dense>

namespace skippy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Symmetric PSD matrix functions via eigendecomposition. Eigenvalues below
// `floor_eig` are treated as zero (pinv / projector classification).
Mat psd_sqrt(const Mat& a);
Mat psd_inv_sqrt(const Mat& a);                     // requires PD input
Mat psd_pinv(const Mat& a, double floor_eig = 1e-12);

// Orthogonal projector onto the span of eigenvectors of symmetric `a` with
// eigenvalue >= threshold (absolute comparison, tolerance 1e-12).
Mat eigen_projector_at_least(const Mat& a, double threshold);

double quad_norm(const Vec& x, const Mat& m);       // sqrt(x^T M x), clamped at 0
double quad_norm_sq(const Vec& x, const Mat& m);

// Minimum-norm least squares via complete orthogonal decomposition.
Vec solve_min_norm(const Mat& a, const Vec& b);

// min_{||x|| <= radius} || W^{1/2} (A x - b) ||_2 with diagonal weights w >= 0.
// Standard trust-region style solve: unconstrained solution if inside the
// ball, otherwise Newton on the Lagrange multiplier.
Vec ball_constrained_wls(const Mat& a, const Vec& b, const Vec& w, double radius);

}  // namespace skippy
