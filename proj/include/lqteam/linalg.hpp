#pragma once

#include <Eigen/Dense>

namespace lqteam {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Symmetry test with the scale-aware tolerance ||X - X^T||_max <= 1e-9 (1 + ||X||_max).
inline bool is_symmetric(const Mat& x, double rel = 1e-9) {
  if (x.rows() != x.cols()) return false;
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  return (x - x.transpose()).cwiseAbs().maxCoeff() <= rel * scale;
}

inline double min_eigenvalue(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (x + x.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Mat& x, double eig_tol = 1e-9) {
  return is_symmetric(x) && min_eigenvalue(x) >= -eig_tol;
}

inline bool is_pd(const Mat& x) { return is_symmetric(x) && min_eigenvalue(x) > 0.0; }

inline Mat symmetrize(const Mat& x) { return 0.5 * (x + x.transpose()); }

// Square root of a symmetric PSD matrix via eigendecomposition; negative
// eigenvalues from round-off are clipped at zero. Used to sample Gaussian
// initial states with possibly singular covariance.
inline Mat psd_sqrt(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(x));
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// 2-norm condition number (exact via SVD; fine at desk scale).
inline double condition_number(const Mat& x) {
  Eigen::JacobiSVD<Mat> svd(x);
  const double smin = svd.singularValues().minCoeff();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues().maxCoeff() / smin;
}

}  // namespace lqteam
