#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace afem {

/// Quadrature rule on a triangle in barycentric coordinates. Weights sum to
/// one; multiply by the element area when integrating.
template <typename Scalar>
struct QuadratureRule {
  using Points = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
  using Weights = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Points barycentric;  ///< column q holds (lambda_0, lambda_1, lambda_2)
  Weights weights;
  int degree = 0;

  Eigen::Index size() const { return weights.size(); }
};

using QuadRule = QuadratureRule<double>;

namespace detail {

/// Gauss nodes/weights on [-1,1] for the Jacobi weight (1-t)^alpha (1+t)^beta,
/// computed from the eigen-decomposition of the Jacobi matrix.
template <typename Scalar>
void gauss_jacobi(int n, Scalar alpha, Scalar beta,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& nodes,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using std::sqrt;
  using std::tgamma;
  using std::pow;
  Matrix jacobi = Matrix::Zero(n, n);
  const Scalar ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const Scalar two_k_ab = Scalar(2 * k) + ab;
    jacobi(k, k) = (k == 0 && ab == Scalar(0))
                       ? (beta - alpha) / (ab + Scalar(2))
                       : (beta * beta - alpha * alpha) / (two_k_ab * (two_k_ab + Scalar(2)));
    if (k + 1 < n) {
      const Scalar j = Scalar(k + 1);
      const Scalar t = Scalar(2) * j + ab;
      const Scalar off = sqrt(Scalar(4) * j * (j + alpha) * (j + beta) * (j + ab) /
                              (t * t * (t + Scalar(1)) * (t - Scalar(1))));
      jacobi(k, k + 1) = off;
      jacobi(k + 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  const Scalar mu0 = pow(Scalar(2), ab + Scalar(1)) * tgamma(alpha + Scalar(1)) * tgamma(beta + Scalar(1)) /
                     tgamma(ab + Scalar(2));
  nodes = eig.eigenvalues();
  weights = mu0 * eig.eigenvectors().row(0).transpose().array().square().matrix();
}

}  // namespace detail

/// Collapsed tensor rule exact for bivariate polynomials up to `degree`
/// (1..20). Uses ceil((degree+1)/2) points per direction: Gauss-Jacobi(1,0)
/// along the collapsed direction absorbs the Duffy Jacobian, Gauss-Legendre
/// along the other.
template <typename Scalar = double>
QuadratureRule<Scalar> quad_rule(int degree) {
  if (degree < 1 || degree > 20) {
    throw std::invalid_argument("quad_rule: unsupported degree " + std::to_string(degree));
  }
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int n = (degree + 2) / 2;
  Vector ts, ws, tr, wr;
  detail::gauss_jacobi<Scalar>(n, Scalar(1), Scalar(0), ts, ws);
  detail::gauss_jacobi<Scalar>(n, Scalar(0), Scalar(0), tr, wr);

  QuadratureRule<Scalar> rule;
  rule.degree = degree;
  rule.barycentric.resize(3, n * n);
  rule.weights.resize(n * n);
  int q = 0;
  for (int i = 0; i < n; ++i) {
    const Scalar s = (Scalar(1) + ts(i)) / Scalar(2);
    // int_0^1 h(s)(1-s) ds = sum ws/4 h(s); the reference area 1/2 is
    // normalized away, hence the extra factor 2
    const Scalar wsi = ws(i) / Scalar(2);
    for (int j = 0; j < n; ++j) {
      const Scalar r = (Scalar(1) + tr(j)) / Scalar(2);
      const Scalar x = s;
      const Scalar y = (Scalar(1) - s) * r;
      rule.barycentric(0, q) = Scalar(1) - x - y;
      rule.barycentric(1, q) = x;
      rule.barycentric(2, q) = y;
      rule.weights(q) = wsi * wr(j) / Scalar(2);
      ++q;
    }
  }
  return rule;
}

}  // namespace afem
