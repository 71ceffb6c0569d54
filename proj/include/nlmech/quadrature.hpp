#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nlmech {

/// Quadrature rule on the reference tetrahedron (barycentric points) or the
/// reference triangle. Weights are positive and sum to the reference volume
/// (1/6 for the tet, 1/2 for the triangle).
struct QuadratureRule {
  std::vector<std::array<double, 4>> points;  // barycentric; triangles use 3
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

namespace detail {

// Gauss nodes/weights on [0,1] for the weight function (1-x)^alpha via
// Golub-Welsch on the Jacobi recurrence.
inline void gauss_jacobi01(int n, int alpha, std::vector<double>& x,
                           std::vector<double>& w) {
  const double a = 0.0;                       // (1-s)^a on [-1,1]
  const double b = static_cast<double>(alpha);  // (1+s)^b on [-1,1]
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double diag;
    if (k == 0)
      diag = (b - a) / (a + b + 2.0);
    else {
      const double q = 2.0 * k + a + b;
      diag = (b * b - a * a) / (q * (q + 2.0));
    }
    J(k, k) = diag;
    if (k + 1 < n) {
      const double kk = k + 1.0;
      const double q = 2.0 * kk + a + b;
      const double num = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b);
      const double den = q * q * (q + 1.0) * (q - 1.0);
      J(k, k + 1) = J(k + 1, k) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  // mu0 = integral of (1-s)^a (1+s)^b over [-1,1] = 2^(a+b+1) B(a+1, b+1)
  double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) *
               std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    const double s = es.eigenvalues()(k);
    x[k] = (1.0 - s) / 2.0;  // maps (1+s)^b to (1-x)^alpha on [0,1]
    const double v0 = es.eigenvectors()(0, k);
    w[k] = mu0 * v0 * v0 / std::pow(2.0, a + b + 1.0);
  }
}

}  // namespace detail

/// Conical-product rule on the tet, exact for total degree <= 2n-1.
inline QuadratureRule tet_conical_rule(int n) {
  std::vector<double> xu, wu, xv, wv, xw, ww;
  detail::gauss_jacobi01(n, 2, xu, wu);
  detail::gauss_jacobi01(n, 1, xv, wv);
  detail::gauss_jacobi01(n, 0, xw, ww);
  QuadratureRule rule;
  rule.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = xu[i];
        const double y = xv[j] * (1.0 - xu[i]);
        const double z = xw[k] * (1.0 - xu[i]) * (1.0 - xv[j]);
        rule.points.push_back({1.0 - x - y - z, x, y, z});
        rule.weights.push_back(wu[i] * wv[j] * ww[k]);
      }
  return rule;
}

/// Tet rule of at least the requested exactness degree.
inline QuadratureRule tet_quadrature(int degree) {
  if (degree < 0) throw std::invalid_argument("quadrature degree < 0");
  if (degree <= 1) {
    QuadratureRule r;
    r.degree = 1;
    r.points.push_back({0.25, 0.25, 0.25, 0.25});
    r.weights.push_back(1.0 / 6.0);
    return r;
  }
  if (degree == 2) {
    // classic 4-point rule
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    QuadratureRule r;
    r.degree = 2;
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> p = {b, b, b, b};
      p[i] = a;
      r.points.push_back(p);
      r.weights.push_back(1.0 / 24.0);
    }
    return r;
  }
  return tet_conical_rule((degree + 2) / 2);
}

/// Conical-product rule on the triangle, exact for total degree <= 2n-1.
inline QuadratureRule tri_conical_rule(int n) {
  std::vector<double> xu, wu, xv, wv;
  detail::gauss_jacobi01(n, 1, xu, wu);
  detail::gauss_jacobi01(n, 0, xv, wv);
  QuadratureRule rule;
  rule.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = xu[i];
      const double y = xv[j] * (1.0 - xu[i]);
      rule.points.push_back({1.0 - x - y, x, y, 0.0});
      rule.weights.push_back(wu[i] * wv[j]);
    }
  return rule;
}

/// Triangle rule of at least the requested exactness degree.
inline QuadratureRule tri_quadrature(int degree) {
  if (degree < 0) throw std::invalid_argument("quadrature degree < 0");
  if (degree <= 1) {
    QuadratureRule r;
    r.degree = 1;
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0});
    r.weights.push_back(0.5);
    return r;
  }
  if (degree == 2) {
    QuadratureRule r;
    r.degree = 2;
    for (int i = 0; i < 3; ++i) {
      std::array<double, 4> p = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0};
      p[i] = 2.0 / 3.0;
      r.points.push_back(p);
      r.weights.push_back(1.0 / 6.0);
    }
    return r;
  }
  return tri_conical_rule((degree + 2) / 2);
}

}  // namespace nlmech
