#pragma once

#include "nlmech/csr.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nlmech {

struct KrylovConfig {
  double atol = 0.0;
  double rtol = 1e-8;
  int maxIterations = 2000;
};

enum class KrylovStatus { Converged, MaxIterations };

struct KrylovBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GmresResult {
  Vector x;
  int iterations = 0;
  KrylovStatus status = KrylovStatus::Converged;
  std::vector<double> residualHistory;  // true residual norms, monotone
};

/// Restart-free right-preconditioned GMRES with modified Gram-Schmidt.
/// Terminates when ||b - A x|| <= max(atol, rtol ||b||). With right
/// preconditioning the recurred least-squares residual is the true residual,
/// so the Givens residual estimate drives termination directly.
inline GmresResult gmres(const LinearOperator& A, const Vector& b,
                         const Preconditioner* M, const KrylovConfig& cfg) {
  if (A.rows() != A.cols()) throw std::invalid_argument("operator not square");
  if (b.size() != A.rows()) throw std::invalid_argument("rhs size mismatch");
  if (cfg.maxIterations < 1) throw std::invalid_argument("maxIterations < 1");
  const int n = static_cast<int>(b.size());
  const double target = std::max(cfg.atol, cfg.rtol * b.norm());

  GmresResult out;
  out.x = Vector::Zero(n);
  const double beta = b.norm();
  out.residualHistory.push_back(beta);
  if (beta <= target) return out;

  const int m = cfg.maxIterations;
  std::vector<Vector> V;
  V.reserve(16);
  V.push_back(b / beta);
  std::vector<std::vector<double>> H;  // H[j] holds column j (j+2 entries)
  std::vector<double> cs, sn, g;
  g.push_back(beta);

  auto finalize = [&](int k) {
    // back substitution on the k x k triangular system
    Vector y(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j)
        s -= H[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] *
             y[j];
      y[i] = s / H[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    Vector u = Vector::Zero(n);
    for (int j = 0; j < k; ++j) u += y[j] * V[static_cast<std::size_t>(j)];
    if (M) {
      Vector z(n);
      M->apply(u, z);
      out.x = z;
    } else {
      out.x = u;
    }
  };

  for (int j = 0; j < m; ++j) {
    Vector z = V[static_cast<std::size_t>(j)];
    if (M) {
      Vector tmp(n);
      M->apply(V[static_cast<std::size_t>(j)], tmp);
      z = tmp;
    }
    Vector w(n);
    A.apply(z, w);

    std::vector<double> h(static_cast<std::size_t>(j) + 2, 0.0);
    for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
      const double hij = w.dot(V[static_cast<std::size_t>(i)]);
      h[static_cast<std::size_t>(i)] = hij;
      w -= hij * V[static_cast<std::size_t>(i)];
    }
    const double hlast = w.norm();
    h[static_cast<std::size_t>(j) + 1] = hlast;

    // apply the accumulated Givens rotations to the new column
    for (int i = 0; i < j; ++i) {
      const double t = cs[static_cast<std::size_t>(i)] *
                           h[static_cast<std::size_t>(i)] +
                       sn[static_cast<std::size_t>(i)] *
                           h[static_cast<std::size_t>(i) + 1];
      h[static_cast<std::size_t>(i) + 1] =
          -sn[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] +
          cs[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i) + 1];
      h[static_cast<std::size_t>(i)] = t;
    }
    const double denom = std::hypot(h[static_cast<std::size_t>(j)], hlast);
    if (denom < 1e-300) throw KrylovBreakdown("GMRES rotation breakdown");
    cs.push_back(h[static_cast<std::size_t>(j)] / denom);
    sn.push_back(hlast / denom);
    h[static_cast<std::size_t>(j)] = denom;
    const double gj = g[static_cast<std::size_t>(j)];
    g[static_cast<std::size_t>(j)] = cs.back() * gj;
    g.push_back(-sn.back() * gj);
    H.push_back(std::move(h));

    const double res = std::abs(g.back());
    assert(res <= out.residualHistory.back() * (1.0 + 1e-14));
    out.residualHistory.push_back(res);
    out.iterations = j + 1;

    if (res <= target) {
      finalize(j + 1);
      return out;
    }
    if (hlast < 1e-30)
      throw KrylovBreakdown("GMRES Hessenberg subdiagonal breakdown");
    V.push_back(w / hlast);
  }
  finalize(m);
  out.status = KrylovStatus::MaxIterations;
  return out;
}

}  // namespace nlmech
