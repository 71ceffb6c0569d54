#pragma once

// Constitutive models: energy density, first Piola stress and the fourth
// order tangent dP/dF, all with hand-derived closed forms. Every tangent in
// here is covered by the finite-difference checks in fd_verify.

#include "nlmech/fibers.hpp"
#include "nlmech/types.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace nlmech {

struct DeformationState {
  Mat3 F = Mat3::Identity();
  double p = 0.0;  // pressure, used by the mixed model only
};

struct PointResponse {
  double energy = 0.0;
  Mat3 P = Mat3::Zero();
  Tensor4 tangent;               // dP/dF
  double constraintResidual = 0.0;  // J - 1 (mixed model)
  Mat3 dPdp = Mat3::Zero();         // dP/dp (mixed model)
};

struct NeoHookeanParams {
  double c1 = 0.0;  // mu / 2
  double k = 0.0;   // lambda + (2/3) mu

  static NeoHookeanParams fromMuNu(double mu, double nu) {
    if (mu <= 0.0 || nu <= 0.0 || nu >= 0.5)
      throw std::invalid_argument("need mu > 0 and nu in (0, 0.5)");
    const double lambda = 2.0 * mu * nu / (1.0 - 2.0 * nu);
    return {mu / 2.0, lambda + (2.0 / 3.0) * mu};
  }
};

struct TwistParams {
  double alphaP = 9000.0;
  double betaP = 9000.0;
  double alphaS = 9000.0;
  double betaS = 9000.0;
};

struct GuccioneParams {
  double C = 2e3;
  double B = 5e4;
  double bff = 8.0, bss = 2.0, bnn = 2.0;
  double bfs = 4.0, bfn = 4.0, bsn = 2.0;
};

struct ActivationParams {
  double peak = 1e4;    // C_PA
  double period = 0.8;  // T
};

/// gamma(t) = C_PA * max(sin(2 pi t / T), 0)
inline double activation(double t, const ActivationParams& params) {
  if (params.period <= 0.0) throw std::invalid_argument("period must be > 0");
  return params.peak *
         std::max(std::sin(2.0 * std::numbers::pi * t / params.period), 0.0);
}

namespace detail {

inline double checked_det(const Mat3& F) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw NonPhysicalState("det F <= 0");
  return J;
}

// w * dF^{-T}_{iJ}/dF_kL = -w * Finv_{Jk} Finv_{Li}
inline void addInvDerivative(Tensor4& t, const Mat3& Finv, double w) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          t(i, j, k, l) -= w * Finv(j, k) * Finv(l, i);
}

inline void addIdentity4(Tensor4& t, double w) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j, i, j) += w;
}

}  // namespace detail

/// Almost incompressible Neo-Hooke:
///   psi = C1 (J^{-2/3} tr(F^T F) - 3) + k (J^2 - 1 - 2 log J)
inline PointResponse eval_neo_hookean(const DeformationState& state,
                                      const NeoHookeanParams& mp) {
  const Mat3& F = state.F;
  const double J = detail::checked_det(F);
  const Mat3 Finv = F.inverse();
  const Mat3 FiT = Finv.transpose();
  const double I1 = F.squaredNorm();
  const double Jm23 = std::pow(J, -2.0 / 3.0);

  PointResponse r;
  r.energy = mp.c1 * (Jm23 * I1 - 3.0) +
             mp.k * (J * J - 1.0 - 2.0 * std::log(J));

  const double c = 2.0 * mp.c1 * Jm23;
  const double g = 2.0 * mp.k * (J * J - 1.0);
  const Mat3 dev = F - (I1 / 3.0) * FiT;
  r.P = c * dev + g * FiT;

  addOuter(r.tangent, dev, FiT, -(2.0 / 3.0) * c);
  detail::addIdentity4(r.tangent, c);
  addOuter(r.tangent, FiT, F, -(2.0 / 3.0) * c);
  detail::addInvDerivative(r.tangent, Finv, -c * I1 / 3.0);
  addOuter(r.tangent, FiT, FiT, 4.0 * mp.k * J * J);
  detail::addInvDerivative(r.tangent, Finv, g);
  return r;
}

/// Incompressible polyconvex model with pressure multiplier:
///   psi = aP (F:F - 3) + bP (cof F : cof F - 3)
///         - (4 bS + 2 aS) log(det F) - p (det F - 1)
inline PointResponse eval_twist(const DeformationState& state,
                                const TwistParams& mp) {
  const Mat3& F = state.F;
  const double J = detail::checked_det(F);
  const Mat3 Finv = F.inverse();
  const Mat3 FiT = Finv.transpose();
  const double p = state.p;
  const double m = 4.0 * mp.betaS + 2.0 * mp.alphaS;

  const Mat3 cof = J * FiT;
  const double s = Finv.squaredNorm();     // F^{-T} : F^{-T}
  const Mat3 G = FiT * Finv * FiT;
  const Mat3 W = FiT * Finv;
  const Mat3 V = Finv * FiT;

  PointResponse r;
  r.energy = mp.alphaP * (F.squaredNorm() - 3.0) +
             mp.betaP * (cof.squaredNorm() - 3.0) - m * std::log(J) -
             p * (J - 1.0);
  r.P = 2.0 * mp.alphaP * F + 2.0 * mp.betaP * J * J * (s * FiT - G) -
        m * FiT - p * J * FiT;
  r.constraintResidual = J - 1.0;
  r.dPdp = -J * FiT;

  Tensor4& A = r.tangent;
  detail::addIdentity4(A, 2.0 * mp.alphaP);
  // cofactor term
  const double b2J2 = 2.0 * mp.betaP * J * J;
  addOuter(A, s * FiT - G, FiT, 2.0 * b2J2);
  addOuter(A, FiT, G, -2.0 * b2J2);
  detail::addInvDerivative(A, Finv, b2J2 * s);
  //  -dG_iJ/dF_kL = Finv_Li G_kJ + W_ik V_LJ + G_iL Finv_Jk
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          A(i, j, k, l) += b2J2 * (Finv(l, i) * G(k, j) + W(i, k) * V(l, j) +
                                   G(i, l) * Finv(j, k));
  // log and pressure terms
  detail::addInvDerivative(A, Finv, -m);
  addOuter(A, FiT, FiT, -p * J);
  detail::addInvDerivative(A, Finv, -p * J);
  return r;
}

/// Guccione transversely-orthotropic exponential model plus a volumetric
/// penalty:
///   psi = C/2 (e^Q - 1) + B/2 (J - 1) log J
/// with Q a weighted sum of squared Green-Lagrange strain components in the
/// fiber frame. Q is guarded against exponent overflow.
inline PointResponse eval_guccione(const DeformationState& state,
                                   const GuccioneParams& mp,
                                   const FiberTriple& frame,
                                   double overflowGuard = 50.0) {
  const Mat3& F = state.F;
  const double J = detail::checked_det(F);
  const Mat3 Finv = F.inverse();
  const Mat3 FiT = Finv.transpose();

  Mat3 R;
  R.col(0) = frame.f0;
  R.col(1) = frame.s0;
  R.col(2) = frame.n0;
  Mat3 beta;
  beta << mp.bff, mp.bfs, mp.bfn,
          mp.bfs, mp.bss, mp.bsn,
          mp.bfn, mp.bsn, mp.bnn;

  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  const Mat3 Etil = R.transpose() * E * R;
  double Q = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) Q += beta(a, b) * Etil(a, b) * Etil(a, b);
  if (Q > overflowGuard)
    throw NonPhysicalState("Guccione exponent beyond overflow guard");
  const double eQ = std::exp(Q);

  const Mat3 M = R * beta.cwiseProduct(Etil) * R.transpose();
  const Mat3 S = mp.C * eQ * M;  // second Piola stress of the exp part

  const double h = 0.5 * mp.B * (J * std::log(J) + J - 1.0);
  const double hp = 0.5 * mp.B * (std::log(J) + 2.0);

  PointResponse r;
  r.energy = 0.5 * mp.C * (eQ - 1.0) + 0.5 * mp.B * (J - 1.0) * std::log(J);
  r.P = F * S + h * FiT;

  // material tangent in E: CC_{AJBM} = C e^Q (2 M_AJ M_BM + D_AJBM),
  // D_AJBM = sum_ab beta_ab a_A b_J a_B b_M
  Tensor4 CC;
  addOuter(CC, M, M, 2.0 * mp.C * eQ);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double w = mp.C * eQ * beta(a, b);
      if (w == 0.0) continue;
      const Vec3 va = R.col(a), vb = R.col(b);
      for (int A = 0; A < 3; ++A)
        for (int Jj = 0; Jj < 3; ++Jj)
          for (int Bb = 0; Bb < 3; ++Bb)
            for (int Mm = 0; Mm < 3; ++Mm)
              CC(A, Jj, Bb, Mm) += w * va(A) * vb(Jj) * va(Bb) * vb(Mm);
    }

  Tensor4& A4 = r.tangent;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double sum = (i == k) ? S(l, j) : 0.0;
          for (int a = 0; a < 3; ++a) {
            double inner = 0.0;
            for (int m = 0; m < 3; ++m)
              inner += CC(a, j, l, m) * F(k, m) + CC(a, j, m, l) * F(k, m);
            sum += 0.5 * F(i, a) * inner;
          }
          A4(i, j, k, l) += sum;
        }
  addOuter(A4, FiT, FiT, hp * J);
  detail::addInvDerivative(A4, Finv, h);
  return r;
}

/// Active fiber stress P_act = gamma (F f0) x f0 / |F f0| and its tangent.
/// Not derived from an energy, so no PointResponse energy contribution.
inline void eval_active_stress(const Mat3& F, const Vec3& f0, double gamma,
                               Mat3& Pact, Tensor4& tangent) {
  const Vec3 w = F * f0;
  const double n = w.norm();
  if (n <= 0.0) throw NonPhysicalState("degenerate fiber direction");
  Pact = (gamma / n) * w * f0.transpose();
  tangent = Tensor4();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double v = 0.0;
          if (i == k) v += f0(l) * f0(j) / n;
          v -= w(i) * f0(j) * w(k) * f0(l) / (n * n * n);
          tangent(i, j, k, l) = gamma * v;
        }
}

using MaterialModel = std::function<PointResponse(const DeformationState&)>;

/// Central finite-difference verification of P against d(psi)/dF and of the
/// tangent against dP/dF, componentwise relative to the largest magnitude.
inline std::pair<double, double> fd_verify(const MaterialModel& model,
                                           const DeformationState& state,
                                           double h = 1e-6) {
  const PointResponse base = model(state);
  double stressScale = std::max(base.P.cwiseAbs().maxCoeff(), 1e-30);
  double tangentScale = std::max(base.tangent.maxAbs(), 1e-30);
  double errStress = 0.0, errTangent = 0.0;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      DeformationState plus = state, minus = state;
      plus.F(k, l) += h;
      minus.F(k, l) -= h;
      const PointResponse rp = model(plus);
      const PointResponse rm = model(minus);
      errStress = std::max(
          errStress, std::abs((rp.energy - rm.energy) / (2.0 * h) -
                              base.P(k, l)) / stressScale);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          errTangent = std::max(
              errTangent, std::abs((rp.P(i, j) - rm.P(i, j)) / (2.0 * h) -
                                   base.tangent(i, j, k, l)) / tangentScale);
    }
  return {errStress, errTangent};
}

}  // namespace nlmech
