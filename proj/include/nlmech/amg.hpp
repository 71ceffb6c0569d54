#pragma once

// Smoothed-aggregation algebraic multigrid, used as the preconditioner for
// the displacement blocks. Setup is single-threaded; the V-cycle apply is a
// fixed linear operation, so it is safe to share between solver iterations.
//
// The tentative prolongator interpolates a near-nullspace basis (constants
// per component by default; the elasticity wiring passes rigid body modes)
// aggregated by node on the block strength graph.

#include "nlmech/csr.hpp"
#include "nlmech/preconditioners.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

namespace nlmech {

struct AmgOptions {
  double strengthThreshold = 0.08;  // on |a_ij| / sqrt(a_ii a_jj)
  // damped-Jacobi weights omega / lambda_max(D^-1 A), spectral radius from a
  // fixed deterministic power iteration
  double prolongationOmega = 2.0 / 3.0;
  double smootherDamping = 1.0;
  int preSmooth = 1;
  int postSmooth = 1;
  int maxLevels = 10;
  int maxCoarseRows = 500;  // direct dense solve below this size
};

class AmgPreconditioner final : public Preconditioner {
public:
  /// nearNullspace columns (length = rows) span the smooth error the coarse
  /// levels must represent; empty means constants per component.
  AmgPreconditioner(CsrMatrix a, int blockSize, AmgOptions opts = {},
                    std::vector<Vector> nearNullspace = {})
      : opts_(opts) {
    if (blockSize < 1 || a.rows() % blockSize != 0)
      throw std::invalid_argument("block size must divide the dimension");
    for (const auto& v : nearNullspace)
      if (v.size() != a.rows())
        throw std::invalid_argument("near-nullspace size mismatch");
    levels_.push_back(Level{});
    levels_.front().A = std::move(a);
    int bs = blockSize;
    // default near-nullspace: constants per component
    std::vector<Vector> modes = std::move(nearNullspace);
    if (modes.empty()) {
      modes.assign(static_cast<std::size_t>(bs),
                   Vector::Zero(levels_.front().A.rows()));
      for (int i = 0; i < levels_.front().A.rows(); ++i)
        modes[static_cast<std::size_t>(i % bs)][i] = 1.0;
    }
    const int m = static_cast<int>(modes.size());
    for (int l = 0; l + 1 < opts_.maxLevels; ++l) {
      Level& fine = levels_.back();
      if (fine.A.rows() <= opts_.maxCoarseRows) break;
      std::vector<int> aggregateOf;
      const int nAgg = aggregate(fine.A, bs, aggregateOf);
      const int nodes = fine.A.rows() / bs;
      if (nAgg >= nodes || nAgg == 0) break;  // no coarsening progress
      fine.invDiag = inverseDiagonal(fine.A);
      modes = buildTransfer(fine, bs, aggregateOf, nAgg, modes);
      CsrMatrix coarse = fine.R.multiply(fine.A.multiply(fine.P));
      coarse.setBlockSize(m);
      levels_.push_back(Level{});
      levels_.back().A = std::move(coarse);
      levels_.back().blockSize = m;
      bs = m;
    }
    if (levels_.back().A.rows() > std::max(opts_.maxCoarseRows, 4000))
      throw std::runtime_error("AMG setup: aggregation failed to coarsen");
    {
      int levelBs = blockSize;
      for (std::size_t l = 0; l < levels_.size(); ++l) {
        Level& level = levels_[l];
        level.invDiag = inverseDiagonal(level.A);
        buildBlockInverse(level, l == 0 ? blockSize : level.blockSize ? level.blockSize : levelBs);
        levelBs = level.blockSize;
        level.smootherOmega =
            opts_.smootherDamping / estimateJacobiSpectralRadius(level);
      }
    }
    coarseSolve_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(
        levels_.back().A.toDense());
  }

  int rows() const override { return levels_.front().A.rows(); }
  int numLevels() const { return static_cast<int>(levels_.size()); }

  void apply(const Vector& r, Vector& z) const override { z = cycle(0, r); }

private:
  struct Level {
    CsrMatrix A;
    Vector invDiag;
    CsrMatrix P;  // prolongation to this level from the next-coarser one
    CsrMatrix R;  // restriction, P^T
    double smootherOmega = 2.0 / 3.0;
    int blockSize = 1;
    std::vector<Eigen::MatrixXd> blockInv;  // 3x3 (or bs x bs) diagonal blocks

    // action of the (block-)diagonal inverse
    Vector scale(const Vector& r) const {
      if (blockSize == 1) return invDiag.cwiseProduct(r);
      Vector z(r.size());
      for (std::size_t b = 0; b < blockInv.size(); ++b)
        z.segment(static_cast<Eigen::Index>(b) * blockSize, blockSize) =
            blockInv[b] *
            r.segment(static_cast<Eigen::Index>(b) * blockSize, blockSize);
      return z;
    }
  };

  static void buildBlockInverse(Level& level, int bs) {
    level.blockSize = bs;
    if (bs == 1) return;
    const int nb = level.A.rows() / bs;
    level.blockInv.resize(static_cast<std::size_t>(nb));
    Eigen::MatrixXd blk(bs, bs);
    for (int b = 0; b < nb; ++b) {
      for (int i = 0; i < bs; ++i)
        for (int j = 0; j < bs; ++j) blk(i, j) = level.A.at(b * bs + i, b * bs + j);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(blk);
      if (!lu.isInvertible())
        throw std::runtime_error("AMG setup: singular diagonal block");
      level.blockInv[static_cast<std::size_t>(b)] = lu.inverse();
    }
  }

  static Vector inverseDiagonal(const CsrMatrix& a) {
    Vector d = a.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (d[i] == 0.0)
        throw std::runtime_error("AMG setup: structurally singular matrix");
      d[i] = 1.0 / d[i];
    }
    return d;
  }

  // deterministic power iteration for lambda_max(D^-1 A)
  static double estimateJacobiSpectralRadius(const Level& level) {
    const int n = level.A.rows();
    Vector v = Vector::Ones(n);
    v /= v.norm();
    double lambda = 1.0;
    for (int it = 0; it < 12; ++it) {
      Vector w = level.scale(level.A * v);
      const double norm = w.norm();
      if (norm < 1e-300) break;
      lambda = norm;
      v = w / norm;
    }
    return std::max(lambda, 1.0);
  }

  // Greedy aggregation on the node-level strength graph. Blocks are
  // condensed with Frobenius norms so vector problems aggregate by node.
  // Nodes without any off-diagonal entries (eliminated Dirichlet rows) are
  // left out of the hierarchy; the smoother handles them exactly.
  int aggregate(const CsrMatrix& A, int bs, std::vector<int>& aggregateOf) {
    const int nodes = A.rows() / bs;
    std::vector<Triplet> nt;
    for (int r = 0; r < A.rows(); ++r)
      for (int k = A.rowOffsets()[static_cast<std::size_t>(r)];
           k < A.rowOffsets()[static_cast<std::size_t>(r) + 1]; ++k) {
        const double v = A.values()[static_cast<std::size_t>(k)];
        if (v != 0.0)
          nt.push_back({r / bs,
                        A.colIndices()[static_cast<std::size_t>(k)] / bs,
                        v * v});
      }
    const CsrMatrix nodeNormSq = CsrMatrix::fromTriplets(nodes, nodes, nt);

    std::vector<std::vector<std::pair<int, double>>> strong(
        static_cast<std::size_t>(nodes));
    std::vector<std::vector<std::pair<int, double>>> neighbors(
        static_cast<std::size_t>(nodes));
    const Vector diag = nodeNormSq.diagonal();
    for (int i = 0; i < nodes; ++i)
      for (int k = nodeNormSq.rowOffsets()[static_cast<std::size_t>(i)];
           k < nodeNormSq.rowOffsets()[static_cast<std::size_t>(i) + 1]; ++k) {
        const int j = nodeNormSq.colIndices()[static_cast<std::size_t>(k)];
        if (j == i) continue;
        // |A_IJ|_F / sqrt(|A_II|_F |A_JJ|_F); the node matrix holds squares
        const double denom = std::pow(diag[i] * diag[j], 0.25);
        if (denom == 0.0) continue;
        const double norm =
            std::sqrt(nodeNormSq.values()[static_cast<std::size_t>(k)]);
        neighbors[static_cast<std::size_t>(i)].push_back({j, norm});
        if (norm / denom >= opts_.strengthThreshold)
          strong[static_cast<std::size_t>(i)].push_back({j, norm});
      }

    aggregateOf.assign(static_cast<std::size_t>(nodes), -1);
    int nAgg = 0;
    for (int i = 0; i < nodes; ++i) {  // pass 1: fresh aggregates
      if (aggregateOf[static_cast<std::size_t>(i)] >= 0) continue;
      bool free = true;
      for (const auto& [j, w] : strong[static_cast<std::size_t>(i)])
        free = free && aggregateOf[static_cast<std::size_t>(j)] < 0;
      if (!free || strong[static_cast<std::size_t>(i)].empty()) continue;
      const int agg = nAgg++;
      aggregateOf[static_cast<std::size_t>(i)] = agg;
      for (const auto& [j, w] : strong[static_cast<std::size_t>(i)])
        aggregateOf[static_cast<std::size_t>(j)] = agg;
    }
    auto attach = [&](int i,
                      const std::vector<std::pair<int, double>>& links) {
      int best = -1;
      double bestW = 0.0;
      for (const auto& [j, w] : links)
        if (aggregateOf[static_cast<std::size_t>(j)] >= 0 && w > bestW) {
          best = aggregateOf[static_cast<std::size_t>(j)];
          bestW = w;
        }
      if (best >= 0) aggregateOf[static_cast<std::size_t>(i)] = best;
    };
    for (int i = 0; i < nodes; ++i)  // pass 2: attach to strongest aggregate
      if (aggregateOf[static_cast<std::size_t>(i)] < 0)
        attach(i, strong[static_cast<std::size_t>(i)]);
    for (int i = 0; i < nodes; ++i)  // pass 3: any connection counts
      if (aggregateOf[static_cast<std::size_t>(i)] < 0)
        attach(i, neighbors[static_cast<std::size_t>(i)]);
    return nAgg;
  }

  // Tentative prolongator: per aggregate, a thin QR of the near-nullspace
  // restricted to the aggregate becomes the local basis and the R factor its
  // coarse representation, which is returned as the next level's
  // near-nullspace. One damped-Jacobi smoothing pass follows.
  std::vector<Vector> buildTransfer(Level& fine, int bs,
                                    const std::vector<int>& aggregateOf,
                                    int nAgg,
                                    const std::vector<Vector>& modes) {
    const int n = fine.A.rows();
    const int nodes = n / bs;
    const int m = static_cast<int>(modes.size());

    std::vector<std::vector<int>> members(static_cast<std::size_t>(nAgg));
    for (int node = 0; node < nodes; ++node)
      if (aggregateOf[static_cast<std::size_t>(node)] >= 0)
        members[static_cast<std::size_t>(
                    aggregateOf[static_cast<std::size_t>(node)])]
            .push_back(node);

    std::vector<Vector> coarseModes(static_cast<std::size_t>(m),
                                    Vector::Zero(nAgg * m));
    std::vector<Triplet> tt;
    for (int agg = 0; agg < nAgg; ++agg) {
      const auto& nodesIn = members[static_cast<std::size_t>(agg)];
      const int rows = static_cast<int>(nodesIn.size()) * bs;
      if (rows == 0) continue;
      Eigen::MatrixXd local(rows, m);
      for (int c = 0; c < m; ++c)
        for (std::size_t a = 0; a < nodesIn.size(); ++a)
          for (int comp = 0; comp < bs; ++comp)
            local(static_cast<int>(a) * bs + comp, c) =
                modes[static_cast<std::size_t>(c)][nodesIn[a] * bs + comp];
      // thin QR; rank-deficient trailing columns still give an orthonormal
      // basis and zero rows in the R factor
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(local);
      const int k = std::min(rows, m);
      const Eigen::MatrixXd Q =
          qr.householderQ() * Eigen::MatrixXd::Identity(rows, k);
      const Eigen::MatrixXd Rfac =
          qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();

      for (std::size_t a = 0; a < nodesIn.size(); ++a)
        for (int comp = 0; comp < bs; ++comp)
          for (int c = 0; c < k; ++c) {
            const double v = Q(static_cast<int>(a) * bs + comp, c);
            if (v != 0.0)
              tt.push_back({nodesIn[a] * bs + comp, agg * m + c, v});
          }
      for (int c = 0; c < m; ++c)
        for (int j = 0; j < k; ++j)
          coarseModes[static_cast<std::size_t>(c)][agg * m + j] = Rfac(j, c);
    }
    const CsrMatrix T = CsrMatrix::fromTriplets(n, nAgg * m, std::move(tt));

    const double omega =
        opts_.prolongationOmega / estimateJacobiSpectralRadius(fine);
    const CsrMatrix AT = fine.A.multiply(T);
    std::vector<Triplet> pt;
    for (int r = 0; r < n; ++r) {
      for (int k = T.rowOffsets()[static_cast<std::size_t>(r)];
           k < T.rowOffsets()[static_cast<std::size_t>(r) + 1]; ++k)
        pt.push_back({r, T.colIndices()[static_cast<std::size_t>(k)],
                      T.values()[static_cast<std::size_t>(k)]});
      const double scale = omega * fine.invDiag[r];
      for (int k = AT.rowOffsets()[static_cast<std::size_t>(r)];
           k < AT.rowOffsets()[static_cast<std::size_t>(r) + 1]; ++k)
        pt.push_back({r, AT.colIndices()[static_cast<std::size_t>(k)],
                      -scale * AT.values()[static_cast<std::size_t>(k)]});
    }
    fine.P = CsrMatrix::fromTriplets(n, nAgg * m, std::move(pt));
    fine.R = fine.P.transpose();
    return coarseModes;
  }

  Vector cycle(std::size_t l, const Vector& r) const {
    const Level& level = levels_[l];
    if (l + 1 == levels_.size()) return coarseSolve_->solve(r);
    // damped block-Jacobi smoothing sweeps from a zero initial guess
    Vector x = level.smootherOmega * level.scale(r);
    for (int s = 1; s < opts_.preSmooth; ++s)
      x += level.smootherOmega * level.scale(r - level.A * x);
    Vector resid = r - level.A * x;
    const Vector coarse = cycle(l + 1, level.R * resid);
    x += level.P * coarse;
    for (int s = 0; s < opts_.postSmooth; ++s)
      x += level.smootherOmega * level.scale(r - level.A * x);
    return x;
  }

  AmgOptions opts_;
  std::vector<Level> levels_;
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> coarseSolve_;
};

inline std::shared_ptr<Preconditioner> make_amg(
    const CsrMatrix& a, int blockSize, AmgOptions opts = {},
    std::vector<Vector> nearNullspace = {}) {
  return std::make_shared<AmgPreconditioner>(a, blockSize, opts,
                                             std::move(nearNullspace));
}

/// Translations and rotations evaluated at the node coordinates: the near
/// nullspace of 3D elasticity for the smoothed-aggregation coarse spaces.
inline std::vector<Vector> rigid_body_modes(const std::vector<Vec3>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<Vector> modes(6, Vector::Zero(3 * n));
  for (int a = 0; a < n; ++a) {
    const Vec3& x = nodes[static_cast<std::size_t>(a)];
    for (int c = 0; c < 3; ++c)
      modes[static_cast<std::size_t>(c)][3 * a + c] = 1.0;
    // rotation about z: (-y, x, 0)
    modes[3][3 * a + 0] = -x.y();
    modes[3][3 * a + 1] = x.x();
    // rotation about x: (0, -z, y)
    modes[4][3 * a + 1] = -x.z();
    modes[4][3 * a + 2] = x.y();
    // rotation about y: (z, 0, -x)
    modes[5][3 * a + 0] = x.z();
    modes[5][3 * a + 2] = -x.x();
  }
  return modes;
}

}  // namespace nlmech
