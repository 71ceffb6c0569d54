#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>

namespace nlmech {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;

/// Thrown when a deformation state cannot be evaluated (det F <= 0, exponent
/// overflow, degenerate fiber). Nonlinear drivers catch it and report the
/// step as failed instead of propagating NaNs.
struct NonPhysicalState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fourth-order tangent d P_iJ / d F_kL stored densely (3x3x3x3).
class Tensor4 {
public:
  Tensor4() { data_.fill(0.0); }

  double& operator()(int i, int j, int k, int l) {
    return data_[((i * 3 + j) * 3 + k) * 3 + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data_[((i * 3 + j) * 3 + k) * 3 + l];
  }

  Tensor4& operator+=(const Tensor4& o) {
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Tensor4& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  // (T : M)_{iJ} = T_{iJkL} M_{kL}
  Mat3 contractRight(const Mat3& m) const {
    Mat3 out = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) s += (*this)(i, j, k, l) * m(k, l);
        out(i, j) = s;
      }
    return out;
  }

  double maxAbs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

private:
  std::array<double, 81> data_;
};

// a_i b_J c_k d_L accumulated into T with weight w
inline void addOuter(Tensor4& t, const Mat3& ab, const Mat3& cd, double w) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double x = w * ab(i, j);
      if (x == 0.0) continue;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) t(i, j, k, l) += x * cd(k, l);
    }
}

}  // namespace nlmech
