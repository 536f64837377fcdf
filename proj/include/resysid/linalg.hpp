#pragma once

// Toeplitz slices of the causal convolution matrix, least-squares fits on
// them, and the two complementary projectors.
//
// The full N x N lower-triangular convolution matrix built from u has entry
// (r, c) = u(r - c). A slice (a, b) keeps columns a .. b-1 (zero-based), i.e.
// the taps a .. b-1 of an impulse response.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>

#include "resysid/errors.hpp"
#include "resysid/signals.hpp"

namespace resysid {

/// Reciprocal condition numbers below this are treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Lazily indexed view of columns [a, b) of the convolution matrix of u.
/// Non-owning: the input must outlive the slice.
class ToeplitzSlice {
 public:
  ToeplitzSlice(const Signal& u, int a, int b) : u_(u.span()), a_(a), b_(b) {
    if (a < 0 || a >= b || b > u.size())
      throw InvalidArgument("toeplitz_slice: need 0 <= a < b <= N, got (" + std::to_string(a) +
                            ", " + std::to_string(b) + ") with N = " + std::to_string(u.size()));
  }

  int rows() const noexcept { return static_cast<int>(u_.size()); }
  int cols() const noexcept { return b_ - a_; }
  int first() const noexcept { return a_; }
  int last() const noexcept { return b_; }

  double operator()(int r, int c) const {
    const int k = r - (a_ + c);
    return k < 0 ? 0.0 : u_[static_cast<std::size_t>(k)];
  }

  /// Row r restricted to the slice columns.
  Eigen::VectorXd row(int r) const {
    Eigen::VectorXd out(cols());
    for (int c = 0; c < cols(); ++c) out[c] = (*this)(r, c);
    return out;
  }

  Eigen::MatrixXd materialize() const {
    const int n = rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, cols());
    for (int c = 0; c < cols(); ++c) {
      const int shift = a_ + c;
      if (shift >= n) break;
      a.col(c).tail(n - shift) = Eigen::Map<const Eigen::VectorXd>(u_.data(), n - shift);
    }
    return a;
  }

  /// A * theta as a causal convolution (no materialization).
  Eigen::VectorXd apply(const Eigen::VectorXd& theta) const {
    const int n = rows();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    const Eigen::Map<const Eigen::VectorXd> u(u_.data(), n);
    for (int c = 0; c < cols(); ++c) {
      const int shift = a_ + c;
      if (shift >= n) break;
      y.tail(n - shift) += theta[c] * u.head(n - shift);
    }
    return y;
  }

 private:
  std::span<const double> u_;
  int a_;
  int b_;
};

/// Householder QR of a slice plus the Gram inverse derived from its R factor.
class SliceFactor {
 public:
  explicit SliceFactor(const ToeplitzSlice& a) : qr_(a.materialize()), first_(a.first()), last_(a.last()) {
    const int k = a.cols();
    if (k > a.rows()) throw SingularSystem(first_, last_, 0.0);
    const Eigen::MatrixXd r = qr_.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    for (int i = 0; i < k; ++i)
      if (r(i, i) == 0.0) throw SingularSystem(first_, last_, 0.0);
    r_inv_ = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    gram_inv_ = r_inv_ * r_inv_.transpose();
    const Eigen::MatrixXd gram = r.transpose() * r;
    const double norm1 = gram.cwiseAbs().colwise().sum().maxCoeff();
    const double inv_norm1 = gram_inv_.cwiseAbs().colwise().sum().maxCoeff();
    rcond_ = 1.0 / (norm1 * inv_norm1);
    if (!(rcond_ >= kSingularRcond)) throw SingularSystem(first_, last_, rcond_);
  }

  int cols() const noexcept { return static_cast<int>(r_inv_.rows()); }
  double rcond() const noexcept { return rcond_; }
  const Eigen::MatrixXd& gram_inverse() const noexcept { return gram_inv_; }

  /// Least-squares coefficients for right-hand side y.
  Eigen::VectorXd solve(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd qty = qr_.householderQ().adjoint() * y;
    return r_inv_ * qty.head(cols());
  }

  /// Orthonormal basis of the column space (N x k).
  Eigen::MatrixXd thin_q() const {
    return qr_.householderQ() * Eigen::MatrixXd::Identity(qr_.rows(), cols());
  }

 private:
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  int first_;
  int last_;
  Eigen::MatrixXd r_inv_;
  Eigen::MatrixXd gram_inv_;
  double rcond_ = 0.0;
};

struct LsSolution {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residual;
  /// (A^T A)^{-1}, symmetric.
  Eigen::MatrixXd gram_inverse;
  double rcond = 0.0;
};

inline LsSolution solve_ls(const ToeplitzSlice& a, const Signal& y) {
  if (y.size() != a.rows())
    throw InvalidArgument("solve_ls: output length " + std::to_string(y.size()) +
                          " does not match slice rows " + std::to_string(a.rows()));
  const SliceFactor f(a);
  LsSolution s;
  s.coefficients = f.solve(y.vector());
  s.residual = y.vector() - a.apply(s.coefficients);
  s.gram_inverse = f.gram_inverse();
  s.rcond = f.rcond();
  return s;
}

/// H = A (A^T A)^{-1} A^T and G = I - H as operators on length-N vectors.
class ProjectorPair {
 public:
  explicit ProjectorPair(const ToeplitzSlice& a) : q_(SliceFactor(a).thin_q()) {}

  Eigen::VectorXd apply_h(const Eigen::VectorXd& v) const { return q_ * (q_.transpose() * v); }
  Eigen::VectorXd apply_g(const Eigen::VectorXd& v) const { return v - apply_h(v); }

  /// Orthonormal basis of range(H).
  const Eigen::MatrixXd& basis() const noexcept { return q_; }

 private:
  Eigen::MatrixXd q_;
};

inline ProjectorPair project_pair(const ToeplitzSlice& a) { return ProjectorPair(a); }

/// Gram matrix K = A^T A and A^T y of the leading `ambient` columns, using
/// K(i+1, j+1) = K(i, j) - u(N-1-i) u(N-1-j) so the cost is O(N M + M^2).
struct ToeplitzGram {
  Eigen::MatrixXd gram;
  Eigen::VectorXd aty;
  double yy = 0.0;
};

inline ToeplitzGram toeplitz_gram(const Signal& u, const Signal& y, int ambient) {
  const int n = u.size();
  if (y.size() != n) throw InvalidArgument("toeplitz_gram: u and y lengths differ");
  if (ambient < 1 || ambient > n) throw InvalidArgument("toeplitz_gram: need 1 <= M <= N");
  const auto& uv = u.vector();
  const auto& yv = y.vector();
  ToeplitzGram g;
  g.gram.resize(ambient, ambient);
  g.aty.resize(ambient);
  for (int j = 0; j < ambient; ++j) {
    g.gram(0, j) = uv.head(n - j).dot(uv.segment(j, n - j));
    g.aty[j] = yv.tail(n - j).dot(uv.head(n - j));
  }
  for (int i = 0; i + 1 < ambient; ++i)
    for (int j = i; j + 1 < ambient; ++j)
      g.gram(i + 1, j + 1) = g.gram(i, j) - uv[n - 1 - i] * uv[n - 1 - j];
  g.gram.triangularView<Eigen::StrictlyLower>() = g.gram.transpose();
  g.yy = yv.squaredNorm();
  return g;
}

}  // namespace resysid
