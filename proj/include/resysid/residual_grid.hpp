#pragma once

// Output errors x_{d,m} over the whole (delay, length) grid.
//
// For a fixed delay d the slices (d, m), m = d+1 .. M, are nested, so one
// triangular factor of the Gram block K[d:M, d:M] yields every residual in
// that row: with L L^T = K_d and z = L^{-1} (A_d^T y),
//   ||y - H_{d,m} y||^2 = ||y||^2 - sum_{j < m-d} z_j^2.
// L^T is the R factor of a QR of the slice, so this is the QR route without
// forming Q. Rows where the subtraction loses too many digits (near-exact
// fits) are recomputed from an explicit Householder QR of the slice.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "resysid/errors.hpp"
#include "resysid/linalg.hpp"
#include "resysid/signals.hpp"

namespace resysid {

class ResidualGrid {
 public:
  ResidualGrid(int samples, int ambient, int d_lo, int d_hi)
      : samples_(samples),
        ambient_(ambient),
        d_lo_(d_lo),
        d_hi_(d_hi),
        rss_(Eigen::MatrixXd::Constant(d_hi - d_lo, ambient + 1,
                                       std::numeric_limits<double>::quiet_NaN())) {}

  int samples() const noexcept { return samples_; }
  int ambient() const noexcept { return ambient_; }
  int d_lo() const noexcept { return d_lo_; }
  int d_hi() const noexcept { return d_hi_; }

  bool contains(int d, int m) const noexcept {
    return d >= d_lo_ && d < d_hi_ && m > d && m <= ambient_;
  }

  /// Residual sum of squares ||y - yhat_{d,m}||^2.
  double rss(int d, int m) const { return rss_(d - d_lo_, m); }
  /// Output error (1/N) ||y - yhat_{d,m}||^2.
  double x(int d, int m) const { return rss(d, m) / samples_; }

  void set_rss(int d, int m, double v) { rss_(d - d_lo_, m) = v; }

 private:
  int samples_;
  int ambient_;
  int d_lo_;
  int d_hi_;
  Eigen::MatrixXd rss_;
};

namespace detail {

/// Relative residual below which a row is recomputed by Householder QR.
inline constexpr double kCancellationGuard = 1e-8;

inline void exact_row(const Signal& u, const Signal& y, int d, ResidualGrid& grid) {
  const ToeplitzSlice slice(u, d, grid.ambient());
  const int k = slice.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(slice.materialize());
  const Eigen::VectorXd w = qr.householderQ().adjoint() * y.vector();
  // suffix sums of w^2 give the residual of every leading-column subset
  double tail = w.tail(w.size() - k).squaredNorm();
  for (int j = k - 1; j >= 0; --j) {
    grid.set_rss(d, d + j + 1, tail);
    tail += w[j] * w[j];
  }
}

}  // namespace detail

/// x_{d,m} for d in [d_lo, d_hi) and d < m <= ambient. Throws SingularSystem
/// when some slice's Gram matrix is numerically singular.
inline ResidualGrid residual_grid(const Signal& u, const Signal& y, int ambient, int d_lo = 0,
                                  int d_hi = -1) {
  if (d_hi < 0) d_hi = ambient;
  if (d_lo < 0 || d_lo >= d_hi || d_hi > ambient)
    throw InvalidArgument("residual_grid: need 0 <= d_lo < d_hi <= M");
  const ToeplitzGram g = toeplitz_gram(u, y, ambient);
  ResidualGrid grid(u.size(), ambient, d_lo, d_hi);
  for (int d = d_lo; d < d_hi; ++d) {
    const int k = ambient - d;
    Eigen::LLT<Eigen::MatrixXd> llt(g.gram.block(d, d, k, k));
    if (llt.info() != Eigen::Success) throw SingularSystem(d, ambient, 0.0);
    const auto l = llt.matrixL();
    const Eigen::VectorXd z = l.solve(g.aty.segment(d, k));
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    double acc = 0.0;
    bool needs_exact = false;
    for (int j = 0; j < k; ++j) {
      dmin = std::min(dmin, std::abs(diag[j]));
      dmax = std::max(dmax, std::abs(diag[j]));
      const double rcond = (dmin / dmax) * (dmin / dmax);
      if (!(rcond >= kSingularRcond)) throw SingularSystem(d, d + j + 1, rcond);
      acc += z[j] * z[j];
      const double rss = g.yy - acc;
      if (rss <= detail::kCancellationGuard * g.yy) needs_exact = true;
      grid.set_rss(d, d + j + 1, rss);
    }
    if (needs_exact) detail::exact_row(u, y, d, grid);
  }
  return grid;
}

}  // namespace resysid
