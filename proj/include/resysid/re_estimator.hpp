#pragma once

// Error measures, probabilistic bounds on the unmodeled energy and the
// reconstruction error, the worst-case relative-entropy value, and the joint
// (delay, length, noise variance) search.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "resysid/errors.hpp"
#include "resysid/linalg.hpp"
#include "resysid/residual_grid.hpp"
#include "resysid/signals.hpp"

namespace resysid {

/// P(|Z| < a) for a standard normal Z.
inline double gaussian_coverage(double a) { return std::erf(a / std::sqrt(2.0)); }

struct ValidationParams {
  double alpha = 4.0;
  double beta = 4.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
  }
  double validation_probability() const { return gaussian_coverage(alpha); }
  double confidence_probability() const { return gaussian_coverage(beta); }
};

// ---------------------------------------------------------------------------
// error measures

inline double output_error(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) throw InvalidArgument("output_error: length mismatch");
  if (y.size() == 0) throw InvalidArgument("output_error: empty signals");
  return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

inline double output_error(const Signal& y, const Signal& yhat) {
  return output_error(y.vector(), yhat.vector());
}

/// z = (1/N)||ybar - yhat||^2. Needs the noiseless output, so tests only.
inline double reconstruction_error_true(const Signal& ybar, const Signal& yhat) {
  return output_error(ybar.vector(), yhat.vector());
}

/// Unmodeled energy (1/N)||G F||^2 of the slice (d, m), where F is the part of
/// the noiseless output produced by the coefficients outside [d, m).
inline double delta_true(const Signal& u, const ImpulseResponse& truth, int d, int m) {
  const ToeplitzSlice slice(u, d, m);
  const Eigen::VectorXd ybar = simulate_output(truth, u).vector();
  Eigen::VectorXd inside(m - d);
  for (int c = 0; c < m - d; ++c) inside[c] = truth(d + c);
  const Eigen::VectorXd f = ybar - slice.apply(inside);
  if (f.squaredNorm() == 0.0) return 0.0;
  return ProjectorPair(slice).apply_g(f).squaredNorm() / u.size();
}

// ---------------------------------------------------------------------------
// bounds

enum class Rejection { none, alpha_infeasible, negative_radicand };

inline const char* to_string(Rejection r) {
  switch (r) {
    case Rejection::none: return "feasible";
    case Rejection::alpha_infeasible: return "alpha below feasibility threshold";
    case Rejection::negative_radicand: return "negative radicand in kappa";
  }
  return "?";
}

/// True iff alpha exceeds (N / sqrt(2(N-k))) ((N-k)/N - x/sigma2), k = m - d.
inline bool alpha_feasible(double x, int d, int m, int n, double sigma2, double alpha) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("alpha_feasible: noise variance must be positive");
  const double nn = n;
  const double rest = nn - (m - d);
  if (!(rest > 0.0)) return false;
  const double rhs = (nn / std::sqrt(2.0 * rest)) * (rest / nn - x / sigma2);
  return alpha > rhs;
}

struct DeltaBounds {
  double lower;
  double upper;
};

/// Value or the reason it could not be produced.
template <class T>
struct Outcome {
  std::optional<T> value;
  Rejection rejection = Rejection::none;

  explicit operator bool() const noexcept { return value.has_value(); }
  const T& operator*() const { return *value; }
  const T* operator->() const { return &*value; }
};

inline Outcome<DeltaBounds> delta_bounds(double x, int d, int m, int n, double sigma2, double alpha) {
  if (!alpha_feasible(x, d, m, n, sigma2, alpha)) return {std::nullopt, Rejection::alpha_infeasible};
  const double nn = n;
  const double c = (1.0 - (m - d) / nn) * sigma2;
  const double a2s = alpha * alpha * sigma2 / nn;
  const double radicand = a2s + x - 0.5 * c;
  if (radicand < 0.0) return {std::nullopt, Rejection::negative_radicand};
  const double kappa = 2.0 * alpha * std::sqrt(sigma2 / nn) * std::sqrt(radicand);
  const double mid = x - c + 2.0 * a2s;
  return {DeltaBounds{mid - kappa, mid + kappa}, Rejection::none};
}

struct ReconBounds {
  double lower;
  double upper;
};

inline ReconBounds recon_bounds(const DeltaBounds& delta, int d, int m, int n, double sigma2, double beta) {
  const double k = m - d;
  const double mean = k / n * sigma2;
  const double spread = beta * std::sqrt(2.0 * k) * sigma2 / n;
  return {std::max(0.0, delta.lower + mean - spread), delta.upper + mean + spread};
}

/// Worst-case relative entropy 1/2 (1 - N + N z_hi / sigma2).
inline double re_upper(double z_hi, double sigma2, int n) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("re_upper: noise variance must be positive");
  return 0.5 * (1.0 - n + n * z_hi / sigma2);
}

struct ReBoundSet {
  double lower;   // L
  double upper;   // U
  double z_lo;
  double z_hi;
  double re_hi;
};

/// All bounds of one (d, m, sigma2) cell.
inline Outcome<ReBoundSet> evaluate_bounds(double x, int d, int m, int n, double sigma2,
                                           const ValidationParams& p) {
  const auto delta = delta_bounds(x, d, m, n, sigma2, p.alpha);
  if (!delta) return {std::nullopt, delta.rejection};
  const ReconBounds z = recon_bounds(*delta, d, m, n, sigma2, p.beta);
  return {ReBoundSet{delta->lower, delta->upper, z.lower, z.upper, re_upper(z.upper, sigma2, n)},
          Rejection::none};
}

// ---------------------------------------------------------------------------
// noise variance grids

/// Geometric grid over [lo, hi], `per_decade` points per decade, both ends included.
inline std::vector<double> geometric_grid(double lo, double hi, double per_decade = 40.0) {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
    throw InvalidArgument("geometric_grid: need 0 < lo <= hi");
  if (!(per_decade > 0.0)) throw InvalidArgument("geometric_grid: points per decade must be positive");
  const double span = std::log10(hi / lo);
  const int steps = std::max(0, static_cast<int>(std::ceil(span * per_decade - 1e-9)));
  std::vector<double> g;
  g.reserve(steps + 1);
  g.push_back(lo);
  for (int i = 1; i < steps; ++i) g.push_back(lo * std::pow(10.0, span * i / steps));
  if (steps > 0) g.push_back(hi);
  return g;
}

/// Variances power / 10^(s/10) for SNR s from snr_lo to snr_hi (dB) in
/// `step_db` increments, sorted ascending in variance.
inline std::vector<double> snr_grid(double power, double snr_lo_db, double snr_hi_db, double step_db) {
  if (!(power > 0.0)) throw InvalidArgument("snr_grid: reference power must be positive");
  if (!(step_db > 0.0) || !(snr_hi_db >= snr_lo_db)) throw InvalidArgument("snr_grid: bad range");
  const int steps = static_cast<int>(std::floor((snr_hi_db - snr_lo_db) / step_db + 1e-9));
  std::vector<double> g;
  for (int i = steps; i >= 0; --i) g.push_back(power / std::pow(10.0, (snr_lo_db + i * step_db) / 10.0));
  return g;
}

// ---------------------------------------------------------------------------
// joint selection

struct ModelCandidate {
  int d = 0;
  int m = 0;
  LsSolution fit;
  double x_dm = 0.0;
  double yhat_power = 0.0;

  /// The estimate as a dense impulse response of length `ambient`.
  Eigen::VectorXd embedded(int ambient) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(ambient);
    out.segment(d, m - d) = fit.coefficients;
    return out;
  }
};

inline ModelCandidate fit_candidate(const Signal& u, const Signal& y, int d, int m) {
  const ToeplitzSlice slice(u, d, m);
  ModelCandidate c;
  c.d = d;
  c.m = m;
  c.fit = solve_ls(slice, y);
  c.x_dm = c.fit.residual.squaredNorm() / y.size();
  c.yhat_power = (y.vector() - c.fit.residual).squaredNorm() / y.size();
  return c;
}

struct GridCell {
  int d;
  int m;
  double sigma2;
  double x;
  ReBoundSet bounds;
};

struct SigmaRejection {
  double sigma2;
  int d;
  int m;
  Rejection reason;
};

struct SelectionConfig {
  int ambient = 100;      // M
  int d_lo = 0;
  int d_hi = -1;          // exclusive; negative means M
  std::vector<double> sigma2_grid;
  bool sigma_known = false;
  ValidationParams params;
  bool keep_grid = false;
};

struct Selection {
  int d = 0;
  int m = 0;
  std::optional<double> sigma2;  // absent when the variance was given
  double sigma2_used = 0.0;
  double re_hi = 0.0;
  ReBoundSet bounds{};
  ModelCandidate model;
  std::vector<GridCell> grid;
  std::vector<SigmaRejection> rejections;
};

namespace detail {

/// Strict ordering: re_hi, then m, then d, then sigma2.
inline bool better(double re, int m, int d, double s2, double re_b, int m_b, int d_b, double s2_b) {
  return std::tie(re, m, d, s2) < std::tie(re_b, m_b, d_b, s2_b);
}

inline std::string describe(const SigmaRejection& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "sigma^2=%.6g rejected at (d=%d, m=%d): %s", r.sigma2, r.d, r.m,
                to_string(r.reason));
  return buf;
}

}  // namespace detail

/// Selection from a precomputed residual grid.
inline Selection select_model(const Signal& u, const Signal& y, const ResidualGrid& grid,
                              const SelectionConfig& cfg) {
  cfg.params.validate();
  if (cfg.sigma2_grid.empty()) throw InvalidArgument("select_model: empty noise variance grid");
  for (double s2 : cfg.sigma2_grid)
    if (!(s2 > 0.0) || !std::isfinite(s2)) throw InvalidArgument("select_model: variances must be positive");
  if (cfg.sigma_known && cfg.sigma2_grid.size() != 1)
    throw InvalidArgument("select_model: a known variance needs a one-point grid");
  const int n = y.size();
  const int big_m = grid.ambient();

  Selection best;
  bool found = false;
  std::vector<GridCell> cells;
  std::vector<SigmaRejection> rejections;

  for (double s2 : cfg.sigma2_grid) {
    std::vector<GridCell> local;
    std::optional<SigmaRejection> rejected;
    double re_b = std::numeric_limits<double>::infinity();
    int d_b = 0, m_b = 0;
    ReBoundSet bounds_b{};
    for (int d = grid.d_lo(); d < grid.d_hi() && !rejected; ++d) {
      for (int m = d + 1; m <= big_m; ++m) {
        const double x = grid.x(d, m);
        const auto b = evaluate_bounds(x, d, m, n, s2, cfg.params);
        if (!b) {
          rejected = SigmaRejection{s2, d, m, b.rejection};
          break;
        }
        if (cfg.keep_grid) local.push_back({d, m, s2, x, *b});
        if (detail::better(b->re_hi, m, d, 0.0, re_b, m_b, d_b, 0.0)) {
          re_b = b->re_hi;
          d_b = d;
          m_b = m;
          bounds_b = *b;
        }
      }
    }
    if (rejected) {
      rejections.push_back(*rejected);
      continue;
    }
    if (cfg.keep_grid) cells.insert(cells.end(), local.begin(), local.end());
    if (!found || detail::better(re_b, m_b, d_b, s2, best.re_hi, best.m, best.d, best.sigma2_used)) {
      found = true;
      best.d = d_b;
      best.m = m_b;
      best.sigma2_used = s2;
      best.re_hi = re_b;
      best.bounds = bounds_b;
    }
  }
  if (!found) {
    std::vector<std::string> reasons;
    for (const auto& r : rejections) reasons.push_back(detail::describe(r));
    throw NoFeasibleModel(std::move(reasons));
  }
  if (!cfg.sigma_known) best.sigma2 = best.sigma2_used;
  best.model = fit_candidate(u, y, best.d, best.m);
  best.grid = std::move(cells);
  best.rejections = std::move(rejections);
  return best;
}

/// Bounds of every grid cell at one variance; infeasible cells are left out.
inline std::vector<GridCell> bound_grid(const ResidualGrid& grid, double sigma2, const ValidationParams& p) {
  std::vector<GridCell> cells;
  for (int d = grid.d_lo(); d < grid.d_hi(); ++d)
    for (int m = d + 1; m <= grid.ambient(); ++m) {
      const double x = grid.x(d, m);
      if (const auto b = evaluate_bounds(x, d, m, grid.samples(), sigma2, p)) cells.push_back({d, m, sigma2, x, *b});
    }
  return cells;
}

/// Fits every slice (d, m) with d_lo <= d < d_hi, d < m <= M, bounds each one
/// for every grid variance, and returns the minimizer of the RE bound.
inline Selection select_model(const Signal& u, const Signal& y, const SelectionConfig& cfg) {
  if (u.size() != y.size()) throw InvalidArgument("select_model: u and y lengths differ");
  if (cfg.ambient < 1 || cfg.ambient > u.size()) throw InvalidArgument("select_model: need 1 <= M <= N");
  const int d_hi = cfg.d_hi < 0 ? cfg.ambient : cfg.d_hi;
  const ResidualGrid grid = residual_grid(u, y, cfg.ambient, cfg.d_lo, d_hi);
  return select_model(u, y, grid, cfg);
}

}  // namespace resysid
