#pragma once

// Sample-by-sample estimation. Two engines share the bound machinery:
//
//  * per-candidate records (init_state / rank_one_update / online_step) keep
//    the Gram inverse of each slice and update it with the rank-one identity;
//  * DelayBank keeps, per delay, the triangular factor of the widest slice and
//    appends rows with Givens rotations, which gives every length at that
//    delay at once. It is the engine used for full (d, m) grids.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resysid/errors.hpp"
#include "resysid/linalg.hpp"
#include "resysid/re_estimator.hpp"
#include "resysid/signals.hpp"

namespace resysid {

struct StoppingRule {
  double epsilon;

  explicit StoppingRule(double eps) : epsilon(eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("stopping threshold must lie in (0, 1)");
  }
  static StoppingRule from_snr_db(double snr_db) { return StoppingRule(std::pow(10.0, -snr_db / 10.0)); }
  double target_snr_db() const { return 10.0 * std::log10(1.0 / epsilon); }
};

inline bool should_stop(double z_hi, double yhat_power, const StoppingRule& rule) {
  if (!(yhat_power > 0.0)) throw InvalidArgument("should_stop: estimated output power must be positive");
  return z_hi / yhat_power < rule.epsilon;
}

/// Row n of the convolution matrix restricted to columns [d, m):
/// [u(n-d), u(n-d-1), ..., u(n+1-m)], zero for negative indices.
inline Eigen::VectorXd new_row(const Signal& u, int n, int d, int m) {
  if (n < 0 || n >= u.size()) throw InvalidArgument("new_row: sample index out of range");
  if (d < 0 || m <= d) throw InvalidArgument("new_row: need 0 <= d < m");
  Eigen::VectorXd b(m - d);
  for (int c = 0; c < m - d; ++c) b[c] = u.at_causal(n - d - c);
  return b;
}

struct CandidateKey {
  int d;
  int m;
};

struct CandidateRecord {
  int d = 0;
  int m = 0;
  Eigen::MatrixXd gram_inverse;
  Eigen::VectorXd theta;
  Eigen::VectorXd aty;
  double x = 0.0;
  double yhat_power = 0.0;
  long updates_since_refactor = 0;
};

struct OnlineState {
  std::vector<CandidateRecord> records;
  int samples = 0;  // rows consumed
};

/// Updates past which a record's Gram inverse is rebuilt from scratch.
inline constexpr long kRefactorInterval = 10000;

namespace detail {

inline void fit_residual(CandidateRecord& rec, const Signal& u, const Signal& y, int n) {
  const auto& uv = u.vector();
  Eigen::VectorXd yhat = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < rec.m - rec.d; ++c) {
    const int shift = rec.d + c;
    if (shift >= n) break;
    yhat.tail(n - shift) += rec.theta[c] * uv.head(n - shift);
  }
  rec.x = (y.vector().head(n) - yhat).squaredNorm() / n;
  rec.yhat_power = yhat.squaredNorm() / n;
}

inline void batch_fit(CandidateRecord& rec, const Signal& u, const Signal& y, int n) {
  const Signal up = u.prefix(n);
  const Signal yp = y.prefix(n);
  const ToeplitzSlice slice(up, rec.d, rec.m);
  LsSolution s;
  try {
    s = solve_ls(slice, yp);
  } catch (const SingularSystem&) {
    throw InsufficientData("candidate (d=" + std::to_string(rec.d) + ", m=" + std::to_string(rec.m) +
                           ") is rank deficient on the first " + std::to_string(n) +
                           " samples; use a longer warm start");
  }
  rec.gram_inverse = s.gram_inverse;
  rec.theta = s.coefficients;
  rec.aty = slice.materialize().transpose() * yp.vector();
  rec.updates_since_refactor = 0;
}

}  // namespace detail

/// Batch fit of every candidate on the first n0 samples.
inline OnlineState init_state(const Signal& u, const Signal& y, int n0,
                              std::span<const CandidateKey> candidates) {
  if (u.size() != y.size()) throw InvalidArgument("init_state: u and y lengths differ");
  if (n0 < 1 || n0 > u.size()) throw InvalidArgument("init_state: warm start length out of range");
  if (candidates.empty()) throw InvalidArgument("init_state: no candidates");
  OnlineState st;
  st.samples = n0;
  for (const auto& key : candidates) {
    if (key.d < 0 || key.m <= key.d) throw InvalidArgument("init_state: need 0 <= d < m");
    if (key.m > n0)
      throw InvalidArgument("init_state: candidate (d=" + std::to_string(key.d) + ", m=" +
                            std::to_string(key.m) + ") needs a warm start of at least m samples");
    CandidateRecord rec;
    rec.d = key.d;
    rec.m = key.m;
    detail::batch_fit(rec, u, y, n0);
    detail::fit_residual(rec, u, y, n0);
    st.records.push_back(std::move(rec));
  }
  return st;
}

/// Appends one row b with output y_new to a record.
inline void rank_one_update(CandidateRecord& rec, const Eigen::VectorXd& b, double y_new) {
  if (b.size() != rec.theta.size()) throw InvalidArgument("rank_one_update: row length mismatch");
  const Eigen::VectorXd c = rec.gram_inverse * b;
  const double denom = 1.0 + b.dot(c);
  rec.gram_inverse.noalias() -= (c * c.transpose()) / denom;
  rec.gram_inverse = 0.5 * (rec.gram_inverse + rec.gram_inverse.transpose()).eval();
  rec.aty += b * y_new;
  rec.theta.noalias() = rec.gram_inverse * rec.aty;
  ++rec.updates_since_refactor;
}

struct StepResult {
  int samples = 0;  // N after the step
  int d = 0;
  int m = 0;
  std::optional<double> sigma2;  // chosen variance when a grid was searched
  Eigen::VectorXd theta;
  ReBoundSet bounds{};
  double x = 0.0;
  double yhat_power = 0.0;
  int excluded = 0;  // candidates rejected this step
};

namespace detail {

inline void advance(OnlineState& st, const Signal& u, const Signal& y, int index) {
  if (u.size() != y.size()) throw InvalidArgument("online_step: u and y lengths differ");
  if (index != st.samples) throw InvalidArgument("online_step: samples must arrive in order");
  if (index >= u.size()) throw InvalidArgument("online_step: sample index beyond data");
  const int n = index + 1;
  for (auto& rec : st.records) {
    if (rec.updates_since_refactor >= kRefactorInterval) {
      detail::batch_fit(rec, u, y, n);
    } else {
      rank_one_update(rec, new_row(u, index, rec.d, rec.m), y[index]);
    }
    detail::fit_residual(rec, u, y, n);
  }
  st.samples = n;
}

inline StepResult pick(const OnlineState& st, std::span<const double> sigma2s, bool wholesale,
                       const ValidationParams& p) {
  p.validate();
  StepResult best;
  bool found = false;
  double best_s2 = 0.0;
  int excluded = 0;
  std::size_t best_idx = 0;
  for (double s2 : sigma2s) {
    if (!(s2 > 0.0)) throw InvalidArgument("online_step: noise variance must be positive");
    bool rejected = false;
    double re_b = std::numeric_limits<double>::infinity();
    std::size_t idx_b = 0;
    ReBoundSet bounds_b{};
    bool any = false;
    int local_excluded = 0;
    for (std::size_t i = 0; i < st.records.size(); ++i) {
      const auto& r = st.records[i];
      const auto b = evaluate_bounds(r.x, r.d, r.m, st.samples, s2, p);
      if (!b) {
        ++local_excluded;
        if (wholesale) {
          rejected = true;
          break;
        }
        continue;
      }
      if (!any || better(b->re_hi, r.m, r.d, 0.0, re_b, st.records[idx_b].m, st.records[idx_b].d, 0.0)) {
        any = true;
        re_b = b->re_hi;
        idx_b = i;
        bounds_b = *b;
      }
    }
    if (rejected || !any) continue;
    const auto& rb = st.records[idx_b];
    if (!found || better(re_b, rb.m, rb.d, s2, best.bounds.re_hi, best.m, best.d, best_s2)) {
      found = true;
      best.d = rb.d;
      best.m = rb.m;
      best.bounds = bounds_b;
      best_s2 = s2;
      best_idx = idx_b;
      excluded = local_excluded;
    }
  }
  if (!found)
    throw NoFeasibleModel({"every candidate rejected at N = " + std::to_string(st.samples)});
  const auto& r = st.records[best_idx];
  best.samples = st.samples;
  best.theta = r.theta;
  best.x = r.x;
  best.yhat_power = r.yhat_power;
  best.excluded = excluded;
  if (sigma2s.size() > 1) best.sigma2 = best_s2;
  return best;
}

}  // namespace detail

/// Consumes sample `index` and re-selects among the candidates at a known
/// variance. Candidates whose bounds are infeasible are skipped this step.
inline StepResult online_step(OnlineState& st, const Signal& u, const Signal& y, int index,
                              const ValidationParams& p, double sigma2) {
  detail::advance(st, u, y, index);
  const double one[] = {sigma2};
  return detail::pick(st, one, false, p);
}

/// Same, searching a variance grid. A grid value is dropped when any candidate
/// is infeasible at it, as in the batch search.
inline StepResult online_step(OnlineState& st, const Signal& u, const Signal& y, int index,
                              const ValidationParams& p, std::span<const double> sigma2_grid) {
  if (sigma2_grid.empty()) throw InvalidArgument("online_step: empty variance grid");
  detail::advance(st, u, y, index);
  return detail::pick(st, sigma2_grid, true, p);
}

// ---------------------------------------------------------------------------
// nested engine

/// Per delay d in [d_lo, d_hi): upper-triangular R (k x k, k = M - d) and
/// z = Q^T y restricted to the leading k entries, for the slice (d, M) of the
/// samples seen so far. Leading blocks give every shorter slice at that delay.
class DelayBank {
 public:
  DelayBank(int ambient, int d_lo = 0, int d_hi = -1)
      : ambient_(ambient), d_lo_(d_lo), d_hi_(d_hi < 0 ? ambient : d_hi) {
    if (ambient < 1) throw InvalidArgument("DelayBank: ambient length must be positive");
    if (d_lo_ < 0 || d_lo_ >= d_hi_ || d_hi_ > ambient)
      throw InvalidArgument("DelayBank: need 0 <= d_lo < d_hi <= M");
    for (int d = d_lo_; d < d_hi_; ++d) {
      const int k = ambient - d;
      factors_.push_back({RowMatrix::Zero(k, k), Eigen::VectorXd::Zero(k)});
    }
  }

  int ambient() const noexcept { return ambient_; }
  int d_lo() const noexcept { return d_lo_; }
  int d_hi() const noexcept { return d_hi_; }
  int samples() const noexcept { return n_; }

  /// Appends row `index` (must equal samples()) of the data.
  void append(const Signal& u, const Signal& y, int index) {
    if (index != n_) throw InvalidArgument("DelayBank: samples must arrive in order");
    if (index >= u.size() || index >= y.size()) throw InvalidArgument("DelayBank: index beyond data");
    Eigen::VectorXd row(ambient_);
    for (int c = 0; c < ambient_; ++c) row[c] = u.at_causal(index - c);
    append_row(row, y[index]);
  }

  /// Appends the row [u(n), u(n-1), ..., u(n-M+1)] with output y(n).
  void append_row(const Eigen::VectorXd& row, double y_n) {
    if (row.size() != ambient_) throw InvalidArgument("DelayBank: row length must equal M");
    for (int d = d_lo_; d < d_hi_; ++d) {
      Factor& f = factors_[d - d_lo_];
      const int k = ambient_ - d;
      Eigen::VectorXd v = row.segment(d, k);
      double eta = y_n;
      for (int j = 0; j < k; ++j) {
        if (v[j] == 0.0) continue;
        const double rjj = f.r(j, j);
        const double rho = std::hypot(rjj, v[j]);
        const double c = rjj / rho;
        const double s = v[j] / rho;
        f.r(j, j) = rho;
        v[j] = 0.0;
        for (int l = j + 1; l < k; ++l) {
          const double a = f.r(j, l);
          f.r(j, l) = c * a + s * v[l];
          v[l] = -s * a + c * v[l];
        }
        const double zj = f.z[j];
        f.z[j] = c * zj + s * eta;
        eta = -s * zj + c * eta;
      }
    }
    yy_ += y_n * y_n;
    ++n_;
  }

  /// Whether the slice (d, m) is determined: enough rows and a leading
  /// triangular block that is not numerically singular.
  bool usable(int d, int m) const {
    const int k = m - d;
    if (k > n_) return false;
    const Factor& f = factors_[d - d_lo_];
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int j = 0; j < k; ++j) {
      lo = std::min(lo, std::abs(f.r(j, j)));
      hi = std::max(hi, std::abs(f.r(j, j)));
    }
    return hi > 0.0 && (lo / hi) * (lo / hi) >= kSingularRcond;
  }

  /// Output errors x_{d, d+1} .. x_{d, M} for one delay.
  Eigen::VectorXd output_errors(int d) const {
    const Factor& f = factors_[d - d_lo_];
    const int k = ambient_ - d;
    Eigen::VectorXd x(k);
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += f.z[j] * f.z[j];
      x[j] = std::max(0.0, yy_ - acc) / n_;
    }
    return x;
  }

  double x(int d, int m) const { return output_errors(d)[m - d - 1]; }

  /// Least-squares coefficients of slice (d, m).
  Eigen::VectorXd theta(int d, int m) const {
    const Factor& f = factors_[d - d_lo_];
    const int k = m - d;
    return f.r.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(f.z.head(k));
  }

  /// (1/N)||A theta||^2 of slice (d, m): ||R theta||^2 = ||z_head||^2.
  double yhat_power(int d, int m) const {
    const Factor& f = factors_[d - d_lo_];
    return f.z.head(m - d).squaredNorm() / n_;
  }

 private:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  struct Factor {
    RowMatrix r;
    Eigen::VectorXd z;
  };

  int ambient_;
  int d_lo_;
  int d_hi_;
  int n_ = 0;
  double yy_ = 0.0;
  std::vector<Factor> factors_;
};

struct BankChoice {
  int d = 0;
  int m = 0;
  double sigma2 = 0.0;
  ReBoundSet bounds{};
  double x = 0.0;
  int excluded = 0;
};

/// RE-minimizing cell of a DelayBank. With one variance, infeasible cells are
/// skipped; with several, a variance is dropped when any cell is infeasible.
inline std::optional<BankChoice> select_from_bank(const DelayBank& bank, std::span<const double> sigma2s,
                                                  const ValidationParams& p) {
  std::vector<Eigen::VectorXd> xs;
  std::vector<std::vector<char>> ok;
  for (int d = bank.d_lo(); d < bank.d_hi(); ++d) {
    xs.push_back(bank.output_errors(d));
    std::vector<char> row(bank.ambient() - d);
    for (int m = d + 1; m <= bank.ambient(); ++m) row[m - d - 1] = bank.usable(d, m);
    ok.push_back(std::move(row));
  }
  const bool wholesale = sigma2s.size() > 1;
  std::optional<BankChoice> best;
  const int n = bank.samples();
  for (double s2 : sigma2s) {
    std::optional<BankChoice> local;
    int excluded = 0;
    bool rejected = false;
    for (int d = bank.d_lo(); d < bank.d_hi() && !rejected; ++d) {
      const auto& xd = xs[d - bank.d_lo()];
      const auto& okd = ok[d - bank.d_lo()];
      for (int m = d + 1; m <= bank.ambient(); ++m) {
        const auto b = okd[m - d - 1] ? evaluate_bounds(xd[m - d - 1], d, m, n, s2, p)
                                      : Outcome<ReBoundSet>{std::nullopt, Rejection::alpha_infeasible};
        if (!b) {
          ++excluded;
          if (wholesale) {
            rejected = true;
            break;
          }
          continue;
        }
        if (!local || detail::better(b->re_hi, m, d, 0.0, local->bounds.re_hi, local->m, local->d, 0.0))
          local = BankChoice{d, m, s2, *b, xd[m - d - 1], 0};
      }
    }
    if (rejected || !local) continue;
    local->excluded = excluded;
    if (!best || detail::better(local->bounds.re_hi, local->m, local->d, s2, best->bounds.re_hi, best->m,
                                best->d, best->sigma2))
      best = local;
  }
  return best;
}

// ---------------------------------------------------------------------------
// streaming front end

enum class SigmaMode { known, fixed_after_warm_start, grid_each_step };

struct OnlineConfig {
  int ambient = 100;
  int d_lo = 0;
  int d_hi = -1;
  int warm_start = -1;  // negative: M + 10
  ValidationParams params;
  SigmaMode sigma_mode = SigmaMode::fixed_after_warm_start;
  double sigma2 = 0.0;  // for SigmaMode::known
  /// Variance grid as SNR bounds (dB) against the measured output power.
  double snr_lo_db = 0.0;
  double snr_hi_db = 40.0;
  double per_decade = 40.0;
  std::optional<StoppingRule> stop;
};

struct StepRecord {
  int samples;
  int d;
  int m;
  double sigma2;
  double z_hi;
  double re_hi;
  double ratio;  // z_hi / yhat power
  bool stopped;
};

/// Feeds (u(n), y(n)) pairs in order and emits one record per sample from
/// the warm start on.
class OnlineModeler {
 public:
  explicit OnlineModeler(OnlineConfig cfg) : cfg_(std::move(cfg)), bank_(cfg_.ambient, cfg_.d_lo, cfg_.d_hi) {
    cfg_.params.validate();
    row_ = Eigen::VectorXd::Zero(cfg_.ambient);
    if (cfg_.warm_start < 0) cfg_.warm_start = cfg_.ambient + 10;
    if (cfg_.warm_start < cfg_.ambient)
      throw InvalidArgument("online: warm start must be at least the ambient length");
    if (cfg_.sigma_mode == SigmaMode::known && !(cfg_.sigma2 > 0.0))
      throw InvalidArgument("online: known noise variance must be positive");
  }

  const OnlineConfig& config() const noexcept { return cfg_; }
  bool stopped() const noexcept { return stopped_; }
  int samples() const noexcept { return bank_.samples(); }
  const std::optional<BankChoice>& current() const noexcept { return choice_; }

  /// Current estimate embedded in length M (zero before the warm start).
  Eigen::VectorXd estimate() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg_.ambient);
    if (choice_) out.segment(choice_->d, choice_->m - choice_->d) = bank_.theta(choice_->d, choice_->m);
    return out;
  }

  std::optional<StepRecord> push(double u_n, double y_n) {
    if (!std::isfinite(u_n) || !std::isfinite(y_n)) throw InvalidArgument("online: non-finite sample");
    // shift register of the last M inputs, newest first
    for (int c = cfg_.ambient - 1; c > 0; --c) row_[c] = row_[c - 1];
    row_[0] = u_n;
    bank_.append_row(row_, y_n);
    yy_ += y_n * y_n;
    if (bank_.samples() < cfg_.warm_start) return std::nullopt;
    if (bank_.samples() == cfg_.warm_start) init_variance();

    std::vector<double> grid;
    if (cfg_.sigma_mode == SigmaMode::grid_each_step) grid = variance_grid();
    const std::span<const double> s2s = grid.empty() ? std::span<const double>(&sigma2_, 1) : grid;
    choice_ = select_from_bank(bank_, s2s, cfg_.params);
    if (!choice_)
      throw NoFeasibleModel({"every candidate rejected at N = " + std::to_string(bank_.samples())});
    const double yp = bank_.yhat_power(choice_->d, choice_->m);
    const double ratio = yp > 0.0 ? choice_->bounds.z_hi / yp : std::numeric_limits<double>::infinity();
    if (cfg_.stop && !stopped_ && yp > 0.0 && should_stop(choice_->bounds.z_hi, yp, *cfg_.stop)) stopped_ = true;
    return StepRecord{bank_.samples(), choice_->d, choice_->m, choice_->sigma2, choice_->bounds.z_hi,
                      choice_->bounds.re_hi, ratio, stopped_};
  }

 private:
  std::vector<double> variance_grid() const {
    const double power = yy_ / bank_.samples();
    if (!(power > 0.0)) throw InvalidArgument("online: output has zero power");
    return geometric_grid(power / std::pow(10.0, cfg_.snr_hi_db / 10.0),
                          power / std::pow(10.0, cfg_.snr_lo_db / 10.0), cfg_.per_decade);
  }

  void init_variance() {
    if (cfg_.sigma_mode == SigmaMode::known) {
      sigma2_ = cfg_.sigma2;
      return;
    }
    if (cfg_.sigma_mode == SigmaMode::grid_each_step) return;
    const auto grid = variance_grid();
    const auto pick = select_from_bank(bank_, grid, cfg_.params);
    if (!pick) throw NoFeasibleModel({"no feasible noise variance at the warm start"});
    sigma2_ = pick->sigma2;
  }

  OnlineConfig cfg_;
  DelayBank bank_;
  Eigen::VectorXd row_;
  double yy_ = 0.0;
  double sigma2_ = 0.0;
  bool stopped_ = false;
  std::optional<BankChoice> choice_;
};

}  // namespace resysid
