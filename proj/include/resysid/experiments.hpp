#pragma once

// Test systems, scenario files, and the Monte-Carlo harness.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "resysid/baselines.hpp"
#include "resysid/errors.hpp"
#include "resysid/online.hpp"
#include "resysid/parallel.hpp"
#include "resysid/random.hpp"
#include "resysid/re_estimator.hpp"
#include "resysid/residual_grid.hpp"
#include "resysid/signals.hpp"

namespace resysid {

// ---------------------------------------------------------------------------
// systems

struct FirDesign {
  int delay = 7;
  int length = 69;             // one past the last active tap
  double cutoff = 20.0 / 96.0; // fraction of the sample rate
  double kaiser_beta = 0.0;    // 0 gives a rectangular window
};

/// Kaiser-windowed sinc lowpass with unit DC gain, placed at `delay`.
inline ImpulseResponse system_I(const FirDesign& cfg = {}, int ambient = -1) {
  const int taps = cfg.length - cfg.delay;
  if (cfg.delay < 0 || taps < 1) throw InvalidArgument("system_I: need 0 <= delay < length");
  if (!(cfg.cutoff > 0.0 && cfg.cutoff < 0.5)) throw InvalidArgument("system_I: cutoff must lie in (0, 0.5)");
  if (!(cfg.kaiser_beta >= 0.0)) throw InvalidArgument("system_I: Kaiser beta must be nonnegative");
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double centre = 0.5 * (taps - 1);
  const double i0b = std::cyl_bessel_i(0.0, cfg.kaiser_beta);
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double t = n - centre;
    const double arg = 2.0 * cfg.cutoff * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = taps == 1 ? 0.0 : 2.0 * n / (taps - 1) - 1.0;
    const double w = std::cyl_bessel_i(0.0, cfg.kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[static_cast<std::size_t>(n)] = 2.0 * cfg.cutoff * sinc * w;
    sum += h[static_cast<std::size_t>(n)];
  }
  for (double& v : h) v /= sum;
  return ImpulseResponse(cfg.delay, std::move(h), ambient < 0 ? cfg.length : ambient);
}

/// theta(n) = 0.2545 (0.9094)^n - 0.3316 (0.8146)^n for n in [0, n_max),
/// placed at `delay`.
inline ImpulseResponse system_II(int n_max, int delay = 11) {
  if (n_max < 1) throw InvalidArgument("system_II: n_max must be positive");
  if (delay < 0) throw InvalidArgument("system_II: delay must be nonnegative");
  std::vector<double> h(static_cast<std::size_t>(n_max));
  for (int n = 0; n < n_max; ++n) h[static_cast<std::size_t>(n)] = 0.2545 * std::pow(0.9094, n) - 0.3316 * std::pow(0.8146, n);
  return ImpulseResponse(delay, std::move(h));
}

/// Root mean squared difference of two equal-length coefficient vectors.
inline double rmse_theta(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate) {
  if (truth.size() != estimate.size() || truth.size() == 0)
    throw InvalidArgument("rmse_theta: vectors must share a nonzero length");
  return std::sqrt((truth - estimate).squaredNorm() / static_cast<double>(truth.size()));
}

inline double rmse_theta(const ImpulseResponse& truth, const Eigen::VectorXd& estimate, int ambient) {
  if (estimate.size() != ambient) throw InvalidArgument("rmse_theta: estimate must have length M");
  return rmse_theta(truth.embedded(ambient), estimate);
}

// ---------------------------------------------------------------------------
// scenarios

enum class SystemKind { fir, iir };

struct Scenario {
  SystemKind system = SystemKind::fir;
  FirDesign fir;
  int iir_delay = 11;
  int iir_terms = 400;  // coefficients used to simulate the IIR output

  int samples = 1000;
  std::vector<double> snr_db{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
  int trials = 100;
  int ambient = 100;  // M
  int d_lo = 0;
  int d_hi = -1;      // exclusive; negative means M
  ValidationParams params;

  bool sigma_known = true;
  /// Unknown-variance grid: SNR range (dB) against the measured output power
  /// and grid density in points per decade of variance.
  double grid_snr_lo_db = 0.0;
  double grid_snr_hi_db = 40.0;
  double grid_per_decade = 40.0;

  double epsilon = 0.1;
  int warm_start = -1;
  std::uint64_t seed = 1;

  int delay_hi() const { return d_hi < 0 ? ambient : d_hi; }

  ImpulseResponse truth() const {
    if (system == SystemKind::fir) return system_I(fir, std::max(ambient, fir.length));
    return system_II(iir_terms, iir_delay);
  }

  /// Delay and length of the true response as seen inside the ambient window.
  int true_delay() const { return system == SystemKind::fir ? fir.delay : iir_delay; }
  int true_length() const { return system == SystemKind::fir ? fir.length : ambient; }

  void validate() const {
    params.validate();
    if (trials < 1) throw InvalidArgument("scenario: trials must be at least 1");
    if (samples < 2) throw InvalidArgument("scenario: n_samples must be at least 2");
    if (ambient < 1 || ambient > samples) throw InvalidArgument("scenario: need 1 <= ambient_samples <= n_samples");
    if (d_lo < 0 || d_lo >= delay_hi() || delay_hi() > ambient)
      throw InvalidArgument("scenario: need 0 <= d_min_samples < d_max_samples <= ambient_samples");
    if (snr_db.empty()) throw InvalidArgument("scenario: snr_db list is empty");
    for (double s : snr_db)
      if (!std::isfinite(s)) throw InvalidArgument("scenario: SNR values must be finite");
    if (!(grid_per_decade > 0.0) || !(grid_snr_hi_db >= grid_snr_lo_db))
      throw InvalidArgument("scenario: bad variance grid");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("scenario: epsilon must lie in (0, 1)");
    if (system == SystemKind::iir && iir_terms < 1) throw InvalidArgument("scenario: iir_terms_samples must be positive");
    (void)truth();
  }
};

inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item.substr(b), &used);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", b + used) != std::string::npos)
      throw InvalidArgument("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Applies `key = value` pairs (flat INI, no sections) on top of `base`.
inline Scenario parse_scenario_stream(std::istream& in, Scenario s = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
  auto num = [](const std::string& key, const std::string& v) {
    const auto list = parse_number_list(v);
    if (list.size() != 1) throw InvalidArgument("scenario: " + key + " needs one number");
    return list.front();
  };
  auto integer = [&](const std::string& key, const std::string& v) {
    const double d = num(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw InvalidArgument("scenario: " + key + " must be an integer");
    return static_cast<int>(d);
  };
  auto boolean = [](const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("scenario: " + key + " must be true or false");
  };
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw InvalidArgument("scenario: sections are not supported ('" + key + "')");
    const std::string v = node.data();
    if (key == "system") {
      if (v == "fir") s.system = SystemKind::fir;
      else if (v == "iir") s.system = SystemKind::iir;
      else throw InvalidArgument("scenario: system must be fir or iir");
    } else if (key == "fir_delay_samples") s.fir.delay = integer(key, v);
    else if (key == "fir_length_samples") s.fir.length = integer(key, v);
    else if (key == "fir_cutoff_ratio") s.fir.cutoff = num(key, v);
    else if (key == "fir_kaiser_beta") s.fir.kaiser_beta = num(key, v);
    else if (key == "iir_delay_samples") s.iir_delay = integer(key, v);
    else if (key == "iir_terms_samples") s.iir_terms = integer(key, v);
    else if (key == "n_samples") s.samples = integer(key, v);
    else if (key == "snr_db") s.snr_db = parse_number_list(v);
    else if (key == "trials") s.trials = integer(key, v);
    else if (key == "ambient_samples") s.ambient = integer(key, v);
    else if (key == "d_min_samples") s.d_lo = integer(key, v);
    else if (key == "d_max_samples") s.d_hi = integer(key, v) + 1;
    else if (key == "alpha") s.params.alpha = num(key, v);
    else if (key == "beta") s.params.beta = num(key, v);
    else if (key == "sigma_known") s.sigma_known = boolean(key, v);
    else if (key == "sigma_grid_snr_lo_db") s.grid_snr_lo_db = num(key, v);
    else if (key == "sigma_grid_snr_hi_db") s.grid_snr_hi_db = num(key, v);
    else if (key == "sigma_grid_per_decade") s.grid_per_decade = num(key, v);
    else if (key == "epsilon") s.epsilon = num(key, v);
    else if (key == "warm_start_samples") s.warm_start = integer(key, v);
    else if (key == "seed") {
      try {
        s.seed = std::stoull(v);
      } catch (const std::exception&) {
        throw InvalidArgument("scenario: seed must be a nonnegative integer");
      }
    } else {
      throw InvalidArgument("scenario: unknown key '" + key + "'");
    }
  }
  return s;
}

inline Scenario parse_scenario_text(const std::string& text, Scenario base = {}) {
  std::istringstream in(text);
  return parse_scenario_stream(in, std::move(base));
}

inline Scenario load_scenario(const std::string& path, Scenario base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  return parse_scenario_stream(in, std::move(base));
}

// ---------------------------------------------------------------------------
// trials

struct TrialData {
  Signal u;
  Signal ybar;
  Signal y;
  double sigma2;
};

/// Trial k draws its input from derive_seed(derive_seed(master, k), 0) and its
/// unit noise from stream 1, so every SNR of a trial shares one realization.
inline TrialData synthesize(const ImpulseResponse& truth, int samples, double snr_db, std::uint64_t master,
                            int trial) {
  const std::uint64_t ts = derive_seed(master, static_cast<std::uint64_t>(trial));
  Signal u = bernoulli_input(samples, derive_seed(ts, 0));
  Signal ybar = simulate_output(truth, u);
  const double s2 = sigma_from_snr(ybar, snr_db);
  Signal y = add_noise(ybar, {s2, derive_seed(ts, 1)});
  return {std::move(u), std::move(ybar), std::move(y), s2};
}

enum class Method { re, aic, bic };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::re: return "re";
    case Method::aic: return "aic";
    case Method::bic: return "bic";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "re") return Method::re;
  if (s == "aic") return Method::aic;
  if (s == "bic") return Method::bic;
  throw InvalidArgument("unknown method '" + s + "' (expected re, aic or bic)");
}

struct TrialResult {
  int trial = 0;
  double snr_db = 0.0;
  Method method = Method::re;
  bool ok = false;
  std::string error;
  int d = 0;
  int m = 0;
  std::optional<double> sigma2;  // selected variance, unknown-variance runs
  double sigma2_true = 0.0;
  double rmse = 0.0;
  double seconds = 0.0;
};

/// The variance grid used when the variance is not known.
inline std::vector<double> scenario_variance_grid(const Scenario& sc, const Signal& y) {
  const double p = y.power();
  return geometric_grid(p / std::pow(10.0, sc.grid_snr_hi_db / 10.0), p / std::pow(10.0, sc.grid_snr_lo_db / 10.0),
                        sc.grid_per_decade);
}

/// One trial at one SNR for each requested method.
inline std::vector<TrialResult> run_trial(const Scenario& sc, const ImpulseResponse& truth, double snr_db, int trial,
                                          const std::vector<Method>& methods) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrialData data = synthesize(truth, sc.samples, snr_db, sc.seed, trial);
  std::vector<TrialResult> out;
  for (Method meth : methods) {
    TrialResult r;
    r.trial = trial;
    r.snr_db = snr_db;
    r.method = meth;
    r.sigma2_true = data.sigma2;
    out.push_back(r);
  }
  auto finish = [&](TrialResult& r) {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  std::optional<ResidualGrid> grid;
  std::optional<ResidualGrid> zero_row;
  try {
    grid = residual_grid(data.u, data.y, sc.ambient, sc.d_lo, sc.delay_hi());
  } catch (const Error& e) {
    for (auto& r : out) {
      r.error = e.what();
      finish(r);
    }
    return out;
  }
  for (auto& r : out) {
    try {
      if (r.method == Method::re) {
        SelectionConfig cfg;
        cfg.ambient = sc.ambient;
        cfg.d_lo = sc.d_lo;
        cfg.d_hi = sc.delay_hi();
        cfg.params = sc.params;
        cfg.sigma_known = sc.sigma_known;
        cfg.sigma2_grid = sc.sigma_known ? std::vector<double>{data.sigma2} : scenario_variance_grid(sc, data.y);
        const Selection sel = select_model(data.u, data.y, *grid, cfg);
        r.d = sel.d;
        r.m = sel.m;
        r.sigma2 = sel.sigma2;
        r.rmse = rmse_theta(truth, sel.model.embedded(sc.ambient), sc.ambient);
      } else {
        if (sc.d_lo != 0 && !zero_row) zero_row = residual_grid(data.u, data.y, sc.ambient, 0, 1);
        const ResidualGrid& g = sc.d_lo == 0 ? *grid : *zero_row;
        const OrderSelection os = r.method == Method::aic ? aic_order(g) : bic_order(g);
        r.d = 0;
        r.m = os.m;
        r.rmse = rmse_theta(truth, fit_candidate(data.u, data.y, 0, os.m).embedded(sc.ambient), sc.ambient);
      }
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    finish(r);
  }
  return out;
}

struct Aggregate {
  double snr_db = 0.0;
  Method method = Method::re;
  int trials_used = 0;
  int failures = 0;
  double mean_d = 0.0, sd_d = 0.0;
  double mean_m = 0.0, sd_m = 0.0;
  double mean_rmse = 0.0;
};

struct MonteCarloResult {
  std::vector<TrialResult> trials;  // ordered by SNR, trial, method
  std::vector<Aggregate> aggregates;  // ordered by SNR, method
  double seconds = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator, 0 for one value),
/// two-pass.
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::vector<Aggregate> aggregate(const std::vector<TrialResult>& rows, const std::vector<double>& snrs,
                                        const std::vector<Method>& methods) {
  std::vector<Aggregate> out;
  for (double snr : snrs) {
    for (Method meth : methods) {
      Aggregate a;
      a.snr_db = snr;
      a.method = meth;
      std::vector<double> ds, ms, rs;
      for (const auto& r : rows) {
        if (r.snr_db != snr || r.method != meth) continue;
        if (!r.ok) {
          ++a.failures;
          continue;
        }
        ds.push_back(r.d);
        ms.push_back(r.m);
        rs.push_back(r.rmse);
      }
      a.trials_used = static_cast<int>(ds.size());
      std::tie(a.mean_d, a.sd_d) = mean_sd(ds);
      std::tie(a.mean_m, a.sd_m) = mean_sd(ms);
      a.mean_rmse = mean_sd(rs).first;
      out.push_back(a);
    }
  }
  return out;
}

/// Every (SNR, trial) pair of the scenario, spread over `jobs` threads.
inline MonteCarloResult run_monte_carlo(const Scenario& sc, const std::vector<Method>& methods = {Method::re},
                                        int jobs = 1) {
  sc.validate();
  if (methods.empty()) throw InvalidArgument("run_monte_carlo: no methods");
  const auto t0 = std::chrono::steady_clock::now();
  const ImpulseResponse truth = sc.truth();
  const int n_snr = static_cast<int>(sc.snr_db.size());
  std::vector<std::vector<TrialResult>> slots(static_cast<std::size_t>(n_snr * sc.trials));
  parallel_for(n_snr * sc.trials, jobs, [&](int job) {
    const int s = job / sc.trials;
    const int k = job % sc.trials;
    slots[static_cast<std::size_t>(job)] = run_trial(sc, truth, sc.snr_db[static_cast<std::size_t>(s)], k, methods);
  });
  MonteCarloResult res;
  for (auto& v : slots)
    for (auto& r : v) res.trials.push_back(std::move(r));
  res.aggregates = aggregate(res.trials, sc.snr_db, methods);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// delay sweep

struct SweepPoint {
  int samples = 0;
  int ambient = 0;
  int trials_used = 0;
  double delay_rmse = 0.0;
  bool low_rank_risk = false;
};

/// Delay RMSE against data length with the true delay drawn uniformly from
/// [delay_lo, delay_hi] per trial (stream 2 of the trial seed). The ambient
/// length is capped at N / 2; lengths below 100 are flagged.
inline std::vector<SweepPoint> delay_rmse_sweep(const Scenario& base, const std::vector<int>& lengths, double snr_db,
                                                int delay_lo = 1, int delay_hi = 20, int jobs = 1) {
  if (delay_lo < 0 || delay_hi < delay_lo) throw InvalidArgument("delay_rmse_sweep: bad delay range");
  std::vector<SweepPoint> out;
  for (int n : lengths) {
    Scenario sc = base;
    sc.samples = n;
    sc.ambient = std::min(base.ambient, n / 2);
    sc.d_hi = base.d_hi < 0 ? -1 : std::min(base.d_hi, sc.ambient);
    std::vector<double> sq(static_cast<std::size_t>(sc.trials), std::numeric_limits<double>::quiet_NaN());
    parallel_for(sc.trials, jobs, [&](int k) {
      Engine eng(derive_seed(derive_seed(sc.seed, static_cast<std::uint64_t>(k)), 2));
      const int span = delay_hi - delay_lo + 1;
      const int dbar = delay_lo + static_cast<int>(eng() % static_cast<std::uint64_t>(span));
      Scenario local = sc;
      if (local.system == SystemKind::fir) {
        local.fir.length += dbar - local.fir.delay;
        local.fir.delay = dbar;
      } else {
        local.iir_delay = dbar;
      }
      const auto r = run_trial(local, local.truth(), snr_db, k, {Method::re}).front();
      if (r.ok) sq[static_cast<std::size_t>(k)] = double(r.d - dbar) * double(r.d - dbar);
    });
    SweepPoint p;
    p.samples = n;
    p.ambient = sc.ambient;
    double acc = 0.0;
    for (double v : sq)
      if (!std::isnan(v)) {
        acc += v;
        ++p.trials_used;
      }
    p.delay_rmse = p.trials_used ? std::sqrt(acc / p.trials_used) : std::numeric_limits<double>::quiet_NaN();
    p.low_rank_risk = n < 100;
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// online runs

struct OnlineRun {
  std::vector<StepRecord> steps;
  /// First N from which (d*, m*) stays at the target until the end of data.
  std::optional<int> converged_at;
};

/// First N whose ratio falls below epsilon.
inline std::optional<int> first_stop(const OnlineRun& run, double epsilon) {
  for (const auto& s : run.steps)
    if (s.ratio < epsilon) return s.samples;
  return std::nullopt;
}

inline OnlineRun run_online(const Signal& u, const Signal& y, const OnlineConfig& cfg, int target_d, int target_m,
                            bool halt_on_stop = false) {
  if (u.size() != y.size()) throw InvalidArgument("run_online: u and y lengths differ");
  const int warm = cfg.warm_start < 0 ? cfg.ambient + 10 : cfg.warm_start;
  if (u.size() < warm)
    throw InsufficientData("online run needs at least " + std::to_string(warm) + " samples (warm start), got " +
                           std::to_string(u.size()));
  OnlineModeler model(cfg);
  OnlineRun run;
  for (int n = 0; n < u.size(); ++n) {
    if (auto rec = model.push(u[n], y[n])) {
      run.steps.push_back(*rec);
      if (halt_on_stop && rec->stopped) break;
    }
  }
  for (auto it = run.steps.rbegin(); it != run.steps.rend(); ++it) {
    if (it->d != target_d || it->m != target_m) break;
    run.converged_at = it->samples;
  }
  return run;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void write_delay_table(const std::string& path, const std::vector<Aggregate>& rows) {
  auto out = open_csv(path);
  out << "snr_db,method,mean_d,sd_d\n";
  for (const auto& a : rows) out << fmt6(a.snr_db) << ',' << to_string(a.method) << ',' << fmt6(a.mean_d) << ',' << fmt6(a.sd_d) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_joint_table(const std::string& path, const std::vector<Aggregate>& rows) {
  auto out = open_csv(path);
  out << "snr_db,mean_d,mean_m,rmse\n";
  for (const auto& a : rows)
    if (a.method == Method::re)
      out << fmt6(a.snr_db) << ',' << fmt6(a.mean_d) << ',' << fmt6(a.mean_m) << ',' << fmt6(a.mean_rmse) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_order_table(const std::string& path, const std::vector<Aggregate>& rows) {
  auto out = open_csv(path);
  out << "snr_db,method,mean_m,rmse\n";
  for (const auto& a : rows) out << fmt6(a.snr_db) << ',' << to_string(a.method) << ',' << fmt6(a.mean_m) << ',' << fmt6(a.mean_rmse) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_online_trace(const std::string& path, const std::vector<StepRecord>& steps) {
  auto out = open_csv(path);
  out << "N,d_star,m_star,ratio,stopped\n";
  for (const auto& s : steps)
    out << s.samples << ',' << s.d << ',' << s.m << ',' << fmt6(s.ratio) << ',' << (s.stopped ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_trials(const std::string& path, const std::vector<TrialResult>& rows) {
  auto out = open_csv(path);
  out << "snr_db,trial,method,ok,d,m,sigma2,sigma2_true,rmse,seconds\n";
  for (const auto& r : rows)
    out << fmt6(r.snr_db) << ',' << r.trial << ',' << to_string(r.method) << ',' << (r.ok ? 1 : 0) << ',' << r.d << ','
        << r.m << ',' << (r.sigma2 ? fmt6(*r.sigma2) : std::string()) << ',' << fmt6(r.sigma2_true) << ','
        << fmt6(r.rmse) << ',' << fmt6(r.seconds) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// signal files

/// One sample per line; blank lines and lines starting with '#' are skipped.
/// A first line that does not parse is taken as a header. Only the first
/// comma-separated field is read.
inline Signal read_signal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open signal file '" + path + "'");
  std::vector<double> v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    std::string field = line.substr(b, line.find(',', b) - b);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.pop_back();
    std::size_t used = 0;
    double x = 0.0;
    bool good = true;
    try {
      x = std::stod(field, &used);
    } catch (const std::exception&) {
      good = false;
    }
    if (!good || used != field.size() || !std::isfinite(x)) {
      if (v.empty() && lineno == 1) continue;
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a finite number: '" + field + "'");
    }
    v.push_back(x);
  }
  if (v.empty()) throw InvalidArgument("signal file '" + path + "' has no samples");
  return Signal(v);
}

inline void write_signal(const std::string& path, const Eigen::VectorXd& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[40];
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", s[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace resysid
