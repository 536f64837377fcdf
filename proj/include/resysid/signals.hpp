#pragma once

// Input generation, true-system simulation and calibrated additive noise.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "resysid/errors.hpp"
#include "resysid/random.hpp"

namespace resysid {

/// Finite real sequence indexed from 0. Never empty; every sample finite.
class Signal {
 public:
  explicit Signal(Eigen::VectorXd samples) : samples_(std::move(samples)) {
    if (samples_.size() < 1) throw InvalidArgument("signal must have at least one sample");
    if (!samples_.allFinite()) throw InvalidArgument("signal contains non-finite samples");
  }
  explicit Signal(const std::vector<double>& samples)
      : Signal(Eigen::Map<const Eigen::VectorXd>(samples.data(),
                                                 static_cast<Eigen::Index>(samples.size()))) {}

  int size() const noexcept { return static_cast<int>(samples_.size()); }
  double operator[](int n) const { return samples_[n]; }
  /// Causal access: zero for negative indices.
  double at_causal(int n) const { return n < 0 ? 0.0 : samples_[n]; }

  const Eigen::VectorXd& vector() const noexcept { return samples_; }
  std::span<const double> span() const noexcept {
    return {samples_.data(), static_cast<std::size_t>(samples_.size())};
  }

  /// Mean power (1/N)||s||^2.
  double power() const { return samples_.squaredNorm() / samples_.size(); }

  /// First n samples.
  Signal prefix(int n) const {
    if (n < 1 || n > size()) throw InvalidArgument("prefix length out of range");
    return Signal(Eigen::VectorXd(samples_.head(n)));
  }

 private:
  Eigen::VectorXd samples_;
};

/// Impulse response with `delay` leading zeros, active coefficients
/// theta(delay) .. theta(length - 1), and zeros up to the ambient length.
class ImpulseResponse {
 public:
  ImpulseResponse(int delay, std::vector<double> active, int ambient)
      : delay_(delay), ambient_(ambient), active_(std::move(active)) {
    if (delay_ < 0) throw InvalidArgument("impulse response delay must be nonnegative");
    if (active_.empty()) throw InvalidArgument("impulse response needs at least one active coefficient");
    if (length() > ambient_)
      throw InvalidArgument("impulse response length " + std::to_string(length()) +
                            " exceeds ambient length " + std::to_string(ambient_));
  }

  /// Unit-ambient convenience: ambient length equals delay + active size.
  ImpulseResponse(int delay, std::vector<double> active)
      : ImpulseResponse(delay, active, delay + static_cast<int>(active.size())) {}

  int delay() const noexcept { return delay_; }
  /// One past the last active index (the paper-style m).
  int length() const noexcept { return delay_ + static_cast<int>(active_.size()); }
  int ambient() const noexcept { return ambient_; }
  const std::vector<double>& active() const noexcept { return active_; }

  /// Coefficient at absolute index n (zero outside the active range).
  double operator()(int n) const {
    if (n < delay_ || n >= length()) return 0.0;
    return active_[static_cast<std::size_t>(n - delay_)];
  }

  /// Dense form of length `m` (defaults to the ambient length); coefficients
  /// beyond `m` are dropped.
  Eigen::VectorXd embedded(int m = -1) const {
    if (m < 0) m = ambient_;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (int n = delay_; n < std::min(m, length()); ++n) out[n] = (*this)(n);
    return out;
  }

  /// Same coefficients with a different ambient length.
  ImpulseResponse with_ambient(int ambient) const { return {delay_, active_, ambient}; }

 private:
  int delay_;
  int ambient_;
  std::vector<double> active_;
};

struct NoiseModel {
  double variance;
  std::uint64_t seed;
};

/// IID +/-1 sequence; one engine draw per sample, sign from the top bit.
inline Signal bernoulli_input(int n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("bernoulli_input: N must be positive");
  Engine eng(seed);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = (eng() >> 63) ? 1.0 : -1.0;
  return Signal(std::move(u));
}

/// Causal convolution truncated to the input length:
/// ybar(n) = sum_i theta(i) u(n - i), 0 <= n < N.
inline Signal simulate_output(const ImpulseResponse& theta, const Signal& u) {
  const int n_samples = u.size();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_samples);
  const auto& taps = theta.active();
  for (int j = 0; j < static_cast<int>(taps.size()); ++j) {
    const int lag = theta.delay() + j;
    if (lag >= n_samples) break;
    y.tail(n_samples - lag) += taps[j] * u.vector().head(n_samples - lag);
  }
  return Signal(std::move(y));
}

/// Unit-variance white Gaussian sequence for a seed.
inline Eigen::VectorXd unit_gaussian(int n, std::uint64_t seed) {
  GaussianStream g(seed);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = g.next();
  return w;
}

/// y = ybar + w, w ~ N(0, variance) iid.
inline Signal add_noise(const Signal& ybar, const NoiseModel& noise) {
  if (!(noise.variance > 0.0) || !std::isfinite(noise.variance))
    throw InvalidArgument("add_noise: variance must be positive");
  return Signal(Eigen::VectorXd(ybar.vector() +
                                std::sqrt(noise.variance) * unit_gaussian(ybar.size(), noise.seed)));
}

/// Noise variance giving the requested SNR against the mean power of ybar.
inline double sigma_from_snr(const Signal& ybar, double snr_db) {
  const double p = ybar.power();
  if (!(p > 0.0)) throw InvalidArgument("sigma_from_snr: noiseless output has zero power");
  if (!std::isfinite(snr_db)) throw InvalidArgument("sigma_from_snr: SNR must be finite");
  return p / std::pow(10.0, snr_db / 10.0);
}

}  // namespace resysid
