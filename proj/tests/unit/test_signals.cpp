#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "resysid/signals.hpp"

using namespace resysid;

namespace {

Signal sig(const std::vector<double>& v) { return Signal(v); }

std::vector<double> to_std(const Signal& s) { return {s.vector().data(), s.vector().data() + s.size()}; }

}  // namespace

TEST(Signal, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(Signal(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(sig({1.0, std::nan("")}), InvalidArgument);
  EXPECT_THROW(sig({INFINITY}), InvalidArgument);
  EXPECT_NO_THROW(sig({0.0}));
}

TEST(Signal, PowerAndPrefix) {
  const Signal s = sig({3, 4});
  EXPECT_DOUBLE_EQ(s.power(), 12.5);
  EXPECT_EQ(s.prefix(1).size(), 1);
  EXPECT_EQ(s.at_causal(-1), 0.0);
  EXPECT_THROW(s.prefix(3), InvalidArgument);
}

TEST(ImpulseResponse, EmbeddedHasLeadingAndTrailingZeros) {
  const ImpulseResponse h(3, {1.0, -2.0}, 8);
  EXPECT_EQ(h.length(), 5);
  const auto e = h.embedded();
  ASSERT_EQ(e.size(), 8);
  for (int n : {0, 1, 2, 5, 6, 7}) EXPECT_EQ(e[n], 0.0);
  EXPECT_EQ(e[3], 1.0);
  EXPECT_EQ(e[4], -2.0);
  EXPECT_THROW(ImpulseResponse(3, {1.0, 2.0}, 4), InvalidArgument);
  EXPECT_THROW(ImpulseResponse(-1, {1.0}), InvalidArgument);
  EXPECT_THROW(ImpulseResponse(0, {}), InvalidArgument);
}

TEST(BernoulliInput, ValuesAreSigns) {
  const Signal u = bernoulli_input(4, 17);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(u[i] == 1.0 || u[i] == -1.0);
}

TEST(BernoulliInput, MeanWithinThreeSigma) {
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const Signal u = bernoulli_input(1000, seed);
    EXPECT_LE(std::abs(u.vector().mean()), 0.12) << "seed " << seed;
  }
}

TEST(BernoulliInput, DeterministicPerSeed) {
  EXPECT_EQ(bernoulli_input(64, 5).vector(), bernoulli_input(64, 5).vector());
  EXPECT_NE(bernoulli_input(64, 5).vector(), bernoulli_input(64, 6).vector());
  EXPECT_THROW(bernoulli_input(0, 1), InvalidArgument);
}

TEST(SimulateOutput, ShiftedImpulse) {
  const Signal y = simulate_output(ImpulseResponse(2, {1.0}), sig({1, 2, 3}));
  EXPECT_EQ(to_std(y), (std::vector<double>{0, 0, 1}));
}

TEST(SimulateOutput, IdentitySystem) {
  const Signal u = sig({0.5, -1, 2, 7});
  EXPECT_EQ(simulate_output(ImpulseResponse(0, {1.0}), u).vector(), u.vector());
}

TEST(SimulateOutput, MatchesDoubleLoopConvolution) {
  const auto u = oracle::random_vec(12, 3);
  const auto active = oracle::random_vec(5, 4);
  const ImpulseResponse h(2, active, 9);
  oracle::Vec theta(7, 0.0);
  for (int i = 0; i < 5; ++i) theta[2 + i] = active[i];
  const auto want = oracle::convolve(theta, u);
  const auto got = simulate_output(h, Signal(u));
  for (int n = 0; n < 12; ++n) EXPECT_NEAR(got[n], want[n], 1e-14);
}

TEST(SimulateOutput, Linearity) {
  const Signal u(oracle::random_vec(40, 8));
  const auto t1 = oracle::random_vec(6, 9);
  const auto t2 = oracle::random_vec(6, 10);
  const double a = 1.7, b = -0.3;
  std::vector<double> t12(6);
  for (int i = 0; i < 6; ++i) t12[i] = a * t1[i] + b * t2[i];
  const auto y1 = simulate_output(ImpulseResponse(1, t1), u).vector();
  const auto y2 = simulate_output(ImpulseResponse(1, t2), u).vector();
  const auto y12 = simulate_output(ImpulseResponse(1, t12), u).vector();
  for (int n = 0; n < 40; ++n) {
    const double want = a * y1[n] + b * y2[n];
    EXPECT_NEAR(y12[n], want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(SimulateOutput, ExtraLeadingZeroShiftsByOne) {
  const Signal u(oracle::random_vec(30, 11));
  const auto t = oracle::random_vec(4, 12);
  const auto y0 = simulate_output(ImpulseResponse(3, t), u).vector();
  const auto y1 = simulate_output(ImpulseResponse(4, t), u).vector();
  EXPECT_EQ(y1[0], 0.0);
  for (int n = 1; n < 30; ++n) EXPECT_DOUBLE_EQ(y1[n], y0[n - 1]);
}

TEST(AddNoise, RejectsNonPositiveVariance) {
  const Signal y = sig({1, 2});
  EXPECT_THROW(add_noise(y, {0.0, 1}), InvalidArgument);
  EXPECT_THROW(add_noise(y, {-1.0, 1}), InvalidArgument);
}

TEST(AddNoise, SampleVarianceWithinChiSquareBand) {
  const Signal zero(Eigen::VectorXd::Zero(10000));
  const Signal y = add_noise(zero, {1.0, 2024});
  const double mean = y.vector().mean();
  const double var = (y.vector().array() - mean).square().sum() / (y.size() - 1);
  EXPECT_GE(var, 0.94);
  EXPECT_LE(var, 1.06);
}

TEST(AddNoise, DeterministicPerSeed) {
  const Signal ybar(oracle::random_vec(50, 1));
  EXPECT_EQ(add_noise(ybar, {0.3, 7}).vector(), add_noise(ybar, {0.3, 7}).vector());
}

TEST(SigmaFromSnr, ScalarCases) {
  const Signal unit = sig({1, -1, 1, -1});
  EXPECT_DOUBLE_EQ(sigma_from_snr(unit, 0.0), 1.0);
  EXPECT_NEAR(sigma_from_snr(unit, 10.0), 0.1, 1e-15);
  const Signal p25 = sig({std::sqrt(2.5), -std::sqrt(2.5)});
  EXPECT_NEAR(sigma_from_snr(p25, 15.0), 0.0790569415, 1e-9);
  EXPECT_THROW(sigma_from_snr(sig({0, 0}), 10.0), InvalidArgument);
}

TEST(Random, DeriveSeedSpreadsStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(42, k));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(Random, GaussianMomentsAndFixedSequence) {
  GaussianStream g(123);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = g.next();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  GaussianStream a(9), b(9);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.next(), b.next());
}
