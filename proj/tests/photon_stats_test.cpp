#include "twinbeam/photon_stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "gtest/gtest.h"

using namespace twinbeam;

TEST(NbPmf, SingleModeThermalValues) {
  EXPECT_DOUBLE_EQ(nb_pmf(0, 1.0, 1.0), 0.5);
  EXPECT_NEAR(nb_pmf(2, 1.0, 1.0), 0.125, 1e-15);  // geometric 0.5^(n+1)
  EXPECT_NEAR(nb_pmf(0, 2.0, 2.0), 0.25, 1e-15);   // (1 + N/mu)^-mu
}

TEST(NbPmf, TwoModeValueMatchesRecurrence) {
  // Direct evaluation, cross-checked through p_{n+1}/p_n = (n+mu)/(n+1) * N/(N+mu).
  EXPECT_NEAR(nb_pmf(3, 2.0, 2.0), 0.125, 1e-14);
  double p = nb_pmf(0, 2.0, 2.0);
  for (int n = 0; n < 3; ++n) p *= detail::nb_step(n, 2.0, 2.0);
  EXPECT_NEAR(nb_pmf(3, 2.0, 2.0), p, 1e-15);
}

TEST(NbPmf, VacuumIsPointMass) {
  EXPECT_DOUBLE_EQ(nb_pmf(0, 0.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(nb_pmf(5, 0.0, 3.0), 0.0);
}

TEST(NbPmf, DomainErrors) {
  EXPECT_THROW(nb_pmf(1, -0.5, 1.0), std::domain_error);
  EXPECT_THROW(nb_pmf(1, 1.0, 0.0), std::domain_error);
  EXPECT_THROW(nb_pmf(1, 1.0, -2.0), std::domain_error);
  EXPECT_THROW(nb_pmf(-1, 1.0, 1.0), std::domain_error);
}

TEST(NbPmf, RecurrenceConsistency) {
  for (double N : {0.5, 1.0, 3.2, 21.3}) {
    for (double mu : {1.0, 2.7, 10.0, 200.0}) {
      const int n_max = truncation_length(N, mu, 1e-12);
      for (int n = 0; n < n_max; ++n) {
        const double expected = detail::nb_step(n, N, mu);
        const double ratio = nb_pmf(n + 1, N, mu) / nb_pmf(n, N, mu);
        ASSERT_NEAR(ratio / expected, 1.0, 1e-12) << "N=" << N << " mu=" << mu << " n=" << n;
      }
    }
  }
}

TEST(NbPmf, NonIntegerModesNormalizes) {
  const PhotonDist d = nb_dist(1.7, 2.45, 1e-9);
  EXPECT_NEAR(d.mass(), 1.0, 1e-9);
}

TEST(TruncationLength, VacuumIsZero) {
  EXPECT_EQ(truncation_length(0.0, 1.0, 1e-12), 0);
  EXPECT_EQ(truncation_length(0.0, 200.0, 1e-12), 0);
}

TEST(TruncationLength, GeometricTailBound) {
  // Single-mode thermal N=1: tail after n_max is 0.5^(n_max+1).
  const int n_max = truncation_length(1.0, 1.0, 1e-12);
  EXPECT_GE(n_max, 39);
  EXPECT_LE(n_max, 41);
  EXPECT_EQ(n_max, 39);  // 1 - 0.5^40 is the first cumulative above 1 - 1e-12
}

TEST(TruncationLength, Monotonicity) {
  EXPECT_LT(truncation_length(1.0, 1.0, 1e-3), truncation_length(1.0, 1.0, 1e-12));
  EXPECT_LE(truncation_length(0.5, 2.0, 1e-12), truncation_length(2.0, 2.0, 1e-12));
  EXPECT_LE(truncation_length(2.0, 2.0, 1e-12), truncation_length(21.3, 2.0, 1e-12));
}

TEST(TruncationLength, DomainErrors) {
  EXPECT_THROW(truncation_length(1.0, 1.0, 0.0), std::domain_error);
  EXPECT_THROW(truncation_length(1.0, 1.0, 1.0), std::domain_error);
}

TEST(NbDist, VacuumPointMass) {
  const PhotonDist d = nb_dist(0.0, 3.0, 1e-12);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d.probs[0], 1.0);
  EXPECT_DOUBLE_EQ(d.tail_bound, 0.0);
}

TEST(NbDist, GeometricSequence) {
  const PhotonDist d = nb_dist(1.0, 1.0, 1e-12);
  ASSERT_GE(static_cast<int>(d.size()), 39);
  for (int n = 0; n <= d.max_count(); ++n)
    ASSERT_NEAR(d.probs[static_cast<std::size_t>(n)], std::pow(0.5, n + 1), 1e-14);
}

TEST(NbDist, NormalizationWindow) {
  for (double N : {0.3, 1.0, 3.2, 21.3}) {
    for (double mu : {1.0, 2.0, 100.0}) {
      const PhotonDist d = nb_dist(N, mu, 1e-12);
      const double mass = d.mass();
      EXPECT_GE(mass, 1.0 - 1e-12) << "N=" << N << " mu=" << mu;
      EXPECT_LE(mass, 1.0 + 1e-15);
      EXPECT_LE(d.tail_bound, 1e-12);
      EXPECT_GE(mass + d.tail_bound, 1.0 - 1e-15);
    }
  }
}

TEST(NbDist, RejectsLooseTolerance) {
  EXPECT_THROW(nb_dist(1.0, 1.0, 1e-3), std::domain_error);
  EXPECT_THROW(nb_dist(1.0, 1.0, 0.0), std::domain_error);
}

TEST(BinomialThin, UnitEfficiencyIsIdentity) {
  const PhotonDist d = nb_dist(2.0, 2.0, 1e-12);
  const PhotonDist t = binomial_thin(d, 1.0);
  ASSERT_EQ(t.size(), d.size());
  for (std::size_t n = 0; n < d.size(); ++n) EXPECT_DOUBLE_EQ(t.probs[n], d.probs[n]);
}

TEST(BinomialThin, ZeroEfficiencyIsVacuum) {
  const PhotonDist d = nb_dist(2.0, 2.0, 1e-12);
  const PhotonDist t = binomial_thin(d, 0.0);
  EXPECT_NEAR(t.probs[0], 1.0, 1e-12);
  for (std::size_t n = 1; n < t.size(); ++n) EXPECT_DOUBLE_EQ(t.probs[n], 0.0);
}

TEST(BinomialThin, NegativeBinomialClosure) {
  // Thinning NB(N, mu) by eta gives NB(eta N, mu).
  for (double N : {0.7, 2.0, 6.0}) {
    for (double mu : {1.0, 2.0, 7.5}) {
      for (double eta : {0.15, 0.5, 0.9}) {
        const PhotonDist thinned = binomial_thin(nb_dist(N, mu, 1e-12), eta);
        const PhotonDist direct = nb_dist(eta * N, mu, 1e-12);
        const std::size_t overlap = std::min(thinned.size(), direct.size());
        for (std::size_t n = 0; n < overlap; ++n)
          ASSERT_NEAR(thinned.probs[n], direct.probs[n], 1e-12)
              << "N=" << N << " mu=" << mu << " eta=" << eta << " n=" << n;
      }
    }
  }
}

TEST(BinomialThin, Composition) {
  const PhotonDist d = nb_dist(3.0, 2.5, 1e-12);
  const PhotonDist two_step = binomial_thin(binomial_thin(d, 0.6), 0.25);
  const PhotonDist one_step = binomial_thin(d, 0.15);
  ASSERT_EQ(two_step.size(), one_step.size());
  for (std::size_t n = 0; n < one_step.size(); ++n)
    ASSERT_NEAR(two_step.probs[n], one_step.probs[n], 1e-12);
}

TEST(BinomialThin, MomentLaw) {
  // <m> = eta <n>,  var(m) = eta^2 var(n) + eta (1 - eta) <n>.
  const PhotonDist d = nb_dist(4.0, 3.0, 1e-12);
  const MomentSummary base = dist_stats(d);
  for (double eta : {0.07, 0.5, 0.85}) {
    const MomentSummary thinned = dist_stats(binomial_thin(d, eta));
    EXPECT_NEAR(thinned.mean, eta * base.mean, 1e-10);
    EXPECT_NEAR(thinned.variance,
                eta * eta * base.variance + eta * (1.0 - eta) * base.mean, 1e-10);
  }
}

TEST(BinomialThin, TailBoundNeverGrows) {
  PhotonDist d = nb_dist(2.0, 2.0, 1e-9);
  const PhotonDist t = binomial_thin(d, 0.3);
  EXPECT_LE(t.tail_bound, d.tail_bound);
}

TEST(BinomialThin, DomainErrors) {
  const PhotonDist d = nb_dist(1.0, 1.0, 1e-12);
  EXPECT_THROW(binomial_thin(d, -0.1), std::domain_error);
  EXPECT_THROW(binomial_thin(d, 1.1), std::domain_error);
  EXPECT_THROW(binomial_thin(PhotonDist{}, 0.5), std::domain_error);
}

TEST(BinomialThin, RandomizedInvariants) {
  // Seeded generator over the whole parameter domain: closure, composition
  // and the moment law in one pass.
  std::mt19937_64 rng(20240517);
  std::uniform_real_distribution<double> pick_N(0.05, 12.0), pick_mu(0.3, 60.0),
      pick_eta(0.02, 0.98);
  for (int trial = 0; trial < 50; ++trial) {
    const double N = pick_N(rng), mu = pick_mu(rng);
    const double a = pick_eta(rng), b = pick_eta(rng);
    const PhotonDist base = nb_dist(N, mu, 1e-12);
    const PhotonDist thinned = binomial_thin(base, a);
    const PhotonDist closure = nb_dist(a * N, mu, 1e-12);
    const std::size_t overlap = std::min(thinned.size(), closure.size());
    for (std::size_t n = 0; n < overlap; ++n)
      ASSERT_NEAR(thinned.probs[n], closure.probs[n], 1e-12)
          << "closure N=" << N << " mu=" << mu << " eta=" << a << " n=" << n;
    const PhotonDist two_step = binomial_thin(thinned, b);
    const PhotonDist one_step = binomial_thin(base, a * b);
    for (std::size_t n = 0; n < one_step.size(); ++n)
      ASSERT_NEAR(two_step.probs[n], one_step.probs[n], 1e-12)
          << "composition N=" << N << " mu=" << mu << " a=" << a << " b=" << b;
    const MomentSummary before = dist_stats(base);
    const MomentSummary after = dist_stats(thinned);
    ASSERT_NEAR(after.mean, a * before.mean, 1e-10);
    ASSERT_NEAR(after.variance, a * a * before.variance + a * (1.0 - a) * before.mean, 1e-10);
  }
}

TEST(DistStats, VacuumHasNoFano) {
  PhotonDist point;
  point.probs = {1.0};
  const MomentSummary s = dist_stats(point);
  EXPECT_DOUBLE_EQ(s.mean, 0.0);
  EXPECT_DOUBLE_EQ(s.variance, 0.0);
  EXPECT_FALSE(s.fano.has_value());
}

TEST(DistStats, ThermalMoments) {
  // The mass-truncated pmf drops ~eps * n_max^2 of second moment, so the
  // variance sits ~1.5e-9 below N(1+N) at eps = 1e-12.
  const MomentSummary s = dist_stats(nb_dist(1.0, 1.0, 1e-12));
  EXPECT_NEAR(s.mean, 1.0, 1e-10);
  EXPECT_NEAR(s.variance, 2.0, 1e-8);
  ASSERT_TRUE(s.fano.has_value());
  EXPECT_NEAR(*s.fano, 2.0, 1e-8);
}

TEST(DistStats, MultimodeFano) {
  const MomentSummary s = dist_stats(nb_dist(3.2, 200.0, 1e-12));
  ASSERT_TRUE(s.fano.has_value());
  EXPECT_NEAR(*s.fano, 1.016, 1e-9);
}

TEST(DistStats, Errors) {
  EXPECT_THROW(dist_stats(PhotonDist{}), std::domain_error);
  PhotonDist zeros;
  zeros.probs = {0.0, 0.0};
  EXPECT_THROW(dist_stats(zeros), std::domain_error);
}
