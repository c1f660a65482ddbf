// Test-side oracles, kept independent of the library's enumeration path:
// closed forms derived from the gamma-Poisson structure of the model, plus a
// chi-square goodness-of-fit helper.
#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracles {

// Photon-number posterior given an idler detection m2 is m2 + NB(mu + m2, x)
// with x = (1 - eta2) N / (N + mu); the detected conditional Fano follows
// from the thinning law F_m = eta1 F_n + (1 - eta1).
inline double conditional_fano(double N, double mu, double eta1, double eta2, int m2) {
  const double x = (1.0 - eta2) * N / (N + mu);
  const double shape = mu + m2;
  const double mean_extra = shape * x / (1.0 - x);
  const double mean_n = m2 + mean_extra;
  const double var_n = shape * x / ((1.0 - x) * (1.0 - x));
  if (mean_n == 0.0) return 0.0;
  const double fano_n = var_n / mean_n;
  return eta1 * fano_n + (1.0 - eta1);
}

// Law-of-total-variance closed form for R = var(m1 - m2) / <m1 + m2>.
inline double nrf(double N, double mu, double eta1, double eta2) {
  const double var_n = N * (1.0 + N / mu);
  const double var_diff =
      N * (eta1 * (1.0 - eta1) + eta2 * (1.0 - eta2)) + (eta1 - eta2) * (eta1 - eta2) * var_n;
  return var_diff / ((eta1 + eta2) * N);
}

inline double covariance(double N, double mu, double eta1, double eta2) {
  return eta1 * eta2 * N * (1.0 + N / mu);
}

// Chi-square goodness-of-fit p-value of observed counts against expected
// probabilities; tail bins pool until every expected count reaches 5.
inline double chi_square_gof_pvalue(const std::vector<std::uint64_t>& observed,
                                    const std::vector<double>& expected_probs,
                                    std::uint64_t total) {
  const std::size_t size = std::max(observed.size(), expected_probs.size());
  std::vector<double> exp_counts(size, 0.0);
  std::vector<double> obs_counts(size, 0.0);
  double assigned = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double p = i < expected_probs.size() ? expected_probs[i] : 0.0;
    exp_counts[i] = p * static_cast<double>(total);
    assigned += p;
    obs_counts[i] = i < observed.size() ? static_cast<double>(observed[i]) : 0.0;
  }
  // Whatever probability the truncation dropped belongs to the last bin.
  exp_counts.back() += (1.0 - assigned) * static_cast<double>(total);

  std::vector<double> pooled_obs, pooled_exp;
  double acc_obs = 0.0, acc_exp = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    acc_obs += obs_counts[i];
    acc_exp += exp_counts[i];
    if (acc_exp >= 5.0) {
      pooled_obs.push_back(acc_obs);
      pooled_exp.push_back(acc_exp);
      acc_obs = acc_exp = 0.0;
    }
  }
  if (acc_exp > 0.0 || acc_obs > 0.0) {
    if (pooled_exp.empty()) throw std::runtime_error("chi-square: not enough expected mass");
    pooled_obs.back() += acc_obs;
    pooled_exp.back() += acc_exp;
  }
  if (pooled_exp.size() < 2) throw std::runtime_error("chi-square: fewer than 2 pooled bins");
  double stat = 0.0;
  for (std::size_t i = 0; i < pooled_exp.size(); ++i) {
    const double d = pooled_obs[i] - pooled_exp[i];
    stat += d * d / pooled_exp[i];
  }
  const boost::math::chi_squared dist(static_cast<double>(pooled_exp.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracles
