#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinbeam {

namespace detail {

// Compensated accumulator; probability sums stay in linear space.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline void check_nb_domain(double mean_photons, double modes) {
  if (!(mean_photons >= 0.0))
    throw std::domain_error("mean photon number must be >= 0, got " +
                            std::to_string(mean_photons));
  if (!(modes > 0.0))
    throw std::domain_error("mode count must be > 0, got " + std::to_string(modes));
}

inline void check_efficiency(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::domain_error("efficiency must lie in [0, 1], got " + std::to_string(eta));
}

// Ratio p_{n+1} / p_n of the negative-binomial pmf.
inline double nb_step(int n, double mean_photons, double modes) {
  return (n + modes) / (n + 1.0) * mean_photons / (mean_photons + modes);
}

// Full binomial row B(m | n, eta) for m = 0..n, by the multiplicative
// recurrence from (1-eta)^n; switches to log-space evaluation when the
// starting value would underflow.
inline std::vector<double> binomial_row(int n, double eta) {
  std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
  if (eta <= 0.0) {
    row[0] = 1.0;
    return row;
  }
  if (eta >= 1.0) {
    row[static_cast<std::size_t>(n)] = 1.0;
    return row;
  }
  const double log_q = std::log1p(-eta);
  if (n * log_q > -700.0) {
    row[0] = std::exp(n * log_q);
    const double r = eta / (1.0 - eta);
    for (int m = 0; m < n; ++m)
      row[static_cast<std::size_t>(m) + 1] =
          row[static_cast<std::size_t>(m)] * ((n - m) / (m + 1.0)) * r;
  } else {
    const double log_p = std::log(eta);
    const double lg_n1 = std::lgamma(n + 1.0);
    for (int m = 0; m <= n; ++m)
      row[static_cast<std::size_t>(m)] =
          std::exp(lg_n1 - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) +
                   m * log_p + (n - m) * log_q);
  }
  return row;
}

// Single binomial mass B(m | n, eta).
inline double binomial_pmf(int m, int n, double eta) {
  if (m < 0 || m > n) return 0.0;
  if (eta <= 0.0) return m == 0 ? 1.0 : 0.0;
  if (eta >= 1.0) return m == n ? 1.0 : 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) +
                  m * std::log(eta) + (n - m) * std::log1p(-eta));
}

// Appends NB masses until the cumulative reaches 1 - eps; returns the last
// count index kept.  `out` may be null when only the length is wanted.
inline int nb_accumulate(double mean_photons, double modes, double eps,
                         std::vector<double>* out) {
  constexpr int kMaxLength = 1 << 22;
  if (out) out->clear();
  if (mean_photons == 0.0) {
    if (out) out->push_back(1.0);
    return 0;
  }
  double p = std::exp(-modes * std::log1p(mean_photons / modes));
  KahanSum cum;
  cum.add(p);
  if (out) out->push_back(p);
  int n = 0;
  const double target = 1.0 - eps;
  while (cum.value() < target) {
    if (n >= kMaxLength)
      throw std::runtime_error("negative binomial truncation did not converge (N=" +
                               std::to_string(mean_photons) + ", mu=" + std::to_string(modes) +
                               ", eps=" + std::to_string(eps) + ")");
    p *= nb_step(n, mean_photons, modes);
    ++n;
    cum.add(p);
    if (out) out->push_back(p);
  }
  return n;
}

}  // namespace detail

// Truncated photon-number pmf.  probs[n] is the mass at count n; tail_bound
// bounds whatever mass the truncation dropped.
struct PhotonDist {
  std::vector<double> probs;
  double tail_bound = 0.0;

  std::size_t size() const { return probs.size(); }
  int max_count() const { return static_cast<int>(probs.size()) - 1; }
  double at(int n) const {
    return (n >= 0 && n < static_cast<int>(probs.size()))
               ? probs[static_cast<std::size_t>(n)]
               : 0.0;
  }
  double mass() const {
    detail::KahanSum s;
    for (double p : probs) s.add(p);
    return s.value();
  }
};

// Mean, variance and Fano factor of a counting distribution.  fano is absent
// for a zero-mean distribution: 0/0 must not silently read as zero.
struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> fano;
};

// Multimode thermal (negative binomial) photon-number pmf: N mean photons
// spread over `modes` equally populated modes.  Non-integer mode counts are
// allowed; the factorial ratio generalizes through lgamma.  Evaluated in log
// space so large counts cannot overflow.
inline double nb_pmf(int n, double mean_photons, double modes) {
  detail::check_nb_domain(mean_photons, modes);
  if (n < 0) throw std::domain_error("photon count must be >= 0, got " + std::to_string(n));
  if (mean_photons == 0.0) return n == 0 ? 1.0 : 0.0;
  const double log_p = std::lgamma(n + modes) - std::lgamma(n + 1.0) - std::lgamma(modes) -
                       modes * std::log1p(mean_photons / modes) -
                       n * std::log1p(modes / mean_photons);
  return std::exp(log_p);
}

// Smallest n_max whose cumulative NB mass reaches 1 - eps.  The pmf kept by
// nb_dist spans counts 0..n_max.
inline int truncation_length(double mean_photons, double modes, double eps) {
  detail::check_nb_domain(mean_photons, modes);
  if (!(eps > 0.0 && eps < 1.0))
    throw std::domain_error("truncation tolerance must lie in (0, 1), got " +
                            std::to_string(eps));
  return detail::nb_accumulate(mean_photons, modes, eps, nullptr);
}

// Truncated multimode thermal pmf with tail_bound <= eps.
inline PhotonDist nb_dist(double mean_photons, double modes, double eps = 1e-12) {
  detail::check_nb_domain(mean_photons, modes);
  if (!(eps > 0.0 && eps <= 1e-6))
    throw std::domain_error("truncation tolerance must lie in (0, 1e-6], got " +
                            std::to_string(eps));
  PhotonDist dist;
  detail::nb_accumulate(mean_photons, modes, eps, &dist.probs);
  const double missing = 1.0 - dist.mass();
  dist.tail_bound = missing > 0.0 ? missing : 0.0;
  return dist;
}

// Detection loss: each photon independently survives with probability eta.
// Returns the pmf of the detected count m, m|n ~ Binomial(n, eta).
inline PhotonDist binomial_thin(const PhotonDist& dist, double eta) {
  detail::check_efficiency(eta);
  if (dist.probs.empty()) throw std::domain_error("binomial_thin: empty distribution");
  PhotonDist out;
  out.tail_bound = dist.tail_bound;
  if (eta >= 1.0) {
    out.probs = dist.probs;
    return out;
  }
  out.probs.assign(dist.probs.size(), 0.0);
  std::vector<double> comp(dist.probs.size(), 0.0);  // per-bin compensation
  for (int n = 0; n < static_cast<int>(dist.probs.size()); ++n) {
    const double pn = dist.probs[static_cast<std::size_t>(n)];
    if (pn == 0.0) continue;
    const auto row = detail::binomial_row(n, eta);
    for (int m = 0; m <= n; ++m) {
      const std::size_t i = static_cast<std::size_t>(m);
      const double x = pn * row[i];
      const double y = x - comp[i];
      const double t = out.probs[i] + y;
      comp[i] = (t - out.probs[i]) - y;
      out.probs[i] = t;
    }
  }
  return out;
}

// Moments of the stored pmf, renormalized over its retained mass.
inline MomentSummary dist_stats(const PhotonDist& dist) {
  if (dist.probs.empty()) throw std::domain_error("dist_stats: empty distribution");
  const double mass = dist.mass();
  if (!(mass > 0.0)) throw std::domain_error("dist_stats: distribution carries no mass");
  detail::KahanSum first;
  for (std::size_t n = 0; n < dist.probs.size(); ++n)
    first.add(static_cast<double>(n) * dist.probs[n]);
  const double mean = first.value() / mass;
  detail::KahanSum second;
  for (std::size_t n = 0; n < dist.probs.size(); ++n) {
    const double d = static_cast<double>(n) - mean;
    second.add(d * d * dist.probs[n]);
  }
  MomentSummary out;
  out.mean = mean;
  out.variance = second.value() / mass;
  if (mean > 0.0) out.fano = out.variance / mean;
  return out;
}

}  // namespace twinbeam
