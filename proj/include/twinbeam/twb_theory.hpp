#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinbeam/photon_stats.hpp"

namespace twinbeam {

// Model point of a twin-beam source: N mean photons per arm spread over
// `modes` equally populated mode pairs, with perfect photon-number
// correlation between the arms, detected through per-arm Bernoulli loss.
struct TwbParams {
  double mean_photons = 0.0;  // N, per arm, before detection
  double modes = 1.0;         // mu
  double eta_signal = 1.0;    // arm 1
  double eta_idler = 1.0;     // arm 2

  void validate() const {
    detail::check_nb_domain(mean_photons, modes);
    detail::check_efficiency(eta_signal);
    detail::check_efficiency(eta_idler);
  }
  double detected_mean_signal() const { return eta_signal * mean_photons; }
  double detected_mean_idler() const { return eta_idler * mean_photons; }
  // Single-efficiency stand-in for the closed forms when the arms differ;
  // the geometric mean reproduces the covariance term of the difference
  // variance, so corrected Eq.-(4)-style predictions stay exact.
  double effective_eta() const { return std::sqrt(eta_signal * eta_idler); }
};

namespace detail {

inline void check_model_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1e-6))
    throw std::domain_error("model tolerance must lie in (0, 1e-6], got " +
                            std::to_string(eps));
}

// N from a detected mean under balanced detection.
inline double photons_from_detected_mean(double detected_mean, double eta) {
  if (detected_mean == 0.0) return 0.0;
  if (!(eta > 0.0))
    throw std::domain_error("cannot reach detected mean " + std::to_string(detected_mean) +
                            " with zero efficiency");
  return detected_mean / eta;
}

// Enumeration length for exact model tables.  The mass rule alone leaves an
// n^2-weighted tail of order eps * n_max^2, which is too coarse for the
// covariance / noise-reduction work this table feeds; keep extending until
// the second-moment tail is also below eps.
inline int model_enumeration_length(double mean_photons, double modes, double eps) {
  constexpr int kMaxTable = 4096;
  if (mean_photons == 0.0) return 0;
  const double r = mean_photons / (mean_photons + modes);
  const double moment_target = eps * (1.0 - r);
  double p = std::exp(-modes * std::log1p(mean_photons / modes));
  KahanSum cum;
  cum.add(p);
  int n = 0;
  const double mass_target = 1.0 - eps;
  while (cum.value() < mass_target || p * (n + 1.0) * (n + 1.0) > moment_target) {
    if (n >= kMaxTable)
      throw std::runtime_error(
          "joint enumeration table would exceed " + std::to_string(kMaxTable) +
          " counts per arm (N=" + std::to_string(mean_photons) +
          ", mu=" + std::to_string(modes) + ")");
    p *= nb_step(n, mean_photons, modes);
    ++n;
    cum.add(p);
  }
  return n;
}

// NB masses for counts 0..length, by recurrence.
inline std::vector<double> nb_terms(double mean_photons, double modes, int length) {
  std::vector<double> out(static_cast<std::size_t>(length) + 1, 0.0);
  if (mean_photons == 0.0) {
    out[0] = 1.0;
    return out;
  }
  out[0] = std::exp(-modes * std::log1p(mean_photons / modes));
  for (int n = 0; n < length; ++n)
    out[static_cast<std::size_t>(n) + 1] =
        out[static_cast<std::size_t>(n)] * nb_step(n, mean_photons, modes);
  return out;
}

}  // namespace detail

// Joint pmf of detected pairs P(m1, m2) on a square truncated support with
// 0..dim-1 counts per arm.
struct JointDist {
  std::vector<double> probs;  // row-major, probs[m1 * dim + m2]
  std::size_t dim = 0;
  double tail_bound = 0.0;

  double at(int m1, int m2) const {
    if (m1 < 0 || m2 < 0 || m1 >= static_cast<int>(dim) || m2 >= static_cast<int>(dim))
      return 0.0;
    return probs[static_cast<std::size_t>(m1) * dim + static_cast<std::size_t>(m2)];
  }
  double total_mass() const {
    detail::KahanSum s;
    for (double p : probs) s.add(p);
    return s.value();
  }
  PhotonDist marginal_signal() const {
    PhotonDist out;
    out.tail_bound = tail_bound;
    out.probs.assign(dim, 0.0);
    for (std::size_t m1 = 0; m1 < dim; ++m1) {
      detail::KahanSum s;
      for (std::size_t m2 = 0; m2 < dim; ++m2) s.add(probs[m1 * dim + m2]);
      out.probs[m1] = s.value();
    }
    return out;
  }
  PhotonDist marginal_idler() const {
    PhotonDist out;
    out.tail_bound = tail_bound;
    out.probs.assign(dim, 0.0);
    for (std::size_t m2 = 0; m2 < dim; ++m2) {
      detail::KahanSum s;
      for (std::size_t m1 = 0; m1 < dim; ++m1) s.add(probs[m1 * dim + m2]);
      out.probs[m2] = s.value();
    }
    return out;
  }
};

// Exact detected-pair distribution of the twin beam: the photon number n is
// shared by both arms, then each arm thins it independently,
//   P(m1, m2) = sum_n p^mu_n B(m1|n, eta1) B(m2|n, eta2).
inline JointDist joint_detected_pmf(const TwbParams& params, double eps = 1e-12) {
  params.validate();
  detail::check_model_eps(eps);
  const int n_max = detail::model_enumeration_length(params.mean_photons, params.modes, eps);
  const auto base = detail::nb_terms(params.mean_photons, params.modes, n_max);
  JointDist joint;
  joint.dim = base.size();
  joint.probs.assign(joint.dim * joint.dim, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    const double pn = base[static_cast<std::size_t>(n)];
    const auto row_s = detail::binomial_row(n, params.eta_signal);
    const auto row_i = detail::binomial_row(n, params.eta_idler);
    for (int m1 = 0; m1 <= n; ++m1) {
      const double a = pn * row_s[static_cast<std::size_t>(m1)];
      if (a == 0.0) continue;
      double* dst = joint.probs.data() + static_cast<std::size_t>(m1) * joint.dim;
      const double* src = row_i.data();
      for (int m2 = 0; m2 <= n; ++m2) dst[m2] += a * src[m2];
    }
  }
  const double missing = 1.0 - joint.total_mass();
  joint.tail_bound = missing > 0.0 ? missing : 0.0;
  return joint;
}

// Signal-arm distribution post-selected on an idler count.
inline PhotonDist conditional_signal_pmf(const JointDist& joint, int herald) {
  if (herald < 0 || herald >= static_cast<int>(joint.dim))
    throw std::domain_error("conditioning value m2=" + std::to_string(herald) +
                            " lies outside the truncated support (max " +
                            std::to_string(static_cast<int>(joint.dim) - 1) + ")");
  detail::KahanSum mass;
  for (std::size_t m1 = 0; m1 < joint.dim; ++m1)
    mass.add(joint.probs[m1 * joint.dim + static_cast<std::size_t>(herald)]);
  const double herald_mass = mass.value();
  if (!(herald_mass > 0.0))
    throw std::domain_error("conditioning value m2=" + std::to_string(herald) +
                            " has no probability mass at this truncation");
  PhotonDist out;
  out.probs.resize(joint.dim);
  for (std::size_t m1 = 0; m1 < joint.dim; ++m1)
    out.probs[m1] = joint.probs[m1 * joint.dim + static_cast<std::size_t>(herald)] / herald_mass;
  out.tail_bound = std::min(1.0, joint.tail_bound / herald_mass);
  return out;
}

// Photon-number posterior of the source given an idler detection outcome:
//   pi(n | m2) prop. to p^mu_n B(m2 | n, eta2).
// Shares the joint table's enumeration length so that conditional detected
// statistics and this posterior describe exactly the same truncated model.
inline PhotonDist conditional_photon_posterior(const TwbParams& params, int herald,
                                               double eps = 1e-12) {
  params.validate();
  detail::check_model_eps(eps);
  if (herald < 0)
    throw std::domain_error("conditioning value must be >= 0, got " + std::to_string(herald));
  const int n_max = detail::model_enumeration_length(params.mean_photons, params.modes, eps);
  const auto base = detail::nb_terms(params.mean_photons, params.modes, n_max);
  std::vector<double> weights(base.size(), 0.0);
  detail::KahanSum mass;
  for (int n = 0; n <= n_max; ++n) {
    const double w =
        base[static_cast<std::size_t>(n)] * detail::binomial_pmf(herald, n, params.eta_idler);
    weights[static_cast<std::size_t>(n)] = w;
    mass.add(w);
  }
  const double herald_mass = mass.value();
  if (!(herald_mass > 0.0))
    throw std::domain_error("conditioning value m2=" + std::to_string(herald) +
                            " has no probability mass at this truncation");
  PhotonDist out;
  out.probs.resize(weights.size());
  for (std::size_t n = 0; n < weights.size(); ++n) out.probs[n] = weights[n] / herald_mass;
  out.tail_bound = std::min(1.0, eps / herald_mass);
  return out;
}

// Probability of the conditioning outcome: idler-arm marginal mass at the
// given count.  Marginalizing the joint over m1 collapses the signal binomial
// kernel, so this is the thinned NB law evaluated on the joint's support.
inline double heralding_probability(const TwbParams& params, int herald, double eps = 1e-12) {
  params.validate();
  detail::check_model_eps(eps);
  if (herald < 0) return 0.0;
  const int n_max = detail::model_enumeration_length(params.mean_photons, params.modes, eps);
  const auto base = detail::nb_terms(params.mean_photons, params.modes, n_max);
  detail::KahanSum s;
  for (int n = herald; n <= n_max; ++n)
    s.add(base[static_cast<std::size_t>(n)] * detail::binomial_pmf(herald, n, params.eta_idler));
  return s.value();
}

// Ground-truth conditional Fano factor, from full enumeration of the joint
// detected-pair pmf.  A zero-variance conditional (perfect detection) reports
// Fano 0 even when its mean is zero.
inline double exact_conditional_fano(const JointDist& joint, int herald) {
  const MomentSummary stats = dist_stats(conditional_signal_pmf(joint, herald));
  return stats.fano.value_or(0.0);
}

inline double exact_conditional_fano(const TwbParams& params, int herald, double eps = 1e-12) {
  params.validate();
  detail::check_model_eps(eps);
  const double herald_prob = heralding_probability(params, herald, eps);
  if (!(herald_prob > 10.0 * eps))
    throw std::domain_error("heralding probability for m2=" + std::to_string(herald) +
                            " is " + std::to_string(herald_prob) +
                            ", below 10x the truncation tolerance");
  return exact_conditional_fano(joint_detected_pmf(params, eps), herald);
}

// Closed-form conditional Fano prediction in its printed form.  Kept as a
// reference curve only: the enumerated conditional Fano is the model ground
// truth, and the two disagree away from small detected means (the validation
// report quantifies the gap).
inline double formula_fano_eq3(double detected_mean, double modes, double eta, int herald) {
  if (!(detected_mean >= 0.0))
    throw std::domain_error("detected mean must be >= 0, got " + std::to_string(detected_mean));
  if (!(modes > 0.0))
    throw std::domain_error("mode count must be > 0, got " + std::to_string(modes));
  detail::check_efficiency(eta);
  if (herald < 0)
    throw std::domain_error("conditioning value must be >= 0, got " + std::to_string(herald));
  const double num =
      (1.0 - eta) * detected_mean * (herald + modes) * (detected_mean + eta * modes);
  const double den =
      (detected_mean + modes) *
      ((herald + modes) * (detected_mean + eta * modes) - eta * modes * (detected_mean + modes) +
       1.0);
  if (!(std::abs(den) > 0.0))
    throw std::domain_error("conditional Fano formula denominator vanishes at M=" +
                            std::to_string(detected_mean) + ", mu=" + std::to_string(modes) +
                            ", eta=" + std::to_string(eta) + ", m2=" + std::to_string(herald));
  return num / den;
}

enum class NrfVariant { printed, corrected };

inline const char* nrf_variant_name(NrfVariant v) {
  return v == NrfVariant::printed ? "printed" : "corrected";
}

// Multimode closed form of the noise reduction factor.  The printed variant's
// third term uses (<m1><m2>)^2, which fails the balanced sanity limit
// R = 1 - eta; the corrected variant squares the mean difference instead and
// reproduces the enumerated model.  corrected is the default, printed stays
// available for fidelity reporting.
inline double formula_nrf_eq4(double mean_signal, double mean_idler, double eta, double modes,
                              NrfVariant variant = NrfVariant::corrected) {
  if (!(mean_signal >= 0.0) || !(mean_idler >= 0.0))
    throw std::domain_error("detected means must be >= 0");
  const double total = mean_signal + mean_idler;
  if (!(total > 0.0)) throw std::domain_error("noise reduction factor needs a nonzero mean");
  if (!(modes > 0.0))
    throw std::domain_error("mode count must be > 0, got " + std::to_string(modes));
  detail::check_efficiency(eta);
  const double diff = mean_signal - mean_idler;
  const double prod = mean_signal * mean_idler;
  const double third_num = variant == NrfVariant::corrected ? diff * diff : prod * prod;
  return 1.0 - 2.0 * eta * std::sqrt(prod) / total + third_num / (modes * total);
}

// Noise reduction factor sigma^2(m1 - m2) / <m1 + m2>, exactly from the
// enumerated joint pmf.
inline double exact_nrf(const TwbParams& params, double eps = 1e-12) {
  params.validate();
  detail::check_model_eps(eps);
  if (!(params.mean_photons > 0.0))
    throw std::domain_error("exact_nrf needs N > 0 (shot-noise level would vanish)");
  if (!(params.eta_signal > 0.0 || params.eta_idler > 0.0))
    throw std::domain_error("exact_nrf needs at least one positive efficiency");
  const JointDist joint = joint_detected_pmf(params, eps);
  const int dim = static_cast<int>(joint.dim);
  detail::KahanSum mass, sum_s, sum_i;
  for (int m1 = 0; m1 < dim; ++m1)
    for (int m2 = 0; m2 < dim; ++m2) {
      const double p = joint.probs[static_cast<std::size_t>(m1) * joint.dim +
                                   static_cast<std::size_t>(m2)];
      mass.add(p);
      sum_s.add(m1 * p);
      sum_i.add(m2 * p);
    }
  const double mean_s = sum_s.value() / mass.value();
  const double mean_i = sum_i.value() / mass.value();
  const double mean_diff = mean_s - mean_i;
  detail::KahanSum var_acc;
  for (int m1 = 0; m1 < dim; ++m1)
    for (int m2 = 0; m2 < dim; ++m2) {
      const double p = joint.probs[static_cast<std::size_t>(m1) * joint.dim +
                                   static_cast<std::size_t>(m2)];
      const double d = (m1 - m2) - mean_diff;
      var_acc.add(d * d * p);
    }
  const double shot_noise = mean_s + mean_i;
  if (!(shot_noise > 0.0)) throw std::domain_error("exact_nrf: zero shot-noise level");
  return (var_acc.value() / mass.value()) / shot_noise;
}

// Bernoulli detection maps a photon-domain Fano factor to the detected one.
inline double fano_detected_relation(double fano_photon, double eta) {
  if (!(fano_photon >= 0.0))
    throw std::domain_error("photon-domain Fano must be >= 0, got " +
                            std::to_string(fano_photon));
  detail::check_efficiency(eta);
  return eta * fano_photon + (1.0 - eta);
}

}  // namespace twinbeam
