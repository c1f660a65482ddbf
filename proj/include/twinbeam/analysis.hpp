#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinbeam/montecarlo.hpp"
#include "twinbeam/twb_theory.hpp"

namespace twinbeam {

// Empirical per-run statistics.  Variances and covariance use the unbiased
// (n-1) convention.
struct RunSummary {
  std::uint64_t shots = 0;
  double mean_signal = 0.0;  // <m1>
  double mean_idler = 0.0;   // <m2>
  double var_signal = 0.0;
  double var_idler = 0.0;
  double cov = 0.0;
  double nrf_hat = 0.0;  // sample var(m1 - m2) / (<m1> + <m2>)
  std::optional<double> fano_signal, fano_idler;
};

struct AnalysisOptions {
  std::size_t min_samples = 100;  // heralds required before conditioning
  int bootstrap_resamples = 200;
  std::uint64_t bootstrap_seed = 123456789;
  std::vector<int> conditioning{1, 2};
  double imbalance_warning = 0.10;  // relative arm-mean imbalance
  double mode_split_warning = 0.20; // mu_hat disagreement between arms
};

// Pulse counts are integers, so these sums are exact in doubles up to 2^53.
inline RunSummary summarize(const PulseRecordSet& run) {
  const auto& rec = run.records;
  if (rec.size() < 2) throw std::domain_error("summarize: need at least 2 shots");
  double s1 = 0, s2 = 0, q1 = 0, q2 = 0, s12 = 0, sd = 0, qd = 0;
  for (const PulseRecord& r : rec) {
    const double m1 = r.signal, m2 = r.idler;
    s1 += m1;
    s2 += m2;
    q1 += m1 * m1;
    q2 += m2 * m2;
    s12 += m1 * m2;
    const double d = m1 - m2;
    sd += d;
    qd += d * d;
  }
  const double n = static_cast<double>(rec.size());
  RunSummary out;
  out.shots = rec.size();
  out.mean_signal = s1 / n;
  out.mean_idler = s2 / n;
  out.var_signal = std::max(0.0, (q1 - s1 * s1 / n) / (n - 1.0));
  out.var_idler = std::max(0.0, (q2 - s2 * s2 / n) / (n - 1.0));
  out.cov = (s12 - s1 * s2 / n) / (n - 1.0);
  const double shot_noise = out.mean_signal + out.mean_idler;
  if (!(shot_noise > 0.0))
    throw std::domain_error("summarize: zero shot-noise level (every count is zero)");
  out.nrf_hat = std::max(0.0, (qd - sd * sd / n) / (n - 1.0)) / shot_noise;
  if (out.mean_signal > 0.0) out.fano_signal = out.var_signal / out.mean_signal;
  if (out.mean_idler > 0.0) out.fano_idler = out.var_idler / out.mean_idler;
  return out;
}

// Moment estimator mu_i = <m_i>^2 / (var(m_i) - <m_i>), defined only for a
// super-Poissonian marginal; anything else signals model mismatch.
inline double estimate_modes(const PulseRecordSet& run, int arm) {
  if (arm != 1 && arm != 2) throw std::invalid_argument("estimate_modes: arm must be 1 or 2");
  const auto& rec = run.records;
  if (rec.size() < 2) throw std::domain_error("estimate_modes: need at least 2 shots");
  double s = 0, q = 0;
  for (const PulseRecord& r : rec) {
    const double m = arm == 1 ? r.signal : r.idler;
    s += m;
    q += m * m;
  }
  const double n = static_cast<double>(rec.size());
  const double mean = s / n;
  const double var = (q - s * s / n) / (n - 1.0);
  const double excess = var - mean;
  if (!(excess > 0.0))
    throw std::domain_error("estimate_modes: arm " + std::to_string(arm) +
                            " marginal is not super-Poissonian (var <= mean); the twin-beam "
                            "moment estimator is undefined");
  return mean * mean / excess;
}

// Average of the two per-arm mode estimates.
inline double estimate_modes_mean(const PulseRecordSet& run) {
  return 0.5 * (estimate_modes(run, 1) + estimate_modes(run, 2));
}

// Self-consistent efficiency: eta_hat = 1 - R_hat, meaningful only when the
// run actually shows sub-shot-noise correlation.  A classical run (R >= 1)
// yields no estimate.
inline std::optional<double> estimate_eta(const RunSummary& summary) {
  if (summary.nrf_hat >= 1.0) return std::nullopt;
  return 1.0 - summary.nrf_hat;
}

// Conditioned signal-arm sample for one idler outcome.
struct ConditionalSummary {
  int herald = 0;
  std::vector<std::uint32_t> signal_counts;
  MomentSummary stats;           // sample mean / unbiased variance / Fano
  std::optional<double> fano_se; // bootstrap standard error of the Fano
};

namespace detail {

inline MomentSummary sample_moments(const std::vector<std::uint32_t>& counts) {
  double s = 0, q = 0;
  for (std::uint32_t c : counts) {
    const double m = c;
    s += m;
    q += m * m;
  }
  const double n = static_cast<double>(counts.size());
  MomentSummary out;
  out.mean = s / n;
  out.variance = counts.size() > 1 ? std::max(0.0, (q - s * s / n) / (n - 1.0)) : 0.0;
  if (out.mean > 0.0) out.fano = out.variance / out.mean;
  return out;
}

}  // namespace detail

// Post-selects shots on the idler count and summarizes the signal counts.
// The Fano standard error comes from a seeded bootstrap over the conditioned
// sample; resampling keeps the error bars distribution-agnostic.
inline ConditionalSummary condition_records(const PulseRecordSet& run, int herald,
                                            const AnalysisOptions& options = {}) {
  if (herald < 0)
    throw std::domain_error("conditioning value must be >= 0, got " + std::to_string(herald));
  ConditionalSummary out;
  out.herald = herald;
  for (const PulseRecord& r : run.records)
    if (r.idler == static_cast<std::uint32_t>(herald)) out.signal_counts.push_back(r.signal);
  if (out.signal_counts.size() < std::max<std::size_t>(1, options.min_samples))
    throw std::domain_error("condition_records: only " +
                            std::to_string(out.signal_counts.size()) +
                            " shots herald m2=" + std::to_string(herald) + " (need at least " +
                            std::to_string(std::max<std::size_t>(1, options.min_samples)) + ")");
  out.stats = detail::sample_moments(out.signal_counts);
  const std::size_t k = out.signal_counts.size();
  auto rng = detail::block_engine(options.bootstrap_seed, static_cast<std::uint64_t>(herald));
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<double> fanos;
  fanos.reserve(static_cast<std::size_t>(options.bootstrap_resamples));
  std::vector<std::uint32_t> resample(k);
  for (int rep = 0; rep < options.bootstrap_resamples; ++rep) {
    for (std::size_t i = 0; i < k; ++i) resample[i] = out.signal_counts[pick(rng)];
    const MomentSummary m = detail::sample_moments(resample);
    if (m.fano) fanos.push_back(*m.fano);
  }
  if (fanos.size() >= 2) {
    double s = 0;
    for (double f : fanos) s += f;
    const double mean = s / static_cast<double>(fanos.size());
    double q = 0;
    for (double f : fanos) q += (f - mean) * (f - mean);
    out.fano_se = std::sqrt(q / static_cast<double>(fanos.size() - 1));
  }
  return out;
}

// Delta-method standard error of the empirical noise reduction factor,
// driven by the fourth central moment of the count difference.
inline double nrf_standard_error(const PulseRecordSet& run, const RunSummary& summary) {
  const double n = static_cast<double>(run.records.size());
  const double mean_diff = summary.mean_signal - summary.mean_idler;
  double m2 = 0, m4 = 0;
  for (const PulseRecord& r : run.records) {
    const double d = (static_cast<double>(r.signal) - static_cast<double>(r.idler)) - mean_diff;
    const double dd = d * d;
    m2 += dd;
    m4 += dd * dd;
  }
  m2 /= n;
  m4 /= n;
  const double var_of_var = std::max(0.0, m4 - m2 * m2) / n;
  return std::sqrt(var_of_var) / (summary.mean_signal + summary.mean_idler);
}

// One conditioning outcome inside an analysis report.  Entries exist only
// for heralds that reached the configured minimum sample count.
struct ConditionalReport {
  int herald = 0;
  std::size_t samples = 0;
  double mean = 0.0;
  std::optional<double> fano, fano_se;
  std::optional<double> fano_eq3;  // closed-form overlay at the estimated parameters
};

struct AnalysisReport {
  std::optional<RunSummary> summary;
  std::optional<double> mu_hat_signal, mu_hat_idler, mu_hat_mean;
  std::optional<double> eta_hat;
  std::vector<ConditionalReport> conditional;
  std::optional<double> nrf_eq4_corrected, nrf_eq4_printed;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
};

// The measurement-side pipeline: empirical summary, self-consistent (eta, mu)
// estimation with no prior calibration, conditional extraction, and the
// closed-form overlay evaluated at the estimated parameters.  Stage failures
// are collected; later stages still run.
inline AnalysisReport self_consistent_report(const PulseRecordSet& run,
                                             const AnalysisOptions& options = {}) {
  AnalysisReport report;
  try {
    report.summary = summarize(run);
  } catch (const std::exception& e) {
    report.errors.emplace_back(e.what());
  }
  if (report.summary) {
    const RunSummary& s = *report.summary;
    const double mean_avg = 0.5 * (s.mean_signal + s.mean_idler);
    if (mean_avg > 0.0 &&
        std::abs(s.mean_signal - s.mean_idler) > options.imbalance_warning * mean_avg)
      report.warnings.push_back(
          "arm means differ by more than " +
          std::to_string(static_cast<int>(options.imbalance_warning * 100)) +
          "%; the single-efficiency estimate assumes balanced arms");
    try {
      report.mu_hat_signal = estimate_modes(run, 1);
    } catch (const std::exception& e) {
      report.errors.emplace_back(e.what());
    }
    try {
      report.mu_hat_idler = estimate_modes(run, 2);
    } catch (const std::exception& e) {
      report.errors.emplace_back(e.what());
    }
    if (report.mu_hat_signal && report.mu_hat_idler) {
      report.mu_hat_mean = 0.5 * (*report.mu_hat_signal + *report.mu_hat_idler);
      if (std::abs(*report.mu_hat_signal - *report.mu_hat_idler) >
          options.mode_split_warning * *report.mu_hat_mean)
        report.warnings.push_back("per-arm mode estimates disagree by more than " +
                                  std::to_string(static_cast<int>(options.mode_split_warning * 100)) +
                                  "%; reporting both and their mean");
    }
    report.eta_hat = estimate_eta(s);
    if (!report.eta_hat)
      report.warnings.push_back(
          "nrf_hat >= 1: no sub-shot-noise correlation, so no self-consistent efficiency "
          "estimate (classical regime)");
  }
  for (int herald : options.conditioning) {
    try {
      const ConditionalSummary cs = condition_records(run, herald, options);
      ConditionalReport c;
      c.herald = herald;
      c.samples = cs.signal_counts.size();
      c.mean = cs.stats.mean;
      c.fano = cs.stats.fano;
      c.fano_se = cs.fano_se;
      if (report.summary && report.eta_hat && report.mu_hat_mean) {
        try {
          c.fano_eq3 = formula_fano_eq3(report.summary->mean_signal, *report.mu_hat_mean,
                                        *report.eta_hat, herald);
        } catch (const std::exception& e) {
          report.errors.emplace_back(e.what());
        }
      }
      report.conditional.push_back(std::move(c));
    } catch (const std::exception& e) {
      report.errors.emplace_back(e.what());
    }
  }
  if (report.summary && report.eta_hat && report.mu_hat_mean) {
    try {
      report.nrf_eq4_corrected =
          formula_nrf_eq4(report.summary->mean_signal, report.summary->mean_idler,
                          *report.eta_hat, *report.mu_hat_mean, NrfVariant::corrected);
      report.nrf_eq4_printed =
          formula_nrf_eq4(report.summary->mean_signal, report.summary->mean_idler,
                          *report.eta_hat, *report.mu_hat_mean, NrfVariant::printed);
    } catch (const std::exception& e) {
      report.errors.emplace_back(e.what());
    }
  }
  return report;
}

}  // namespace twinbeam
