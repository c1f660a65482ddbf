#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "twinbeam/analysis.hpp"
#include "twinbeam/montecarlo.hpp"
#include "twinbeam/twb_theory.hpp"

namespace twinbeam {

enum class SweepAxis { detected_mean, modes, efficiency, conditioning };

inline const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::detected_mean: return "M";
    case SweepAxis::modes: return "mu";
    case SweepAxis::efficiency: return "eta";
    case SweepAxis::conditioning: return "m2";
  }
  return "?";
}

inline SweepAxis sweep_axis_from_name(std::string_view name) {
  if (name == "M") return SweepAxis::detected_mean;
  if (name == "mu") return SweepAxis::modes;
  if (name == "eta") return SweepAxis::efficiency;
  if (name == "m2") return SweepAxis::conditioning;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) +
                              "' (expected M, mu, eta or m2)");
}

enum class SweepObjective { conditional_fano_exact, conditional_fano_eq3, nrf_exact, heralding };

inline const char* sweep_objective_name(SweepObjective objective) {
  switch (objective) {
    case SweepObjective::conditional_fano_exact: return "conditional_fano_exact";
    case SweepObjective::conditional_fano_eq3: return "conditional_fano_eq3";
    case SweepObjective::nrf_exact: return "nrf_exact";
    case SweepObjective::heralding: return "heralding";
  }
  return "?";
}

inline SweepObjective sweep_objective_from_name(std::string_view name) {
  if (name == "conditional_fano_exact") return SweepObjective::conditional_fano_exact;
  if (name == "conditional_fano_eq3") return SweepObjective::conditional_fano_eq3;
  if (name == "nrf_exact") return SweepObjective::nrf_exact;
  if (name == "heralding") return SweepObjective::heralding;
  throw std::invalid_argument("unknown sweep objective '" + std::string(name) + "'");
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::detected_mean;
  std::vector<double> grid;  // nonempty, strictly increasing
  TwbParams base;            // values for every non-axis parameter
  // Set when the run was configured through the detected mean M rather than
  // N; requires balanced arms.  Along an eta axis the photon number then
  // tracks the grid so M stays fixed.
  std::optional<double> fixed_detected_mean;
  std::vector<int> conditioning{1};
  std::vector<SweepObjective> objectives{
      SweepObjective::conditional_fano_exact, SweepObjective::conditional_fano_eq3,
      SweepObjective::nrf_exact, SweepObjective::heralding};
  double eps = 1e-12;
  unsigned workers = 1;
  double divergence_note_threshold = 0.01;  // |eq3 - exact| worth flagging
};

struct SweepRow {
  double axis_value = 0.0;
  std::vector<std::optional<double>> values;  // aligned with SweepTable::columns
  std::vector<std::string> flags;             // "error:..." poisons the row, "note:..." does not

  bool has_error() const {
    for (const std::string& f : flags)
      if (f.rfind("error:", 0) == 0) return true;
    return false;
  }
};

struct SweepTable {
  std::string axis;
  std::vector<std::string> columns;
  std::vector<SweepRow> rows;

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    return std::nullopt;
  }
};

namespace detail {

inline bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

inline void require_balanced_for_detected_mean(const TwbParams& base) {
  if (base.eta_signal != base.eta_idler)
    throw std::domain_error(
        "a detected-mean (M) setting needs balanced arms; give N instead or set "
        "eta1 == eta2");
}

inline void validate_sweep_spec(const SweepSpec& spec) {
  if (spec.grid.empty()) throw std::domain_error("sweep grid must be nonempty");
  if (!strictly_increasing(spec.grid))
    throw std::domain_error("sweep grid must be strictly increasing");
  if (spec.objectives.empty()) throw std::domain_error("sweep needs at least one objective");
  check_model_eps(spec.eps);
  for (int herald : spec.conditioning)
    if (herald < 0) throw std::domain_error("conditioning values must be >= 0");
  switch (spec.axis) {
    case SweepAxis::detected_mean:
      require_balanced_for_detected_mean(spec.base);
      if (spec.fixed_detected_mean)
        throw std::domain_error("axis M conflicts with a fixed detected mean");
      for (double v : spec.grid)
        if (!(v >= 0.0)) throw std::domain_error("detected-mean grid values must be >= 0");
      break;
    case SweepAxis::modes:
      for (double v : spec.grid)
        if (!(v > 0.0)) throw std::domain_error("mode-count grid values must be > 0");
      break;
    case SweepAxis::efficiency:
      for (double v : spec.grid)
        if (!(v >= 0.0 && v <= 1.0))
          throw std::domain_error("efficiency grid values must lie in [0, 1]");
      break;
    case SweepAxis::conditioning:
      for (double v : spec.grid)
        if (!(v >= 0.0) || v != std::floor(v))
          throw std::domain_error("m2 grid values must be non-negative integers");
      break;
  }
  if (spec.fixed_detected_mean) require_balanced_for_detected_mean(spec.base);
  TwbParams check = spec.base;
  check.validate();
}

inline TwbParams sweep_point_params(const SweepSpec& spec, double axis_value) {
  TwbParams p = spec.base;
  switch (spec.axis) {
    case SweepAxis::detected_mean:
      p.mean_photons = photons_from_detected_mean(axis_value, p.eta_signal);
      break;
    case SweepAxis::modes:
      p.modes = axis_value;
      if (spec.fixed_detected_mean)
        p.mean_photons = photons_from_detected_mean(*spec.fixed_detected_mean, p.eta_signal);
      break;
    case SweepAxis::efficiency:
      p.eta_signal = p.eta_idler = axis_value;
      if (spec.fixed_detected_mean)
        p.mean_photons = photons_from_detected_mean(*spec.fixed_detected_mean, axis_value);
      break;
    case SweepAxis::conditioning:
      if (spec.fixed_detected_mean)
        p.mean_photons = photons_from_detected_mean(*spec.fixed_detected_mean, p.eta_signal);
      break;
  }
  return p;
}

inline std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace detail

// Builds the column list a sweep spec will produce (axis and flags columns
// excluded).
inline std::vector<std::string> sweep_columns(const SweepSpec& spec) {
  std::vector<std::string> cols;
  const bool herald_axis = spec.axis == SweepAxis::conditioning;
  auto herald_cols = [&](const char* stem) {
    if (herald_axis) {
      cols.emplace_back(stem);
    } else {
      for (int k : spec.conditioning)
        cols.push_back(std::string(stem) + "_m2_" + std::to_string(k));
    }
  };
  for (SweepObjective objective : spec.objectives) {
    switch (objective) {
      case SweepObjective::conditional_fano_exact: herald_cols("fano_exact"); break;
      case SweepObjective::conditional_fano_eq3: herald_cols("fano_eq3"); break;
      case SweepObjective::nrf_exact: cols.emplace_back("nrf_exact"); break;
      case SweepObjective::heralding: herald_cols("heralding"); break;
    }
  }
  return cols;
}

// Evaluates every requested objective at every grid point.  Per-point domain
// errors land in the row's flags and the sweep continues; grid points are
// independent, so rows may be computed by a worker pool and always come back
// in grid order.
inline SweepTable run_sweep(const SweepSpec& spec) {
  detail::validate_sweep_spec(spec);
  SweepTable table;
  table.axis = sweep_axis_name(spec.axis);
  table.columns = sweep_columns(spec);
  table.rows.resize(spec.grid.size());

  const bool herald_axis = spec.axis == SweepAxis::conditioning;
  const bool wants_exact_fano =
      std::find(spec.objectives.begin(), spec.objectives.end(),
                SweepObjective::conditional_fano_exact) != spec.objectives.end();
  const bool wants_nrf = std::find(spec.objectives.begin(), spec.objectives.end(),
                                   SweepObjective::nrf_exact) != spec.objectives.end();

  auto eval_row = [&](std::size_t index) {
    SweepRow& row = table.rows[index];
    row.axis_value = spec.grid[index];
    row.values.assign(table.columns.size(), std::nullopt);
    TwbParams params;
    try {
      params = detail::sweep_point_params(spec, row.axis_value);
      params.validate();
    } catch (const std::exception& e) {
      row.flags.push_back(std::string("error:") + e.what());
      return;
    }
    const std::vector<int> heralds =
        herald_axis ? std::vector<int>{static_cast<int>(row.axis_value)} : spec.conditioning;

    std::optional<JointDist> joint;
    if (wants_exact_fano || wants_nrf) {
      try {
        joint = joint_detected_pmf(params, spec.eps);
      } catch (const std::exception& e) {
        row.flags.push_back(std::string("error:") + e.what());
      }
    }

    std::size_t col = 0;
    auto emit = [&](double value) {
      if (std::isfinite(value))
        row.values[col] = value;
      else
        row.flags.push_back("error:" + table.columns[col] + " is not finite");
      ++col;
    };
    auto emit_error = [&](const std::exception& e) {
      row.flags.push_back("error:" + table.columns[col] + ": " + e.what());
      ++col;
    };

    const double eta_eff = params.effective_eta();
    const double detected_mean = eta_eff * params.mean_photons;

    for (SweepObjective objective : spec.objectives) {
      switch (objective) {
        case SweepObjective::conditional_fano_exact:
          for (int k : heralds) {
            if (!joint) {
              ++col;
              continue;
            }
            try {
              const double herald_mass = heralding_probability(params, k, spec.eps);
              if (!(herald_mass > 10.0 * spec.eps))
                throw std::domain_error("heralding probability for m2=" + std::to_string(k) +
                                        " is below 10x the truncation tolerance");
              emit(exact_conditional_fano(*joint, k));
            } catch (const std::exception& e) {
              emit_error(e);
            }
          }
          break;
        case SweepObjective::conditional_fano_eq3:
          for (int k : heralds) {
            try {
              emit(formula_fano_eq3(detected_mean, params.modes, eta_eff, k));
            } catch (const std::exception& e) {
              emit_error(e);
            }
          }
          break;
        case SweepObjective::nrf_exact:
          if (!joint) {
            ++col;
            break;
          }
          try {
            const MomentSummary ms = dist_stats(joint->marginal_signal());
            const MomentSummary mi = dist_stats(joint->marginal_idler());
            const double shot_noise = ms.mean + mi.mean;
            if (!(shot_noise > 0.0)) throw std::domain_error("zero shot-noise level");
            detail::KahanSum acc;
            const int dim = static_cast<int>(joint->dim);
            const double mean_diff = ms.mean - mi.mean;
            for (int a = 0; a < dim; ++a)
              for (int b = 0; b < dim; ++b) {
                const double d = (a - b) - mean_diff;
                acc.add(d * d *
                        joint->probs[static_cast<std::size_t>(a) * joint->dim +
                                     static_cast<std::size_t>(b)]);
              }
            emit(acc.value() / joint->total_mass() / shot_noise);
          } catch (const std::exception& e) {
            emit_error(e);
          }
          break;
        case SweepObjective::heralding:
          for (int k : heralds) {
            try {
              emit(heralding_probability(params, k, spec.eps));
            } catch (const std::exception& e) {
              emit_error(e);
            }
          }
          break;
      }
    }

    // Flag grid points where the published formula drifts from the oracle.
    for (int k : heralds) {
      const std::string suffix = herald_axis ? "" : "_m2_" + std::to_string(k);
      const auto exact_idx = table.column_index("fano_exact" + suffix);
      const auto eq3_idx = table.column_index("fano_eq3" + suffix);
      if (!exact_idx || !eq3_idx) continue;
      const auto& exact = row.values[*exact_idx];
      const auto& eq3 = row.values[*eq3_idx];
      if (exact && eq3 && std::abs(*exact - *eq3) > spec.divergence_note_threshold)
        row.flags.push_back("note:eq3_deviation" + suffix + "=" +
                            detail::short_number(std::abs(*exact - *eq3)));
    }
  };

  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, spec.workers), spec.grid.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < spec.grid.size(); ++i) eval_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < spec.grid.size(); i = next.fetch_add(1))
          eval_row(i);
      });
    for (auto& t : pool) t.join();
  }
  return table;
}

enum class OptimizeDirection { minimize, maximize };

// Extremal row of a sweep table for one objective column.  Error-flagged
// rows and rows without a finite value are excluded; ties keep the smallest
// axis value (rows are in grid order).
inline const SweepRow& find_optimum(const SweepTable& table, std::string_view objective,
                                    OptimizeDirection direction) {
  if (table.rows.empty()) throw std::invalid_argument("find_optimum: empty sweep table");
  const auto idx = table.column_index(objective);
  if (!idx)
    throw std::invalid_argument("find_optimum: objective '" + std::string(objective) +
                                "' is not a column of this table");
  const SweepRow* best = nullptr;
  for (const SweepRow& row : table.rows) {
    if (row.has_error()) continue;
    const auto& value = row.values[*idx];
    if (!value || !std::isfinite(*value)) continue;
    if (!best) {
      best = &row;
      continue;
    }
    const double current = *best->values[*idx];
    if (direction == OptimizeDirection::minimize ? *value < current : *value > current)
      best = &row;
  }
  if (!best)
    throw std::runtime_error("find_optimum: every row is error-flagged or lacks '" +
                             std::string(objective) + "'");
  return *best;
}

// ---------------------------------------------------------------------------
// Formula-vs-oracle validation

struct ValidationOptions {
  std::vector<double> detected_means{0.5, 1.0, 2.0, 3.2};
  std::vector<double> modes{2.0, 10.0, 100.0};
  double eta = 0.15;
  std::vector<int> conditioning{1, 2};
  // Probe of the published formula's small-herald breakdown: near-Poissonian
  // statistics, conditioning on zero counts.
  bool include_limit_point = true;
  double eps = 1e-12;
  double nrf_formula_tol = 1e-9;  // corrected Eq. (4) must track the oracle this closely
  double mc_z_tol = 5.0;
  std::uint64_t mc_shots = 100000;
  std::uint64_t mc_seed = 20160509;
  int bootstrap_resamples = 100;
  std::size_t mc_min_heralds = 100;
  unsigned workers = 1;
};

struct ValidationRow {
  double detected_mean = 0.0;
  double modes = 0.0;
  double eta = 0.0;
  int herald = 0;
  double heralding = 0.0;
  double fano_exact = 0.0;
  double fano_eq3 = 0.0;
  double fano_eq3_abs_dev = 0.0;  // reported, never a failure
  double nrf_exact = 0.0;
  double nrf_eq4_corrected = 0.0;
  double nrf_corrected_abs_dev = 0.0;
  double nrf_eq4_printed = 0.0;
  double nrf_printed_abs_dev = 0.0;  // reported, never a failure
  double mc_nrf_z = 0.0;
  std::optional<double> mc_fano_z;  // absent when too few heralds landed
  std::vector<std::string> failures;
};

struct ValidationReport {
  std::vector<ValidationRow> rows;

  bool passed() const {
    for (const ValidationRow& row : rows)
      if (!row.failures.empty()) return false;
    return true;
  }
};

namespace detail {

inline double guarded_z(double deviation, double se) {
  if (se > 0.0) return deviation / se;
  return deviation == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Checks the closed forms and the sampler against the enumerated model over
// a parameter grid.  Corrected-Eq.-(4) and Monte-Carlo checks gate the
// outcome; Eq.-(3) deviations are documented but never fail the run.
inline ValidationReport run_validation(const ValidationOptions& options = {}) {
  struct Point {
    double detected_mean;
    double modes;
    std::vector<int> heralds;
  };
  std::vector<Point> points;
  for (double mean : options.detected_means)
    for (double mu : options.modes) points.push_back({mean, mu, options.conditioning});
  if (options.include_limit_point) points.push_back({1.0, 200.0, {0}});

  std::vector<std::vector<ValidationRow>> slots(points.size());
  auto eval_point = [&](std::size_t index) {
    const Point& point = points[index];
    TwbParams params;
    params.mean_photons = detail::photons_from_detected_mean(point.detected_mean, options.eta);
    params.modes = point.modes;
    params.eta_signal = params.eta_idler = options.eta;
    params.validate();

    const JointDist joint = joint_detected_pmf(params, options.eps);
    const double nrf = exact_nrf(params, options.eps);
    const double nrf_corr = formula_nrf_eq4(point.detected_mean, point.detected_mean,
                                            options.eta, point.modes, NrfVariant::corrected);
    const double nrf_printed = formula_nrf_eq4(point.detected_mean, point.detected_mean,
                                               options.eta, point.modes, NrfVariant::printed);

    const PulseRecordSet run = sample_run(
        params, options.mc_shots,
        SeedSpec{options.mc_seed + static_cast<std::uint64_t>(index), 1});
    const RunSummary summary = summarize(run);
    const double nrf_se = nrf_standard_error(run, summary);
    const double nrf_z = detail::guarded_z(summary.nrf_hat - nrf, nrf_se);

    for (int herald : point.heralds) {
      ValidationRow row;
      row.detected_mean = point.detected_mean;
      row.modes = point.modes;
      row.eta = options.eta;
      row.herald = herald;
      row.heralding = heralding_probability(params, herald, options.eps);
      row.fano_exact = exact_conditional_fano(joint, herald);
      row.fano_eq3 = formula_fano_eq3(point.detected_mean, point.modes, options.eta, herald);
      row.fano_eq3_abs_dev = std::abs(row.fano_eq3 - row.fano_exact);
      row.nrf_exact = nrf;
      row.nrf_eq4_corrected = nrf_corr;
      row.nrf_corrected_abs_dev = std::abs(nrf_corr - nrf);
      row.nrf_eq4_printed = nrf_printed;
      row.nrf_printed_abs_dev = std::abs(nrf_printed - nrf);
      row.mc_nrf_z = nrf_z;

      if (row.nrf_corrected_abs_dev > options.nrf_formula_tol)
        row.failures.push_back("corrected Eq.(4) deviates from the oracle by " +
                               detail::short_number(row.nrf_corrected_abs_dev));
      if (std::abs(row.mc_nrf_z) > options.mc_z_tol)
        row.failures.push_back("Monte-Carlo NRF z-score " + detail::short_number(row.mc_nrf_z));

      AnalysisOptions cond;
      cond.min_samples = options.mc_min_heralds;
      cond.bootstrap_resamples = options.bootstrap_resamples;
      cond.bootstrap_seed = options.mc_seed ^ 0x9e3779b97f4a7c15ULL;
      try {
        const ConditionalSummary cs = condition_records(run, herald, cond);
        if (cs.stats.fano && cs.fano_se) {
          row.mc_fano_z = detail::guarded_z(*cs.stats.fano - row.fano_exact, *cs.fano_se);
          if (std::abs(*row.mc_fano_z) > options.mc_z_tol)
            row.failures.push_back("Monte-Carlo conditional-Fano z-score " +
                                   detail::short_number(*row.mc_fano_z));
        }
      } catch (const std::domain_error&) {
        // too few heralds at this point; the z column stays absent
      }
      slots[index].push_back(std::move(row));
    }
  };

  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, options.workers), points.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) eval_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1))
          eval_point(i);
      });
    for (auto& t : pool) t.join();
  }

  ValidationReport report;
  for (auto& slot : slots)
    for (auto& row : slot) report.rows.push_back(std::move(row));
  return report;
}

}  // namespace twinbeam
