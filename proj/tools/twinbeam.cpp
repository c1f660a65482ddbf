// twinbeam: simulate, analyze and sweep the detected-photon statistics of a
// multimode twin-beam source with photon-number-resolving detection.
//
// Exit codes: 0 success, 1 command-line usage error, 2 domain error,
// 3 I/O error, 4 validation failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "twinbeam/analysis.hpp"
#include "twinbeam/config.hpp"
#include "twinbeam/io.hpp"
#include "twinbeam/montecarlo.hpp"
#include "twinbeam/sweep.hpp"
#include "twinbeam/twb_theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;

// Every subcommand takes the same flat configuration: a config file first,
// then command-line overrides on top.
struct CommonArgs {
  std::string config_path;
  std::optional<double> N, M, mu, eta, eta1, eta2, eps;
  std::optional<std::uint64_t> shots, seed, min_samples;
  std::optional<unsigned> workers;
  std::optional<std::string> nrf_variant;
  std::vector<int> m2;
};

void add_common_options(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "flat key = value configuration file");
  cmd->add_option("--N", args->N, "mean photons per arm before detection");
  cmd->add_option("--M", args->M, "mean detected photons (balanced arms; N = M / eta)");
  cmd->add_option("--mu", args->mu, "mode count (> 0, non-integer allowed)");
  cmd->add_option("--eta", args->eta, "detection efficiency for both arms");
  cmd->add_option("--eta1", args->eta1, "signal-arm efficiency");
  cmd->add_option("--eta2", args->eta2, "idler-arm efficiency");
  cmd->add_option("--shots", args->shots, "number of pulses");
  cmd->add_option("--seed", args->seed, "master seed");
  cmd->add_option("--eps", args->eps, "truncation tolerance for exact model sums");
  cmd->add_option("--m2", args->m2, "conditioning value(s)")->delimiter(',');
  cmd->add_option("--min-samples", args->min_samples, "heralds required before conditioning");
  cmd->add_option("--workers", args->workers, "worker threads");
  cmd->add_option("--nrf-variant", args->nrf_variant, "printed or corrected Eq. (4)");
}

twinbeam::RunConfig merge_config(const CommonArgs& args) {
  twinbeam::RunConfig config;
  if (!args.config_path.empty()) config = twinbeam::parse_config_file(args.config_path);
  if (args.N) config.mean_photons = *args.N;
  if (args.M) config.detected_mean = *args.M;
  if (args.mu) config.modes = *args.mu;
  if (args.eta) config.eta = *args.eta;
  if (args.eta1) config.eta1 = *args.eta1;
  if (args.eta2) config.eta2 = *args.eta2;
  if (args.shots) config.shots = *args.shots;
  if (args.seed) config.seed = *args.seed;
  if (args.eps) config.eps = *args.eps;
  if (!args.m2.empty()) config.m2 = args.m2.front();
  if (args.min_samples) config.min_samples = *args.min_samples;
  if (args.workers) config.workers = *args.workers;
  if (args.nrf_variant) config.nrf_variant = twinbeam::nrf_variant_from_name(*args.nrf_variant);
  return config;
}

std::vector<int> conditioning_list(const CommonArgs& args, const twinbeam::RunConfig& config,
                                   std::vector<int> fallback) {
  if (!args.m2.empty()) return args.m2;
  if (config.m2) return {*config.m2};
  return fallback;
}

// "-" means stdout.
void write_output(const std::string& path, const std::string& body) {
  if (path == "-") {
    std::cout << body;
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw twinbeam::IoError("cannot open '" + path + "' for writing");
  os << body;
  if (!os) throw twinbeam::IoError("failed while writing '" + path + "'");
}

std::vector<double> parse_grid(const std::string& text) {
  // Either a comma list "0.5,1,2" or an inclusive range "start:stop:step".
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    double start = 0, stop = 0, step = 0;
    std::istringstream ss(text);
    char a = 0, b = 0;
    if (!(ss >> start >> a >> stop >> b >> step) || a != ':' || b != ':' || !(step > 0.0) ||
        ss.rdbuf()->in_avail() != 0)
      throw std::domain_error("bad grid range '" + text + "' (expected start:stop:step)");
    const long count = std::lround((stop - start) / step);
    for (long i = 0; i <= count; ++i) {
      const double v = start + static_cast<double>(i) * step;
      if (v > stop + 1e-9 * step) break;
      grid.push_back(v);
    }
    return grid;
  }
  std::istringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ','))
    grid.push_back(twinbeam::detail::parse_double(twinbeam::detail::trim(field), "grid"));
  if (grid.empty()) throw std::domain_error("empty grid '" + text + "'");
  return grid;
}

int run_simulate(const CommonArgs& args, const std::string& out_path) {
  const twinbeam::RunConfig config = merge_config(args);
  const twinbeam::TwbParams params = twinbeam::resolve_params(config);
  const std::uint64_t shots = config.shots.value_or(200000);
  twinbeam::SeedSpec seed{config.seed.value_or(0), config.workers.value_or(1)};
  const twinbeam::PulseRecordSet run = twinbeam::sample_run(params, shots, seed);
  std::ostringstream body;
  twinbeam::write_records_csv(body, run);
  write_output(out_path, body.str());
  return kExitOk;
}

int run_analyze(const CommonArgs& args, const std::string& records_path,
                const std::string& out_path, const std::string& conditional_path) {
  const twinbeam::RunConfig config = merge_config(args);
  const twinbeam::PulseRecordSet run = twinbeam::read_records_csv(records_path);
  twinbeam::AnalysisOptions options;
  if (config.min_samples) options.min_samples = static_cast<std::size_t>(*config.min_samples);
  if (config.seed) options.bootstrap_seed = *config.seed;
  options.conditioning = conditioning_list(args, config, {1, 2});
  const twinbeam::AnalysisReport report = twinbeam::self_consistent_report(run, options);
  std::ostringstream body;
  twinbeam::write_analysis_report(body, report);
  write_output(out_path, body.str());
  if (!conditional_path.empty()) {
    std::ostringstream table;
    table << "m2,samples,mean,fano,fano_se,fano_eq3\n";
    for (const auto& c : report.conditional) {
      table << c.herald << ',' << c.samples << ',' << twinbeam::format_value(c.mean) << ',';
      if (c.fano) table << twinbeam::format_value(*c.fano);
      table << ',';
      if (c.fano_se) table << twinbeam::format_value(*c.fano_se);
      table << ',';
      if (c.fano_eq3) table << twinbeam::format_value(*c.fano_eq3);
      table << '\n';
    }
    write_output(conditional_path, table.str());
  }
  return kExitOk;
}

int run_theory(const CommonArgs& args, const std::string& out_path) {
  const twinbeam::RunConfig config = merge_config(args);
  const twinbeam::TwbParams params = twinbeam::resolve_params(config);
  const double eps = config.eps.value_or(1e-12);
  const std::vector<int> heralds = conditioning_list(args, config, {1, 2});
  const twinbeam::NrfVariant variant =
      config.nrf_variant.value_or(twinbeam::NrfVariant::corrected);

  std::ostringstream body;
  auto kv = [&body](std::string_view key, double value) {
    body << key << " = " << twinbeam::format_value(value) << '\n';
  };
  kv("N", params.mean_photons);
  kv("mu", params.modes);
  kv("eta1", params.eta_signal);
  kv("eta2", params.eta_idler);
  kv("M1", params.detected_mean_signal());
  kv("M2", params.detected_mean_idler());
  kv("eps", eps);
  const double eta_eff = params.effective_eta();
  const double mean_s = params.detected_mean_signal();
  const double mean_i = params.detected_mean_idler();
  if (params.mean_photons > 0.0 && eta_eff + params.eta_signal + params.eta_idler > 0.0) {
    kv("nrf_exact", twinbeam::exact_nrf(params, eps));
    kv("nrf_eq4_corrected",
       twinbeam::formula_nrf_eq4(mean_s, mean_i, eta_eff, params.modes,
                                 twinbeam::NrfVariant::corrected));
    kv("nrf_eq4_printed",
       twinbeam::formula_nrf_eq4(mean_s, mean_i, eta_eff, params.modes,
                                 twinbeam::NrfVariant::printed));
    kv("nrf_eq4",
       twinbeam::formula_nrf_eq4(mean_s, mean_i, eta_eff, params.modes, variant));
  }
  const twinbeam::JointDist joint = twinbeam::joint_detected_pmf(params, eps);
  const double detected_mean = eta_eff * params.mean_photons;
  for (int k : heralds) {
    const std::string suffix = "_m2_" + std::to_string(k);
    const double herald_mass = twinbeam::heralding_probability(params, k, eps);
    kv("heralding" + suffix, herald_mass);
    if (herald_mass > 10.0 * eps) {
      try {
        kv("fano_exact" + suffix, twinbeam::exact_conditional_fano(joint, k));
      } catch (const std::domain_error& e) {
        body << "error = " << e.what() << '\n';
      }
    } else {
      body << "error = heralding probability for m2=" << k
           << " is below 10x the truncation tolerance\n";
    }
    kv("fano_eq3" + suffix,
       twinbeam::formula_fano_eq3(detected_mean, params.modes, eta_eff, k));
  }
  write_output(out_path, body.str());
  return kExitOk;
}

int run_sweep_cmd(const CommonArgs& args, const std::string& axis_name,
                  const std::string& grid_text, const std::vector<std::string>& objective_names,
                  const std::string& out_path) {
  const twinbeam::RunConfig config = merge_config(args);
  twinbeam::SweepSpec spec;
  spec.axis = twinbeam::sweep_axis_from_name(axis_name);
  spec.grid = parse_grid(grid_text);
  spec.conditioning = conditioning_list(args, config, {1});
  if (!objective_names.empty()) {
    spec.objectives.clear();
    for (const std::string& name : objective_names)
      spec.objectives.push_back(twinbeam::sweep_objective_from_name(name));
  }
  if (config.eps) spec.eps = *config.eps;
  spec.workers = config.workers.value_or(1);

  // The axis parameter may stay unset in the config; fill a placeholder so
  // base validation passes, the axis value overrides it per point.
  twinbeam::RunConfig base = config;
  switch (spec.axis) {
    case twinbeam::SweepAxis::detected_mean:
      if (base.detected_mean) throw std::domain_error("axis M conflicts with a fixed M value");
      if (!base.mean_photons) base.mean_photons = 0.0;
      break;
    case twinbeam::SweepAxis::efficiency:
      if (base.eta || base.eta1 || base.eta2)
        throw std::domain_error("axis eta conflicts with fixed efficiencies");
      base.eta = 1.0;
      break;
    default:
      break;
  }
  if (spec.axis != twinbeam::SweepAxis::detected_mean && base.detected_mean) {
    spec.fixed_detected_mean = base.detected_mean;
    base.detected_mean.reset();
    base.mean_photons = 0.0;
  }
  if (!base.mean_photons && !base.detected_mean) base.mean_photons = 0.0;
  spec.base = twinbeam::resolve_params(base);

  const twinbeam::SweepTable table = twinbeam::run_sweep(spec);
  std::ostringstream body;
  twinbeam::write_sweep_csv(body, table);
  write_output(out_path, body.str());
  return kExitOk;
}

int run_validate(const CommonArgs& args, const std::string& m_grid, const std::string& mu_grid,
                 bool no_limit_point, const std::string& out_path) {
  const twinbeam::RunConfig config = merge_config(args);
  twinbeam::ValidationOptions options;
  if (!m_grid.empty()) options.detected_means = parse_grid(m_grid);
  if (!mu_grid.empty()) options.modes = parse_grid(mu_grid);
  if (config.eta) options.eta = *config.eta;
  if (!args.m2.empty()) options.conditioning = args.m2;
  else if (config.m2) options.conditioning = {*config.m2};
  options.include_limit_point = !no_limit_point;
  if (config.eps) options.eps = *config.eps;
  if (config.shots) options.mc_shots = *config.shots;
  if (config.seed) options.mc_seed = *config.seed;
  options.workers = config.workers.value_or(1);

  const twinbeam::ValidationReport report = twinbeam::run_validation(options);
  std::ostringstream body;
  twinbeam::write_validation_csv(body, report);
  write_output(out_path, body.str());
  if (!report.passed()) {
    std::size_t failing = 0;
    for (const auto& row : report.rows) failing += row.failures.empty() ? 0 : 1;
    std::cerr << "validate: " << failing << " of " << report.rows.size()
              << " grid rows failed their corrected-formula or Monte-Carlo checks\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimode twin-beam photon statistics toolkit"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* simulate = app.add_subcommand("simulate", "sample a seeded run and emit the records CSV");
  std::string simulate_out = "-";
  add_common_options(simulate, &args);
  simulate->add_option("--out", simulate_out, "output records CSV ('-' for stdout)");

  auto* analyze = app.add_subcommand("analyze", "self-consistent analysis of a records CSV");
  std::string records_path, analyze_out = "-", conditional_out;
  add_common_options(analyze, &args);
  analyze->add_option("--records", records_path, "input records CSV")->required();
  analyze->add_option("--out", analyze_out, "report output ('-' for stdout)");
  analyze->add_option("--conditional-out", conditional_out,
                      "also write the conditional table to its own CSV");

  auto* theory = app.add_subcommand("theory", "closed-form and exact model values at one point");
  std::string theory_out = "-";
  add_common_options(theory, &args);
  theory->add_option("--out", theory_out, "report output ('-' for stdout)");

  auto* sweep = app.add_subcommand("sweep", "evaluate objectives over a parameter grid");
  std::string axis_name = "M", grid_text, sweep_out = "-";
  std::vector<std::string> objective_names;
  add_common_options(sweep, &args);
  sweep->add_option("--axis", axis_name, "sweep axis: M, mu, eta or m2");
  sweep->add_option("--grid", grid_text, "grid as 'a,b,c' or 'start:stop:step'")->required();
  sweep->add_option("--objectives", objective_names,
                    "subset of conditional_fano_exact, conditional_fano_eq3, nrf_exact, heralding")
      ->delimiter(',');
  sweep->add_option("--out", sweep_out, "output CSV ('-' for stdout)");

  auto* validate = app.add_subcommand("validate", "formula-vs-oracle deviation report");
  std::string m_grid, mu_grid, validate_out = "-";
  bool no_limit_point = false;
  add_common_options(validate, &args);
  validate->add_option("--M-grid", m_grid, "detected-mean grid (default 0.5,1,2,3.2)");
  validate->add_option("--mu-grid", mu_grid, "mode-count grid (default 2,10,100)");
  validate->add_flag("--no-limit-point", no_limit_point,
                     "skip the (M=1, mu=200, m2=0) limit probe");
  validate->add_option("--out", validate_out, "output CSV ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse diagnostic
    return code == 0 ? kExitOk : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(args, simulate_out);
    if (analyze->parsed()) return run_analyze(args, records_path, analyze_out, conditional_out);
    if (theory->parsed()) return run_theory(args, theory_out);
    if (sweep->parsed())
      return run_sweep_cmd(args, axis_name, grid_text, objective_names, sweep_out);
    if (validate->parsed())
      return run_validate(args, m_grid, mu_grid, no_limit_point, validate_out);
  } catch (const twinbeam::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitOk;
}
