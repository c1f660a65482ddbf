#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "twinbeam/io.hpp"
#include "twinbeam/twb_theory.hpp"

namespace twinbeam {

// Flat `key = value` run configuration.  Recognized keys: N, M, mu, eta,
// eta1, eta2, shots, seed, eps, m2, min_samples, nrf_variant, workers.
// M is mutually exclusive with N and needs balanced arms (N = M / eta); eta
// is a balanced shorthand, mutually exclusive with eta1/eta2.
struct RunConfig {
  std::optional<double> mean_photons;   // N
  std::optional<double> detected_mean;  // M
  std::optional<double> modes;          // mu
  std::optional<double> eta;            // sets both arms
  std::optional<double> eta1, eta2;
  std::optional<std::uint64_t> shots;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  std::optional<int> m2;
  std::optional<std::uint64_t> min_samples;
  std::optional<NrfVariant> nrf_variant;
  std::optional<unsigned> workers;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view text, const std::string& where) {
  // from_chars for double is incomplete on some toolchains; strtod with an
  // end-pointer check is equivalent here and locale-stable for plain numbers.
  const std::string buf(text);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty())
    throw std::domain_error(where + ": expected a number, got '" + buf + "'");
  return value;
}

inline std::uint64_t parse_u64(std::string_view text, const std::string& where) {
  std::uint64_t value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::domain_error(where + ": expected an unsigned integer, got '" +
                            std::string(text) + "'");
  return value;
}

}  // namespace detail

inline NrfVariant nrf_variant_from_name(std::string_view name) {
  if (name == "printed") return NrfVariant::printed;
  if (name == "corrected") return NrfVariant::corrected;
  throw std::domain_error("nrf_variant must be 'printed' or 'corrected', got '" +
                          std::string(name) + "'");
}

inline void apply_config_entry(RunConfig& config, std::string_view key, std::string_view value,
                               const std::string& where) {
  if (key == "N") config.mean_photons = detail::parse_double(value, where);
  else if (key == "M") config.detected_mean = detail::parse_double(value, where);
  else if (key == "mu") config.modes = detail::parse_double(value, where);
  else if (key == "eta") config.eta = detail::parse_double(value, where);
  else if (key == "eta1") config.eta1 = detail::parse_double(value, where);
  else if (key == "eta2") config.eta2 = detail::parse_double(value, where);
  else if (key == "shots") config.shots = detail::parse_u64(value, where);
  else if (key == "seed") config.seed = detail::parse_u64(value, where);
  else if (key == "eps") config.eps = detail::parse_double(value, where);
  else if (key == "m2") config.m2 = static_cast<int>(detail::parse_u64(value, where));
  else if (key == "min_samples") config.min_samples = detail::parse_u64(value, where);
  else if (key == "nrf_variant") config.nrf_variant = nrf_variant_from_name(value);
  else if (key == "workers") config.workers = static_cast<unsigned>(detail::parse_u64(value, where));
  else
    throw std::domain_error(where + ": unknown configuration key '" + std::string(key) + "'");
}

inline RunConfig parse_config(std::istream& is, const std::string& source) {
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(detail::strip_cr(line));
    if (view.empty() || view.front() == '#') continue;
    const std::size_t eq = view.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos)
      throw std::domain_error(where + ": expected 'key = value'");
    const std::string_view key = detail::trim(view.substr(0, eq));
    const std::string_view value = detail::trim(view.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::domain_error(where + ": expected 'key = value'");
    apply_config_entry(config, key, value, where);
  }
  return config;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config '" + path + "' for reading");
  return parse_config(is, path);
}

// Resolves the configured values into model parameters.  Exclusivity rules
// live here so every subcommand rejects the same contradictions.
inline TwbParams resolve_params(const RunConfig& config) {
  if (config.eta && (config.eta1 || config.eta2))
    throw std::domain_error("eta is a balanced shorthand; do not combine it with eta1/eta2");
  if (config.mean_photons && config.detected_mean)
    throw std::domain_error("N and M are mutually exclusive");
  TwbParams params;
  params.modes = config.modes.value_or(1.0);
  params.eta_signal = config.eta1.value_or(config.eta.value_or(1.0));
  params.eta_idler = config.eta2.value_or(config.eta.value_or(1.0));
  if (config.detected_mean) {
    if (params.eta_signal != params.eta_idler)
      throw std::domain_error(
          "M needs balanced arms (eta1 == eta2) to recover N = M / eta; give N instead");
    params.mean_photons =
        detail::photons_from_detected_mean(*config.detected_mean, params.eta_signal);
  } else if (config.mean_photons) {
    params.mean_photons = *config.mean_photons;
  } else {
    throw std::domain_error("either N or M must be given");
  }
  params.validate();
  return params;
}

}  // namespace twinbeam
