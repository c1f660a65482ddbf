#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "twinbeam/analysis.hpp"
#include "twinbeam/montecarlo.hpp"
#include "twinbeam/sweep.hpp"

namespace twinbeam {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 9 significant digits, '.' decimal separator, locale-independent.
inline std::string format_value(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Records CSV: header "shot,m1,m2", one row per pulse, unsigned decimal
// integers, UTF-8, LF line endings.

inline constexpr std::string_view kRecordsHeader = "shot,m1,m2";

inline void write_records_csv(std::ostream& os, const PulseRecordSet& run) {
  os << kRecordsHeader << '\n';
  char buf[80];
  for (const PulseRecord& r : run.records) {
    const int len = std::snprintf(buf, sizeof buf, "%llu,%u,%u\n",
                                  static_cast<unsigned long long>(r.shot), r.signal, r.idler);
    os.write(buf, len);
  }
  if (!os) throw IoError("failed while writing records CSV");
}

inline void write_records_csv(const std::string& path, const PulseRecordSet& run) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_records_csv(os, run);
}

namespace detail {

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <typename T>
inline T parse_unsigned_field(std::string_view field, const std::string& where) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw IoError(where + ": expected an unsigned integer, got '" + std::string(field) + "'");
  return value;
}

}  // namespace detail

// Strict reader for the records CSV format.  Enforces the PulseRecordSet
// invariant that shot indices start at 0 and strictly increase.
inline PulseRecordSet read_records_csv(std::istream& is, const std::string& source) {
  PulseRecordSet out;
  out.provenance = "file:" + source;
  std::string line;
  if (!std::getline(is, line))
    throw IoError(source + ": empty file, expected header '" + std::string(kRecordsHeader) + "'");
  if (detail::strip_cr(line) != kRecordsHeader)
    throw IoError(source + ":1: bad header '" + line + "', expected '" +
                  std::string(kRecordsHeader) + "'");
  std::size_t line_no = 1;
  bool first = true;
  std::uint64_t prev_shot = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view row = detail::strip_cr(line);
    if (row.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::size_t c1 = row.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
        row.find(',', c2 + 1) != std::string_view::npos)
      throw IoError(where + ": expected exactly 3 comma-separated fields");
    PulseRecord rec;
    rec.shot = detail::parse_unsigned_field<std::uint64_t>(row.substr(0, c1), where);
    rec.signal = detail::parse_unsigned_field<std::uint32_t>(row.substr(c1 + 1, c2 - c1 - 1), where);
    rec.idler = detail::parse_unsigned_field<std::uint32_t>(row.substr(c2 + 1), where);
    if (first) {
      if (rec.shot != 0) throw IoError(where + ": shot indices must start at 0");
      first = false;
    } else if (rec.shot <= prev_shot) {
      throw IoError(where + ": shot indices must be strictly increasing");
    }
    prev_shot = rec.shot;
    out.records.push_back(rec);
  }
  return out;
}

inline PulseRecordSet read_records_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return read_records_csv(is, path);
}

// ---------------------------------------------------------------------------
// Sweep table CSV: axis column, one column per objective, then flags.

inline void write_sweep_csv(std::ostream& os, const SweepTable& table) {
  os << table.axis;
  for (const std::string& col : table.columns) os << ',' << col;
  os << ",flags\n";
  for (const SweepRow& row : table.rows) {
    os << format_value(row.axis_value);
    for (const auto& value : row.values) {
      os << ',';
      if (value) os << format_value(*value);
    }
    os << ',';
    for (std::size_t i = 0; i < row.flags.size(); ++i) {
      if (i) os << ';';
      for (char c : row.flags[i]) os << (c == ',' ? ';' : c);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed while writing sweep CSV");
}

// ---------------------------------------------------------------------------
// Validation report CSV.

inline void write_validation_csv(std::ostream& os, const ValidationReport& report) {
  os << "M,mu,eta,m2,heralding,fano_exact,fano_eq3,fano_eq3_abs_dev,"
        "nrf_exact,nrf_eq4_corrected,nrf_corrected_abs_dev,"
        "nrf_eq4_printed,nrf_printed_abs_dev,mc_nrf_z,mc_fano_z,status\n";
  for (const ValidationRow& row : report.rows) {
    os << format_value(row.detected_mean) << ',' << format_value(row.modes) << ','
       << format_value(row.eta) << ',' << row.herald << ',' << format_value(row.heralding) << ','
       << format_value(row.fano_exact) << ',' << format_value(row.fano_eq3) << ','
       << format_value(row.fano_eq3_abs_dev) << ',' << format_value(row.nrf_exact) << ','
       << format_value(row.nrf_eq4_corrected) << ',' << format_value(row.nrf_corrected_abs_dev)
       << ',' << format_value(row.nrf_eq4_printed) << ','
       << format_value(row.nrf_printed_abs_dev) << ',' << format_value(row.mc_nrf_z) << ',';
    if (row.mc_fano_z) os << format_value(*row.mc_fano_z);
    os << ',';
    if (row.failures.empty()) {
      os << "ok";
    } else {
      for (std::size_t i = 0; i < row.failures.size(); ++i) {
        if (i) os << ';';
        for (char c : row.failures[i]) os << (c == ',' ? ';' : c);
      }
    }
    os << '\n';
  }
  if (!os) throw IoError("failed while writing validation CSV");
}

// ---------------------------------------------------------------------------
// Analysis report: flat key = value lines, then the conditional CSV table.
// Keys follow the m1/m2 naming of the records format; absent estimates are
// simply omitted.

inline void write_analysis_report(std::ostream& os, const AnalysisReport& report) {
  auto kv = [&os](std::string_view key, double value) {
    os << key << " = " << format_value(value) << '\n';
  };
  if (report.summary) {
    const RunSummary& s = *report.summary;
    os << "shots = " << s.shots << '\n';
    kv("mean1", s.mean_signal);
    kv("mean2", s.mean_idler);
    kv("var1", s.var_signal);
    kv("var2", s.var_idler);
    kv("cov", s.cov);
    if (s.fano_signal) kv("fano1", *s.fano_signal);
    if (s.fano_idler) kv("fano2", *s.fano_idler);
    kv("nrf_hat", s.nrf_hat);
  }
  if (report.mu_hat_signal) kv("mu_hat1", *report.mu_hat_signal);
  if (report.mu_hat_idler) kv("mu_hat2", *report.mu_hat_idler);
  if (report.mu_hat_mean) kv("mu_hat_mean", *report.mu_hat_mean);
  if (report.eta_hat) kv("eta_hat", *report.eta_hat);
  if (report.nrf_eq4_corrected) kv("nrf_eq4_corrected", *report.nrf_eq4_corrected);
  if (report.nrf_eq4_printed) kv("nrf_eq4_printed", *report.nrf_eq4_printed);
  for (const std::string& w : report.warnings) os << "warning = " << w << '\n';
  for (const std::string& e : report.errors) os << "error = " << e << '\n';
  if (!report.conditional.empty()) {
    os << '\n' << "m2,samples,mean,fano,fano_se,fano_eq3\n";
    for (const ConditionalReport& c : report.conditional) {
      os << c.herald << ',' << c.samples << ',' << format_value(c.mean) << ',';
      if (c.fano) os << format_value(*c.fano);
      os << ',';
      if (c.fano_se) os << format_value(*c.fano_se);
      os << ',';
      if (c.fano_eq3) os << format_value(*c.fano_eq3);
      os << '\n';
    }
  }
  if (!os) throw IoError("failed while writing analysis report");
}

}  // namespace twinbeam
