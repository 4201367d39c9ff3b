#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "locpriv/csv.hpp"
#include "locpriv/eval.hpp"

// Metric-curve CSV emitted by sweeps and the plain-text rendering used by
// the report command.

namespace locpriv {

inline constexpr const char* kCurveHeader =
    "axis_value,fpr_plain,fpr_ldp,recall_plain,recall_ldp,recon_plain,"
    "recon_ldp,n_excluded";

inline std::string format_metric(const std::optional<double>& v) {
  if (!v.has_value()) return "";  // undefined stays visibly absent
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", *v);
  return buf;
}

inline std::string format_axis_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_curve_csv(const std::string& path,
                            const std::vector<SweepRow>& rows) {
  auto out = csv_detail::open_for_write(path);
  out << kCurveHeader << "\n";
  for (const SweepRow& row : rows) {
    const std::size_t excluded =
        row.plain.excluded_total() + row.ldp.excluded_total();
    out << format_axis_value(row.axis_value) << ','
        << format_metric(row.plain.mean_fpr) << ','
        << format_metric(row.ldp.mean_fpr) << ','
        << format_metric(row.plain.mean_recall) << ','
        << format_metric(row.ldp.mean_recall) << ','
        << format_metric(row.plain.mean_reconstruction) << ','
        << format_metric(row.ldp.mean_reconstruction) << ',' << excluded
        << "\n";
  }
}

struct CurveFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CurveFile read_curve_csv(const std::string& path) {
  auto in = csv_detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw file_error(path + ": empty file");
  csv_detail::expect_header(line, kCurveHeader, path);
  CurveFile curve;
  curve.header = csv_detail::split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = csv_detail::split_line(line);
    if (fields.size() != curve.header.size())
      throw file_error(path + ": malformed row '" + line + "'");
    curve.rows.push_back(std::move(fields));
  }
  return curve;
}

// Fixed-width table; cells are printed verbatim so they match the CSV.
inline std::string render_curve_table(const std::string& title,
                                      const CurveFile& curve) {
  std::vector<std::size_t> widths(curve.header.size());
  for (std::size_t c = 0; c < curve.header.size(); ++c) {
    widths[c] = curve.header[c].size();
    for (const auto& row : curve.rows)
      widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  out << "== " << title << " ==\n";
  auto emit_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << std::setw(static_cast<int>(widths[c]))
          << (cells[c].empty() ? "-" : cells[c]);
      out << (c + 1 == cells.size() ? "\n" : "  ");
    }
  };
  emit_row(curve.header);
  for (const auto& row : curve.rows) emit_row(row);
  return out.str();
}

// Per-repetition raw values for one sweep cell.
inline void write_repetition_csv(const std::string& path,
                                 const EvalReport& plain,
                                 const EvalReport& ldp) {
  auto out = csv_detail::open_for_write(path);
  out << "rep,mode,fpr,recall,reconstruction\n";
  auto emit = [&](const EvalReport& rep, const char* mode) {
    for (std::size_t r = 0; r < rep.repetitions; ++r) {
      out << r << ',' << mode << ',' << format_metric(rep.raw_fpr[r]) << ','
          << format_metric(rep.raw_recall[r]) << ','
          << format_metric(rep.raw_reconstruction[r]) << "\n";
    }
  };
  emit(plain, "plain");
  emit(ldp, "ldp");
}

}  // namespace locpriv
