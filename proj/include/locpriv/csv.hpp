#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "locpriv/dataset.hpp"
#include "locpriv/errors.hpp"

// CSV import/export for the two record schemas and the merged matrix.
// Fields in these schemas never contain commas, so no quoting is done.

namespace locpriv {

class file_error : public std::runtime_error {
 public:
  explicit file_error(const std::string& what) : std::runtime_error(what) {}
};

namespace csv_detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw file_error("cannot open file: " + path);
  return in;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw file_error("cannot write file: " + path);
  return out;
}

inline void expect_header(const std::string& got, const std::string& want,
                          const std::string& path) {
  if (got != want)
    throw file_error(path + ": expected header '" + want + "', got '" + got +
                     "'");
}

}  // namespace csv_detail

inline constexpr const char* kCheckinHeader =
    "user_id,timestamp,place_id,category,subcategory";
inline constexpr const char* kPrefHeader =
    "user_id,timestamp,place_id,category,rating";

inline void write_checkins_csv(const std::string& path,
                               const std::vector<CheckinRecord>& records) {
  auto out = csv_detail::open_for_write(path);
  out << kCheckinHeader << "\n";
  for (const CheckinRecord& r : records) {
    out << r.user_id << ',' << format_iso8601(r.timestamp) << ',' << r.place_id
        << ',' << r.category << ',' << r.subcategory << "\n";
  }
}

inline std::vector<CheckinRecord> read_checkins_csv(const std::string& path) {
  auto in = csv_detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw file_error(path + ": empty file");
  csv_detail::expect_header(line, kCheckinHeader, path);
  std::vector<CheckinRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv_detail::split_line(line);
    if (fields.size() != 5)
      throw file_error(path + ":" + std::to_string(line_no) +
                       ": expected 5 fields");
    records.push_back({fields[0], parse_iso8601(fields[1]), fields[2],
                       fields[3], fields[4]});
  }
  return records;
}

inline void write_prefs_csv(const std::string& path,
                            const std::vector<PreferenceRecord>& records) {
  auto out = csv_detail::open_for_write(path);
  out << kPrefHeader << "\n";
  for (const PreferenceRecord& r : records) {
    out << r.user_id << ',' << format_iso8601(r.timestamp) << ',' << r.place_id
        << ',' << category_name(r.category) << ','
        << static_cast<int>(r.rating) << "\n";
  }
}

inline std::vector<PreferenceRecord> read_prefs_csv(const std::string& path) {
  auto in = csv_detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw file_error(path + ": empty file");
  csv_detail::expect_header(line, kPrefHeader, path);
  std::vector<PreferenceRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv_detail::split_line(line);
    if (fields.size() != 5)
      throw file_error(path + ":" + std::to_string(line_no) +
                       ": expected 5 fields");
    if (fields[4] != "0" && fields[4] != "1")
      throw file_error(path + ":" + std::to_string(line_no) +
                       ": rating must be 0 or 1");
    records.push_back({fields[0], parse_iso8601(fields[1]), fields[2],
                       parse_category(fields[3]),
                       static_cast<std::uint8_t>(fields[4] == "1" ? 1 : 0)});
  }
  return records;
}

// Merged matrix dump: header row of item labels, one row per user, cells in
// {0, 1, unobserved-dot}.
inline void write_matrix_csv(const std::string& path,
                             const BuiltDataset& dataset) {
  auto out = csv_detail::open_for_write(path);
  out << "user_id";
  for (const ItemKey& key : dataset.items) out << ',' << item_label(key);
  out << "\n";
  const PreferenceMatrix& m = dataset.matrix;
  for (std::size_t i = 0; i < m.n_users(); ++i) {
    out << dataset.user_ids[i];
    std::vector<std::string> cells(m.n_items(), "·");
    for (const ItemRating& e : m.user_ratings(i))
      cells[e.item] = e.rating == 1.0 ? "1" : "0";
    for (const std::string& c : cells) out << ',' << c;
    out << "\n";
  }
}

}  // namespace locpriv
