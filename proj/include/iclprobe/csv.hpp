// Minimal CSV writing with RFC 4180 quoting.
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "iclprobe/common.hpp"

namespace iclprobe {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  /// Cells convert through to_cell: strings pass through, doubles use the
  /// shortest round-trip form.
  template <typename... Ts>
  void add(const Ts&... cells) {
    std::vector<std::string> row{to_cell(cells)...};
    if (row.size() != header_.size()) fail(ErrorCode::DimensionMismatch, "csv row width differs from header");
    rows_.push_back(std::move(row));
  }

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) fail(ErrorCode::DimensionMismatch, "csv row width differs from header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    fail(ErrorCode::OutOfRange, "no column " + std::string(name));
  }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << str();
  }

  static std::string to_cell(const std::string& s) { return s; }
  static std::string to_cell(const char* s) { return s; }
  static std::string to_cell(std::string_view s) { return std::string(s); }
  static std::string to_cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }
  static std::string to_cell(bool v) { return v ? "true" : "false"; }
  template <typename T>
    requires std::is_integral_v<T>
  static std::string to_cell(T v) {
    return std::to_string(v);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace iclprobe
