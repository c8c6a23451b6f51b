#ifndef CONDENSIM_CSV_HPP
#define CONDENSIM_CSV_HPP

// Minimal CSV tables with a fixed 17-significant-digit float format, so
// identical runs produce identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "condensim/error.hpp"
#include "condensim/site_set.hpp"

namespace condensim {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string csv_cell(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) return v;
  else if constexpr (std::is_convertible_v<T, const char*>) return std::string(v);
  else if constexpr (std::is_same_v<T, SiteSet>) return std::to_string(v.mask());
  else if constexpr (std::is_floating_point_v<T>) return format_double(static_cast<double>(v));
  else if constexpr (std::is_integral_v<T>) return std::to_string(v);
  else static_assert(sizeof(T) == 0, "unsupported CSV cell type");
}

/// Missing values are written as empty cells.
template <class T>
std::string csv_cell(const std::optional<T>& v) {
  return v ? csv_cell(*v) : std::string();
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... Ts>
  void add(const Ts&... cells) {
    static_assert(sizeof...(Ts) > 0);
    std::vector<std::string> row{csv_cell(cells)...};
    push(std::move(row));
  }

  void push(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw Error(ErrorKind::IoError, "CSV row width does not match the header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << str();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// "x_1", ..., "x_L" with 1-based site labels.
inline std::vector<std::string> coordinate_columns(std::size_t L, const std::string& prefix = "x_") {
  std::vector<std::string> out;
  for (std::size_t j = 1; j <= L; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

}  // namespace condensim

#endif  // CONDENSIM_CSV_HPP
