#include "hbt_cli/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include "hbt/types.hpp"

namespace hbt::cli {

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw error("float formatting failed");
  return std::string(buf, ptr);
}

csv_table::csv_table(std::vector<std::string> header) : header_(std::move(header)) {}

void csv_table::add_row(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double v : row) cells.push_back(format_double(v));
  add_cells(std::move(cells));
}

void csv_table::add_cells(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw error("csv row width does not match header");
  for (const auto& c : cells)
    if (c.find_first_of(",\n\"") != std::string::npos) throw error("csv cell needs quoting: " + c);
  rows_.push_back(std::move(cells));
}

std::string csv_table::str() const {
  std::string out;
  for (std::size_t k = 0; k < header_.size(); ++k) {
    if (k) out += ',';
    out += header_[k];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += row[k];
    }
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw domain_error("cannot open output file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw error("failed writing " + path);
}

}  // namespace hbt::cli
