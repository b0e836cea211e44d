#pragma once

#include <string>
#include <vector>

namespace hbt::cli {

// Shortest-free fixed format: 17 significant digits, '.' decimal, locale independent.
std::string format_double(double v);

class csv_table {
 public:
  explicit csv_table(std::vector<std::string> header);

  void add_row(const std::vector<double>& row);
  // Pre-formatted cells, for label columns.
  void add_cells(std::vector<std::string> cells);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  // ',' separated, LF line endings, header first.
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_file(const std::string& path, const std::string& bytes);

}  // namespace hbt::cli
