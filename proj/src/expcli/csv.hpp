#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace expcli {

/// Deterministic CSV writer: fixed %.12g formatting for doubles.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw std::runtime_error("cannot open csv for write: " + path);
    write_row_impl(header);
  }

  void row(const std::vector<std::string>& cells) { write_row_impl(cells); }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
  }
  static std::string num(int64_t v) { return std::to_string(v); }

 private:
  void write_row_impl(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }
  std::ofstream os_;
};

}  // namespace expcli
