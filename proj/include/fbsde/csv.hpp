#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fbsde/error.hpp"

namespace fbsde {

// 9 significant digits, the precision every exported number is written at.
inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
    out_ << header << '\n';
  }
  CsvWriter& num(double v) { return field(fmt_num(v)); }
  CsvWriter& integer(long long v) { return field(std::to_string(v)); }
  CsvWriter& field(const std::string& s) {
    if (!first_) line_ += ',';
    line_ += s;
    first_ = false;
    return *this;
  }
  void end_row() {
    out_ << line_ << '\n';
    line_.clear();
    first_ = true;
  }
  ~CsvWriter() {
    if (!first_) end_row();
  }

 private:
  std::ofstream out_;
  std::string line_;
  bool first_ = true;
};

}  // namespace fbsde
