#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdlab {

// Shortest round-trip decimal form; deterministic for byte-identical reruns.
// Infinities become "inf"/"-inf" sentinels.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    path_ = path;
  }

  void row(std::span<const std::string> cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void row(std::initializer_list<std::string> cells) {
    row(std::span<const std::string>(cells.begin(), cells.size()));
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace sdlab
