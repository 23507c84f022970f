#pragma once

#include <charconv>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>

namespace gradsolve {

/// Shortest locale-independent rendering with 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) return "nan";
  return std::string(buf, res.ptr);
}

/// Minimal CSV row writer; values are never quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(std::initializer_list<std::string_view> names) {
    bool first = true;
    for (auto n : names) {
      if (!first) os_ << ',';
      os_ << n;
      first = false;
    }
    os_ << '\n';
  }

  CsvWriter& cell(double v) { return raw(format_double(v)); }
  CsvWriter& cell(long long v) { return raw(std::to_string(v)); }
  CsvWriter& cell(int v) { return raw(std::to_string(v)); }
  CsvWriter& cell(std::string_view s) { return raw(s); }

  void end_row() {
    os_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& raw(std::string_view s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }

  std::ostream& os_;
  bool first_ = true;
};

}  // namespace gradsolve
