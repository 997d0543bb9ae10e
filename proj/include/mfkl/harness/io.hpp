#ifndef MFKL_HARNESS_IO_HPP
#define MFKL_HARNESS_IO_HPP

// Byte-stable table and JSON output. Numbers go through std::to_chars
// (shortest round-trip form), so identical values always print identically.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mfkl/core.hpp"

namespace mfkl::harness {

using Json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::size_t v) { return std::to_string(v); }

using Cell = std::variant<double, std::size_t, std::string, bool>;

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ResourceError("cannot open " + path.string() + " for writing");
    bool first = true;
    for (const auto& h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
    columns_ = header.size();
  }

  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != columns_) throw InvariantError("CSV row width does not match the header of " + path_.string());
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out_ << ',';
      first = false;
      std::visit(
          [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) out_ << v;
            else if constexpr (std::is_same_v<T, bool>) out_ << (v ? "true" : "false");
            else out_ << format_number(v);
          },
          c);
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw ResourceError("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

/// JSON number that prints exactly like the CSV cells. Non-finite values
/// become strings, since JSON has no literal for them.
inline Json json_number(double v) {
  if (!std::isfinite(v)) return format_number(v);
  return v;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ResourceError("failed writing " + path.string());
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace mfkl::harness

#endif  // MFKL_HARNESS_IO_HPP
