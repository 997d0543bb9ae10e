#ifndef MFKL_HARNESS_REPORT_HPP
#define MFKL_HARNESS_REPORT_HPP

// Collects the <kind>_summary.json files of an output directory, prints one
// PASS/FAIL line per check and writes index.json. index.json is the only
// output that carries a timestamp.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "mfkl/harness/io.hpp"

namespace mfkl::harness {

inline constexpr int kReportMissingFiles = 5;

/// Returns 0 when every check passes, 1 when some check fails, and
/// kReportMissingFiles when the directory, its summaries or a listed file is
/// missing or empty.
inline int emit_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    err << "report: " << dir.string() << " is not a directory\n";
    return kReportMissingFiles;
  }
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 13 && name.ends_with("_summary.json")) summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty()) {
    err << "report: no *_summary.json in " << dir.string() << "\n";
    return kReportMissingFiles;
  }

  Json index;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  index["generated_at"] = stamp;
  index["experiments"] = Json::array();

  bool all_pass = true;
  std::vector<std::string> missing;
  for (const auto& path : summaries) {
    Json s;
    try {
      s = read_json_file(path);
    } catch (const ConfigError& e) {
      err << "report: " << e.what() << "\n";
      return kReportMissingFiles;
    }
    const std::string kind = s.value("kind", path.stem().string());
    Json entry{{"kind", kind}, {"summary", path.filename().string()}, {"files", s.value("files", Json::array())}};
    for (const auto& f : s.value("files", Json::array())) {
      const fs::path p = dir / f.get<std::string>();
      std::error_code ec;
      if (!fs::is_regular_file(p) || fs::file_size(p, ec) == 0 || ec) missing.push_back(p.string());
    }
    bool pass = true;
    for (const auto& c : s.value("checks", Json::array())) {
      const bool ok = c.value("pass", false);
      pass = pass && ok;
      out << (ok ? "PASS " : "FAIL ") << kind << "/" << c.value("name", std::string("?")) << ": "
          << c.value("detail", std::string()) << "\n";
    }
    for (const auto& w : s.value("warnings", Json::array())) out << "WARN " << kind << ": " << w.get<std::string>() << "\n";
    entry["pass"] = pass;
    all_pass = all_pass && pass;
    index["experiments"].push_back(entry);
  }
  if (!missing.empty()) {
    for (const auto& m : missing) err << "report: missing or empty file " << m << "\n";
    return kReportMissingFiles;
  }
  index["pass"] = all_pass;
  write_json(dir / "index.json", index);
  out << (all_pass ? "ALL PASS" : "SOME CHECKS FAILED") << " (" << summaries.size() << " experiment"
      << (summaries.size() == 1 ? "" : "s") << ")\n";
  return all_pass ? 0 : 1;
}

}  // namespace mfkl::harness

#endif  // MFKL_HARNESS_REPORT_HPP
