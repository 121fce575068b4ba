#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "vpbo/output.hpp"

namespace vpbo::ref {

/// Names of the files in `dir` whose names start with `prefix`, sorted.
inline std::vector<std::string> files_with_prefix(const std::filesystem::path& dir, const std::string& prefix) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.rfind(prefix, 0) == 0) names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  return names;
}

/// Empty when the trace and init CSVs of both directories are byte-identical;
/// otherwise names the first difference.
inline std::string compare_trace_dirs(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::size_t compared = 0;
  for (const char* prefix : {"trace_", "init_"}) {
    const auto fa = files_with_prefix(a, prefix), fb = files_with_prefix(b, prefix);
    if (fa != fb) return std::string("different ") + prefix + "file sets";
    for (const auto& n : fa) {
      if (read_file(a / n) != read_file(b / n)) return n + " differs";
      ++compared;
    }
  }
  return compared ? std::string() : std::string("no trace files");
}

} // namespace vpbo::ref
