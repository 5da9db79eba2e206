// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Manifest: one utterance per line, `utt_id<TAB>audio_path[<TAB>key=value ...]`.
// Keys keep their insertion order so stages only ever append.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridunits/error.hpp"

namespace gridunits {

struct ManifestRow {
  std::string id;
  std::string audio;
  std::vector<std::pair<std::string, std::string>> keys;

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : keys) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  bool has(std::string_view key) const { return get(key).has_value(); }

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : keys) {
      if (k == key) {
        v = value;
        return;
      }
    }
    keys.emplace_back(key, value);
  }

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

using Manifest = std::vector<ManifestRow>;

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_fixed(double value, int precision) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  std::string s = buf;
  // "-0.000" -> "0.000"
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline Manifest parse_manifest(std::istream& in, const std::string& origin = "<stream>") {
  Manifest rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      fail(Errc::config_error, origin + ":" + std::to_string(lineno) + ": expected utt_id<TAB>audio_path");
    }
    ManifestRow row{fields[0], fields[1], {}};
    for (std::size_t i = 2; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        fail(Errc::config_error, origin + ":" + std::to_string(lineno) + ": malformed field '" + fields[i] + "'");
      }
      row.set(fields[i].substr(0, eq), fields[i].substr(eq + 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, path.string());
  return parse_manifest(in, path.string());
}

inline void write_manifest(std::ostream& out, const Manifest& rows) {
  for (const auto& row : rows) {
    out << row.id << '\t' << row.audio;
    for (const auto& [k, v] : row.keys) out << '\t' << k << '=' << v;
    out << '\n';
  }
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  write_manifest(out, rows);
}

inline void sort_by_id(Manifest& rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.id < b.id; });
}

}  // namespace gridunits
