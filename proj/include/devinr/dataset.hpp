#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "devinr/errors.hpp"
#include "devinr/volume.hpp"

namespace devinr {

struct ScanRecord {
  std::string subject_id;
  std::string scan_id;
  double pma_weeks = 0.0;
  std::string path;  // volume file, relative to the manifest's directory
  std::optional<double> hc_cm;

  double t() const { return normalize_time(pma_weeks); }
};

struct DatasetManifest {
  std::vector<ScanRecord> scans;
  std::filesystem::path base_dir;  // directory the manifest was read from

  std::filesystem::path resolve(const ScanRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("manifest: bad " + what + " value '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline constexpr const char* kManifestHeader =
    "subject_id,scan_id,pma_weeks,path,hc_cm";

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << kManifestHeader << "\n";
  for (const auto& r : m.scans) {
    f << r.subject_id << ',' << r.scan_id << ','
      << detail::format_double(r.pma_weeks) << ',' << r.path << ','
      << (r.hc_cm ? detail::format_double(*r.hc_cm) : std::string()) << "\n";
  }
  if (!f) throw DataError("write failed: " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest: " + path);
  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path();
  std::string line;
  if (!std::getline(f, line)) throw DataError("manifest: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw DataError("manifest: unexpected header '" + line + "'");
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != 5)
      throw DataError("manifest: line " + std::to_string(lineno) +
                      " has " + std::to_string(cols.size()) + " columns");
    ScanRecord r;
    r.subject_id = cols[0];
    r.scan_id = cols[1];
    r.pma_weeks = detail::parse_double(cols[2], "pma_weeks");
    r.path = cols[3];
    if (!cols[4].empty()) r.hc_cm = detail::parse_double(cols[4], "hc_cm");
    if (r.subject_id.empty() || r.scan_id.empty() || r.path.empty())
      throw DataError("manifest: line " + std::to_string(lineno) +
                      " has empty required field");
    m.scans.push_back(std::move(r));
  }
  return m;
}

// A scan with its volume in memory, ready for training or evaluation.
struct LoadedScan {
  ScanRecord record;
  VolumeImage image;
  ForegroundMask mask;
  float t = 0.0f;
};

inline LoadedScan load_scan(const DatasetManifest& m, const ScanRecord& r) {
  LoadedScan s;
  s.record = r;
  s.image = load_volume(m.resolve(r).string());
  s.mask = foreground_from_image(s.image);
  s.t = static_cast<float>(r.t());
  return s;
}

inline std::vector<LoadedScan> load_all_scans(const DatasetManifest& m) {
  std::vector<LoadedScan> out;
  out.reserve(m.scans.size());
  for (const auto& r : m.scans) out.push_back(load_scan(m, r));
  return out;
}

}  // namespace devinr
