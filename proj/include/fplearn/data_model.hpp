#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fplearn/grid.hpp"

namespace fplearn {

struct PositionRecord {
  double x = 0.0;  // cm
  double y = 0.0;  // cm
  std::optional<double> z;  // cm, metadata only
  std::string plot_id;
  std::string replicate_id;
};

/// Timestamped, unlabeled particle-position ensembles.  Counts may vary
/// across times; there is no trajectory identity between frames.
struct SnapshotSet {
  DomainConfig domain;
  std::vector<double> times;  // hours, strictly increasing, first = 0
  std::vector<std::vector<PositionRecord>> frames;  // one list per time
  int dropped_rows = 0;  // rows skipped during load (missing x or y)

  std::size_t count_at(std::size_t k) const { return frames.at(k).size(); }

  void validate() const {
    domain.validate();
    if (times.empty()) throw std::runtime_error("SnapshotSet: no records");
    if (times.size() != frames.size())
      throw std::runtime_error("SnapshotSet: times/frames length mismatch");
    if (times.front() != 0.0)
      throw std::runtime_error("SnapshotSet: first time must be 0");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (times[k] <= times[k - 1])
        throw std::runtime_error("SnapshotSet: times must be strictly increasing");
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].empty())
        throw std::runtime_error("SnapshotSet: empty frame at t=" +
                                 std::to_string(times[k]));
      for (const auto& r : frames[k]) {
        if (r.x < 0.0 || r.x > domain.length_x || r.y < 0.0 || r.y > domain.length_y)
          throw std::runtime_error("SnapshotSet: position outside domain");
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Load a snapshot CSV.  Schema (header required):
///   time_hr,x_cm,y_cm,z_cm,plot_id,replicate_id
/// z_cm may be empty.  Rows with missing x or y are dropped and counted.
/// Positions up to 1 cm outside the plot are clamped to the boundary;
/// anything further out is an error.
inline SnapshotSet load_snapshots(const std::string& path, const DomainConfig& domain) {
  domain.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_snapshots: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_snapshots: no records in " + path);
  {
    auto header = detail::split_csv_line(detail::trim(line));
    const std::vector<std::string> expected = {"time_hr", "x_cm", "y_cm",
                                              "z_cm", "plot_id", "replicate_id"};
    if (header.size() != expected.size())
      throw std::runtime_error("load_snapshots: malformed header in " + path);
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (detail::trim(header[i]) != expected[i])
        throw std::runtime_error("load_snapshots: malformed header in " + path);
  }

  constexpr double kSlack = 1.0;  // cm accepted past the plot edge, then clamped
  std::vector<double> times;
  std::vector<std::vector<PositionRecord>> frames;
  int dropped = 0;
  std::vector<long> bad_rows;
  long row_no = 1;

  while (std::getline(in, line)) {
    ++row_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 6)
      throw std::runtime_error("load_snapshots: malformed row " +
                               std::to_string(row_no) + " in " + path);
    if (detail::trim(f[1]).empty() || detail::trim(f[2]).empty()) {
      ++dropped;
      continue;
    }
    double t, x, y;
    try {
      t = std::stod(f[0]);
      x = std::stod(f[1]);
      y = std::stod(f[2]);
    } catch (const std::exception&) {
      throw std::runtime_error("load_snapshots: unparsable row " +
                               std::to_string(row_no) + " in " + path);
    }
    if (x < -kSlack || x > domain.length_x + kSlack ||
        y < -kSlack || y > domain.length_y + kSlack) {
      bad_rows.push_back(row_no);
      continue;
    }
    PositionRecord rec;
    rec.x = std::clamp(x, 0.0, domain.length_x);
    rec.y = std::clamp(y, 0.0, domain.length_y);
    if (!detail::trim(f[3]).empty()) rec.z = std::stod(f[3]);
    rec.plot_id = detail::trim(f[4]);
    rec.replicate_id = detail::trim(f[5]);

    auto it = std::find(times.begin(), times.end(), t);
    if (it == times.end()) {
      times.push_back(t);
      frames.emplace_back();
      frames.back().push_back(std::move(rec));
    } else {
      frames[static_cast<std::size_t>(it - times.begin())].push_back(std::move(rec));
    }
  }

  if (!bad_rows.empty()) {
    std::string msg = "load_snapshots: positions outside domain (rows";
    for (long r : bad_rows) msg += " " + std::to_string(r);
    msg += ") in " + path;
    throw std::runtime_error(msg);
  }
  if (times.empty()) throw std::runtime_error("load_snapshots: no records in " + path);
  for (std::size_t k = 1; k < times.size(); ++k)
    if (times[k] <= times[k - 1])
      throw std::runtime_error("load_snapshots: non-monotone times in " + path);

  SnapshotSet out;
  out.domain = domain;
  out.times = std::move(times);
  out.frames = std::move(frames);
  out.dropped_rows = dropped;
  out.validate();
  return out;
}

/// Write a SnapshotSet in the load_snapshots schema.  Round-trips to 1e-9 cm.
inline void save_snapshots(const SnapshotSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_snapshots: cannot write " + path);
  out << "time_hr,x_cm,y_cm,z_cm,plot_id,replicate_id\n";
  out.precision(12);
  for (std::size_t k = 0; k < set.times.size(); ++k) {
    for (const auto& r : set.frames[k]) {
      out << set.times[k] << ',' << r.x << ',' << r.y << ',';
      if (r.z) out << *r.z;
      out << ',' << r.plot_id << ',' << r.replicate_id << '\n';
    }
  }
}

/// Superimpose snapshot sets sharing domain and time lists; per-time
/// position lists are concatenated.
inline SnapshotSet combine(const std::vector<SnapshotSet>& sets) {
  if (sets.empty()) throw std::runtime_error("combine: no input sets");
  SnapshotSet out = sets.front();
  for (std::size_t s = 1; s < sets.size(); ++s) {
    const auto& in = sets[s];
    if (in.times != out.times)
      throw std::runtime_error("combine: incompatible time lists");
    if (in.domain.length_x != out.domain.length_x ||
        in.domain.length_y != out.domain.length_y)
      throw std::runtime_error("combine: incompatible domains");
    for (std::size_t k = 0; k < out.frames.size(); ++k)
      out.frames[k].insert(out.frames[k].end(), in.frames[k].begin(),
                           in.frames[k].end());
    out.dropped_rows += in.dropped_rows;
  }
  return out;
}

/// Split a set by a key of each record (e.g. plot or replicate id).
template <typename KeyFn>
inline std::vector<std::pair<std::string, SnapshotSet>> split_by(
    const SnapshotSet& set, KeyFn key) {
  std::vector<std::string> keys;
  for (const auto& frame : set.frames)
    for (const auto& r : frame) {
      std::string k = key(r);
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  std::sort(keys.begin(), keys.end());

  std::vector<std::pair<std::string, SnapshotSet>> out;
  for (const auto& k : keys) {
    SnapshotSet sub;
    sub.domain = set.domain;
    sub.times = set.times;
    sub.frames.resize(set.frames.size());
    for (std::size_t f = 0; f < set.frames.size(); ++f)
      for (const auto& r : set.frames[f])
        if (key(r) == k) sub.frames[f].push_back(r);
    out.emplace_back(k, std::move(sub));
  }
  return out;
}

}  // namespace fplearn
