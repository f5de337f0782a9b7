#pragma once
// Trajectory files: a header (p, m, d, count) followed by `count` records of
// (time, v_0 .. v_{p-1}).
//
// CSV (canonical):
//   p,m,d,count
//   <p>,<m>,<d>,<count>
//   time,v_0,...,v_{p-1}
//   <t>,<v_0>,...            one line per record, %.17g
//
// Binary: 8-byte magic "NGTRAJ01", four little-endian int64 (p, m, d, count),
// then per record one float64 time and p float64 values.

#include <string>
#include <vector>

#include "ngembed/params.hpp"

namespace ngembed {

struct TrajectoryFile {
  Eigen::Index p = 0;
  int m = 0;
  int d = 0;
  std::vector<double> times;
  std::vector<Vec> records;
};

enum class TrajectoryFormat { Csv, Binary };
TrajectoryFormat trajectory_format_from_string(const std::string& s);

void write_trajectory(const std::string& path, const TrajectoryFile& f, TrajectoryFormat fmt);
/// Format is detected from the first bytes.
TrajectoryFile read_trajectory(const std::string& path);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace ngembed
