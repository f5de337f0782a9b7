#include "ngembed/trajectory_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ngembed {

namespace {

constexpr char kMagic[8] = {'N', 'G', 'T', 'R', 'A', 'J', '0', '1'};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("trajectory " + path + ": bad number '" + s + "'");
  }
}

void check_header(const TrajectoryFile& f) {
  if (f.p < 0 || f.m < 1 || f.d < 1) throw Error("trajectory: invalid header");
  if (f.times.size() != f.records.size()) throw Error("trajectory: times/records mismatch");
  for (const auto& r : f.records)
    if (r.size() != f.p) throw Error("trajectory: record length differs from p");
}

}  // namespace

TrajectoryFormat trajectory_format_from_string(const std::string& s) {
  if (s == "csv") return TrajectoryFormat::Csv;
  if (s == "binary") return TrajectoryFormat::Binary;
  throw ConfigError("unknown trajectory format '" + s + "' (expected csv|binary)");
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  const std::string tmp = path + ".tmp";
  try {
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot open " + tmp + " for writing");
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!out) throw Error("write to " + tmp + " failed");
    }
    std::filesystem::rename(tmp, target);
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error("cannot write " + path + ": " + e.what());
  }
}

void write_trajectory(const std::string& path, const TrajectoryFile& f, TrajectoryFormat fmt) {
  check_header(f);
  std::string out;
  if (fmt == TrajectoryFormat::Csv) {
    std::ostringstream os;
    os << "p,m,d,count\n" << f.p << ',' << f.m << ',' << f.d << ',' << f.records.size() << '\n';
    os << "time";
    for (Eigen::Index i = 0; i < f.p; ++i) os << ",v_" << i;
    os << '\n';
    for (std::size_t k = 0; k < f.records.size(); ++k) {
      os << fmt_double(f.times[k]);
      for (Eigen::Index i = 0; i < f.p; ++i) os << ',' << fmt_double(f.records[k][i]);
      os << '\n';
    }
    out = os.str();
  } else {
    const std::int64_t hdr[4] = {static_cast<std::int64_t>(f.p), f.m, f.d,
                                 static_cast<std::int64_t>(f.records.size())};
    out.append(kMagic, sizeof kMagic);
    out.append(reinterpret_cast<const char*>(hdr), sizeof hdr);
    for (std::size_t k = 0; k < f.records.size(); ++k) {
      out.append(reinterpret_cast<const char*>(&f.times[k]), sizeof(double));
      out.append(reinterpret_cast<const char*>(f.records[k].data()),
                 static_cast<std::size_t>(f.p) * sizeof(double));
    }
  }
  write_file_atomic(path, out);
}

TrajectoryFile read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trajectory " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  TrajectoryFile f;

  if (data.size() >= sizeof kMagic && std::memcmp(data.data(), kMagic, sizeof kMagic) == 0) {
    std::int64_t hdr[4];
    if (data.size() < sizeof kMagic + sizeof hdr) throw Error("trajectory " + path + ": truncated header");
    std::memcpy(hdr, data.data() + sizeof kMagic, sizeof hdr);
    f.p = hdr[0];
    f.m = static_cast<int>(hdr[1]);
    f.d = static_cast<int>(hdr[2]);
    const std::size_t count = static_cast<std::size_t>(hdr[3]);
    const std::size_t rec = (static_cast<std::size_t>(f.p) + 1) * sizeof(double);
    std::size_t pos = sizeof kMagic + sizeof hdr;
    if (data.size() != pos + count * rec) throw Error("trajectory " + path + ": size does not match header");
    for (std::size_t k = 0; k < count; ++k, pos += rec) {
      double t;
      std::memcpy(&t, data.data() + pos, sizeof t);
      Vec v(f.p);
      std::memcpy(v.data(), data.data() + pos + sizeof t, static_cast<std::size_t>(f.p) * sizeof(double));
      f.times.push_back(t);
      f.records.push_back(std::move(v));
    }
    return f;
  }

  std::istringstream is(data);
  std::string line;
  if (!std::getline(is, line) || line != "p,m,d,count") throw Error("trajectory " + path + ": missing header");
  if (!std::getline(is, line)) throw Error("trajectory " + path + ": missing header values");
  const auto hv = split(line);
  if (hv.size() != 4) throw Error("trajectory " + path + ": malformed header values");
  f.p = static_cast<Eigen::Index>(parse_double(hv[0], path));
  f.m = static_cast<int>(parse_double(hv[1], path));
  f.d = static_cast<int>(parse_double(hv[2], path));
  const auto count = static_cast<std::size_t>(parse_double(hv[3], path));
  std::getline(is, line);  // column names
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tok = split(line);
    if (tok.size() != static_cast<std::size_t>(f.p) + 1)
      throw Error("trajectory " + path + ": record has the wrong number of fields");
    f.times.push_back(parse_double(tok[0], path));
    Vec v(f.p);
    for (Eigen::Index i = 0; i < f.p; ++i) v[i] = parse_double(tok[i + 1], path);
    f.records.push_back(std::move(v));
  }
  if (f.records.size() != count) throw Error("trajectory " + path + ": record count does not match header");
  check_header(f);
  return f;
}

}  // namespace ngembed
