#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "folia/mesh.hpp"
#include "folia/point_cloud.hpp"

namespace folia {

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, const char* file, int line_no) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    std::ostringstream os;
    os << file << ":" << line_no << ": bad number '" << tok << "'";
    throw DataError(os.str());
  }
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path);
  return f;
}

/// ASCII triangle mesh: `v x y z` vertex lines then `f i j k` one-based
/// face lines. Blank lines and `#` comments are ignored on read.
inline void write_mesh_obj(std::ostream& out, const TriMesh& mesh) {
  for (const Vec3& v : mesh.vertices)
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_mesh_obj(const std::string& path, const TriMesh& mesh) {
  auto f = open_out(path);
  write_mesh_obj(f, mesh);
}

inline TriMesh read_mesh_obj(std::istream& in, const char* name = "<mesh>") {
  TriMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      std::string xs, ys, zs;
      if (!(ls >> xs >> ys >> zs)) {
        std::ostringstream os;
        os << name << ":" << line_no << ": malformed vertex line";
        throw DataError(os.str());
      }
      mesh.vertices.push_back(Vec3(parse_double(xs, name, line_no),
                                   parse_double(ys, name, line_no),
                                   parse_double(zs, name, line_no)));
    } else if (tag == "f") {
      int a = 0, b = 0, c = 0;
      if (!(ls >> a >> b >> c)) {
        std::ostringstream os;
        os << name << ":" << line_no << ": malformed face line";
        throw DataError(os.str());
      }
      mesh.faces.push_back({a - 1, b - 1, c - 1});
    } else {
      std::ostringstream os;
      os << name << ":" << line_no << ": unknown tag '" << tag << "'";
      throw DataError(os.str());
    }
  }
  mesh.require_valid();
  return mesh;
}

inline TriMesh read_mesh_obj(const std::string& path) {
  auto f = open_in(path);
  return read_mesh_obj(f, path.c_str());
}

/// Labeled point text: one `x y z label instance_id` line per point.
inline void write_point_clouds(std::ostream& out,
                               const std::vector<LabeledPointCloud>& clouds) {
  for (const auto& c : clouds)
    for (const Vec3& p : c.points)
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
          << format_double(p.z()) << ' ' << to_string(c.label) << ' '
          << c.instance_id << '\n';
}

inline void write_point_clouds(const std::string& path,
                               const std::vector<LabeledPointCloud>& clouds) {
  auto f = open_out(path);
  write_point_clouds(f, clouds);
}

/// Reads labeled points grouped by (label, instance) in first-appearance order.
inline std::vector<LabeledPointCloud> read_point_clouds(std::istream& in,
                                                        const char* name = "<points>") {
  std::vector<LabeledPointCloud> clouds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string xs;
    if (!(ls >> xs) || xs[0] == '#') continue;
    std::string ys, zs, label_s;
    int instance = 0;
    if (!(ls >> ys >> zs >> label_s >> instance)) {
      std::ostringstream os;
      os << name << ":" << line_no << ": malformed point line";
      throw DataError(os.str());
    }
    const Vec3 p(parse_double(xs, name, line_no), parse_double(ys, name, line_no),
                 parse_double(zs, name, line_no));
    const PartLabel label = part_label_from_string(label_s);
    LabeledPointCloud* dst = nullptr;
    for (auto& c : clouds)
      if (c.label == label && c.instance_id == instance) { dst = &c; break; }
    if (!dst) {
      clouds.push_back(LabeledPointCloud{{}, label, instance});
      dst = &clouds.back();
    }
    dst->points.push_back(p);
  }
  return clouds;
}

inline std::vector<LabeledPointCloud> read_point_clouds(const std::string& path) {
  auto f = open_in(path);
  return read_point_clouds(f, path.c_str());
}

}  // namespace folia
