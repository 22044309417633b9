#pragma once

#include "folia/io_text.hpp"
#include "folia/sim3.hpp"
#include "folia/superellipsoid.hpp"

namespace folia {

/// Fruit shape code plus the Sim(3) transform mapping world points into the
/// canonical template frame (peduncle along canonical +z).
struct FruitEstimate {
  ShapeCode code;
  Sim3Transform world_to_canonical;

  Vec3 canonical(const Vec3& p_world) const { return world_to_canonical.apply(p_world); }

  Vec3 to_world(const Vec3& p_canonical) const {
    return world_to_canonical.inverse().apply(p_canonical);
  }

  double canonical_sdf(const Vec3& p_world) const {
    return superellipsoid_sdf(code, canonical(p_world));
  }

  /// Distance surrogate rescaled to world meters.
  double world_sdf(const Vec3& p_world) const {
    return canonical_sdf(p_world) / world_to_canonical.scale;
  }

  void require_valid() const {
    code.require_valid();
    world_to_canonical.require_valid();
  }
};

/// Text record: one keyed line each for code, scale, rotation (row-major),
/// translation. Meters and unitless code values.
inline void write_estimate(std::ostream& out, const FruitEstimate& est) {
  const CodeVec z = est.code.as_vector();
  out << "z";
  for (int i = 0; i < 5; ++i) out << ' ' << format_double(z[i]);
  out << "\ns " << format_double(est.world_to_canonical.scale) << "\nR";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      out << ' ' << format_double(est.world_to_canonical.rotation(i, j));
  out << "\nt";
  for (int i = 0; i < 3; ++i)
    out << ' ' << format_double(est.world_to_canonical.translation[i]);
  out << '\n';
}

inline void write_estimate(const std::string& path, const FruitEstimate& est) {
  auto f = open_out(path);
  write_estimate(f, est);
}

inline FruitEstimate read_estimate(std::istream& in, const char* name = "<estimate>") {
  FruitEstimate est;
  bool saw_z = false, saw_s = false, saw_r = false, saw_t = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) vals.push_back(parse_double(tok, name, line_no));
    auto expect = [&](size_t n) {
      if (vals.size() != n) {
        std::ostringstream os;
        os << name << ":" << line_no << ": expected " << n << " values after '" << tag
           << "'";
        throw DataError(os.str());
      }
    };
    if (tag == "z") {
      expect(5);
      est.code = ShapeCode{vals[0], vals[1], vals[2], vals[3], vals[4]};
      saw_z = true;
    } else if (tag == "s") {
      expect(1);
      est.world_to_canonical.scale = vals[0];
      saw_s = true;
    } else if (tag == "R") {
      expect(9);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          est.world_to_canonical.rotation(i, j) = vals[3 * i + j];
      saw_r = true;
    } else if (tag == "t") {
      expect(3);
      est.world_to_canonical.translation = Vec3(vals[0], vals[1], vals[2]);
      saw_t = true;
    } else {
      std::ostringstream os;
      os << name << ":" << line_no << ": unknown tag '" << tag << "'";
      throw DataError(os.str());
    }
  }
  if (!(saw_z && saw_s && saw_r && saw_t))
    throw DataError(std::string(name) + ": incomplete estimate record");
  est.require_valid();
  return est;
}

inline FruitEstimate read_estimate(const std::string& path) {
  auto f = open_in(path);
  return read_estimate(f, path.c_str());
}

}  // namespace folia
