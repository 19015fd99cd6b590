#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "minterp/errors.hpp"

namespace minterp {

constexpr double kEps = 1e-9;
constexpr int kMaxPatchDim = 512;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const = default;

  double norm() const { return std::hypot(x, y); }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
};

inline double angle_between(const Vec2& a, const Vec2& b) {
  double na = a.norm(), nb = b.norm();
  if (na < kEps || nb < kEps) return 0.0;
  double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

// Small grayscale raster. Origin at the top-left pixel center, x rightward,
// y downward; intensity values in [0,1], row-major.
struct ImagePatch {
  int width = 0;
  int height = 0;
  std::vector<double> intensities;

  ImagePatch() = default;
  ImagePatch(int w, int h, double fill = 0.0) : width(w), height(h) {
    validate_dims(w, h);
    intensities.assign(static_cast<size_t>(w) * h, fill);
  }
  ImagePatch(int w, int h, std::vector<double> data)
      : width(w), height(h), intensities(std::move(data)) {
    validate_dims(w, h);
    if (intensities.size() != static_cast<size_t>(w) * h)
      throw InvalidArgument("ImagePatch: intensity count does not match dimensions");
    for (double v : intensities)
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidArgument("ImagePatch: intensity outside [0,1]");
  }

  double at(int x, int y) const { return intensities[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return intensities[static_cast<size_t>(y) * width + x]; }

  // Clamp-to-edge access for filters near borders.
  double at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }

  double diagonal() const { return std::hypot(double(width), double(height)); }

 private:
  static void validate_dims(int w, int h) {
    if (w < 1 || h < 1) throw InvalidArgument("ImagePatch: dimensions must be >= 1");
    if (w > kMaxPatchDim || h > kMaxPatchDim)
      throw InvalidArgument("ImagePatch: dimension exceeds " + std::to_string(kMaxPatchDim));
  }
};

struct PointPrim {
  double x = 0.0;
  double y = 0.0;

  Vec2 pos() const { return {x, y}; }
  bool operator==(const PointPrim&) const = default;
};

// Open or closed polyline. For closed contours the first and last vertices
// are joined, not duplicated.
struct ContourPrim {
  std::vector<Vec2> vertices;
  bool closed = false;

  bool operator==(const ContourPrim&) const = default;

  void validate() const {
    if (vertices.size() < 2) throw InvalidArgument("ContourPrim: needs >= 2 vertices");
    size_t n = vertices.size();
    size_t segs = closed ? n : n - 1;
    double total = 0.0;
    for (size_t i = 0; i < segs; ++i) {
      double len = (vertices[(i + 1) % n] - vertices[i]).norm();
      if (len <= kEps) throw InvalidArgument("ContourPrim: consecutive vertices coincide");
      total += len;
    }
    if (total <= 0.0) throw InvalidArgument("ContourPrim: zero arc length");
  }

  size_t segment_count() const { return closed ? vertices.size() : vertices.size() - 1; }
  Vec2 seg_a(size_t i) const { return vertices[i]; }
  Vec2 seg_b(size_t i) const { return vertices[(i + 1) % vertices.size()]; }
};

// Axis-aligned square; boundary points count as inside.
struct SquareRegionPrim {
  double center_x = 0.0;
  double center_y = 0.0;
  double side = 1.0;

  bool operator==(const SquareRegionPrim&) const = default;

  Vec2 center() const { return {center_x, center_y}; }
  double half() const { return side / 2.0; }

  bool contains(const Vec2& p) const {
    return std::abs(p.x - center_x) <= half() + kEps && std::abs(p.y - center_y) <= half() + kEps;
  }

  void validate() const {
    if (!(side > 0.0)) throw InvalidArgument("SquareRegionPrim: side must be > 0");
  }
};

enum class PrimitiveKind { point, contour, region };

inline std::string kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::point: return "point";
    case PrimitiveKind::contour: return "contour";
    case PrimitiveKind::region: return "region";
  }
  return "?";
}

inline PrimitiveKind kind_from_name(const std::string& s) {
  if (s == "point") return PrimitiveKind::point;
  if (s == "contour") return PrimitiveKind::contour;
  if (s == "region") return PrimitiveKind::region;
  throw ParseError("unknown primitive kind: " + s);
}

struct Primitive {
  std::variant<PointPrim, ContourPrim, SquareRegionPrim> payload;

  Primitive() = default;
  Primitive(PointPrim p) : payload(p) {}
  Primitive(ContourPrim c) : payload(std::move(c)) {}
  Primitive(SquareRegionPrim r) : payload(r) {}

  bool operator==(const Primitive&) const = default;

  PrimitiveKind kind() const {
    return static_cast<PrimitiveKind>(payload.index());
  }
  const PointPrim& point() const { return require<PointPrim>("point"); }
  const ContourPrim& contour() const { return require<ContourPrim>("contour"); }
  const SquareRegionPrim& region() const { return require<SquareRegionPrim>("region"); }

 private:
  template <typename T>
  const T& require(const char* what) const {
    if (!std::holds_alternative<T>(payload))
      throw KindMismatch(std::string("primitive is not a ") + what +
                         " (is " + kind_name(kind()) + ")");
    return std::get<T>(payload);
  }
};

inline double polyline_length(const ContourPrim& c) {
  double total = 0.0;
  for (size_t i = 0; i < c.segment_count(); ++i) total += (c.seg_b(i) - c.seg_a(i)).norm();
  return total;
}

// Point at arc-length fraction t in [0,1]; also reports which segment holds it.
inline Vec2 point_at_fraction(const ContourPrim& c, double t, size_t* seg_out = nullptr) {
  double total = polyline_length(c);
  double target = std::clamp(t, 0.0, 1.0) * total;
  double walked = 0.0;
  size_t segs = c.segment_count();
  for (size_t i = 0; i < segs; ++i) {
    Vec2 a = c.seg_a(i), b = c.seg_b(i);
    double len = (b - a).norm();
    if (walked + len >= target - kEps || i + 1 == segs) {
      double local = len > kEps ? std::clamp((target - walked) / len, 0.0, 1.0) : 0.0;
      if (seg_out) *seg_out = i;
      return a + (b - a) * local;
    }
    walked += len;
  }
  if (seg_out) *seg_out = segs - 1;
  return c.vertices.back();
}

inline std::vector<Vec2> resample_by_arclength(const ContourPrim& c, int k) {
  if (k < 2) throw InvalidArgument("resample_by_arclength: k must be >= 2");
  std::vector<Vec2> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(point_at_fraction(c, double(i) / (k - 1)));
  return out;
}

struct TangentAngle {
  double directed = 0.0;    // atan2 direction of the segment, in (-pi, pi]
  double undirected = 0.0;  // directed angle folded into [0, pi)
};

// Direction of the segment containing the given arc-length fraction; at a
// vertex the following segment wins.
inline TangentAngle tangent_angle_at(const ContourPrim& c, double t) {
  t = std::clamp(t, 0.0, 1.0);
  double total = polyline_length(c);
  double target = t * total;
  double walked = 0.0;
  size_t segs = c.segment_count();
  size_t chosen = segs - 1;
  for (size_t i = 0; i < segs; ++i) {
    double len = (c.seg_b(i) - c.seg_a(i)).norm();
    // A fraction landing exactly on a vertex selects the segment that follows.
    if (target < walked + len - kEps) {
      chosen = i;
      break;
    }
    if (std::abs(target - (walked + len)) <= kEps && i + 1 < segs) {
      chosen = i + 1;
      break;
    }
    walked += len;
  }
  Vec2 d = c.seg_b(chosen) - c.seg_a(chosen);
  TangentAngle out;
  out.directed = std::atan2(d.y, d.x);
  out.undirected = out.directed < 0 ? out.directed + M_PI : out.directed;
  if (out.undirected >= M_PI) out.undirected -= M_PI;
  return out;
}

struct PolylineDistance {
  double distance = 0.0;
  double foot_fraction = 0.0;  // arc-length fraction of the nearest point
};

inline PolylineDistance point_to_polyline_distance(const Vec2& p, const ContourPrim& c) {
  double total = polyline_length(c);
  double best = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double walked = 0.0;
  for (size_t i = 0; i < c.segment_count(); ++i) {
    Vec2 a = c.seg_a(i), b = c.seg_b(i);
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double u = len2 > kEps ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    Vec2 foot = a + ab * u;
    double d = (p - foot).norm();
    if (d < best - kEps) {
      best = d;
      best_arc = walked + u * std::sqrt(len2);
    }
    walked += std::sqrt(len2);
  }
  return {best, total > kEps ? std::clamp(best_arc / total, 0.0, 1.0) : 0.0};
}

using Mask = std::vector<uint8_t>;  // row-major, w*h, 0/1

// Pixel membership is by pixel-center distance; deterministic and
// oracle-checkable by a per-pixel brute-force scan.
inline Mask rasterize_primitive(const Primitive& prim, double width, int w, int h) {
  if (!(width > 0.0)) throw InvalidArgument("rasterize_primitive: width must be > 0");
  Mask mask(static_cast<size_t>(w) * h, 0);
  auto set_if = [&](int x, int y, bool on) {
    if (on) mask[static_cast<size_t>(y) * w + x] = 1;
  };
  switch (prim.kind()) {
    case PrimitiveKind::point: {
      Vec2 c = prim.point().pos();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          set_if(x, y, (Vec2{double(x), double(y)} - c).norm() <= width + kEps);
      break;
    }
    case PrimitiveKind::contour: {
      const ContourPrim& c = prim.contour();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          set_if(x, y,
                 point_to_polyline_distance({double(x), double(y)}, c).distance <= width + kEps);
      break;
    }
    case PrimitiveKind::region: {
      const SquareRegionPrim& r = prim.region();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) set_if(x, y, r.contains({double(x), double(y)}));
      break;
    }
  }
  return mask;
}

// Centroid used by the location relation: point position, mean of a dense
// arc-length resampling for contours, center for regions.
inline Vec2 primitive_centroid(const Primitive& prim) {
  switch (prim.kind()) {
    case PrimitiveKind::point:
      return prim.point().pos();
    case PrimitiveKind::contour: {
      const ContourPrim& c = prim.contour();
      // Arc-length centroid: exact per-segment midpoint weighting.
      double total = 0.0;
      Vec2 acc{0, 0};
      for (size_t i = 0; i < c.segment_count(); ++i) {
        Vec2 a = c.seg_a(i), b = c.seg_b(i);
        double len = (b - a).norm();
        acc = acc + (a + b) * (0.5 * len);
        total += len;
      }
      return total > kEps ? acc * (1.0 / total) : c.vertices.front();
    }
    case PrimitiveKind::region:
      return prim.region().center();
  }
  return {0, 0};
}

}  // namespace minterp
