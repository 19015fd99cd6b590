#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "minterp/appearance.hpp"
#include "minterp/candidates.hpp"
#include "minterp/geometry.hpp"
#include "minterp/image_ops.hpp"

namespace minterp {

enum class RelationKind {
  location,
  intensity_extremum,
  line_circle_deviation,
  appearance_along_contour,
  appearance_in_region,
  ending_distance,
  continuity,
  length_ratio,
  parallelism,
  appearance_coherence,
  cover,
  bridging,
  containment,
  ends_in_region,
};

constexpr std::array<RelationKind, 14> kAllRelationKinds = {
    RelationKind::location,          RelationKind::intensity_extremum,
    RelationKind::line_circle_deviation, RelationKind::appearance_along_contour,
    RelationKind::appearance_in_region,  RelationKind::ending_distance,
    RelationKind::continuity,        RelationKind::length_ratio,
    RelationKind::parallelism,       RelationKind::appearance_coherence,
    RelationKind::cover,             RelationKind::bridging,
    RelationKind::containment,       RelationKind::ends_in_region,
};

inline std::string relation_name(RelationKind k) {
  switch (k) {
    case RelationKind::location: return "location";
    case RelationKind::intensity_extremum: return "intensity_extremum";
    case RelationKind::line_circle_deviation: return "line_circle_deviation";
    case RelationKind::appearance_along_contour: return "appearance_along_contour";
    case RelationKind::appearance_in_region: return "appearance_in_region";
    case RelationKind::ending_distance: return "ending_distance";
    case RelationKind::continuity: return "continuity";
    case RelationKind::length_ratio: return "length_ratio";
    case RelationKind::parallelism: return "parallelism";
    case RelationKind::appearance_coherence: return "appearance_coherence";
    case RelationKind::cover: return "cover";
    case RelationKind::bridging: return "bridging";
    case RelationKind::containment: return "containment";
    case RelationKind::ends_in_region: return "ends_in_region";
  }
  return "?";
}

inline RelationKind relation_from_name(const std::string& s) {
  for (RelationKind k : kAllRelationKinds)
    if (relation_name(k) == s) return k;
  throw ParseError("unknown relation kind: " + s);
}

// location is the only kind usable at either arity (unary location or
// pairwise relative location); everything else has a fixed arity.
inline bool relation_allows_arity(RelationKind k, int arity) {
  switch (k) {
    case RelationKind::location: return arity == 1 || arity == 2;
    case RelationKind::intensity_extremum:
    case RelationKind::line_circle_deviation:
    case RelationKind::appearance_along_contour:
    case RelationKind::appearance_in_region:
      return arity == 1;
    default:
      return arity == 2;
  }
}

inline int relation_feature_len(RelationKind k) {
  switch (k) {
    case RelationKind::location: return 2;
    case RelationKind::intensity_extremum: return 3;
    case RelationKind::line_circle_deviation: return 2;
    case RelationKind::appearance_along_contour: return 9;
    case RelationKind::appearance_in_region: return 9;
    case RelationKind::ending_distance: return 4;
    case RelationKind::continuity: return 3;
    case RelationKind::length_ratio: return 1;
    case RelationKind::parallelism: return 2;
    case RelationKind::appearance_coherence: return 1;
    case RelationKind::cover: return 2;
    case RelationKind::bridging: return 2;
    case RelationKind::containment: return 2;
    case RelationKind::ends_in_region: return 2;
  }
  return 0;
}

inline bool relation_is_basic(RelationKind k) {
  return k == RelationKind::location || k == RelationKind::appearance_along_contour ||
         k == RelationKind::appearance_in_region;
}

// Required argument kinds, or nullopt-like "any" for location.
inline std::vector<PrimitiveKind> relation_arg_kinds(RelationKind k, int arity) {
  using K = PrimitiveKind;
  switch (k) {
    case RelationKind::location: return std::vector<K>(arity, K::point);  // placeholder, any kind
    case RelationKind::intensity_extremum: return {K::point};
    case RelationKind::line_circle_deviation: return {K::contour};
    case RelationKind::appearance_along_contour: return {K::contour};
    case RelationKind::appearance_in_region: return {K::region};
    case RelationKind::ending_distance: return {K::contour, K::contour};
    case RelationKind::continuity: return {K::contour, K::contour};
    case RelationKind::length_ratio: return {K::contour, K::contour};
    case RelationKind::parallelism: return {K::contour, K::contour};
    case RelationKind::appearance_coherence: return {K::region, K::region};
    case RelationKind::cover: return {K::contour, K::point};
    case RelationKind::bridging: return {K::contour, K::contour};
    case RelationKind::containment: return {K::point, K::region};
    case RelationKind::ends_in_region: return {K::contour, K::region};
  }
  return {};
}

inline bool relation_accepts_any_kind(RelationKind k) { return k == RelationKind::location; }

using FeatureBlock = std::vector<double>;

// ---- Row 1: location / relative location --------------------------------

inline FeatureBlock rel_location(const Primitive& a, int w, int h) {
  Vec2 c = primitive_centroid(a);
  return {c.x / w, c.y / h};
}

inline FeatureBlock rel_relative_location(const Primitive& a, const Primitive& b, int w, int h) {
  Vec2 d = primitive_centroid(b) - primitive_centroid(a);
  return {d.x / w, d.y / h};
}

// ---- Row 2: intensity extremum ------------------------------------------

inline FeatureBlock rel_intensity_extremum(const PointPrim& p, const ImagePatch& img,
                                           const DoGMaps* precomputed = nullptr) {
  if (p.x < 0 || p.y < 0 || p.x > img.width - 1 || p.y > img.height - 1)
    throw OutOfBounds("rel_intensity_extremum: point outside patch");
  double intensity = bilinear_at(img, p.x, p.y);
  double dog;
  if (precomputed) {
    dog = precomputed->response_at(p.x, p.y);
  } else {
    DoGMaps maps = dog_maps(img);
    dog = maps.response_at(p.x, p.y);
  }
  double polarity = std::abs(dog) > 0.01 ? (dog > 0 ? 1.0 : -1.0) : 0.0;
  return {intensity, dog, polarity};
}

// ---- Row 3: deviation from line / circular arc --------------------------

namespace detail {

struct LineFit {
  Vec2 centroid;
  Vec2 dir;  // unit direction of the TLS line
  double rms = 0.0;
};

inline LineFit tls_line_fit(const std::vector<Vec2>& pts) {
  LineFit f;
  double n = double(pts.size());
  for (const Vec2& p : pts) f.centroid = f.centroid + p * (1.0 / n);
  double sxx = 0, sxy = 0, syy = 0;
  for (const Vec2& p : pts) {
    double dx = p.x - f.centroid.x, dy = p.y - f.centroid.y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  // Principal eigenvector of the 2x2 scatter matrix.
  double tr = sxx + syy;
  double det = sxx * syy - sxy * sxy;
  double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  double l1 = tr / 2.0 + disc;
  if (std::abs(sxy) > kEps)
    f.dir = {l1 - syy, sxy};
  else
    f.dir = sxx >= syy ? Vec2{1, 0} : Vec2{0, 1};
  double dn = f.dir.norm();
  if (dn > kEps) f.dir = f.dir * (1.0 / dn);
  double ss = 0.0;
  for (const Vec2& p : pts) {
    double d = f.dir.cross(p - f.centroid);
    ss += d * d;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

struct CircleFit {
  Vec2 center;
  double radius = 0.0;
  bool degenerate = false;
};

// Pratt algebraic circle fit (Newton on the characteristic polynomial of the
// moment matrix). Degenerates on collinear input.
inline CircleFit pratt_circle_fit(const std::vector<Vec2>& pts) {
  CircleFit fit;
  double n = double(pts.size());
  Vec2 mean;
  for (const Vec2& p : pts) mean = mean + p * (1.0 / n);
  double Mxx = 0, Myy = 0, Mxy = 0, Mxz = 0, Myz = 0, Mzz = 0;
  for (const Vec2& p : pts) {
    double x = p.x - mean.x, y = p.y - mean.y;
    double z = x * x + y * y;
    Mxx += x * x;
    Myy += y * y;
    Mxy += x * y;
    Mxz += x * z;
    Myz += y * z;
    Mzz += z * z;
  }
  Mxx /= n; Myy /= n; Mxy /= n; Mxz /= n; Myz /= n; Mzz /= n;
  double Mz = Mxx + Myy;
  double Cov_xy = Mxx * Myy - Mxy * Mxy;
  double Var_z = Mzz - Mz * Mz;
  if (Mz < 1e-12) {
    fit.degenerate = true;
    return fit;
  }
  double A2 = 4.0 * Cov_xy - 3.0 * Mz * Mz - Mzz;
  double A1 = Var_z * Mz + 4.0 * Cov_xy * Mz - Mxz * Mxz - Myz * Myz;
  double A0 = Mxz * (Mxz * Myy - Myz * Mxy) + Myz * (Myz * Mxx - Mxz * Mxy) - Var_z * Cov_xy;
  double A22 = A2 + A2;
  double x = 0.0, y = A0;
  for (int iter = 0; iter < 99; ++iter) {
    double Dy = A1 + x * (A22 + 16.0 * x * x);
    double xnew = x - y / Dy;
    if (!std::isfinite(xnew) || xnew == x) break;
    double ynew = A0 + xnew * (A1 + xnew * (A2 + 4.0 * xnew * xnew));
    if (std::abs(ynew) >= std::abs(y)) break;
    x = xnew;
    y = ynew;
  }
  double det = x * x - x * Mz + Cov_xy;
  if (std::abs(det) < 1e-12) {
    fit.degenerate = true;
    return fit;
  }
  double cx = (Mxz * (Myy - x) - Myz * Mxy) / det / 2.0;
  double cy = (Myz * (Mxx - x) - Mxz * Mxy) / det / 2.0;
  fit.center = {cx + mean.x, cy + mean.y};
  fit.radius = std::sqrt(cx * cx + cy * cy + Mz - 2.0 * x);
  if (!std::isfinite(fit.radius) || fit.radius > 1e7) fit.degenerate = true;
  return fit;
}

}  // namespace detail

inline FeatureBlock rel_line_circle_deviation(const ContourPrim& c) {
  std::vector<Vec2> pts = resample_by_arclength(c, 32);
  double len = polyline_length(c);
  detail::LineFit lf = detail::tls_line_fit(pts);
  double dev_line = lf.rms / len;
  detail::CircleFit cf = detail::pratt_circle_fit(pts);
  double dev_circle;
  if (cf.degenerate) {
    dev_circle = dev_line;
  } else {
    double ss = 0.0;
    for (const Vec2& p : pts) {
      double d = (p - cf.center).norm() - cf.radius;
      ss += d * d;
    }
    dev_circle = std::sqrt(ss / pts.size()) / len;
  }
  return {dev_line, dev_circle};
}

// ---- Rows 4, 5: appearance relations ------------------------------------

inline FeatureBlock descriptor_to_block(const AppearanceDescriptor& d) {
  FeatureBlock out(d.bins.begin(), d.bins.end());
  out.push_back(d.mean_intensity);
  return out;
}

inline FeatureBlock rel_appearance_along_contour(const ContourPrim& c, const ImagePatch& img) {
  return descriptor_to_block(descriptor_along_contour(img, c));
}

inline FeatureBlock rel_appearance_in_region(const SquareRegionPrim& r, const ImagePatch& img) {
  return descriptor_to_block(descriptor_in_region(img, r));
}

// ---- Row 6: relative location of contour endings ------------------------

namespace detail {

struct EndpointPair {
  double gap = 0.0;
  Vec2 a_end;  // ending on contour a
  Vec2 b_end;  // ending on contour b
  int pair_index = 0;  // 0..3: (a0,b0) (a0,b1) (a1,b0) (a1,b1)
  bool a_is_start = true;
  bool b_is_start = true;
};

inline EndpointPair closest_endpoint_pair(const ContourPrim& a, const ContourPrim& b) {
  Vec2 ae[2] = {a.vertices.front(), a.vertices.back()};
  Vec2 be[2] = {b.vertices.front(), b.vertices.back()};
  EndpointPair best;
  best.gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double g = (be[j] - ae[i]).norm();
      if (g < best.gap - kEps) {
        best = {g, ae[i], be[j], i * 2 + j, i == 0, j == 0};
      }
    }
  return best;
}

// Outward tangent at an ending: points away from the contour body.
inline Vec2 outward_tangent(const ContourPrim& c, bool at_start) {
  Vec2 d;
  if (at_start)
    d = c.vertices[0] - c.vertices[1];
  else
    d = c.vertices[c.vertices.size() - 1] - c.vertices[c.vertices.size() - 2];
  double n = d.norm();
  return n > kEps ? d * (1.0 / n) : Vec2{1, 0};
}

}  // namespace detail

inline FeatureBlock rel_ending_distance(const ContourPrim& a, const ContourPrim& b, int w, int h) {
  if (a.closed || b.closed) return {1.0, 0.0, 0.0, -1.0};  // sentinel: no endings
  detail::EndpointPair p = detail::closest_endpoint_pair(a, b);
  double diag = std::hypot(double(w), double(h));
  Vec2 gap_vec = p.b_end - p.a_end;
  double gn = gap_vec.norm();
  Vec2 unit = gn > kEps ? gap_vec * (1.0 / gn) : Vec2{0, 0};
  return {p.gap / diag, unit.x, unit.y, double(p.pair_index)};
}

// ---- Row 7: continuity ---------------------------------------------------

inline FeatureBlock rel_continuity(const ContourPrim& a, const ContourPrim& b, int w, int h) {
  if (a.closed || b.closed) return {1.0, 1.0, 2.0};  // sentinel: no endings to continue
  detail::EndpointPair p = detail::closest_endpoint_pair(a, b);
  Vec2 ta = detail::outward_tangent(a, p.a_is_start);
  Vec2 tb = detail::outward_tangent(b, p.b_is_start);
  Vec2 chord = p.b_end - p.a_end;
  double theta_sum;
  if (chord.norm() <= kEps) {
    // Touching endings: chord direction degenerates to a's outward tangent.
    theta_sum = angle_between(ta, tb * -1.0);
  } else {
    theta_sum = angle_between(ta, chord) + angle_between(tb, chord * -1.0);
  }
  double diag = std::hypot(double(w), double(h));
  double g = p.gap / diag;
  return {g, theta_sum / M_PI, g + theta_sum / M_PI};
}

// ---- Row 8: length ratio -------------------------------------------------

inline FeatureBlock rel_length_ratio(const ContourPrim& a, const ContourPrim& b) {
  return {polyline_length(a) / polyline_length(b)};
}

// ---- Row 9: parallelism --------------------------------------------------

inline FeatureBlock rel_parallelism(const ContourPrim& a, const ContourPrim& b, int w, int h) {
  const int k = 16;
  std::vector<Vec2> pa = resample_by_arclength(a, k);
  std::vector<Vec2> pb = resample_by_arclength(b, k);
  std::vector<double> ta(k), tb(k);
  for (int i = 0; i < k; ++i) {
    double f = double(i) / (k - 1);
    ta[i] = tangent_angle_at(a, f).undirected;
    tb[i] = tangent_angle_at(b, f).undirected;
  }
  auto ang_dist = [](double x, double y) {
    double d = std::abs(x - y);
    while (d >= M_PI) d -= M_PI;
    return std::min(d, M_PI - d);
  };
  double dev_fwd = 0.0, dev_rev = 0.0;
  for (int i = 0; i < k; ++i) {
    dev_fwd += ang_dist(ta[i], tb[i]) / k;
    dev_rev += ang_dist(ta[i], tb[k - 1 - i]) / k;
  }
  auto distance_stats = [&](bool reversed) {
    double mean_d = 0.0, mean_d2 = 0.0;
    for (int i = 0; i < k; ++i) {
      double d = (pa[i] - (reversed ? pb[k - 1 - i] : pb[i])).norm();
      mean_d += d / k;
      mean_d2 += d * d / k;
    }
    return std::pair{mean_d, std::sqrt(std::max(0.0, mean_d2 - mean_d * mean_d))};
  };
  // Pairing direction: smaller angular deviation wins; a tie (e.g. two straight
  // segments) falls back to the pairing with the smaller mean distance, which
  // keeps the block invariant to reversing either contour.
  bool reversed;
  if (std::abs(dev_fwd - dev_rev) > 1e-9)
    reversed = dev_rev < dev_fwd;
  else
    reversed = distance_stats(true).first < distance_stats(false).first;
  double dev = std::min(dev_fwd, dev_rev);
  double spread = distance_stats(reversed).second;
  double diag = std::hypot(double(w), double(h));
  return {dev / (M_PI / 2.0), spread / diag};
}

// ---- Row 10: appearance coherence ---------------------------------------

inline FeatureBlock rel_appearance_coherence(const SquareRegionPrim& a, const SquareRegionPrim& b,
                                             const ImagePatch& img) {
  return {descriptor_distance(descriptor_in_region(img, a), descriptor_in_region(img, b))};
}

// ---- Row 11: cover -------------------------------------------------------

// Angular coverage of directions from the point to 256 resampled contour
// points, each thickened by half the angular step to its neighbors.
inline FeatureBlock rel_cover(const ContourPrim& c, const PointPrim& p,
                              double covered_threshold = 0.5) {
  Vec2 q = p.pos();
  if (point_to_polyline_distance(q, c).distance <= 1e-6) return {1.0, 1.0};
  const int n = 256;
  std::vector<Vec2> pts = resample_by_arclength(c, n);
  std::vector<double> ang(n);
  for (int i = 0; i < n; ++i) {
    Vec2 d = pts[i] - q;
    ang[i] = std::atan2(d.y, d.x);  // (-pi, pi]
  }
  auto circ_dist = [](double x, double y) {
    double d = std::abs(x - y);
    while (d > 2 * M_PI) d -= 2 * M_PI;
    return std::min(d, 2 * M_PI - d);
  };
  // Build intervals [ang_i - h_i, ang_i + h_i], h_i = half the larger step to
  // an adjacent sample.
  struct Interval {
    double lo, hi;
  };
  std::vector<Interval> iv;
  for (int i = 0; i < n; ++i) {
    double h = 0.0;
    if (i > 0) h = std::max(h, circ_dist(ang[i], ang[i - 1]) / 2.0);
    if (i + 1 < n) h = std::max(h, circ_dist(ang[i], ang[i + 1]) / 2.0);
    if (c.closed) {
      h = std::max(h, circ_dist(ang[i], ang[(i + n - 1) % n]) / 2.0);
      h = std::max(h, circ_dist(ang[i], ang[(i + 1) % n]) / 2.0);
    }
    iv.push_back({ang[i] - h, ang[i] + h});
  }
  // Normalize to [0, 2pi) and merge, handling wraparound by splitting.
  std::vector<Interval> flat;
  for (Interval v : iv) {
    double lo = v.lo, hi = v.hi;
    while (lo < 0) {
      lo += 2 * M_PI;
      hi += 2 * M_PI;
    }
    if (hi <= 2 * M_PI) {
      flat.push_back({lo, hi});
    } else {
      flat.push_back({lo, 2 * M_PI});
      flat.push_back({0.0, hi - 2 * M_PI});
    }
  }
  std::sort(flat.begin(), flat.end(), [](const Interval& a, const Interval& b) {
    return a.lo < b.lo;
  });
  double covered = 0.0, cur_lo = 0.0, cur_hi = -1.0;
  for (const Interval& v : flat) {
    if (v.lo > cur_hi) {
      if (cur_hi > cur_lo) covered += cur_hi - cur_lo;
      cur_lo = v.lo;
      cur_hi = v.hi;
    } else {
      cur_hi = std::max(cur_hi, v.hi);
    }
  }
  if (cur_hi > cur_lo) covered += cur_hi - cur_lo;
  double coverage = std::min(1.0, covered / (2 * M_PI));
  return {coverage, coverage >= covered_threshold ? 1.0 : 0.0};
}

// ---- Row 12: bridging ----------------------------------------------------

struct BridgingParams {
  double tau = 0.1;          // minimum edge strength for traversable pixels
  double budget_factor = 3;  // path length budget = factor * ceil(gap)
};

// Min-cost path between the endpoint pixels over strength-thresholded
// 8-connected pixels, step cost 1 - strength of the entered pixel, with a
// step budget. Returns {bridgeable flag, cost per step (1 if unbridgeable)}.
inline FeatureBlock rel_bridging(const ContourPrim& a, const ContourPrim& b, const EdgeMap& em,
                                 const BridgingParams& bp = {}) {
  if (a.closed || b.closed) return {0.0, 1.0};
  detail::EndpointPair p = detail::closest_endpoint_pair(a, b);
  int w = em.width, h = em.height;
  auto clampi = [](double v, int hi) { return std::clamp(int(std::lround(v)), 0, hi - 1); };
  int sx = clampi(p.a_end.x, w), sy = clampi(p.a_end.y, h);
  int tx = clampi(p.b_end.x, w), ty = clampi(p.b_end.y, h);
  if (sx == tx && sy == ty) return {1.0, 0.0};
  int budget = int(bp.budget_factor * std::ceil(p.gap));
  if (budget < 1) budget = 1;
  auto traversable = [&](int x, int y) {
    if ((x == sx && y == sy) || (x == tx && y == ty)) return true;  // endpoints always allowed
    return em.strength(x, y) >= bp.tau;
  };
  // Dijkstra over (pixel, steps) states.
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(size_t(w) * h * (budget + 1), kInf);
  auto idx = [&](int x, int y, int s) { return (size_t(s) * h + y) * w + x; };
  using State = std::tuple<double, int, int, int>;  // cost, x, y, steps
  std::priority_queue<State, std::vector<State>, std::greater<State>> pq;
  dist[idx(sx, sy, 0)] = 0.0;
  pq.push({0.0, sx, sy, 0});
  double best = kInf;
  int best_steps = 0;
  while (!pq.empty()) {
    auto [cost, x, y, steps] = pq.top();
    pq.pop();
    if (cost > dist[idx(x, y, steps)] + kEps) continue;
    if (x == tx && y == ty) {
      best = cost;
      best_steps = steps;
      break;
    }
    if (steps == budget) continue;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || !traversable(nx, ny)) continue;
        double step_cost = 1.0 - em.strength(nx, ny);
        double nc = cost + step_cost;
        if (nc < dist[idx(nx, ny, steps + 1)] - kEps) {
          dist[idx(nx, ny, steps + 1)] = nc;
          pq.push({nc, nx, ny, steps + 1});
        }
      }
  }
  if (!std::isfinite(best)) return {0.0, 1.0};
  return {1.0, best_steps > 0 ? best / best_steps : 0.0};
}

// ---- Row 13: containment -------------------------------------------------

inline FeatureBlock rel_containment(const PointPrim& p, const SquareRegionPrim& r) {
  double cheb = std::max(std::abs(p.x - r.center_x), std::abs(p.y - r.center_y));
  double margin = (r.half() - cheb) / r.half();
  bool inside = cheb <= r.half() + kEps;
  return {inside ? 1.0 : 0.0, margin};
}

// ---- Row 14: contour ends in region -------------------------------------

inline FeatureBlock rel_ends_in_region(const ContourPrim& c, const SquareRegionPrim& r) {
  if (c.closed) return {0.0, -1.0};
  FeatureBlock first = rel_containment(PointPrim{c.vertices.front().x, c.vertices.front().y}, r);
  FeatureBlock last = rel_containment(PointPrim{c.vertices.back().x, c.vertices.back().y}, r);
  return {first[0] + last[0], std::min(first[1], last[1])};
}

}  // namespace minterp
