#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "minterp/features.hpp"
#include "minterp/geometry.hpp"
#include "minterp/schema.hpp"

namespace minterp {

// ---- Tiny renderer -------------------------------------------------------
//
// Shapes are filled with a 2px anti-alias ramp across the boundary, so the
// smoothed-gradient peak of every planted edge falls exactly on the
// annotated boundary line. Annotations reference those boundary lines.

namespace render {

inline double polygon_signed_distance(const std::vector<Vec2>& poly, Vec2 p) {
  double dist = std::numeric_limits<double>::infinity();
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    Vec2 a = poly[j], b = poly[i];
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double u = len2 > kEps ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    dist = std::min(dist, (p - (a + ab * u)).norm());
    // Even-odd crossing test.
    if ((a.y > p.y) != (b.y > p.y)) {
      double t = (p.y - a.y) / (b.y - a.y);
      if (a.x + t * (b.x - a.x) > p.x) inside = !inside;
    }
  }
  return inside ? -dist : dist;
}

inline void fill_shape(ImagePatch& img, double color,
                       const std::function<double(Vec2)>& signed_dist) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double d = signed_dist({double(x), double(y)});
      if (d >= 1.0) continue;
      double t = std::clamp((d + 1.0) / 2.0, 0.0, 1.0);  // 0 inside, 1 outside
      img.at(x, y) = std::clamp(color * (1.0 - t) + img.at(x, y) * t, 0.0, 1.0);
    }
}

inline void fill_polygon(ImagePatch& img, const std::vector<Vec2>& poly, double color) {
  fill_shape(img, color, [&](Vec2 p) { return polygon_signed_distance(poly, p); });
}

inline void fill_disc(ImagePatch& img, Vec2 c, double radius, double color) {
  fill_shape(img, color, [&](Vec2 p) { return (p - c).norm() - radius; });
}

inline void fill_rect(ImagePatch& img, double x0, double y0, double x1, double y1, double color) {
  fill_polygon(img, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, color);
}

// Axis-aligned bar rotated by phi about its center.
inline std::vector<Vec2> rotated_rect(Vec2 center, Vec2 dir, double length, double width) {
  Vec2 n{-dir.y, dir.x};
  Vec2 a = center - dir * (length / 2.0), b = center + dir * (length / 2.0);
  double hw = width / 2.0;
  return {a + n * hw, b + n * hw, b - n * hw, a - n * hw};
}

// Uniform texture noise inside a rect, clamped to [0,1].
inline void texture_rect(ImagePatch& img, double x0, double y0, double x1, double y1,
                         double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (int y = std::max(0, int(std::ceil(y0))); y <= std::min(img.height - 1, int(std::floor(y1)));
       ++y)
    for (int x = std::max(0, int(std::ceil(x0)));
         x <= std::min(img.width - 1, int(std::floor(x1))); ++x)
      img.at(x, y) = std::clamp(img.at(x, y) + u(rng), 0.0, 1.0);
}

inline void add_noise(ImagePatch& img, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> g(0.0, sigma);
  for (double& v : img.intensities) v = std::clamp(v + g(rng), 0.0, 1.0);
}

}  // namespace render

// ---- Planted corpora -----------------------------------------------------

enum class SyntheticClass {
  head,  // 8-part head-like layout
  link,  // 4-part cover/continuity/parallelism layout
};

struct PlantedCorpus {
  StructureSchema schema;  // extended relation set
  std::vector<AnnotatedPatch> positives;
  std::vector<ImagePatch> negatives;
};

namespace detail {

struct JitterModel {
  Vec2 global;                 // integer whole-structure translation
  std::mt19937_64* rng;
  double part_sigma;           // per-part integer jitter stddev (pixels)

  Vec2 part_offset() {
    if (part_sigma <= 0.0) return {0, 0};
    // Clamped to +-1px: parts must stay clear of their neighbours so every
    // planted edge still traces as its own chain.
    std::normal_distribution<double> g(0.0, part_sigma);
    return {std::clamp(std::round(g(*rng)), -1.0, 1.0),
            std::clamp(std::round(g(*rng)), -1.0, 1.0)};
  }
};

inline double min_distance_to_config(const Configuration& cfg, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [name, prim] : cfg.assignment) {
    switch (prim.kind()) {
      case PrimitiveKind::point:
        best = std::min(best, (prim.point().pos() - p).norm());
        break;
      case PrimitiveKind::contour:
        best = std::min(best, point_to_polyline_distance(p, prim.contour()).distance);
        break;
      case PrimitiveKind::region: {
        const SquareRegionPrim& r = prim.region();
        double dx = std::max(0.0, std::abs(p.x - r.center_x) - r.half());
        double dy = std::max(0.0, std::abs(p.y - r.center_y) - r.half());
        best = std::min(best, std::hypot(dx, dy));
        break;
      }
    }
  }
  return best;
}

// Clutter: dots and small bars placed away from the planted structure.
inline void scatter_clutter(ImagePatch& img, const Configuration& keep_away, int n_dots,
                            int n_bars, std::mt19937_64& rng, double margin = 8.0) {
  std::uniform_real_distribution<double> ux(4.0, img.width - 5.0);
  std::uniform_real_distribution<double> uy(4.0, img.height - 5.0);
  std::uniform_real_distribution<double> ucol(0.0, 1.0);
  int placed = 0, tries = 0;
  while (placed < n_dots && tries < 60 * n_dots) {
    ++tries;
    Vec2 p{std::round(ux(rng)), std::round(uy(rng))};
    if (min_distance_to_config(keep_away, p) < margin) continue;
    double color = ucol(rng) < 0.5 ? 0.25 : 0.72;
    render::fill_disc(img, p, 1.2, color);
    ++placed;
  }
  placed = 0;
  tries = 0;
  std::uniform_real_distribution<double> ulen(5.0, 9.0);
  while (placed < n_bars && tries < 60 * std::max(1, n_bars)) {
    ++tries;
    Vec2 p{std::round(ux(rng)), std::round(uy(rng))};
    double len = std::round(ulen(rng));
    if (min_distance_to_config(keep_away, p) < margin + len / 2.0) continue;
    bool horizontal = (rng() & 1) != 0;
    double color = ucol(rng) < 0.5 ? 0.3 : 0.68;
    if (horizontal)
      render::fill_rect(img, p.x - len / 2, p.y - 2, p.x + len / 2, p.y + 2, color);
    else
      render::fill_rect(img, p.x - 2, p.y - len / 2, p.x + 2, p.y + len / 2, color);
    ++placed;
  }
}

inline ContourPrim segment(Vec2 a, Vec2 b) { return ContourPrim{{a, b}, false}; }

inline Vec2 snap_to_grid(Vec2 v, double step) {
  return {std::round(v.x / step) * step, std::round(v.y / step) * step};
}

}  // namespace detail

// ---- Head-like class (8 parts) ------------------------------------------

inline StructureSchema head_schema() {
  StructureSchema s;
  s.class_name = "synthetic_head";
  s.relation_set = RelationSetTag::extended;
  s.parts = {
      {"eye", PrimitiveKind::point},         {"nostril", PrimitiveKind::point},
      {"brow", PrimitiveKind::contour},      {"outline", PrimitiveKind::contour},
      {"cheek_line", PrimitiveKind::contour}, {"nose_line", PrimitiveKind::contour},
      {"mouth_gap", PrimitiveKind::contour}, {"muzzle", PrimitiveKind::region},
  };
  using RK = RelationKind;
  s.relation_specs = {
      {RK::location, {"eye"}},
      {RK::location, {"nostril"}},
      {RK::location, {"brow"}},
      {RK::location, {"outline"}},
      {RK::location, {"cheek_line"}},
      {RK::location, {"nose_line"}},
      {RK::location, {"mouth_gap"}},
      {RK::location, {"muzzle"}},
      {RK::location, {"brow", "eye"}},
      {RK::location, {"cheek_line", "nose_line"}},
      {RK::location, {"nose_line", "mouth_gap"}},
      {RK::location, {"eye", "muzzle"}},
      {RK::location, {"nostril", "muzzle"}},
      {RK::intensity_extremum, {"eye"}},
      {RK::intensity_extremum, {"nostril"}},
      {RK::line_circle_deviation, {"outline"}},
      {RK::appearance_along_contour, {"brow"}},
      {RK::appearance_along_contour, {"outline"}},
      {RK::appearance_along_contour, {"cheek_line"}},
      {RK::appearance_along_contour, {"nose_line"}},
      {RK::appearance_along_contour, {"mouth_gap"}},
      {RK::appearance_in_region, {"muzzle"}},
      {RK::ending_distance, {"nose_line", "mouth_gap"}},
      {RK::continuity, {"nose_line", "mouth_gap"}},
      {RK::length_ratio, {"cheek_line", "nose_line"}},
      {RK::parallelism, {"cheek_line", "nose_line"}},
      {RK::cover, {"outline", "eye"}},
      {RK::bridging, {"nose_line", "mouth_gap"}},
      {RK::containment, {"nostril", "muzzle"}},
      {RK::ends_in_region, {"brow", "muzzle"}},
  };
  s.validate();
  return s;
}

namespace detail {

// One 64x64 head-like positive. Region centers snap to the stride-8 grid of
// the region-candidate extractor so region candidates can align exactly.
inline AnnotatedPatch render_head_positive(double noise, std::mt19937_64& rng) {
  const int W = 64, H = 64;
  ImagePatch img(W, H, 0.9);
  // Whole-structure shift stays within +-1px so every moving element keeps
  // clear of the grid-pinned muzzle texture.
  int amp = std::min(1, int(std::lround(80.0 * noise)));
  std::uniform_int_distribution<int> uj(-amp, amp);
  Vec2 g{double(uj(rng)), double(uj(rng))};
  JitterModel jm{g, &rng, 20.0 * noise};

  auto jitter = [&](Vec2 base) { return base + g + jm.part_offset(); };

  // Head octagon (45-degree corners survive chain linking as one loop). The
  // top-right and bottom-right cuts are deeper so the grid-aligned muzzle
  // clears the boundary at every global offset.
  Vec2 oc = g;  // outline moves with the global offset only
  std::vector<Vec2> octagon = {{10, 24}, {10, 40}, {24, 54}, {44, 54},
                               {54, 44}, {54, 20}, {44, 10}, {24, 10}};
  for (Vec2& v : octagon) v = v + oc;
  render::fill_polygon(img, octagon, 0.5);

  // Interior elements keep >= 4px clearance from the outline and from each
  // other, so every planted edge traces as its own clean chain.

  // Brow bar; annotation is its bottom edge.
  Vec2 brow_off = jitter({0, 0});
  render::fill_rect(img, 26 + brow_off.x, 14 + brow_off.y, 36 + brow_off.x, 20 + brow_off.y, 0.2);
  ContourPrim brow = segment({26 + brow_off.x, 20 + brow_off.y}, {36 + brow_off.x, 20 + brow_off.y});

  // Eye and nostril dots.
  Vec2 eye_pos = jitter({15, 30});
  render::fill_disc(img, eye_pos, 1.2, 0.05);
  Vec2 nostril_pos = jitter({42, 48});
  render::fill_disc(img, nostril_pos, 1.2, 0.05);

  // Snout stripe (cheek/nose side edges) plus a mouth bar whose left edge
  // continues the nose line across a gap.
  Vec2 stripe_off = jitter({0, 0});
  double sx0 = 22 + stripe_off.x, sx1 = 27 + stripe_off.x;
  double sy0 = 24 + stripe_off.y, sy1 = 35 + stripe_off.y;
  double my0 = 42 + stripe_off.y, my1 = 49 + stripe_off.y;
  render::fill_rect(img, sx0, sy0, sx1, sy1, 0.15);
  render::fill_rect(img, sx1, my0, sx1 + 9, my1, 0.15);
  ContourPrim cheek = segment({sx0, sy0}, {sx0, sy1});
  ContourPrim nose = segment({sx1, sy0}, {sx1, sy1});
  ContourPrim mouth = segment({sx1, my0}, {sx1, my1});

  // Textured region pinned to the stride-8 grid of the region-candidate
  // extractor (side = 16 = 25% of 64), so a sliding-window candidate can
  // align with it exactly. Texture fills only the inner 12x12: the flat
  // 2px rim keeps texture edges away from the neighbouring contours.
  Vec2 muzzle_c{40, 32};
  render::texture_rect(img, muzzle_c.x - 6, muzzle_c.y - 6, muzzle_c.x + 6, muzzle_c.y + 6, 0.6,
                       rng);

  AnnotatedPatch ap;
  ap.truth.assignment["eye"] = PointPrim{eye_pos.x, eye_pos.y};
  ap.truth.assignment["nostril"] = PointPrim{nostril_pos.x, nostril_pos.y};
  ap.truth.assignment["brow"] = brow;
  ap.truth.assignment["outline"] = ContourPrim{octagon, true};
  ap.truth.assignment["cheek_line"] = cheek;
  ap.truth.assignment["nose_line"] = nose;
  ap.truth.assignment["mouth_gap"] = mouth;
  ap.truth.assignment["muzzle"] = SquareRegionPrim{muzzle_c.x, muzzle_c.y, 16.0};

  scatter_clutter(img, ap.truth, 12, 3, rng);
  render::add_noise(img, noise, rng);
  ap.img = std::move(img);
  return ap;
}

inline ImagePatch render_head_negative(double noise, std::mt19937_64& rng) {
  const int W = 64, H = 64;
  ImagePatch img(W, H, 0.9);
  Configuration empty;
  scatter_clutter(img, empty, 14, 6, rng, 0.0);
  std::uniform_real_distribution<double> upos(10.0, 46.0);
  for (int i = 0; i < 2; ++i) {
    double x = std::round(upos(rng)), y = std::round(upos(rng));
    render::texture_rect(img, x, y, x + 12, y + 12, 0.6, rng);
  }
  render::add_noise(img, noise, rng);
  return img;
}

}  // namespace detail

// ---- Link class (4 parts; signal in cover/continuity/parallelism) --------

inline StructureSchema link_schema() {
  StructureSchema s;
  s.class_name = "synthetic_link";
  s.relation_set = RelationSetTag::extended;
  s.parts = {
      {"center_pt", PrimitiveKind::point},
      {"ring", PrimitiveKind::contour},
      {"tail_a", PrimitiveKind::contour},
      {"tail_b", PrimitiveKind::contour},
  };
  using RK = RelationKind;
  s.relation_specs = {
      {RK::location, {"center_pt"}},
      {RK::location, {"ring"}},
      {RK::location, {"tail_a"}},
      {RK::location, {"tail_b"}},
      {RK::location, {"center_pt", "ring"}},
      {RK::location, {"tail_a", "tail_b"}},
      {RK::intensity_extremum, {"center_pt"}},
      {RK::appearance_along_contour, {"ring"}},
      {RK::appearance_along_contour, {"tail_a"}},
      {RK::appearance_along_contour, {"tail_b"}},
      {RK::cover, {"ring", "center_pt"}},
      {RK::continuity, {"tail_a", "tail_b"}},
      {RK::parallelism, {"tail_a", "tail_b"}},
      {RK::ending_distance, {"tail_a", "tail_b"}},
      {RK::length_ratio, {"tail_a", "tail_b"}},
  };
  s.validate();
  return s;
}

namespace detail {

inline Vec2 dir_of(double deg) {
  double r = deg * M_PI / 180.0;
  return {std::cos(r), std::sin(r)};
}

inline ContourPrim arc_polyline(Vec2 c, double radius, double from_deg, double to_deg,
                                int segments = 48) {
  ContourPrim out;
  for (int i = 0; i <= segments; ++i) {
    double a = from_deg + (to_deg - from_deg) * double(i) / segments;
    out.vertices.push_back(c + dir_of(a) * radius);
  }
  out.closed = false;
  return out;
}

// One 80x80 link positive: a notched disc whose rim covers a center dot,
// plus two collinear tail edges, at a random orientation. Decoys share the
// location and appearance statistics of the true parts but break cover,
// continuity, or parallelism.
inline AnnotatedPatch render_link_positive(double noise, std::mt19937_64& rng) {
  const int W = 80, H = 80;
  ImagePatch img(W, H, 0.85);
  int amp = std::min(4, int(std::lround(80.0 * noise)));
  std::uniform_int_distribution<int> uj(-amp, amp);
  Vec2 D{40.0 + uj(rng), 40.0 + uj(rng)};
  std::uniform_int_distribution<int> uphi(0, 7);
  double phi = 45.0 * uphi(rng);
  Vec2 fwd = dir_of(phi);
  Vec2 nrm{-fwd.y, fwd.x};

  // Notched disc; notch points backwards so the rim sweeps ~290 degrees.
  double notch_dir = phi + 180.0;
  render::fill_disc(img, D, 9.0, 0.45);
  std::vector<Vec2> wedge = {D, D + dir_of(notch_dir - 35.0) * 13.0,
                             D + dir_of(notch_dir) * 13.5,
                             D + dir_of(notch_dir + 35.0) * 13.0};
  render::fill_polygon(img, wedge, 0.85);
  render::fill_disc(img, D, 1.2, 0.05);

  // Tails: one bar split in two by a gap; annotations are the +normal side.
  double bar_w = 5.0;
  Vec2 a0 = D + fwd * 13.0, a1 = D + fwd * 25.0;
  Vec2 b0 = D + fwd * 29.0, b1 = D + fwd * 38.0;
  render::fill_polygon(img, render::rotated_rect((a0 + a1) * 0.5, fwd, (a1 - a0).norm(), bar_w),
                       0.3);
  render::fill_polygon(img, render::rotated_rect((b0 + b1) * 0.5, fwd, (b1 - b0).norm(), bar_w),
                       0.3);
  Vec2 side = nrm * (bar_w / 2.0);
  ContourPrim tail_a = segment(a0 + side, a1 + side);
  ContourPrim tail_b = segment(b0 + side, b1 + side);

  AnnotatedPatch ap;
  ap.truth.assignment["center_pt"] = PointPrim{D.x, D.y};
  ap.truth.assignment["ring"] =
      arc_polyline(D, 9.0, notch_dir + 40.0, notch_dir + 320.0);
  ap.truth.assignment["tail_a"] = tail_a;
  ap.truth.assignment["tail_b"] = tail_b;

  // Decoy arc: a second notched disc with no dot inside, across the patch.
  std::uniform_int_distribution<int> urho(120, 240);
  double rho = phi + urho(rng);
  Vec2 E = D + dir_of(rho) * 27.0;
  E.x = std::clamp(E.x, 12.0, 67.0);
  E.y = std::clamp(E.y, 12.0, 67.0);
  double dn = rho + 180.0;
  render::fill_disc(img, E, 9.0, 0.45);
  std::vector<Vec2> dwedge = {E, E + dir_of(dn - 35.0) * 13.0, E + dir_of(dn) * 13.5,
                              E + dir_of(dn + 35.0) * 13.0};
  render::fill_polygon(img, dwedge, 0.85);

  // Decoy dot outside every disc.
  for (int tries = 0; tries < 50; ++tries) {
    std::uniform_real_distribution<double> upos(6.0, 73.0);
    Vec2 p{std::round(upos(rng)), std::round(upos(rng))};
    if ((p - D).norm() < 15.0 || (p - E).norm() < 15.0) continue;
    if (point_to_polyline_distance(p, tail_a).distance < 7.0) continue;
    if (point_to_polyline_distance(p, tail_b).distance < 7.0) continue;
    render::fill_disc(img, p, 1.2, 0.05);
    break;
  }

  // Decoy bars: one parallel but laterally offset (breaks continuity), one
  // tilted 45 degrees (breaks parallelism).
  std::uniform_real_distribution<double> uoff(9.0, 12.0);
  double off = uoff(rng) * ((rng() & 1) ? 1.0 : -1.0);
  Vec2 pc = (a0 + b1) * 0.5 + nrm * off;
  render::fill_polygon(img, render::rotated_rect(pc, fwd, 11.0, bar_w), 0.3);
  Vec2 tc = D + dir_of(phi + ((rng() & 1) ? 90.0 : 270.0)) * 22.0;
  tc.x = std::clamp(tc.x, 10.0, 69.0);
  tc.y = std::clamp(tc.y, 10.0, 69.0);
  render::fill_polygon(img, render::rotated_rect(tc, dir_of(phi + 45.0), 11.0, bar_w), 0.3);

  render::add_noise(img, noise, rng);
  ap.img = std::move(img);
  return ap;
}

inline ImagePatch render_link_negative(double noise, std::mt19937_64& rng) {
  const int W = 80, H = 80;
  ImagePatch img(W, H, 0.85);
  std::uniform_real_distribution<double> upos(12.0, 67.0);
  std::uniform_int_distribution<int> uphi(0, 7);
  for (int i = 0; i < 3; ++i) {
    Vec2 p{std::round(upos(rng)), std::round(upos(rng))};
    render::fill_polygon(
        img, render::rotated_rect(p, dir_of(45.0 * uphi(rng)), 11.0, 5.0), 0.3);
  }
  Vec2 e{std::round(upos(rng)), std::round(upos(rng))};
  render::fill_disc(img, e, 9.0, 0.45);
  for (int i = 0; i < 2; ++i) {
    Vec2 p{std::round(upos(rng)), std::round(upos(rng))};
    if ((p - e).norm() > 12.0) render::fill_disc(img, p, 1.2, 0.05);
  }
  render::add_noise(img, noise, rng);
  return img;
}

}  // namespace detail

inline StructureSchema synthetic_schema(SyntheticClass cls) {
  return cls == SyntheticClass::head ? head_schema() : link_schema();
}

// Seeded, reproducible corpus. At noise 0 every image of a kind is rendered
// from the same sub-seed, so positives come out identical.
inline PlantedCorpus generate_planted_corpus(SyntheticClass cls, int n_pos, int n_neg,
                                             double noise, uint64_t seed) {
  if (n_pos < 2) throw InvalidArgument("generate_planted_corpus: n_pos must be >= 2");
  PlantedCorpus corpus;
  corpus.schema = synthetic_schema(cls);
  for (int i = 0; i < n_pos; ++i) {
    uint64_t s = noise == 0.0 ? seed : seed + 0x51ed2701u * uint64_t(i + 1);
    std::mt19937_64 rng(s);
    corpus.positives.push_back(cls == SyntheticClass::head
                                   ? detail::render_head_positive(noise, rng)
                                   : detail::render_link_positive(noise, rng));
  }
  for (int i = 0; i < n_neg; ++i) {
    uint64_t s = noise == 0.0 ? seed ^ 0xabcdef12u : seed + 0x7a3bc551u * uint64_t(i + 1);
    std::mt19937_64 rng(s);
    corpus.negatives.push_back(cls == SyntheticClass::head
                                   ? detail::render_head_negative(noise, rng)
                                   : detail::render_link_negative(noise, rng));
  }
  return corpus;
}

}  // namespace minterp
