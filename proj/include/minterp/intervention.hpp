#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "minterp/candidates.hpp"
#include "minterp/features.hpp"
#include "minterp/geometry.hpp"
#include "minterp/inference.hpp"
#include "minterp/relations.hpp"
#include "minterp/schema.hpp"

namespace minterp {

enum class InterventionKind { recolor_pixels, render_sketch };

struct InterventionSpec {
  InterventionKind kind = InterventionKind::recolor_pixels;
  RelationKind target_relation = RelationKind::intensity_extremum;
  std::vector<std::pair<int, int>> pixels;  // recolor targets, 1..4
  double amplitude = 0.0;                   // sketch perturbation, pixels
  uint64_t seed = 0;
};

struct BlockChange {
  int spec_index = 0;
  FeatureBlock before;
  FeatureBlock after;
};

struct InterventionReport {
  double original_score = 0.0;
  double transformed_score = 0.0;
  double delta = 0.0;  // original - transformed; positive means the score dropped
  RelationKind ablated_relation = RelationKind::intensity_extremum;
  std::vector<BlockChange> changed_blocks;
  bool transformed_uninterpretable = false;
};

// Each listed pixel takes the median of its in-bounds 8-neighbors, excluding
// other listed pixels; everything else is bit-identical.
inline ImagePatch recolor_pixels(const ImagePatch& img,
                                 const std::vector<std::pair<int, int>>& pixels) {
  if (pixels.empty()) throw InvalidArgument("recolor_pixels: empty pixel list");
  if (pixels.size() > 4)
    throw InvalidArgument("recolor_pixels: at most 4 pixels may be recolored");
  for (const auto& [x, y] : pixels)
    if (x < 0 || y < 0 || x >= img.width || y >= img.height)
      throw OutOfBounds("recolor_pixels: pixel (" + std::to_string(x) + "," + std::to_string(y) +
                        ") outside patch");
  auto listed = [&](int x, int y) {
    for (const auto& [px, py] : pixels)
      if (px == x && py == y) return true;
    return false;
  };
  ImagePatch out = img;
  for (const auto& [x, y] : pixels) {
    std::vector<double> nb;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) continue;
        if (listed(nx, ny)) continue;
        nb.push_back(img.at(nx, ny));
      }
    if (nb.empty()) continue;  // fully surrounded by other targets: leave as is
    std::sort(nb.begin(), nb.end());
    size_t m = nb.size() / 2;
    out.at(x, y) = nb.size() % 2 ? nb[m] : (nb[m - 1] + nb[m]) / 2.0;
  }
  return out;
}

// Extract contours, displace vertices along the local normal by smooth
// seeded noise, render 1px black strokes on a white background.
inline ImagePatch render_sketch(const ImagePatch& img, double amplitude, uint64_t seed) {
  if (amplitude < 0) throw InvalidArgument("render_sketch: amplitude must be >= 0");
  CandidateSet cs;
  EdgeMap em = compute_edge_map(img);
  std::vector<Scored<ContourPrim>> contours = extract_contour_candidates(em, 1000);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uphase(0.0, 2 * M_PI);
  ImagePatch out(img.width, img.height, 1.0);
  for (const auto& sc : contours) {
    const ContourPrim& c = sc.prim;
    double len = polyline_length(c);
    double wavelength = std::max(8.0, len / 2.0);
    double phase = uphase(rng);
    ContourPrim displaced = c;
    double walked = 0.0;
    for (size_t i = 0; i < c.vertices.size(); ++i) {
      if (i > 0) walked += (c.vertices[i] - c.vertices[i - 1]).norm();
      // Local normal from the adjacent segment.
      Vec2 d;
      if (i + 1 < c.vertices.size())
        d = c.vertices[i + 1] - c.vertices[i];
      else
        d = c.vertices[i] - c.vertices[i - 1];
      double n = d.norm();
      Vec2 normal = n > kEps ? Vec2{-d.y / n, d.x / n} : Vec2{0, 0};
      double disp = amplitude * std::sin(2 * M_PI * walked / wavelength + phase);
      displaced.vertices[i] = c.vertices[i] + normal * disp;
    }
    // Drop vertices that collapsed together after displacement.
    ContourPrim cleaned;
    cleaned.closed = displaced.closed;
    for (const Vec2& v : displaced.vertices)
      if (cleaned.vertices.empty() || (v - cleaned.vertices.back()).norm() > kEps)
        cleaned.vertices.push_back(v);
    if (cleaned.vertices.size() < 2) continue;
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        if (point_to_polyline_distance({double(x), double(y)}, cleaned).distance <= 0.5)
          out.at(x, y) = 0.0;
  }
  return out;
}

inline ImagePatch apply_intervention(const ImagePatch& img, const InterventionSpec& spec) {
  switch (spec.kind) {
    case InterventionKind::recolor_pixels:
      return recolor_pixels(img, spec.pixels);
    case InterventionKind::render_sketch:
      return render_sketch(img, spec.amplitude, spec.seed);
  }
  throw InvalidArgument("apply_intervention: unknown kind");
}

// Interpret before and after the transform; report the score change and the
// before/after blocks of every relation spec of the targeted kind.
inline InterventionReport measure_intervention(const ImagePatch& img,
                                               const InterventionSpec& spec,
                                               const StructureSchema& schema,
                                               const TrainedModel& model,
                                               const InterpretParams& params = {}) {
  InterventionReport rep;
  rep.ablated_relation = spec.target_relation;
  InterpretationResult orig = interpret(img, schema, model, params);
  rep.original_score = orig.score;
  ImagePatch transformed = apply_intervention(img, spec);
  Configuration trans_cfg;
  bool have_trans = true;
  try {
    InterpretationResult t = interpret(transformed, schema, model, params);
    rep.transformed_score = t.score;
    trans_cfg = t.configuration;
  } catch (const UninterpretablePatch&) {
    // Strongest possible drop: the structure is no longer findable at all.
    rep.transformed_score = 0.0;
    rep.transformed_uninterpretable = true;
    have_trans = false;
  }
  rep.delta = rep.original_score - rep.transformed_score;
  PatchContext octx = PatchContext::from_image(img);
  PatchContext tctx = PatchContext::from_image(transformed);
  for (size_t si = 0; si < schema.relation_specs.size(); ++si) {
    const RelationSpec& rs = schema.relation_specs[si];
    if (rs.kind != spec.target_relation) continue;
    BlockChange ch;
    ch.spec_index = int(si);
    ch.before = evaluate_relation_spec(schema, rs, orig.configuration, octx);
    if (have_trans) ch.after = evaluate_relation_spec(schema, rs, trans_cfg, tctx);
    rep.changed_blocks.push_back(std::move(ch));
  }
  return rep;
}

}  // namespace minterp
