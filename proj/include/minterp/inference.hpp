#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "minterp/candidates.hpp"
#include "minterp/features.hpp"
#include "minterp/forest.hpp"
#include "minterp/schema.hpp"

namespace minterp {

// Everything the interpretation stage needs besides the schema: the trained
// scorer, per-part unary summaries for pruning, and the positive-class mean
// feature vector used to impute unassigned relation blocks in partial
// configurations.
struct TrainedModel {
  Forest forest;
  UnaryStats unary_stats;
  FeatureVector positive_means;
};

struct InterpretParams {
  int beam_width = 50;    // <= 0 means unbounded
  int rescore_k = 25;     // <= 0 means all
  double unary_z_max = 4.0;
  CandidateExtractionParams extraction;
};

struct SearchStats {
  long expanded = 0;
  long pruned = 0;
  double elapsed_seconds = 0.0;
};

struct InterpretationResult {
  Configuration configuration;
  double score = 0.0;
  SearchStats stats;
};

namespace detail {

// Candidates per part (schema order), unary-pruned: keep z <= z_max, else the
// 3 best by z. Errors if a part's kind has no candidates at all.
inline std::vector<std::vector<Primitive>> pruned_part_candidates(
    const StructureSchema& schema, const CandidateSet& cands, const PatchContext& ctx,
    const UnaryStats& stats, double z_max) {
  std::vector<std::vector<Primitive>> out;
  for (const PartDecl& part : schema.parts) {
    std::vector<Primitive> pool;
    switch (part.kind) {
      case PrimitiveKind::point:
        for (const auto& c : cands.points) pool.push_back(c.prim);
        break;
      case PrimitiveKind::contour:
        for (const auto& c : cands.contours) pool.push_back(c.prim);
        break;
      case PrimitiveKind::region:
        for (const auto& c : cands.regions) pool.push_back(c.prim);
        break;
    }
    if (pool.empty())
      throw UninterpretablePatch("no " + kind_name(part.kind) +
                                 " candidates available for part '" + part.name + "'");
    auto it = stats.find(part.name);
    if (it == stats.end()) {
      out.push_back(std::move(pool));
      continue;
    }
    std::vector<std::pair<double, int>> zs;
    for (size_t i = 0; i < pool.size(); ++i)
      zs.push_back({unary_z_score(it->second, unary_block(pool[i], ctx)), int(i)});
    std::vector<Primitive> kept;
    for (const auto& [z, i] : zs)
      if (z <= z_max) kept.push_back(pool[i]);
    if (kept.empty()) {
      // Pruning wiped the pool; fall back to the 3 best by z-score.
      std::stable_sort(zs.begin(), zs.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (size_t i = 0; i < zs.size() && i < 3; ++i) kept.push_back(pool[zs[i].second]);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

// Part visit order: descending relation degree, ties by schema order.
inline std::vector<int> search_part_order(const StructureSchema& schema) {
  std::vector<std::pair<int, int>> degree;  // (-degree, schema index)
  for (size_t pi = 0; pi < schema.parts.size(); ++pi) {
    int deg = 0;
    for (const RelationSpec& spec : schema.relation_specs)
      for (const std::string& arg : spec.args)
        if (arg == schema.parts[pi].name) ++deg;
    degree.push_back({-deg, int(pi)});
  }
  std::stable_sort(degree.begin(), degree.end());
  std::vector<int> order;
  for (const auto& [d, i] : degree) order.push_back(i);
  return order;
}

}  // namespace detail

inline InterpretationResult interpret(const ImagePatch& img, const StructureSchema& schema,
                                      const TrainedModel& model,
                                      const InterpretParams& params = {}) {
  auto t0 = std::chrono::steady_clock::now();
  if (model.forest.schema_fingerprint != 0 &&
      model.forest.schema_fingerprint != schema.fingerprint())
    throw SchemaViolation("interpret: model fingerprint does not match schema");
  PatchContext ctx = PatchContext::from_image(img);
  CandidateSet cands = extract_candidates(img, params.extraction);
  std::vector<std::vector<Primitive>> pools = detail::pruned_part_candidates(
      schema, cands, ctx, model.unary_stats, params.unary_z_max);
  std::vector<int> order = detail::search_part_order(schema);
  detail::BlockCache cache(schema, ctx, pools);

  // States carry an incrementally updated feature vector: unassigned blocks
  // hold the positive-class means, and assigning a part overwrites exactly
  // the blocks it completes.
  struct State {
    std::vector<int> assign;  // candidate index per part, -1 unassigned
    FeatureVector fv;
    double score = 0.0;
    long discovery = 0;
  };
  SearchStats stats;
  long discovery_counter = 0;
  State root;
  root.assign.assign(schema.parts.size(), -1);
  root.fv = model.positive_means;
  if (root.fv.size() != size_t(schema.feature_vector_len()))
    throw SchemaViolation("interpret: positive_means length does not match schema");
  std::vector<State> beam{std::move(root)};
  size_t beam_cap = params.beam_width <= 0 ? std::numeric_limits<size_t>::max()
                                           : size_t(params.beam_width);
  for (int pi : order) {
    std::vector<State> next;
    for (const State& st : beam)
      for (size_t ci = 0; ci < pools[pi].size(); ++ci) {
        State ns;
        ns.assign = st.assign;
        ns.assign[pi] = int(ci);
        ns.fv = st.fv;
        for (int si : cache.specs_of_part[pi])
          if (cache.ready(si, ns.assign)) cache.write(si, ns.assign, ns.fv);
        ns.score = model.forest.score(ns.fv);
        ns.discovery = discovery_counter++;
        next.push_back(std::move(ns));
        ++stats.expanded;
      }
    if (next.size() > beam_cap) {
      std::stable_sort(next.begin(), next.end(), [](const State& a, const State& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.discovery < b.discovery;
      });
      stats.pruned += long(next.size() - beam_cap);
      next.resize(beam_cap);
      // Restore discovery order so later expansion stays deterministic.
      std::stable_sort(next.begin(), next.end(),
                       [](const State& a, const State& b) { return a.discovery < b.discovery; });
    }
    beam = std::move(next);
  }

  // Pick the winner among the top K complete configurations. Complete states
  // have every block measured, so their incremental vectors equal full
  // assemblies and their scores are final.
  std::vector<State> ranked = std::move(beam);
  std::stable_sort(ranked.begin(), ranked.end(), [](const State& a, const State& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.discovery < b.discovery;
  });
  size_t k = params.rescore_k <= 0 ? ranked.size()
                                   : std::min(ranked.size(), size_t(params.rescore_k));
  InterpretationResult best;
  best.score = -1.0;
  long best_discovery = std::numeric_limits<long>::max();
  int best_idx = -1;
  for (size_t i = 0; i < k; ++i) {
    double s = ranked[i].score;
    if (s > best.score + kEps ||
        (std::abs(s - best.score) <= kEps && ranked[i].discovery < best_discovery)) {
      best.score = s;
      best_discovery = ranked[i].discovery;
      best_idx = int(i);
    }
  }
  if (best_idx >= 0)
    for (size_t pi = 0; pi < schema.parts.size(); ++pi)
      best.configuration.assignment[schema.parts[pi].name] =
          pools[pi][ranked[best_idx].assign[pi]];
  best.stats = stats;
  best.stats.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

// Testing oracle: score every total configuration over the same pruned
// candidate pools, exact argmax, ties broken by enumeration order (which
// matches the beam's discovery order at unbounded width).
inline InterpretationResult exhaustive_interpret(const ImagePatch& img,
                                                 const StructureSchema& schema,
                                                 const TrainedModel& model,
                                                 long cap = 1000000,
                                                 const InterpretParams& params = {}) {
  auto t0 = std::chrono::steady_clock::now();
  PatchContext ctx = PatchContext::from_image(img);
  CandidateSet cands = extract_candidates(img, params.extraction);
  std::vector<std::vector<Primitive>> pools = detail::pruned_part_candidates(
      schema, cands, ctx, model.unary_stats, params.unary_z_max);
  std::vector<int> order = detail::search_part_order(schema);
  long total = 1;
  for (const auto& pool : pools) {
    if (total > cap / long(pool.size()) + 1) total = cap + 1;
    else total *= long(pool.size());
    if (total > cap)
      throw TooLarge("exhaustive_interpret: configuration count exceeds cap " +
                     std::to_string(cap));
  }
  detail::BlockCache cache(schema, ctx, pools);
  InterpretationResult best;
  best.score = -1.0;
  std::vector<size_t> idx(order.size(), 0);
  std::vector<int> assign(schema.parts.size(), 0);
  SearchStats stats;
  FeatureVector fv(schema.feature_vector_len(), 0.0);
  while (true) {
    for (size_t oi = 0; oi < order.size(); ++oi) assign[order[oi]] = int(idx[oi]);
    for (size_t si = 0; si < schema.relation_specs.size(); ++si)
      cache.write(int(si), assign, fv);
    double s = model.forest.score(fv);
    ++stats.expanded;
    if (s > best.score + kEps) {
      best.score = s;
      for (size_t pi = 0; pi < schema.parts.size(); ++pi)
        best.configuration.assignment[schema.parts[pi].name] = pools[pi][assign[pi]];
    }
    // Odometer increment, last part fastest.
    int oi = int(order.size()) - 1;
    while (oi >= 0) {
      if (++idx[oi] < pools[order[oi]].size()) break;
      idx[oi] = 0;
      --oi;
    }
    if (oi < 0) break;
  }
  best.stats = stats;
  best.stats.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

}  // namespace minterp
