#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "minterp/candidates.hpp"
#include "minterp/image_ops.hpp"
#include "minterp/relations.hpp"
#include "minterp/schema.hpp"

namespace minterp {

// Shared per-patch context so repeated feature assembly does not recompute
// blurs and edge maps.
struct PatchContext {
  ImagePatch img;
  EdgeMap edges;
  DoGMaps dog;

  static PatchContext from_image(const ImagePatch& img) {
    return {img, compute_edge_map(img), dog_maps(img)};
  }
};

inline FeatureBlock evaluate_relation_spec(const StructureSchema&, const RelationSpec& spec,
                                           const Configuration& cfg, const PatchContext& ctx) {
  int w = ctx.img.width, h = ctx.img.height;
  for (const std::string& part : spec.args)
    if (!cfg.has(part))
      throw SchemaViolation("incomplete configuration: part '" + part + "' not assigned");
  auto arg = [&](int i) -> const Primitive& { return cfg.at(spec.args[i]); };
  switch (spec.kind) {
    case RelationKind::location:
      if (spec.args.size() == 1) return rel_location(arg(0), w, h);
      return rel_relative_location(arg(0), arg(1), w, h);
    case RelationKind::intensity_extremum:
      return rel_intensity_extremum(arg(0).point(), ctx.img, &ctx.dog);
    case RelationKind::line_circle_deviation:
      return rel_line_circle_deviation(arg(0).contour());
    case RelationKind::appearance_along_contour:
      return rel_appearance_along_contour(arg(0).contour(), ctx.img);
    case RelationKind::appearance_in_region:
      return rel_appearance_in_region(arg(0).region(), ctx.img);
    case RelationKind::ending_distance:
      return rel_ending_distance(arg(0).contour(), arg(1).contour(), w, h);
    case RelationKind::continuity:
      return rel_continuity(arg(0).contour(), arg(1).contour(), w, h);
    case RelationKind::length_ratio:
      return rel_length_ratio(arg(0).contour(), arg(1).contour());
    case RelationKind::parallelism:
      return rel_parallelism(arg(0).contour(), arg(1).contour(), w, h);
    case RelationKind::appearance_coherence:
      return rel_appearance_coherence(arg(0).region(), arg(1).region(), ctx.img);
    case RelationKind::cover:
      return rel_cover(arg(0).contour(), arg(1).point());
    case RelationKind::bridging:
      return rel_bridging(arg(0).contour(), arg(1).contour(), ctx.edges);
    case RelationKind::containment:
      return rel_containment(arg(0).point(), arg(1).region());
    case RelationKind::ends_in_region:
      return rel_ends_in_region(arg(0).contour(), arg(1).region());
  }
  throw SchemaViolation("unhandled relation kind");
}

inline FeatureVector assemble_feature_vector(const StructureSchema& schema,
                                             const Configuration& cfg, const PatchContext& ctx) {
  FeatureVector fv;
  fv.reserve(schema.feature_vector_len());
  for (const RelationSpec& spec : schema.relation_specs) {
    FeatureBlock block = evaluate_relation_spec(schema, spec, cfg, ctx);
    fv.insert(fv.end(), block.begin(), block.end());
  }
  return fv;
}

// Partial assembly for search: blocks whose arguments are all assigned are
// measured; the rest are copied from the supplied imputation vector.
inline FeatureVector assemble_feature_vector_imputed(const StructureSchema& schema,
                                                     const Configuration& cfg,
                                                     const PatchContext& ctx,
                                                     const FeatureVector& imputed) {
  FeatureVector fv = imputed;
  std::vector<int> offsets = schema.block_offsets();
  for (size_t si = 0; si < schema.relation_specs.size(); ++si) {
    const RelationSpec& spec = schema.relation_specs[si];
    bool ready = true;
    for (const std::string& part : spec.args)
      if (!cfg.has(part)) {
        ready = false;
        break;
      }
    if (!ready) continue;
    FeatureBlock block = evaluate_relation_spec(schema, spec, cfg, ctx);
    std::copy(block.begin(), block.end(), fv.begin() + offsets[si]);
  }
  return fv;
}

// ---- Memoized relation blocks over fixed candidate pools ------------------

namespace detail {

// Configurations are index vectors into per-part candidate pools; a spec's
// block is keyed by its argument candidate indices, so shared
// sub-configurations are measured once.
struct BlockCache {
  const StructureSchema& schema;
  const PatchContext& ctx;
  const std::vector<std::vector<Primitive>>& pools;
  std::vector<int> offsets;
  std::vector<std::vector<int>> spec_args;      // part index per argument
  std::vector<std::vector<int>> specs_of_part;  // specs touching each part
  std::vector<std::unordered_map<uint64_t, FeatureBlock>> memo;

  BlockCache(const StructureSchema& s, const PatchContext& c,
             const std::vector<std::vector<Primitive>>& p)
      : schema(s), ctx(c), pools(p), offsets(s.block_offsets()) {
    std::map<std::string, int> part_index;
    for (size_t pi = 0; pi < schema.parts.size(); ++pi)
      part_index[schema.parts[pi].name] = int(pi);
    specs_of_part.resize(schema.parts.size());
    for (size_t si = 0; si < schema.relation_specs.size(); ++si) {
      std::vector<int> args;
      for (const std::string& name : schema.relation_specs[si].args)
        args.push_back(part_index.at(name));
      for (int pi : args)
        if (specs_of_part[pi].empty() || specs_of_part[pi].back() != int(si))
          specs_of_part[pi].push_back(int(si));
      spec_args.push_back(std::move(args));
    }
    memo.resize(schema.relation_specs.size());
  }

  bool ready(int si, const std::vector<int>& assign) const {
    for (int pi : spec_args[si])
      if (assign[pi] < 0) return false;
    return true;
  }

  const FeatureBlock& block(int si, const std::vector<int>& assign) {
    uint64_t key = 0;
    for (int pi : spec_args[si]) key = key * 4096 + uint64_t(assign[pi]);
    auto [it, inserted] = memo[si].try_emplace(key);
    if (inserted) {
      Configuration cfg;
      for (int pi : spec_args[si])
        cfg.assignment[schema.parts[pi].name] = pools[pi][assign[pi]];
      it->second = evaluate_relation_spec(schema, schema.relation_specs[si], cfg, ctx);
    }
    return it->second;
  }

  // Overwrite fv's block for spec si in place.
  void write(int si, const std::vector<int>& assign, FeatureVector& fv) {
    const FeatureBlock& b = block(si, assign);
    std::copy(b.begin(), b.end(), fv.begin() + offsets[si]);
  }
};

}  // namespace detail

// ---- Unary part statistics (diagonal Gaussian summary per part) ----------

struct PartStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-3
};

using UnaryStats = std::map<std::string, PartStats>;

// Unary summary of one primitive: normalized location plus the kind-specific
// unary relation block.
inline std::vector<double> unary_block(const Primitive& prim, const PatchContext& ctx) {
  std::vector<double> out = rel_location(prim, ctx.img.width, ctx.img.height);
  FeatureBlock extra;
  switch (prim.kind()) {
    case PrimitiveKind::point:
      extra = rel_intensity_extremum(prim.point(), ctx.img, &ctx.dog);
      break;
    case PrimitiveKind::contour:
      extra = rel_appearance_along_contour(prim.contour(), ctx.img);
      break;
    case PrimitiveKind::region:
      extra = rel_appearance_in_region(prim.region(), ctx.img);
      break;
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

struct AnnotatedPatch {
  ImagePatch img;
  Configuration truth;
};

inline UnaryStats unary_part_statistics(const StructureSchema& schema,
                                        const std::vector<AnnotatedPatch>& positives) {
  if (positives.size() < 2)
    throw InsufficientData("unary_part_statistics: need >= 2 positive examples");
  UnaryStats stats;
  for (const PartDecl& part : schema.parts) {
    std::vector<std::vector<double>> blocks;
    for (const AnnotatedPatch& ap : positives) {
      PatchContext ctx = PatchContext::from_image(ap.img);
      blocks.push_back(unary_block(ap.truth.at(part.name), ctx));
    }
    size_t d = blocks.front().size();
    PartStats ps;
    ps.mean.assign(d, 0.0);
    ps.stddev.assign(d, 0.0);
    for (const auto& b : blocks)
      for (size_t i = 0; i < d; ++i) ps.mean[i] += b[i] / blocks.size();
    for (const auto& b : blocks)
      for (size_t i = 0; i < d; ++i) {
        double diff = b[i] - ps.mean[i];
        ps.stddev[i] += diff * diff / blocks.size();
      }
    for (size_t i = 0; i < d; ++i) ps.stddev[i] = std::max(1e-3, std::sqrt(ps.stddev[i]));
    stats[part.name] = ps;
  }
  return stats;
}

// Mean per-dimension |z| against a part's Gaussian summary.
inline double unary_z_score(const PartStats& ps, const std::vector<double>& block) {
  double z = 0.0;
  for (size_t i = 0; i < ps.mean.size(); ++i)
    z += std::abs(block[i] - ps.mean[i]) / ps.stddev[i] / ps.mean.size();
  return z;
}

// ---- Negative sampling ---------------------------------------------------

// 50% random kind-respecting assignments from candidates on negative
// patches, 50% hard negatives: ground-truth configurations with two parts
// reassigned to other candidates on the same patch.
inline std::vector<FeatureVector> sample_negatives(const StructureSchema& schema,
                                                   const std::vector<AnnotatedPatch>& positives,
                                                   const std::vector<ImagePatch>& negatives,
                                                   int n, uint64_t seed, int threads = 1) {
  if (n < 1) throw InvalidArgument("sample_negatives: n must be >= 1");
  if (positives.empty() && negatives.empty())
    throw InvalidArgument("sample_negatives: no source patches");
  std::mt19937_64 rng(seed);

  // Sampled configurations are index vectors into per-part candidate pools;
  // a per-source block cache then assembles the vectors without re-measuring
  // shared blocks (hard negatives differ from ground truth in two parts, so
  // most blocks repeat).
  struct Source {
    PatchContext ctx;
    std::vector<std::vector<Primitive>> pools;  // per schema part
    std::vector<int> cand_count;                // pool prefix that is extracted candidates
    std::vector<int> truth_idx;                 // -1 for clutter patches
    std::unique_ptr<detail::BlockCache> cache;
  };
  std::vector<Source> neg_sources(negatives.size()), pos_sources(positives.size());
  {
    auto build = [&](Source& src, const ImagePatch& img, const Configuration* truth) {
      src.ctx = PatchContext::from_image(img);
      CandidateSet cands = extract_candidates(img);
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
        src.cand_count.push_back(int(pool.size()));
        if (truth) {
          pool.push_back(truth->at(part.name));
          src.truth_idx.push_back(int(pool.size()) - 1);
        } else {
          src.truth_idx.push_back(-1);
        }
        src.pools.push_back(std::move(pool));
      }
      src.cache = std::make_unique<detail::BlockCache>(schema, src.ctx, src.pools);
    };
    std::atomic<size_t> cursor{0};
    size_t total = negatives.size() + positives.size();
    auto work = [&] {
      for (size_t i = cursor.fetch_add(1); i < total; i = cursor.fetch_add(1)) {
        if (i < negatives.size())
          build(neg_sources[i], negatives[i], nullptr);
        else
          build(pos_sources[i - negatives.size()], positives[i - negatives.size()].img,
                &positives[i - negatives.size()].truth);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
  }

  // Phase 1: draw all configurations sequentially (the RNG stream, and so
  // the result, is independent of the thread count).
  struct Job {
    Source* src;
    std::vector<int> assign;
  };
  std::vector<Job> jobs;
  jobs.reserve(n);
  int n_random = negatives.empty() ? 0 : n / 2;
  if (positives.empty()) n_random = n;

  int failures = 0;
  while (int(jobs.size()) < n_random && failures < 1000) {
    Source& src = neg_sources[rng() % neg_sources.size()];
    std::vector<int> assign(schema.parts.size(), -1);
    bool ok = true;
    for (size_t pi = 0; pi < schema.parts.size(); ++pi) {
      if (src.cand_count[pi] == 0) {
        ok = false;
        break;
      }
      assign[pi] = int(rng() % src.cand_count[pi]);
    }
    if (!ok) {
      ++failures;
      continue;
    }
    jobs.push_back({&src, std::move(assign)});
  }
  failures = 0;
  while (int(jobs.size()) < n && failures < 1000) {
    if (pos_sources.empty()) break;
    Source& src = pos_sources[rng() % pos_sources.size()];
    std::vector<int> assign = src.truth_idx;
    // Swap two random parts onto other candidates of the matching kind.
    size_t i = rng() % schema.parts.size();
    size_t j = rng() % schema.parts.size();
    if (schema.parts.size() > 1)
      while (j == i) j = rng() % schema.parts.size();
    bool ok = true;
    for (size_t pi : {i, j}) {
      if (src.cand_count[pi] == 0) {
        ok = false;
        break;
      }
      assign[pi] = int(rng() % src.cand_count[pi]);
      if (schema.parts.size() == 1) break;
    }
    if (!ok) {
      ++failures;
      continue;
    }
    jobs.push_back({&src, std::move(assign)});
  }
  if (int(jobs.size()) < n)
    throw InsufficientData("sample_negatives: exhausted sources with only " +
                           std::to_string(jobs.size()) + " of " + std::to_string(n) + " vectors");

  // Phase 2: assemble through the per-source caches. Workers own disjoint
  // source subsets so cache access stays single-threaded; output slots are
  // fixed by draw order, so results do not depend on the thread count.
  std::vector<FeatureVector> out(jobs.size());
  int fv_len = schema.feature_vector_len();
  auto assemble = [&](size_t k) {
    FeatureVector fv(fv_len, 0.0);
    for (size_t si = 0; si < schema.relation_specs.size(); ++si)
      jobs[k].src->cache->write(int(si), jobs[k].assign, fv);
    out[k] = std::move(fv);
  };
  if (threads <= 1) {
    for (size_t k = 0; k < jobs.size(); ++k) assemble(k);
  } else {
    std::map<const Source*, int> owner;
    int next_owner = 0;
    for (const Job& jb : jobs)
      if (!owner.count(jb.src)) owner[jb.src] = next_owner++ % threads;
    auto work = [&](int w) {
      for (size_t k = 0; k < jobs.size(); ++k)
        if (owner.at(jobs[k].src) == w) assemble(k);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace minterp
