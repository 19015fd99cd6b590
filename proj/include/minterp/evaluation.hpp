#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>
#include <string>
#include <vector>

#include "minterp/features.hpp"
#include "minterp/forest.hpp"
#include "minterp/inference.hpp"
#include "minterp/schema.hpp"
#include "minterp/synthetic.hpp"

namespace minterp {

// Half-integer widths keep rasterized band edges between pixel centers, so
// sub-half-pixel localization error cannot flip whole pixel rows in or out
// of the mask.
struct IouWidths {
  double point_radius = 2.5;
  double contour_half_width = 2.5;
};

// Jaccard index of the rasterized masks. Both masks empty counts as perfect
// agreement.
inline double primitive_iou(const Primitive& predicted, const Primitive& truth, int w, int h,
                            const IouWidths& widths = {}) {
  if (predicted.kind() != truth.kind())
    throw KindMismatch("primitive_iou: comparing " + kind_name(predicted.kind()) + " against " +
                       kind_name(truth.kind()));
  double width = predicted.kind() == PrimitiveKind::point ? widths.point_radius
                                                          : widths.contour_half_width;
  Mask a = rasterize_primitive(predicted, width, w, h);
  Mask b = rasterize_primitive(truth, width, w, h);
  long inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) ++inter;
    if (a[i] || b[i]) ++uni;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

struct EvalReport {
  std::map<std::string, double> per_part_mean_iou;
  std::vector<double> per_image_mean_iou;
  double dataset_mean_iou = 0.0;
  int image_count = 0;
  int part_count = 0;
  std::string model_tag;  // "basic" or "extended"
  IouWidths widths;
  // Aggregation: per-part IoU averaged within each image, then across images.
  std::string aggregation = "per-part mean, then per-image mean";
};

inline EvalReport evaluate_dataset(const std::vector<Configuration>& predictions,
                                   const std::vector<Configuration>& truths,
                                   const std::vector<std::pair<int, int>>& patch_dims,
                                   const std::string& model_tag = "extended",
                                   const IouWidths& widths = {}) {
  if (predictions.size() != truths.size() || truths.size() != patch_dims.size())
    throw InvalidArgument("evaluate_dataset: misaligned lists");
  if (truths.empty()) throw InvalidArgument("evaluate_dataset: empty dataset");
  EvalReport rep;
  rep.model_tag = model_tag;
  rep.widths = widths;
  rep.image_count = int(truths.size());
  std::map<std::string, double> part_sum;
  std::map<std::string, int> part_n;
  for (size_t i = 0; i < truths.size(); ++i) {
    double image_sum = 0.0;
    int parts = 0;
    for (const auto& [name, truth_prim] : truths[i].assignment) {
      double iou = 0.0;  // missing predicted part scores 0
      auto it = predictions[i].assignment.find(name);
      if (it != predictions[i].assignment.end()) {
        if (it->second.kind() != truth_prim.kind())
          throw ValidationError("evaluate_dataset: part '" + name + "' kind mismatch in image " +
                                std::to_string(i));
        iou = primitive_iou(it->second, truth_prim, patch_dims[i].first, patch_dims[i].second,
                            widths);
      }
      // Predictions must not carry unknown parts.
      image_sum += iou;
      ++parts;
      part_sum[name] += iou;
      part_n[name] += 1;
    }
    for (const auto& [name, prim] : predictions[i].assignment)
      if (!truths[i].assignment.count(name))
        throw ValidationError("evaluate_dataset: predicted part '" + name +
                              "' absent from ground truth in image " + std::to_string(i));
    rep.per_image_mean_iou.push_back(parts > 0 ? image_sum / parts : 1.0);
  }
  for (const auto& [name, sum] : part_sum) rep.per_part_mean_iou[name] = sum / part_n[name];
  rep.part_count = int(part_sum.size());
  double total = 0.0;
  for (double v : rep.per_image_mean_iou) total += v;
  rep.dataset_mean_iou = total / rep.per_image_mean_iou.size();
  return rep;
}

// ---- Training pipeline ----------------------------------------------------

struct PipelineParams {
  int n_negatives = 25000;
  double snap_min_iou = 0.5;
  ForestParams forest;
  InterpretParams interpret;
};

// Replace each annotated part with the extracted candidate that best overlaps
// it (when the overlap clears min_iou). Training on snapped annotations keeps
// the positive feature distribution aligned with what the search scores at
// inference time, where only extracted candidates are available; exact
// annotation geometry has artificially tight relation statistics that a
// forest would overfit.
inline AnnotatedPatch snap_to_candidates(const StructureSchema& schema, const AnnotatedPatch& ap,
                                         double min_iou,
                                         const CandidateExtractionParams& extraction = {},
                                         const IouWidths& widths = {}) {
  CandidateSet cands = extract_candidates(ap.img, extraction);
  AnnotatedPatch out = ap;
  for (const PartDecl& part : schema.parts) {
    const Primitive& truth = ap.truth.at(part.name);
    double best = -1.0;
    Primitive best_prim;
    auto consider = [&](const Primitive& p) {
      double iou = primitive_iou(p, truth, ap.img.width, ap.img.height, widths);
      if (iou > best) {
        best = iou;
        best_prim = p;
      }
    };
    switch (part.kind) {
      case PrimitiveKind::point:
        for (const auto& c : cands.points) consider(c.prim);
        break;
      case PrimitiveKind::contour:
        for (const auto& c : cands.contours) consider(c.prim);
        break;
      case PrimitiveKind::region:
        for (const auto& c : cands.regions) consider(c.prim);
        break;
    }
    if (best >= min_iou) out.truth.assignment[part.name] = best_prim;
  }
  return out;
}

// Fits a model for a schema: positive vectors from candidate-snapped ground
// truth, sampled negatives, unary stats, positive-mean imputation vector,
// forest.
inline TrainedModel train_pipeline(const StructureSchema& schema,
                                   const std::vector<AnnotatedPatch>& train_pos,
                                   const std::vector<ImagePatch>& train_neg,
                                   const PipelineParams& params, int threads = 1) {
  schema.validate();
  std::vector<AnnotatedPatch> snapped(train_pos.size());
  {
    std::atomic<size_t> cursor{0};
    auto work = [&] {
      for (size_t i = cursor.fetch_add(1); i < train_pos.size(); i = cursor.fetch_add(1))
        snapped[i] = snap_to_candidates(schema, train_pos[i], params.snap_min_iou,
                                        params.interpret.extraction);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
  }
  std::vector<FeatureVector> pos_vectors;
  for (const AnnotatedPatch& ap : snapped) {
    PatchContext ctx = PatchContext::from_image(ap.img);
    pos_vectors.push_back(assemble_feature_vector(schema, ap.truth, ctx));
  }
  std::vector<FeatureVector> neg_vectors =
      sample_negatives(schema, snapped, train_neg, params.n_negatives, params.forest.seed,
                       threads);
  TrainedModel model;
  model.positive_means.assign(schema.feature_vector_len(), 0.0);
  for (const FeatureVector& fv : pos_vectors)
    for (size_t i = 0; i < fv.size(); ++i) model.positive_means[i] += fv[i] / pos_vectors.size();
  model.unary_stats = unary_part_statistics(schema, snapped);
  model.forest = train_forest(pos_vectors, neg_vectors, params.forest, schema.fingerprint(),
                              threads);
  return model;
}

struct SplitCorpus {
  std::vector<AnnotatedPatch> train_pos;
  std::vector<AnnotatedPatch> test_pos;
  std::vector<ImagePatch> negatives;
};

// Last third of the positives is the held-out test split.
inline SplitCorpus split_corpus(const PlantedCorpus& corpus) {
  SplitCorpus out;
  size_t n = corpus.positives.size();
  size_t n_train = n - n / 3;
  for (size_t i = 0; i < n; ++i)
    (i < n_train ? out.train_pos : out.test_pos).push_back(corpus.positives[i]);
  out.negatives = corpus.negatives;
  return out;
}

inline EvalReport run_eval(const StructureSchema& schema, const TrainedModel& model,
                           const std::vector<AnnotatedPatch>& test,
                           const std::string& tag, const InterpretParams& ip = {},
                           int threads = 1) {
  std::vector<Configuration> preds(test.size()), truths;
  std::vector<std::pair<int, int>> dims;
  {
    std::atomic<size_t> cursor{0};
    auto work = [&] {
      for (size_t i = cursor.fetch_add(1); i < test.size(); i = cursor.fetch_add(1))
        preds[i] = interpret(test[i].img, schema, model, ip).configuration;
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
  }
  for (const AnnotatedPatch& ap : test) {
    truths.push_back(ap.truth);
    dims.push_back({ap.img.width, ap.img.height});
  }
  return evaluate_dataset(preds, truths, dims, tag);
}

// Basic-vs-extended comparison: same parts, relation specs filtered to the
// basic set for the first model.
inline std::pair<EvalReport, EvalReport> compare_relation_sets(const PlantedCorpus& corpus,
                                                               const PipelineParams& params,
                                                               int threads = 1) {
  SplitCorpus split = split_corpus(corpus);
  StructureSchema basic = corpus.schema.basic_subset();
  bool has_non_basic = false;
  for (const RelationSpec& s : corpus.schema.relation_specs)
    if (!relation_is_basic(s.kind)) has_non_basic = true;
  if (!has_non_basic)
    throw InvalidArgument("compare_relation_sets: corpus schema has no non-basic relations");
  TrainedModel basic_model = train_pipeline(basic, split.train_pos, split.negatives, params,
                                            threads);
  TrainedModel ext_model = train_pipeline(corpus.schema, split.train_pos, split.negatives, params,
                                          threads);
  EvalReport basic_rep = run_eval(basic, basic_model, split.test_pos, "basic", params.interpret,
                                  threads);
  EvalReport ext_rep = run_eval(corpus.schema, ext_model, split.test_pos, "extended",
                                params.interpret, threads);
  return {basic_rep, ext_rep};
}

}  // namespace minterp
