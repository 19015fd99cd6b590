// Command-line frontend: candidate extraction, training, interpretation,
// evaluation, relation-set comparison, interventions, and synthetic corpus
// generation. Exit codes: 0 success, 1 validation/usage error, 2 runtime
// error (I/O, uninterpretable input, resource limits).

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minterp/evaluation.hpp"
#include "minterp/intervention.hpp"
#include "minterp/io.hpp"
#include "minterp/synthetic.hpp"

namespace fs = std::filesystem;
using namespace minterp;

namespace {

std::string resolve(const std::string& base_file, const std::string& rel) {
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(base_file).parent_path() / p).string();
}

struct LoadedDataset {
  std::vector<AnnotatedPatch> train_pos;
  std::vector<AnnotatedPatch> test_pos;
  std::vector<ImagePatch> negatives;
};

LoadedDataset load_dataset(const std::string& manifest_path) {
  DatasetManifest man = load_manifest(manifest_path);
  LoadedDataset ds;
  for (const ManifestEntry& e : man.entries) {
    AnnotatedPatch ap;
    ap.img = load_image(resolve(manifest_path, e.image_path));
    ap.truth = load_annotation(resolve(manifest_path, e.annotation_path)).parts;
    (e.split == "train" ? ds.train_pos : ds.test_pos).push_back(std::move(ap));
  }
  for (const std::string& p : man.negative_paths)
    ds.negatives.push_back(load_image(resolve(manifest_path, p)));
  return ds;
}

void check_parts_match(const StructureSchema& schema, const LoadedDataset& ds) {
  auto check = [&](const AnnotatedPatch& ap) {
    for (const PartDecl& part : schema.parts)
      if (!ap.truth.assignment.count(part.name))
        throw ValidationError("annotation missing part '" + part.name + "' required by schema");
  };
  for (const auto& ap : ds.train_pos) check(ap);
  for (const auto& ap : ds.test_pos) check(ap);
}

int run(int argc, char** argv) {
  CLI::App app{"Structured interpretation of minimal image patches"};
  app.require_subcommand(1);
  app.fallthrough(true);
  app.set_config("--config", "", "Config file with flag defaults (flags win)");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (never affects output bytes)")
      ->capture_default_str();

  // candidates
  auto* c_cand = app.add_subcommand("candidates", "Extract candidate primitives from a patch");
  std::string cand_image, cand_out, cand_svg;
  c_cand->add_option("--image", cand_image, "Input PGM (P5) patch")->required();
  c_cand->add_option("--out", cand_out, "Output candidate-set JSON")->required();
  c_cand->add_option("--svg", cand_svg, "Optional SVG overlay of candidates");

  // synth
  auto* c_synth = app.add_subcommand("synth", "Generate a planted synthetic corpus");
  std::string synth_class = "head", synth_dir;
  int n_pos = 120, n_neg = 40;
  double synth_noise = 0.05;
  c_synth->add_option("--class", synth_class, "Corpus class: head or link")
      ->check(CLI::IsMember({"head", "link"}))
      ->capture_default_str();
  c_synth->add_option("--out", synth_dir, "Output directory")->required();
  c_synth->add_option("--n-pos", n_pos, "Positive examples")->capture_default_str();
  c_synth->add_option("--n-neg", n_neg, "Negative examples")->capture_default_str();
  c_synth->add_option("--noise", synth_noise, "Geometric/intensity noise level")
      ->capture_default_str();

  // train
  auto* c_train = app.add_subcommand("train", "Train an interpretation model");
  std::string train_schema, train_data, train_out;
  int negatives = 25000, positives_cap = 0, trees = 100, depth = 12;
  c_train->add_option("--schema", train_schema, "Structure schema JSON")->required();
  c_train->add_option("--data", train_data, "Dataset manifest JSON")->required();
  c_train->add_option("--out", train_out, "Output model JSON")->required();
  c_train->add_option("--negatives", negatives, "Negative feature vectors to sample")
      ->capture_default_str();
  c_train->add_option("--positives-cap", positives_cap, "Cap on training positives (0 = all)")
      ->capture_default_str();
  c_train->add_option("--trees", trees, "Forest size")->capture_default_str();
  c_train->add_option("--depth", depth, "Maximum tree depth")->capture_default_str();

  // interpret
  auto* c_interp = app.add_subcommand("interpret", "Interpret a novel patch");
  std::string in_image, in_schema, in_model, in_out, in_svg;
  c_interp->add_option("--image", in_image, "Input PGM (P5) patch")->required();
  c_interp->add_option("--schema", in_schema, "Structure schema JSON")->required();
  c_interp->add_option("--model", in_model, "Trained model JSON")->required();
  c_interp->add_option("--out", in_out, "Output interpretation JSON")->required();
  c_interp->add_option("--svg", in_svg, "Optional SVG overlay");

  // evaluate
  auto* c_eval = app.add_subcommand("evaluate", "Evaluate a model on the test split");
  std::string ev_schema, ev_data, ev_model, ev_out;
  c_eval->add_option("--schema", ev_schema, "Structure schema JSON")->required();
  c_eval->add_option("--data", ev_data, "Dataset manifest JSON")->required();
  c_eval->add_option("--model", ev_model, "Trained model JSON")->required();
  c_eval->add_option("--out", ev_out, "Output report JSON")->required();

  // compare
  auto* c_cmp = app.add_subcommand("compare", "Basic-vs-extended relation-set comparison");
  std::string cmp_schema, cmp_data, cmp_out;
  int cmp_negatives = 25000, cmp_trees = 100, cmp_depth = 12;
  c_cmp->add_option("--schema", cmp_schema, "Extended structure schema JSON")->required();
  c_cmp->add_option("--data", cmp_data, "Dataset manifest JSON")->required();
  c_cmp->add_option("--out", cmp_out, "Output comparison JSON")->required();
  c_cmp->add_option("--negatives", cmp_negatives, "Negatives per model")->capture_default_str();
  c_cmp->add_option("--trees", cmp_trees, "Forest size")->capture_default_str();
  c_cmp->add_option("--depth", cmp_depth, "Maximum tree depth")->capture_default_str();

  // intervene
  auto* c_int = app.add_subcommand("intervene", "Apply an intervention transform and re-score");
  std::string iv_image, iv_schema, iv_model, iv_out_img, iv_out, iv_kind = "recolor",
              iv_pixels, iv_relation = "intensity_extremum";
  double iv_amp = 2.0;
  c_int->add_option("--image", iv_image, "Input PGM (P5) patch")->required();
  c_int->add_option("--schema", iv_schema, "Structure schema JSON")->required();
  c_int->add_option("--model", iv_model, "Trained model JSON")->required();
  c_int->add_option("--out-image", iv_out_img, "Transformed patch PGM")->required();
  c_int->add_option("--out", iv_out, "Output report JSON")->required();
  c_int->add_option("--kind", iv_kind, "Transform: recolor or sketch")
      ->check(CLI::IsMember({"recolor", "sketch"}))
      ->capture_default_str();
  c_int->add_option("--pixels", iv_pixels, "Recolor targets as x,y;x,y (max 4)");
  c_int->add_option("--amplitude", iv_amp, "Sketch displacement amplitude, pixels")
      ->capture_default_str();
  c_int->add_option("--relation", iv_relation, "Relation kind to report block changes for")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (*c_cand) {
    ImagePatch img = load_image(cand_image);
    CandidateSet cs = extract_candidates(img);
    save_json_file(cand_out, candidate_set_to_json(cs));
    if (!cand_svg.empty()) {
      Configuration cfg;
      int i = 0;
      for (const auto& c : cs.points) cfg.assignment["pt" + std::to_string(i++)] = Primitive{c.prim};
      i = 0;
      for (const auto& c : cs.contours)
        cfg.assignment["ct" + std::to_string(i++)] = Primitive{c.prim};
      i = 0;
      for (const auto& c : cs.regions)
        cfg.assignment["rg" + std::to_string(i++)] = Primitive{c.prim};
      render_overlay(img, cfg, cand_svg);
    }
    std::cout << "candidates: " << cs.points.size() << " points, " << cs.contours.size()
              << " contours, " << cs.regions.size() << " regions -> " << cand_out << "\n";
  } else if (*c_synth) {
    SyntheticClass cls = synth_class == "head" ? SyntheticClass::head : SyntheticClass::link;
    PlantedCorpus corpus = generate_planted_corpus(cls, n_pos, n_neg, synth_noise, seed);
    fs::create_directories(fs::path(synth_dir) / "images");
    fs::create_directories(fs::path(synth_dir) / "annotations");
    DatasetManifest man;
    man.class_name = corpus.schema.class_name;
    man.schema_path = "schema.json";
    save_json_file((fs::path(synth_dir) / "schema.json").string(),
                   schema_to_json(corpus.schema));
    size_t n_train = corpus.positives.size() - corpus.positives.size() / 3;
    for (size_t i = 0; i < corpus.positives.size(); ++i) {
      char tag[32];
      std::snprintf(tag, sizeof tag, "pos_%04zu", i);
      std::string img_rel = "images/" + std::string(tag) + ".pgm";
      std::string ann_rel = "annotations/" + std::string(tag) + ".json";
      save_image((fs::path(synth_dir) / img_rel).string(), corpus.positives[i].img);
      AnnotationDoc doc{img_rel, corpus.positives[i].truth};
      save_json_file((fs::path(synth_dir) / ann_rel).string(), annotation_to_json(doc));
      man.entries.push_back({img_rel, ann_rel, i < n_train ? "train" : "test"});
    }
    for (size_t i = 0; i < corpus.negatives.size(); ++i) {
      char tag[32];
      std::snprintf(tag, sizeof tag, "neg_%04zu", i);
      std::string img_rel = "images/" + std::string(tag) + ".pgm";
      save_image((fs::path(synth_dir) / img_rel).string(), corpus.negatives[i]);
      man.negative_paths.push_back(img_rel);
    }
    save_json_file((fs::path(synth_dir) / "manifest.json").string(), manifest_to_json(man));
    std::cout << "synth: " << corpus.positives.size() << " positives, "
              << corpus.negatives.size() << " negatives -> " << synth_dir << "\n";
  } else if (*c_train) {
    StructureSchema schema = load_schema(train_schema);
    LoadedDataset ds = load_dataset(train_data);
    check_parts_match(schema, ds);
    if (positives_cap > 0 && int(ds.train_pos.size()) > positives_cap)
      ds.train_pos.resize(size_t(positives_cap));
    PipelineParams pp;
    pp.n_negatives = negatives;
    pp.forest.trees = trees;
    pp.forest.max_depth = depth;
    pp.forest.seed = seed;
    TrainedModel model = train_pipeline(schema, ds.train_pos, ds.negatives, pp, threads);
    save_model(train_out, model);
    std::cout << "train: " << ds.train_pos.size() << " positives, " << negatives
              << " sampled negatives -> " << train_out << "\n";
  } else if (*c_interp) {
    StructureSchema schema = load_schema(in_schema);
    TrainedModel model = load_model(in_model, &schema);
    ImagePatch img = load_image(in_image);
    InterpretationResult r = interpret(img, schema, model);
    save_json_file(in_out, interpretation_to_json(r));
    if (!in_svg.empty()) render_overlay(img, r.configuration, in_svg);
    std::cout << "interpret: score " << r.score << " -> " << in_out << "\n";
  } else if (*c_eval) {
    StructureSchema schema = load_schema(ev_schema);
    TrainedModel model = load_model(ev_model, &schema);
    LoadedDataset ds = load_dataset(ev_data);
    check_parts_match(schema, ds);
    if (ds.test_pos.empty()) throw ValidationError(ev_data + ": no test-split entries");
    EvalReport rep = run_eval(schema, model, ds.test_pos,
                              relation_set_name(schema.relation_set));
    save_json_file(ev_out, eval_report_to_json(rep));
    std::cout << eval_report_to_text(rep);
  } else if (*c_cmp) {
    StructureSchema schema = load_schema(cmp_schema);
    LoadedDataset ds = load_dataset(cmp_data);
    check_parts_match(schema, ds);
    if (ds.test_pos.empty()) throw ValidationError(cmp_data + ": no test-split entries");
    PlantedCorpus corpus;
    corpus.schema = schema;
    for (const auto& ap : ds.train_pos) corpus.positives.push_back(ap);
    for (const auto& ap : ds.test_pos) corpus.positives.push_back(ap);
    corpus.negatives = ds.negatives;
    PipelineParams pp;
    pp.n_negatives = cmp_negatives;
    pp.forest.trees = cmp_trees;
    pp.forest.max_depth = cmp_depth;
    pp.forest.seed = seed;
    auto [basic_rep, ext_rep] = compare_relation_sets(corpus, pp, threads);
    json out{{"version", 1},
             {"basic", eval_report_to_json(basic_rep)},
             {"extended", eval_report_to_json(ext_rep)},
             {"extended_minus_basic",
              ext_rep.dataset_mean_iou - basic_rep.dataset_mean_iou}};
    save_json_file(cmp_out, out);
    std::cout << "compare: basic " << basic_rep.dataset_mean_iou << ", extended "
              << ext_rep.dataset_mean_iou << " -> " << cmp_out << "\n";
  } else if (*c_int) {
    StructureSchema schema = load_schema(iv_schema);
    TrainedModel model = load_model(iv_model, &schema);
    ImagePatch img = load_image(iv_image);
    InterventionSpec spec;
    spec.seed = seed;
    spec.target_relation = relation_from_name(iv_relation);
    if (iv_kind == "recolor") {
      spec.kind = InterventionKind::recolor_pixels;
      std::stringstream ss(iv_pixels);
      std::string tok;
      while (std::getline(ss, tok, ';')) {
        size_t comma = tok.find(',');
        if (comma == std::string::npos)
          throw InvalidArgument("--pixels: expected x,y pairs separated by ';'");
        spec.pixels.push_back({std::stoi(tok.substr(0, comma)), std::stoi(tok.substr(comma + 1))});
      }
      if (spec.pixels.empty()) throw InvalidArgument("--pixels required for recolor");
    } else {
      spec.kind = InterventionKind::render_sketch;
      spec.amplitude = iv_amp;
    }
    InterventionReport rep = measure_intervention(img, spec, schema, model);
    save_image(iv_out_img, apply_intervention(img, spec));
    save_json_file(iv_out, intervention_report_to_json(rep));
    std::cout << "intervene: score " << rep.original_score << " -> " << rep.transformed_score
              << " (delta " << rep.delta << ") -> " << iv_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
