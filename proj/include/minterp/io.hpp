#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "minterp/evaluation.hpp"
#include "minterp/features.hpp"
#include "minterp/forest.hpp"
#include "minterp/geometry.hpp"
#include "minterp/inference.hpp"
#include "minterp/intervention.hpp"
#include "minterp/schema.hpp"

namespace minterp {

using nlohmann::json;

// ---- PGM (binary P5) -----------------------------------------------------

inline ImagePatch decode_pgm(const std::string& bytes, const std::string& origin) {
  size_t pos = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(origin + ": " + what + " at byte " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) fail("expected integer");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ParseError(origin + ": not a binary PGM (P5) file at byte 0");
  pos = 2;
  long w = read_int();
  long h = read_int();
  long maxval = read_int();
  if (w < 1 || h < 1 || w > kMaxPatchDim || h > kMaxPatchDim) fail("bad dimensions");
  if (maxval != 255) fail("unsupported maxval (need 255)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail("missing separator before payload");
  ++pos;
  size_t expected = size_t(w) * size_t(h);
  if (bytes.size() - pos < expected)
    throw ParseError(origin + ": truncated payload, expected " + std::to_string(expected) +
                     " bytes, got " + std::to_string(bytes.size() - pos));
  std::vector<double> data(expected);
  for (size_t i = 0; i < expected; ++i)
    data[i] = double(static_cast<unsigned char>(bytes[pos + i])) / 255.0;
  return ImagePatch(int(w), int(h), std::move(data));
}

inline ImagePatch load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return decode_pgm(ss.str(), path);
}

inline std::string encode_pgm(const ImagePatch& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.intensities.size());
  for (double v : img.intensities)
    out.push_back(char(uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return out;
}

inline void save_image(const std::string& path, const ImagePatch& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write image file: " + path);
  std::string bytes = encode_pgm(img);
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

// ---- Primitives <-> JSON -------------------------------------------------

inline json primitive_to_json(const Primitive& prim) {
  json j;
  switch (prim.kind()) {
    case PrimitiveKind::point:
      j["kind"] = "point";
      j["x"] = prim.point().x;
      j["y"] = prim.point().y;
      break;
    case PrimitiveKind::contour: {
      j["kind"] = "contour";
      j["closed"] = prim.contour().closed;
      json verts = json::array();
      for (const Vec2& v : prim.contour().vertices) verts.push_back({v.x, v.y});
      j["vertices"] = std::move(verts);
      break;
    }
    case PrimitiveKind::region:
      j["kind"] = "region";
      j["cx"] = prim.region().center_x;
      j["cy"] = prim.region().center_y;
      j["side"] = prim.region().side;
      break;
  }
  return j;
}

inline Primitive primitive_from_json(const json& j, const std::string& where) {
  try {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "point") return PointPrim{j.at("x").get<double>(), j.at("y").get<double>()};
    if (kind == "contour") {
      ContourPrim c;
      c.closed = j.at("closed").get<bool>();
      for (const json& v : j.at("vertices"))
        c.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      c.validate();
      return c;
    }
    if (kind == "region") {
      SquareRegionPrim r{j.at("cx").get<double>(), j.at("cy").get<double>(),
                         j.at("side").get<double>()};
      r.validate();
      return r;
    }
    throw ParseError(where + ": unknown primitive kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(where + ": malformed primitive: " + e.what());
  }
}

// ---- Annotations ---------------------------------------------------------

struct AnnotationDoc {
  std::string image_ref;
  Configuration parts;
};

inline json annotation_to_json(const AnnotationDoc& doc) {
  json parts = json::object();
  for (const auto& [name, prim] : doc.parts.assignment) parts[name] = primitive_to_json(prim);
  return json{{"version", 1}, {"image", doc.image_ref}, {"parts", std::move(parts)}};
}

inline AnnotationDoc annotation_from_json(const json& j, const std::string& origin) {
  AnnotationDoc doc;
  try {
    doc.image_ref = j.value("image", "");
    for (const auto& [name, pj] : j.at("parts").items())
      doc.parts.assignment[name] = primitive_from_json(pj, origin + ": part '" + name + "'");
  } catch (const json::exception& e) {
    throw ParseError(origin + ": malformed annotation: " + e.what());
  }
  return doc;
}

inline json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open file: " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write file: " + path);
  f << j.dump(2) << "\n";
}

inline AnnotationDoc load_annotation(const std::string& path) {
  return annotation_from_json(load_json_file(path), path);
}

// ---- Schemas -------------------------------------------------------------

inline json schema_to_json(const StructureSchema& s) {
  json parts = json::array();
  for (const PartDecl& p : s.parts) parts.push_back({{"name", p.name}, {"kind", kind_name(p.kind)}});
  json rels = json::array();
  for (const RelationSpec& r : s.relation_specs)
    rels.push_back({{"kind", relation_name(r.kind)}, {"args", r.args}});
  return json{{"version", 1},
              {"class_name", s.class_name},
              {"relation_set", relation_set_name(s.relation_set)},
              {"parts", std::move(parts)},
              {"relations", std::move(rels)}};
}

inline StructureSchema schema_from_json(const json& j, const std::string& origin) {
  StructureSchema s;
  try {
    s.class_name = j.at("class_name").get<std::string>();
    s.relation_set = relation_set_from_name(j.at("relation_set").get<std::string>());
    for (const json& p : j.at("parts"))
      s.parts.push_back(
          {p.at("name").get<std::string>(), kind_from_name(p.at("kind").get<std::string>())});
    int idx = 0;
    for (const json& r : j.at("relations")) {
      RelationSpec spec;
      try {
        spec.kind = relation_from_name(r.at("kind").get<std::string>());
      } catch (const ParseError& e) {
        throw SchemaViolation(origin + ": relation #" + std::to_string(idx) + ": " + e.what());
      }
      spec.args = r.at("args").get<std::vector<std::string>>();
      s.relation_specs.push_back(std::move(spec));
      ++idx;
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": malformed schema: " + e.what());
  }
  try {
    s.validate();
  } catch (const SchemaViolation& e) {
    throw SchemaViolation(origin + ": " + e.what());
  }
  return s;
}

inline StructureSchema load_schema(const std::string& path) {
  return schema_from_json(load_json_file(path), path);
}

// ---- Models --------------------------------------------------------------

inline json model_to_json(const TrainedModel& m) {
  json trees = json::array();
  for (const Tree& tree : m.forest.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.pos, n.neg});
    trees.push_back(std::move(nodes));
  }
  json stats = json::object();
  for (const auto& [name, ps] : m.unary_stats)
    stats[name] = {{"mean", ps.mean}, {"stddev", ps.stddev}};
  return json{{"version", 1},
              {"schema_fingerprint", m.forest.schema_fingerprint},
              {"feature_len", m.forest.feature_len},
              {"params",
               {{"trees", m.forest.params.trees},
                {"max_depth", m.forest.params.max_depth},
                {"min_leaf", m.forest.params.min_leaf},
                {"seed", m.forest.params.seed}}},
              {"positive_means", m.positive_means},
              {"unary_stats", std::move(stats)},
              {"trees", std::move(trees)}};
}

inline TrainedModel model_from_json(const json& j, const std::string& origin) {
  TrainedModel m;
  try {
    m.forest.schema_fingerprint = j.at("schema_fingerprint").get<uint64_t>();
    m.forest.feature_len = j.at("feature_len").get<int>();
    const json& p = j.at("params");
    m.forest.params = {p.at("trees").get<int>(), p.at("max_depth").get<int>(),
                       p.at("min_leaf").get<int>(), p.at("seed").get<uint64_t>()};
    m.positive_means = j.at("positive_means").get<std::vector<double>>();
    for (const auto& [name, ps] : j.at("unary_stats").items())
      m.unary_stats[name] = {ps.at("mean").get<std::vector<double>>(),
                             ps.at("stddev").get<std::vector<double>>()};
    for (const json& tj : j.at("trees")) {
      Tree tree;
      for (const json& nj : tj) {
        TreeNode n{nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(),
                   nj.at(3).get<int>(), nj.at(4).get<double>(), nj.at(5).get<double>()};
        if (n.feature >= m.forest.feature_len)
          throw ParseError(origin + ": tree node feature index out of range");
        tree.push_back(n);
      }
      m.forest.trees.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": malformed model: " + e.what());
  }
  return m;
}

inline void save_model(const std::string& path, const TrainedModel& m) {
  save_json_file(path, model_to_json(m));
}

inline TrainedModel load_model(const std::string& path, const StructureSchema* expect = nullptr) {
  TrainedModel m = model_from_json(load_json_file(path), path);
  if (expect && m.forest.schema_fingerprint != expect->fingerprint())
    throw ValidationError(path + ": model schema fingerprint " +
                          std::to_string(m.forest.schema_fingerprint) +
                          " does not match schema fingerprint " +
                          std::to_string(expect->fingerprint()));
  return m;
}

// ---- Dataset manifest ----------------------------------------------------

struct ManifestEntry {
  std::string image_path;
  std::string annotation_path;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  std::string class_name;
  std::string schema_path;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> negative_paths;
};

inline json manifest_to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const ManifestEntry& e : m.entries)
    entries.push_back(
        {{"image", e.image_path}, {"annotation", e.annotation_path}, {"split", e.split}});
  return json{{"version", 1},
              {"class_name", m.class_name},
              {"schema", m.schema_path},
              {"entries", std::move(entries)},
              {"negatives", m.negative_paths}};
}

inline DatasetManifest manifest_from_json(const json& j, const std::string& origin) {
  DatasetManifest m;
  try {
    m.class_name = j.at("class_name").get<std::string>();
    m.schema_path = j.value("schema", "");
    for (const json& e : j.at("entries")) {
      ManifestEntry me{e.at("image").get<std::string>(), e.at("annotation").get<std::string>(),
                       e.at("split").get<std::string>()};
      if (me.split != "train" && me.split != "test")
        throw ParseError(origin + ": bad split tag '" + me.split + "'");
      m.entries.push_back(std::move(me));
    }
    m.negative_paths = j.value("negatives", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ParseError(origin + ": malformed manifest: " + e.what());
  }
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
  return manifest_from_json(load_json_file(path), path);
}

// ---- Reports -------------------------------------------------------------

inline json eval_report_to_json(const EvalReport& r) {
  json per_part = json::object();
  for (const auto& [name, v] : r.per_part_mean_iou) per_part[name] = v;
  return json{{"version", 1},
              {"model_tag", r.model_tag},
              {"dataset_mean_iou", r.dataset_mean_iou},
              {"per_part_mean_iou", std::move(per_part)},
              {"per_image_mean_iou", r.per_image_mean_iou},
              {"image_count", r.image_count},
              {"part_count", r.part_count},
              {"aggregation", r.aggregation},
              {"iou_widths",
               {{"point_radius", r.widths.point_radius},
                {"contour_half_width", r.widths.contour_half_width}}}};
}

inline std::string eval_report_to_text(const EvalReport& r) {
  std::ostringstream os;
  os << "model: " << r.model_tag << "\n";
  os << "images: " << r.image_count << "  parts: " << r.part_count << "\n";
  os << "dataset mean IoU: " << r.dataset_mean_iou << "\n";
  os << "per-part mean IoU:\n";
  for (const auto& [name, v] : r.per_part_mean_iou) os << "  " << name << ": " << v << "\n";
  return os.str();
}

inline json interpretation_to_json(const InterpretationResult& r) {
  json parts = json::object();
  for (const auto& [name, prim] : r.configuration.assignment)
    parts[name] = primitive_to_json(prim);
  return json{{"version", 1},
              {"score", r.score},
              {"parts", std::move(parts)},
              // elapsed_seconds stays in-memory only: documents must be
              // byte-reproducible across runs.
              {"search_stats",
               {{"expanded", r.stats.expanded}, {"pruned", r.stats.pruned}}}};
}

inline json intervention_report_to_json(const InterventionReport& r) {
  json blocks = json::array();
  for (const BlockChange& ch : r.changed_blocks)
    blocks.push_back({{"spec_index", ch.spec_index}, {"before", ch.before}, {"after", ch.after}});
  return json{{"version", 1},
              {"original_score", r.original_score},
              {"transformed_score", r.transformed_score},
              {"delta", r.delta},
              {"ablated_relation", relation_name(r.ablated_relation)},
              {"transformed_uninterpretable", r.transformed_uninterpretable},
              {"changed_blocks", std::move(blocks)}};
}

inline json candidate_set_to_json(const CandidateSet& cs) {
  json points = json::array(), contours = json::array(), regions = json::array();
  for (const auto& c : cs.points)
    points.push_back({{"primitive", primitive_to_json(Primitive{c.prim})},
                      {"salience", c.salience}});
  for (const auto& c : cs.contours)
    contours.push_back({{"primitive", primitive_to_json(Primitive{c.prim})},
                        {"salience", c.salience}});
  for (const auto& c : cs.regions)
    regions.push_back({{"primitive", primitive_to_json(Primitive{c.prim})},
                       {"salience", c.salience}});
  return json{{"version", 1},
              {"points", std::move(points)},
              {"contours", std::move(contours)},
              {"regions", std::move(regions)}};
}

// ---- SVG overlay ---------------------------------------------------------

namespace detail {

inline std::string fmt_coord(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace detail

// Patch scaled x8 as per-run gray rects, primitives drawn on top, labeled by
// part name. Output bytes are a pure function of the inputs.
inline std::string render_overlay_svg(const ImagePatch& img, const Configuration& cfg) {
  const int s = 8;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << img.width * s << "\" height=\""
     << img.height * s << "\">\n";
  for (int y = 0; y < img.height; ++y) {
    int x = 0;
    while (x < img.width) {
      int run = 1;
      int v = int(std::lround(img.at(x, y) * 255.0));
      while (x + run < img.width && int(std::lround(img.at(x + run, y) * 255.0)) == v) ++run;
      os << "<rect x=\"" << x * s << "\" y=\"" << y * s << "\" width=\"" << run * s
         << "\" height=\"" << s << "\" fill=\"rgb(" << v << "," << v << "," << v << ")\"/>\n";
      x += run;
    }
  }
  for (const auto& [name, prim] : cfg.assignment) {
    switch (prim.kind()) {
      case PrimitiveKind::point: {
        const PointPrim& p = prim.point();
        os << "<circle cx=\"" << detail::fmt_coord(p.x * s) << "\" cy=\""
           << detail::fmt_coord(p.y * s)
           << "\" r=\"6\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << detail::fmt_coord(p.x * s + 8) << "\" y=\""
           << detail::fmt_coord(p.y * s) << "\" fill=\"red\" font-size=\"12\">" << name
           << "</text>\n";
        break;
      }
      case PrimitiveKind::contour: {
        const ContourPrim& c = prim.contour();
        os << (c.closed ? "<polygon" : "<polyline") << " points=\"";
        for (const Vec2& v : c.vertices)
          os << detail::fmt_coord(v.x * s) << "," << detail::fmt_coord(v.y * s) << " ";
        os << "\" fill=\"none\" stroke=\"lime\" stroke-width=\"2\"/>\n";
        Vec2 mid = c.vertices[c.vertices.size() / 2];
        os << "<text x=\"" << detail::fmt_coord(mid.x * s + 4) << "\" y=\""
           << detail::fmt_coord(mid.y * s) << "\" fill=\"lime\" font-size=\"12\">" << name
           << "</text>\n";
        break;
      }
      case PrimitiveKind::region: {
        const SquareRegionPrim& r = prim.region();
        os << "<rect x=\"" << detail::fmt_coord((r.center_x - r.half()) * s) << "\" y=\""
           << detail::fmt_coord((r.center_y - r.half()) * s) << "\" width=\""
           << detail::fmt_coord(r.side * s) << "\" height=\"" << detail::fmt_coord(r.side * s)
           << "\" fill=\"none\" stroke=\"cyan\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << detail::fmt_coord((r.center_x - r.half()) * s + 2) << "\" y=\""
           << detail::fmt_coord((r.center_y - r.half()) * s + 12)
           << "\" fill=\"cyan\" font-size=\"12\">" << name << "</text>\n";
        break;
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

inline void render_overlay(const ImagePatch& img, const Configuration& cfg,
                           const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write SVG file: " + path);
  f << render_overlay_svg(img, cfg);
}

}  // namespace minterp
