#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "minterp/geometry.hpp"
#include "minterp/relations.hpp"

namespace minterp {

struct PartDecl {
  std::string name;
  PrimitiveKind kind = PrimitiveKind::point;
};

struct RelationSpec {
  RelationKind kind = RelationKind::location;
  std::vector<std::string> args;  // part names, length = arity
};

enum class RelationSetTag { basic, extended };

inline std::string relation_set_name(RelationSetTag t) {
  return t == RelationSetTag::basic ? "basic" : "extended";
}

inline RelationSetTag relation_set_from_name(const std::string& s) {
  if (s == "basic") return RelationSetTag::basic;
  if (s == "extended") return RelationSetTag::extended;
  throw ParseError("unknown relation set tag: " + s);
}

struct StructureSchema {
  std::string class_name;
  std::vector<PartDecl> parts;
  std::vector<RelationSpec> relation_specs;
  RelationSetTag relation_set = RelationSetTag::extended;

  int part_index(const std::string& name) const {
    for (size_t i = 0; i < parts.size(); ++i)
      if (parts[i].name == name) return int(i);
    return -1;
  }

  int feature_vector_len() const {
    int len = 0;
    for (const RelationSpec& s : relation_specs) len += relation_feature_len(s.kind);
    return len;
  }

  // Offset of each spec's block within the feature vector.
  std::vector<int> block_offsets() const {
    std::vector<int> out;
    int off = 0;
    for (const RelationSpec& s : relation_specs) {
      out.push_back(off);
      off += relation_feature_len(s.kind);
    }
    return out;
  }

  void validate() const {
    if (class_name.empty()) throw SchemaViolation("schema: empty class name");
    if (parts.empty()) throw SchemaViolation("schema: empty parts list");
    for (size_t i = 0; i < parts.size(); ++i)
      for (size_t j = i + 1; j < parts.size(); ++j)
        if (parts[i].name == parts[j].name)
          throw SchemaViolation("schema: duplicate part name '" + parts[i].name + "'");
    for (size_t si = 0; si < relation_specs.size(); ++si) {
      const RelationSpec& s = relation_specs[si];
      std::string where = "schema: relation spec #" + std::to_string(si) + " (" +
                          relation_name(s.kind) + ")";
      int arity = int(s.args.size());
      if (!relation_allows_arity(s.kind, arity))
        throw SchemaViolation(where + ": arity " + std::to_string(arity) + " not allowed");
      std::vector<PrimitiveKind> want = relation_arg_kinds(s.kind, arity);
      for (int ai = 0; ai < arity; ++ai) {
        int pi = part_index(s.args[ai]);
        if (pi < 0) throw SchemaViolation(where + ": unknown part '" + s.args[ai] + "'");
        if (!relation_accepts_any_kind(s.kind) && parts[pi].kind != want[ai])
          throw SchemaViolation(where + ": part '" + s.args[ai] + "' has kind " +
                                kind_name(parts[pi].kind) + ", relation needs " +
                                kind_name(want[ai]));
      }
      if (relation_set == RelationSetTag::basic && !relation_is_basic(s.kind))
        throw SchemaViolation(where + ": non-basic relation in a basic-tagged schema");
    }
  }

  // FNV-1a over the canonical textual form; stable across serialization.
  uint64_t fingerprint() const {
    std::string canon = class_name + "|" + relation_set_name(relation_set) + "|";
    for (const PartDecl& p : parts) canon += p.name + ":" + kind_name(p.kind) + ";";
    canon += "|";
    for (const RelationSpec& s : relation_specs) {
      canon += relation_name(s.kind) + "(";
      for (const std::string& a : s.args) canon += a + ",";
      canon += ");";
    }
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char ch : canon) {
      hash ^= ch;
      hash *= 1099511628211ull;
    }
    return hash;
  }

  // Drop non-basic relation specs; used for the basic-vs-extended comparison.
  StructureSchema basic_subset() const {
    StructureSchema out = *this;
    out.relation_set = RelationSetTag::basic;
    out.relation_specs.clear();
    for (const RelationSpec& s : relation_specs)
      if (relation_is_basic(s.kind)) out.relation_specs.push_back(s);
    return out;
  }
};

// Assignment of concrete primitives to schema parts. Total for scoring;
// partial only inside the search.
struct Configuration {
  std::map<std::string, Primitive> assignment;

  bool has(const std::string& part) const { return assignment.count(part) > 0; }
  const Primitive& at(const std::string& part) const {
    auto it = assignment.find(part);
    if (it == assignment.end())
      throw SchemaViolation("configuration missing part '" + part + "'");
    return it->second;
  }
};

using FeatureVector = std::vector<double>;

}  // namespace minterp
