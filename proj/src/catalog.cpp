// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/catalog.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {
namespace {

using io::Json;

std::string at(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

void expect_keys(const Json& j, const std::string& loc,
                 std::initializer_list<std::string_view> required,
                 std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) throw ParseError(loc, "expected an object");
  for (auto key : required) {
    if (!j.contains(key)) throw ParseError(loc, "missing key '" + std::string(key) + "'");
  }
  for (const auto& [key, _] : j.items()) {
    const bool known =
        std::find(required.begin(), required.end(), key) != required.end() ||
        std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw ParseError(loc, "unknown key '" + key + "'");
  }
}

std::string get_string(const Json& j, std::string_view key, const std::string& loc) {
  const auto& v = j.at(key);
  if (!v.is_string()) {
    throw ParseError(loc + "." + std::string(key), "expected a string");
  }
  return v.get<std::string>();
}

const Json& get_array(const Json& j, std::string_view key, const std::string& loc) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ParseError(loc + "." + std::string(key), "expected an array");
  return v;
}

[[noreturn]] void fail(const std::string& loc, const char* rule, const std::string& what) {
  throw ValidationError(loc, rule, what);
}

}  // namespace

const AttributeType* Concept::find_type(std::string_view type_name) const {
  for (const auto& t : attribute_types) {
    if (t.name == type_name) return &t;
  }
  return nullptr;
}

const Concept* BenchmarkDataset::find_concept(std::string_view name) const {
  for (const auto& c : concepts) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const CoarsePrompt* BenchmarkDataset::find_coarse(std::string_view id) const {
  for (const auto& p : coarse_prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const DensePrompt* BenchmarkDataset::find_dense(std::string_view id) const {
  for (const auto& p : dense_prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::optional<std::string> leaked_attribute(const Concept& concept_entry,
                                            std::string_view text) {
  for (const auto& type : concept_entry.attribute_types) {
    for (const auto& attr : type.attributes) {
      if (text::contains_phrase(text, attr)) return attr;
    }
  }
  return std::nullopt;
}

void validate(const BenchmarkDataset& ds) {
  std::unordered_map<std::string, const Concept*> concepts;
  for (std::size_t i = 0; i < ds.concepts.size(); ++i) {
    const auto& c = ds.concepts[i];
    const auto loc = at("concepts", i);
    if (c.name.empty() || c.name != text::to_lower(c.name) || c.name != text::trim(c.name) ||
        text::tokenize(c.name).empty()) {
      fail(loc + ".name", "concept_name_invalid",
           "concept name must be a non-empty lowercase token string, got '" + c.name + "'");
    }
    if (!concepts.emplace(c.name, &c).second) {
      fail(loc + ".name", "concept_name_duplicate", "duplicate concept '" + c.name + "'");
    }
    if (c.attribute_types.empty()) {
      fail(loc + ".attribute_types", "concept_no_types",
           "concept '" + c.name + "' has no attribute types");
    }
    std::set<std::string> type_names;
    for (std::size_t j = 0; j < c.attribute_types.size(); ++j) {
      const auto& t = c.attribute_types[j];
      const auto tloc = at(loc + ".attribute_types", j);
      if (text::trim(t.name).empty()) fail(tloc + ".name", "type_name_empty", "empty type name");
      if (!type_names.insert(t.name).second) {
        fail(tloc + ".name", "type_name_duplicate", "duplicate attribute type '" + t.name + "'");
      }
      if (t.attributes.size() < 2) {
        fail(tloc + ".attributes", "type_too_few_attributes",
             "attribute type '" + t.name + "' needs at least 2 attributes");
      }
      std::set<std::string> seen;
      for (std::size_t m = 0; m < t.attributes.size(); ++m) {
        const auto& a = t.attributes[m];
        const auto aloc = at(tloc + ".attributes", m);
        if (text::tokenize(a).empty()) fail(aloc, "attribute_empty", "empty attribute string");
        if (!seen.insert(text::to_lower(a)).second) {
          fail(aloc, "attribute_duplicate", "duplicate attribute '" + a + "' in type '" + t.name + "'");
        }
      }
    }
  }

  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, const CoarsePrompt*> coarse;
  for (std::size_t i = 0; i < ds.coarse_prompts.size(); ++i) {
    const auto& p = ds.coarse_prompts[i];
    const auto loc = at("coarse_prompts", i);
    if (p.id.empty() || !ids.insert(p.id).second) {
      fail(loc + ".id", "prompt_id_duplicate", "prompt id '" + p.id + "' is empty or not unique");
    }
    coarse.emplace(p.id, &p);
    const auto it = concepts.find(p.concept_name);
    if (it == concepts.end()) {
      fail(loc + ".concept", "coarse_unknown_concept", "unknown concept '" + p.concept_name + "'");
    }
    if (!text::contains_noun(p.text, p.concept_name)) {
      fail(loc + ".text", "coarse_missing_concept",
           "coarse prompt '" + p.id + "' does not mention '" + p.concept_name + "'");
    }
    if (auto leak = leaked_attribute(*it->second, p.text)) {
      fail(loc + ".text", "coarse_attribute_leak",
           "coarse prompt '" + p.id + "' mentions attribute '" + *leak + "'");
    }
  }

  // (concept, type) -> distinct attributes covered by dense prompts
  std::map<std::pair<std::string, std::string>, std::set<std::string>> coverage;
  for (std::size_t i = 0; i < ds.dense_prompts.size(); ++i) {
    const auto& p = ds.dense_prompts[i];
    const auto loc = at("dense_prompts", i);
    if (p.id.empty() || !ids.insert(p.id).second) {
      fail(loc + ".id", "prompt_id_duplicate", "prompt id '" + p.id + "' is empty or not unique");
    }
    const auto cit = coarse.find(p.coarse_id);
    if (cit == coarse.end()) {
      fail(loc + ".coarse_id", "dense_unknown_coarse",
           "dense prompt '" + p.id + "' references unknown coarse prompt '" + p.coarse_id + "'");
    }
    if (cit->second->concept_name != p.concept_name) {
      fail(loc + ".concept", "dense_concept_mismatch",
           "dense prompt '" + p.id + "' concept differs from its coarse prompt");
    }
    const auto concept_it = concepts.find(p.concept_name);
    const AttributeType* type =
        concept_it == concepts.end() ? nullptr : concept_it->second->find_type(p.attribute_type);
    if (type == nullptr ||
        std::find(type->attributes.begin(), type->attributes.end(), p.attribute) ==
            type->attributes.end()) {
      fail(loc, "dense_unresolved_attribute",
           "dense prompt '" + p.id + "' attribute (" + p.concept_name + ", " + p.attribute_type +
               ", " + p.attribute + ") is not in the catalog");
    }
    if (!text::contains_noun(p.text, p.concept_name)) {
      fail(loc + ".text", "dense_missing_concept",
           "dense prompt '" + p.id + "' does not mention '" + p.concept_name + "'");
    }
    if (!text::contains_phrase(p.text, p.attribute)) {
      fail(loc + ".text", "dense_missing_attribute",
           "dense prompt '" + p.id + "' does not mention '" + p.attribute + "'");
    }
    coverage[{p.concept_name, p.attribute_type}].insert(p.attribute);
  }

  for (std::size_t i = 0; i < ds.concepts.size(); ++i) {
    const auto& c = ds.concepts[i];
    for (std::size_t j = 0; j < c.attribute_types.size(); ++j) {
      const auto it = coverage.find({c.name, c.attribute_types[j].name});
      if (it != coverage.end() && it->second.size() < 2) {
        fail(at(at("concepts", i) + ".attribute_types", j), "dense_degenerate_type",
             "dense prompts cover only one attribute of '" + c.name + ":" +
                 c.attribute_types[j].name + "'");
      }
    }
  }
}

Json to_json(const BenchmarkDataset& ds) {
  Json doc = Json::object();
  doc["metadata"] = ds.metadata.is_null() ? Json::object() : ds.metadata;
  Json concepts = Json::array();
  for (const auto& c : ds.concepts) {
    Json types = Json::array();
    for (const auto& t : c.attribute_types) {
      Json jt = Json::object();
      jt["name"] = t.name;
      jt["attributes"] = t.attributes;
      types.push_back(std::move(jt));
    }
    Json jc = Json::object();
    jc["name"] = c.name;
    jc["attribute_types"] = std::move(types);
    concepts.push_back(std::move(jc));
  }
  doc["concepts"] = std::move(concepts);
  Json coarse = Json::array();
  for (const auto& p : ds.coarse_prompts) {
    Json jp = Json::object();
    jp["id"] = p.id;
    jp["concept"] = p.concept_name;
    jp["text"] = p.text;
    if (p.seed_caption) jp["seed_caption"] = *p.seed_caption;
    coarse.push_back(std::move(jp));
  }
  doc["coarse_prompts"] = std::move(coarse);
  Json dense = Json::array();
  for (const auto& p : ds.dense_prompts) {
    Json jp = Json::object();
    jp["id"] = p.id;
    jp["coarse_id"] = p.coarse_id;
    jp["concept"] = p.concept_name;
    jp["attribute_type"] = p.attribute_type;
    jp["attribute"] = p.attribute;
    jp["text"] = p.text;
    dense.push_back(std::move(jp));
  }
  doc["dense_prompts"] = std::move(dense);
  return doc;
}

BenchmarkDataset dataset_from_json(const Json& doc) {
  expect_keys(doc, "", {"metadata", "concepts", "coarse_prompts", "dense_prompts"});
  BenchmarkDataset ds;
  if (!doc["metadata"].is_object()) throw ParseError("metadata", "expected an object");
  ds.metadata = doc["metadata"];

  const auto& concepts = get_array(doc, "concepts", "");
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const auto loc = at("concepts", i);
    const auto& jc = concepts[i];
    expect_keys(jc, loc, {"name", "attribute_types"});
    Concept c;
    c.name = get_string(jc, "name", loc);
    const auto& types = get_array(jc, "attribute_types", loc);
    for (std::size_t j = 0; j < types.size(); ++j) {
      const auto tloc = at(loc + ".attribute_types", j);
      expect_keys(types[j], tloc, {"name", "attributes"});
      AttributeType t;
      t.name = get_string(types[j], "name", tloc);
      const auto& attrs = get_array(types[j], "attributes", tloc);
      for (std::size_t m = 0; m < attrs.size(); ++m) {
        if (!attrs[m].is_string()) throw ParseError(at(tloc + ".attributes", m), "expected a string");
        t.attributes.push_back(attrs[m].get<std::string>());
      }
      c.attribute_types.push_back(std::move(t));
    }
    ds.concepts.push_back(std::move(c));
  }

  const auto& coarse = get_array(doc, "coarse_prompts", "");
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const auto loc = at("coarse_prompts", i);
    expect_keys(coarse[i], loc, {"id", "concept", "text"}, {"seed_caption"});
    CoarsePrompt p;
    p.id = get_string(coarse[i], "id", loc);
    p.concept_name = get_string(coarse[i], "concept", loc);
    p.text = get_string(coarse[i], "text", loc);
    if (coarse[i].contains("seed_caption")) p.seed_caption = get_string(coarse[i], "seed_caption", loc);
    ds.coarse_prompts.push_back(std::move(p));
  }

  const auto& dense = get_array(doc, "dense_prompts", "");
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto loc = at("dense_prompts", i);
    expect_keys(dense[i], loc, {"id", "coarse_id", "concept", "attribute_type", "attribute", "text"});
    DensePrompt p;
    p.id = get_string(dense[i], "id", loc);
    p.coarse_id = get_string(dense[i], "coarse_id", loc);
    p.concept_name = get_string(dense[i], "concept", loc);
    p.attribute_type = get_string(dense[i], "attribute_type", loc);
    p.attribute = get_string(dense[i], "attribute", loc);
    p.text = get_string(dense[i], "text", loc);
    ds.dense_prompts.push_back(std::move(p));
  }
  return ds;
}

std::string serialize(const BenchmarkDataset& dataset) {
  return to_json(dataset).dump(2) + "\n";
}

BenchmarkDataset parse_dataset(std::string_view contents) {
  Json doc;
  try {
    doc = Json::parse(contents);
  } catch (const Json::parse_error& e) {
    throw ParseError("", std::string("malformed JSON: ") + e.what());
  }
  BenchmarkDataset ds = dataset_from_json(doc);
  validate(ds);
  return ds;
}

BenchmarkDataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(io::read_file(path));
}

void save_dataset(const BenchmarkDataset& dataset, const std::filesystem::path& path) {
  validate(dataset);
  io::write_file_atomic(path, serialize(dataset));
}

std::string dataset_hash(const BenchmarkDataset& dataset) {
  return io::sha256_hex(serialize(dataset));
}

StatsSummary dataset_stats(const BenchmarkDataset& ds) {
  StatsSummary s;
  s.concepts = ds.concepts.size();
  s.coarse_prompts = ds.coarse_prompts.size();
  s.dense_prompts = ds.dense_prompts.size();
  std::size_t types = 0;
  for (const auto& c : ds.concepts) {
    types += c.attribute_types.size();
    for (const auto& t : c.attribute_types) s.attributes += t.attributes.size();
  }
  if (s.concepts > 0) {
    s.mean_types_per_concept = static_cast<double>(types) / static_cast<double>(s.concepts);
    s.mean_attributes_per_concept =
        static_cast<double>(s.attributes) / static_cast<double>(s.concepts);
  }
  if (s.coarse_prompts > 0) {
    s.mean_dense_per_coarse =
        static_cast<double>(s.dense_prompts) / static_cast<double>(s.coarse_prompts);
  }
  return s;
}

}  // namespace dimcim
