// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Concept / attribute-type / attribute hierarchy and the benchmark dataset
// built on top of it: coarse prompts (concept only) and dense prompts (concept
// plus exactly one attribute), with their JSON file format.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dimcim/io.hpp"

namespace dimcim {

struct AttributeType {
  std::string name;
  std::vector<std::string> attributes;

  bool operator==(const AttributeType&) const = default;
};

struct Concept {
  std::string name;
  std::vector<AttributeType> attribute_types;

  const AttributeType* find_type(std::string_view type_name) const;
  bool operator==(const Concept&) const = default;
};

struct CoarsePrompt {
  std::string id;
  std::string concept_name;
  std::string text;
  std::optional<std::string> seed_caption;

  bool operator==(const CoarsePrompt&) const = default;
};

struct DensePrompt {
  std::string id;
  std::string coarse_id;
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  std::string text;

  bool operator==(const DensePrompt&) const = default;
};

struct BenchmarkDataset {
  io::Json metadata = io::Json::object();
  std::vector<Concept> concepts;
  std::vector<CoarsePrompt> coarse_prompts;
  std::vector<DensePrompt> dense_prompts;

  const Concept* find_concept(std::string_view name) const;
  const CoarsePrompt* find_coarse(std::string_view id) const;
  const DensePrompt* find_dense(std::string_view id) const;

  bool operator==(const BenchmarkDataset&) const = default;
};

struct StatsSummary {
  std::size_t concepts = 0;
  std::size_t attributes = 0;  // (concept, type, attribute) triples
  std::size_t coarse_prompts = 0;
  std::size_t dense_prompts = 0;
  double mean_types_per_concept = 0.0;
  double mean_attributes_per_concept = 0.0;
  double mean_dense_per_coarse = 0.0;
};

/// Throws ValidationError on the first violated invariant, with a locator
/// such as "dense_prompts[4]" and a rule name such as "dense_unresolved_attribute".
void validate(const BenchmarkDataset& dataset);

/// Checks the coarse-prompt invariants of `text` against one concept's
/// catalog entry. Returns the first leaked attribute, if any.
std::optional<std::string> leaked_attribute(const Concept& concept_entry,
                                            std::string_view text);

io::Json to_json(const BenchmarkDataset& dataset);
/// Strict schema decode (unknown keys rejected). Does not run validate().
BenchmarkDataset dataset_from_json(const io::Json& doc);

/// Canonical serialized form; this is what save_dataset writes.
std::string serialize(const BenchmarkDataset& dataset);
BenchmarkDataset parse_dataset(std::string_view contents);

BenchmarkDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const BenchmarkDataset& dataset, const std::filesystem::path& path);

/// SHA-256 of the canonical serialization.
std::string dataset_hash(const BenchmarkDataset& dataset);

StatsSummary dataset_stats(const BenchmarkDataset& dataset);

}  // namespace dimcim
