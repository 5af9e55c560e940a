// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Benchmark construction from a caption corpus:
//
//   corpus --select_seed_prompts--> seeds per concept
//          --extract_attributes (LLM)--> candidate attributes per seed
//          --merge_concept_attributes + filter--> catalog entry per concept
//          --expand_prompts (LLM)--> one coarse prompt + dense prompts per seed
//
// build_dataset composes the stages, assigns ids and validates the result.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dimcim/adapters.hpp"
#include "dimcim/catalog.hpp"

namespace dimcim {

struct CaptionRecord {
  std::string id;
  std::string caption;
};

/// JSON Lines {"id","caption"}.
std::vector<CaptionRecord> read_caption_corpus(const std::filesystem::path& path);

struct SeedPrompt {
  std::string concept_name;
  std::string caption;
  std::string source_id;

  bool operator==(const SeedPrompt&) const = default;
};

/// Returns the lemma of the first noun of a caption, if any.
class NounTagger {
 public:
  virtual ~NounTagger() = default;
  virtual std::optional<std::string> first_noun(std::string_view caption) const = 0;
};

/// Lightweight fallback: skips leading determiners and numerals, takes the
/// leading noun phrase up to the first preposition, verb or conjunction, and
/// returns the first word of it found in the synonym table, else its last word.
class HeuristicNounTagger : public NounTagger {
 public:
  /// `synonyms` maps surface forms (any case, singular or plural) to lemmas.
  explicit HeuristicNounTagger(std::map<std::string, std::string> synonyms = {});
  /// Registers every concept name as its own lemma.
  void add_concepts(const std::vector<std::string>& concepts);
  std::optional<std::string> first_noun(std::string_view caption) const override;

 private:
  std::map<std::string, std::string> synonyms_;
};

struct SeedSelectionOptions {
  std::size_t count = 31;
  std::uint64_t rng_seed = 0;
  std::vector<std::string> exclusion_words = default_exclusion_words();

  static std::vector<std::string> default_exclusion_words();
};

/// Exactly `count` captions whose first noun is `concept_name`, sampled
/// uniformly without replacement (deterministic in rng_seed) after dropping
/// captions that contain an exclusion word. Returned in corpus order.
std::vector<SeedPrompt> select_seed_prompts(const std::vector<CaptionRecord>& corpus,
                                            std::string_view concept_name,
                                            const SeedSelectionOptions& options,
                                            const NounTagger& tagger);

struct AttributeExtraction {
  SeedPrompt seed;
  std::map<std::string, std::string> existing;  // type -> attribute found in the caption
  std::vector<AttributeType> candidates;        // type -> plausible attributes, reply order
};

/// Strips code fences and surrounding chatter and parses the JSON object in
/// an LLM completion; LlmProtocolError if there is none.
io::Json parse_llm_json(const std::string& reply);

AttributeExtraction extract_attributes(const SeedPrompt& seed, LlmAdapter& llm);

/// Declarative curation file {"drop_types": [...], "drop_attributes": {concept: [...]}}.
struct AttributeFilter {
  std::set<std::string> drop_types;
  std::map<std::string, std::set<std::string>> drop_attributes;

  /// Types that are visually ambiguous in still images.
  static AttributeFilter visually_ambiguous_defaults();
  static AttributeFilter load(const std::filesystem::path& path);
  static AttributeFilter from_json(const io::Json& j);
};

/// Case-folded union of candidates per type across seeds (first-seen order),
/// minus filtered types and attributes; keeps types with >= 2 attributes.
std::vector<AttributeType> merge_concept_attributes(const std::vector<AttributeExtraction>& extractions,
                                                    const AttributeFilter& filter);

struct Injection {
  std::string attribute_type;
  std::string attribute;
  std::optional<std::string> dense_text;  // nullopt = skipped as implausible
};

struct PromptExpansion {
  SeedPrompt seed;
  std::string coarse_text;
  std::vector<Injection> injections;
  std::size_t unknown_injections = 0;  // reply attributes absent from the catalog
  std::size_t invalid_injections = 0;  // dense texts missing the concept or attribute

  std::size_t skipped() const;
};

/// The attributes JSON handed to the expansion meta-prompt for one seed.
io::Json expansion_input(const SeedPrompt& seed, const std::vector<AttributeType>& types);

PromptExpansion expand_prompts(const SeedPrompt& seed, const std::vector<AttributeType>& types,
                               LlmAdapter& llm);

struct BuilderConfig {
  SeedSelectionOptions seeds;
  AttributeFilter filter = AttributeFilter::visually_ambiguous_defaults();
  bool allow_partial = false;
  std::size_t workers = 1;  // concurrent per-concept builds
  int llm_retries = 1;      // extra attempts after an LLM protocol error
  io::Json metadata = io::Json::object();
};

struct ConceptBuildReport {
  std::string concept_name;
  std::size_t seeds_selected = 0;
  std::size_t protocol_errors = 0;
  std::size_t subject_mismatches = 0;
  std::size_t leakages = 0;
  std::size_t skipped_injections = 0;
  std::size_t unknown_injections = 0;
  std::size_t invalid_injections = 0;
  std::size_t degenerate_type_drops = 0;
  std::size_t coarse_prompts = 0;
  std::size_t dense_prompts = 0;
  std::vector<std::string> warnings;
};

struct BuildReport {
  std::vector<ConceptBuildReport> concepts;
  std::size_t warnings() const;
  io::Json to_json() const;
};

struct BuildResult {
  BenchmarkDataset dataset;
  BuildReport report;
};

BuildResult build_dataset(const std::vector<CaptionRecord>& corpus,
                          const std::vector<std::string>& concepts, const BuilderConfig& config,
                          LlmAdapter& llm, const NounTagger* tagger = nullptr);

/// "{concept}-cp-{nnn}" / "{concept}-dp-{nnnn}", spaces in the concept
/// replaced by underscores.
std::string coarse_prompt_id(std::string_view concept_name, std::size_t index);
std::string dense_prompt_id(std::string_view concept_name, std::size_t index);

}  // namespace dimcim
