// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/promptgen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <future>
#include <random>

#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

using io::Json;

std::vector<CaptionRecord> read_caption_corpus(const std::filesystem::path& path) {
  std::vector<CaptionRecord> out;
  const auto records = io::read_jsonl(path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.is_object() || !r.contains("id") || !r.contains("caption") || !r["caption"].is_string()) {
      throw ParseError(path.string() + ":record " + std::to_string(i),
                       "expected {\"id\": string, \"caption\": string}");
    }
    out.push_back({r["id"].is_string() ? r["id"].get<std::string>() : r["id"].dump(),
                   r["caption"].get<std::string>()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// First-noun heuristic

namespace {

bool in_list(std::string_view word, std::initializer_list<std::string_view> list) {
  return std::find(list.begin(), list.end(), word) != list.end();
}

bool is_determiner(std::string_view w) {
  if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return true;
  }
  return in_list(w, {"a", "an", "the", "this", "that", "these", "those", "some", "several", "many",
                     "few", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
                     "ten", "its", "his", "her", "their", "our", "my", "your", "another", "each",
                     "every", "both", "all", "there"});
}

bool is_boundary(std::string_view w) {
  if (w.size() > 4 && w.substr(w.size() - 3) == "ing") return true;
  return in_list(w, {"in",    "on",    "at",     "with",   "without", "near",  "under",  "by",
                     "of",    "next",  "beside", "behind", "over",    "above", "below",  "from",
                     "into",  "onto",  "to",     "for",    "inside",  "outside", "against",
                     "along", "across", "through", "between", "among", "around", "atop",
                     "is",    "are",   "was",    "were",   "be",      "been",  "has",    "have",
                     "had",   "sits",  "sit",    "sat",    "stands",  "stand", "stood",  "lies",
                     "lays",  "rests", "looks",  "appears", "holds",  "waits", "flies",  "eats",
                     "and",   "or",    "but",    "that",   "which",   "while", "who",    "as"});
}

}  // namespace

HeuristicNounTagger::HeuristicNounTagger(std::map<std::string, std::string> synonyms) {
  for (auto& [surface, lemma] : synonyms) {
    synonyms_[text::join(text::tokenize(surface), " ")] = text::to_lower(lemma);
  }
}

void HeuristicNounTagger::add_concepts(const std::vector<std::string>& concepts) {
  for (const auto& c : concepts) {
    synonyms_.emplace(text::join(text::tokenize(c), " "), text::to_lower(c));
  }
}

std::optional<std::string> HeuristicNounTagger::first_noun(std::string_view caption) const {
  const auto tokens = text::tokenize(caption);
  std::size_t i = 0;
  while (i < tokens.size() && is_determiner(tokens[i])) ++i;
  std::vector<std::string> phrase;
  for (; i < tokens.size(); ++i) {
    if (is_boundary(tokens[i]) || is_determiner(tokens[i])) {
      if (!phrase.empty()) break;
      continue;  // a leading participle modifies the noun that follows
    }
    phrase.push_back(tokens[i]);
  }
  if (phrase.empty()) return std::nullopt;

  // Longest synonym starting at each position, earliest position first.
  for (std::size_t start = 0; start < phrase.size(); ++start) {
    for (std::size_t len = phrase.size() - start; len >= 1; --len) {
      std::vector<std::string> window(phrase.begin() + static_cast<std::ptrdiff_t>(start),
                                      phrase.begin() + static_cast<std::ptrdiff_t>(start + len));
      auto it = synonyms_.find(text::join(window, " "));
      if (it == synonyms_.end()) {
        window.back() = text::singularize(window.back());
        it = synonyms_.find(text::join(window, " "));
      }
      if (it != synonyms_.end()) return it->second;
    }
  }
  return text::singularize(phrase.back());
}

// ---------------------------------------------------------------------------

std::vector<std::string> SeedSelectionOptions::default_exclusion_words() {
  return {"child", "children", "person", "persons", "woman", "women", "man",
          "men",   "boy",      "boys",   "girl",    "girls", "people"};
}

std::vector<SeedPrompt> select_seed_prompts(const std::vector<CaptionRecord>& corpus,
                                            std::string_view concept_name,
                                            const SeedSelectionOptions& options,
                                            const NounTagger& tagger) {
  if (options.count == 0) throw std::invalid_argument("seed count must be positive");
  const std::string target = text::to_lower(concept_name);
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& caption = corpus[i].caption;
    const bool excluded =
        std::any_of(options.exclusion_words.begin(), options.exclusion_words.end(),
                    [&](const std::string& w) { return text::contains_phrase(caption, w); });
    if (excluded) continue;
    const auto noun = tagger.first_noun(caption);
    if (noun && *noun == target) survivors.push_back(i);
  }
  if (survivors.size() < options.count) {
    throw InsufficientCaptions(std::string(concept_name), survivors.size(), options.count);
  }
  // Partial Fisher-Yates driven by raw engine output (std distributions are
  // not portable across standard libraries).
  std::mt19937_64 rng(options.rng_seed ^ text::fnv1a(target));
  for (std::size_t i = 0; i < options.count; ++i) {
    const std::uint64_t span = survivors.size() - i;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(survivors[i], survivors[i + static_cast<std::size_t>(r % span)]);
  }
  survivors.resize(options.count);
  std::sort(survivors.begin(), survivors.end());

  std::vector<SeedPrompt> seeds;
  seeds.reserve(survivors.size());
  for (auto i : survivors) {
    seeds.push_back({std::string(concept_name), corpus[i].caption, corpus[i].id});
  }
  return seeds;
}

// ---------------------------------------------------------------------------

Json parse_llm_json(const std::string& reply) {
  auto try_parse = [](std::string_view s) -> std::optional<Json> {
    try {
      Json j = Json::parse(s);
      if (j.is_object()) return j;
    } catch (const Json::parse_error&) {
    }
    return std::nullopt;
  };
  if (auto j = try_parse(reply)) return *j;
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    if (auto j = try_parse(std::string_view(reply).substr(open, close - open + 1))) return *j;
  }
  throw LlmProtocolError("reply is not a JSON object", reply);
}

namespace {

std::string normalize_attribute(const std::string& s) { return text::to_lower(text::trim(s)); }

bool same_subject(const std::string& subject, const std::string& concept_name) {
  const auto a = text::tokenize(subject);
  const auto b = text::tokenize(concept_name);
  if (a.empty() || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && text::singularize(a[i]) != b[i]) return false;
  }
  return true;
}

}  // namespace

AttributeExtraction extract_attributes(const SeedPrompt& seed, LlmAdapter& llm) {
  const std::string raw =
      llm.complete(kAttributeExtractionTemplate, {{"seed_prompt", seed.caption}});
  const Json j = parse_llm_json(raw);

  if (!j.contains("main_subject") || !j["main_subject"].is_string()) {
    throw LlmProtocolError("missing string 'main_subject'", raw);
  }
  if (!j.contains("visual_modifiers") || !j["visual_modifiers"].is_object()) {
    throw LlmProtocolError("missing object 'visual_modifiers'", raw);
  }
  const Json& vm = j["visual_modifiers"];
  const Json existing = vm.value("existing", Json::object());
  const Json possible = vm.value("possible_attributes", Json::object());
  if (!existing.is_object() || !possible.is_object()) {
    throw LlmProtocolError("'existing' and 'possible_attributes' must be objects", raw);
  }
  const std::string subject = j["main_subject"].get<std::string>();
  if (!same_subject(subject, seed.concept_name)) throw SubjectMismatch(seed.concept_name, subject);

  AttributeExtraction out;
  out.seed = seed;
  for (const auto& [type, values] : possible.items()) {
    if (!values.is_array()) throw LlmProtocolError("possible_attributes." + type + " is not a list", raw);
    AttributeType t{normalize_attribute(type), {}};
    for (const auto& v : values) {
      if (!v.is_string()) throw LlmProtocolError("non-string attribute under " + type, raw);
      const auto a = normalize_attribute(v.get<std::string>());
      if (!a.empty() && std::find(t.attributes.begin(), t.attributes.end(), a) == t.attributes.end()) {
        t.attributes.push_back(a);
      }
    }
    out.candidates.push_back(std::move(t));
  }
  for (const auto& [type, value] : existing.items()) {
    if (!value.is_string()) throw LlmProtocolError("existing." + type + " is not a string", raw);
    const auto t = normalize_attribute(type);
    const auto a = normalize_attribute(value.get<std::string>());
    if (a.empty()) continue;
    out.existing[t] = a;
    auto it = std::find_if(out.candidates.begin(), out.candidates.end(),
                           [&](const AttributeType& c) { return c.name == t; });
    if (it == out.candidates.end()) {
      out.candidates.push_back({t, {a}});
    } else if (std::find(it->attributes.begin(), it->attributes.end(), a) == it->attributes.end()) {
      it->attributes.insert(it->attributes.begin(), a);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

AttributeFilter AttributeFilter::visually_ambiguous_defaults() {
  AttributeFilter f;
  f.drop_types = {"age", "size", "motion", "model", "model_name", "model name", "accessories"};
  return f;
}

AttributeFilter AttributeFilter::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("filter", "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "drop_types" && key != "drop_attributes") {
      throw ParseError("filter", "unknown key '" + key + "'");
    }
  }
  AttributeFilter f;
  if (j.contains("drop_types")) {
    if (!j["drop_types"].is_array()) throw ParseError("filter.drop_types", "expected an array");
    for (const auto& t : j["drop_types"]) f.drop_types.insert(normalize_attribute(t.get<std::string>()));
  }
  if (j.contains("drop_attributes")) {
    if (!j["drop_attributes"].is_object()) throw ParseError("filter.drop_attributes", "expected an object");
    for (const auto& [c, list] : j["drop_attributes"].items()) {
      if (!list.is_array()) throw ParseError("filter.drop_attributes." + c, "expected an array");
      for (const auto& a : list) f.drop_attributes[c].insert(normalize_attribute(a.get<std::string>()));
    }
  }
  return f;
}

AttributeFilter AttributeFilter::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(io::read_file(path)));
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
}

std::vector<AttributeType> merge_concept_attributes(const std::vector<AttributeExtraction>& extractions,
                                                    const AttributeFilter& filter) {
  std::vector<AttributeType> merged;
  std::string concept_name;
  for (const auto& ex : extractions) {
    if (concept_name.empty()) concept_name = ex.seed.concept_name;
    if (ex.seed.concept_name != concept_name) {
      throw std::invalid_argument("merge_concept_attributes: extractions span several concepts");
    }
    for (const auto& cand : ex.candidates) {
      const auto type_name = normalize_attribute(cand.name);
      auto it = std::find_if(merged.begin(), merged.end(),
                             [&](const AttributeType& t) { return t.name == type_name; });
      if (it == merged.end()) {
        merged.push_back({type_name, {}});
        it = std::prev(merged.end());
      }
      for (const auto& raw : cand.attributes) {
        const auto a = normalize_attribute(raw);
        if (std::find(it->attributes.begin(), it->attributes.end(), a) == it->attributes.end()) {
          it->attributes.push_back(a);
        }
      }
    }
  }
  const auto dropped_attrs = filter.drop_attributes.find(concept_name);
  std::vector<AttributeType> out;
  for (auto& t : merged) {
    if (filter.drop_types.count(t.name)) continue;
    if (dropped_attrs != filter.drop_attributes.end()) {
      std::erase_if(t.attributes, [&](const std::string& a) { return dropped_attrs->second.count(a) > 0; });
    }
    if (t.attributes.size() >= 2) out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t PromptExpansion::skipped() const {
  return static_cast<std::size_t>(std::count_if(injections.begin(), injections.end(),
                                                [](const Injection& i) { return !i.dense_text; }));
}

Json expansion_input(const SeedPrompt& seed, const std::vector<AttributeType>& types) {
  Json existing = Json::object();
  Json possible = Json::object();
  for (const auto& t : types) {
    for (const auto& a : t.attributes) {
      if (text::contains_phrase(seed.caption, a)) {
        existing[t.name] = a;
        break;
      }
    }
    possible[t.name] = t.attributes;
  }
  Json j = Json::object();
  j["caption"] = seed.caption;
  j["main_subject"] = seed.concept_name;
  j["visual_modifiers"] = Json::object({{"existing", existing}, {"possible_attributes", possible}});
  return j;
}

PromptExpansion expand_prompts(const SeedPrompt& seed, const std::vector<AttributeType>& types,
                               LlmAdapter& llm) {
  if (types.empty()) throw std::invalid_argument("expand_prompts needs at least one attribute type");
  const std::string raw = llm.complete(
      kPromptExpansionTemplate, {{"attributes_json", expansion_input(seed, types).dump(4)}});
  const Json j = parse_llm_json(raw);
  if (!j.contains("seed_prompt") || !j["seed_prompt"].is_string()) {
    throw LlmProtocolError("missing string 'seed_prompt'", raw);
  }
  const Json modified = j.value("modified_prompts", Json::array());
  if (!modified.is_array()) throw LlmProtocolError("'modified_prompts' is not a list", raw);

  PromptExpansion out;
  out.seed = seed;
  out.coarse_text = text::trim(j["seed_prompt"].get<std::string>());
  if (!text::contains_noun(out.coarse_text, seed.concept_name)) {
    throw LlmProtocolError("coarse prompt '" + out.coarse_text + "' lost the concept", raw);
  }
  const Concept catalog_entry{seed.concept_name, types};
  if (auto leak = leaked_attribute(catalog_entry, out.coarse_text)) {
    throw CoarseLeakage(out.coarse_text, *leak);
  }

  // (type, attribute) -> first generated dense text
  std::map<std::pair<std::string, std::string>, std::string> replies;
  for (const auto& m : modified) {
    if (!m.is_object() || !m.contains("attribute_type") || !m.contains("attribute_value") ||
        !m.contains("generated_prompt") || !m["attribute_type"].is_string() ||
        !m["attribute_value"].is_string() || !m["generated_prompt"].is_string()) {
      throw LlmProtocolError("malformed modified_prompts entry", raw);
    }
    const auto type = normalize_attribute(m["attribute_type"].get<std::string>());
    const auto attr = normalize_attribute(m["attribute_value"].get<std::string>());
    const auto* t = catalog_entry.find_type(type);
    if (!t || std::find(t->attributes.begin(), t->attributes.end(), attr) == t->attributes.end()) {
      ++out.unknown_injections;
      continue;
    }
    replies.emplace(std::make_pair(type, attr), text::trim(m["generated_prompt"].get<std::string>()));
  }

  for (const auto& t : types) {
    for (const auto& a : t.attributes) {
      Injection inj{t.name, a, std::nullopt};
      if (auto it = replies.find({t.name, a}); it != replies.end()) {
        if (text::contains_noun(it->second, seed.concept_name) && text::contains_phrase(it->second, a)) {
          inj.dense_text = it->second;
        } else {
          ++out.invalid_injections;
        }
      }
      out.injections.push_back(std::move(inj));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t BuildReport::warnings() const {
  std::size_t n = 0;
  for (const auto& c : concepts) n += c.warnings.size();
  return n;
}

Json BuildReport::to_json() const {
  Json arr = Json::array();
  Json totals = Json::object();
  auto add = [&](const char* key, std::size_t v) {
    totals[key] = totals.value(key, std::size_t{0}) + v;
  };
  for (const auto& c : concepts) {
    Json j = Json::object();
    j["concept"] = c.concept_name;
    j["seeds_selected"] = c.seeds_selected;
    j["protocol_errors"] = c.protocol_errors;
    j["subject_mismatches"] = c.subject_mismatches;
    j["leakages"] = c.leakages;
    j["skipped_injections"] = c.skipped_injections;
    j["unknown_injections"] = c.unknown_injections;
    j["invalid_injections"] = c.invalid_injections;
    j["degenerate_type_drops"] = c.degenerate_type_drops;
    j["coarse_prompts"] = c.coarse_prompts;
    j["dense_prompts"] = c.dense_prompts;
    j["warnings"] = c.warnings;
    for (const auto& [key, value] : j.items()) {
      if (value.is_number_unsigned()) add(key.c_str(), value.get<std::size_t>());
    }
    arr.push_back(std::move(j));
  }
  Json out = Json::object();
  out["warnings"] = warnings();
  out["totals"] = totals;
  out["concepts"] = std::move(arr);
  return out;
}

std::string coarse_prompt_id(std::string_view concept_name, std::size_t index) {
  std::string c(concept_name);
  std::replace(c.begin(), c.end(), ' ', '_');
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", index);
  return c + "-cp-" + buf;
}

std::string dense_prompt_id(std::string_view concept_name, std::size_t index) {
  std::string c(concept_name);
  std::replace(c.begin(), c.end(), ' ', '_');
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return c + "-dp-" + buf;
}

namespace {

struct ConceptOutcome {
  std::optional<Concept> catalog_entry;
  std::vector<PromptExpansion> expansions;
  ConceptBuildReport report;
};

template <typename Fn>
auto with_retries(int retries, std::size_t& protocol_errors, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const LlmProtocolError&) {
      ++protocol_errors;
      if (attempt >= retries) throw;
    }
  }
}

ConceptOutcome build_concept(const std::vector<CaptionRecord>& corpus, const std::string& concept_name,
                             const BuilderConfig& config, LlmAdapter& llm, const NounTagger& tagger) {
  ConceptOutcome out;
  auto& rep = out.report;
  rep.concept_name = concept_name;

  std::vector<SeedPrompt> seeds;
  try {
    seeds = select_seed_prompts(corpus, concept_name, config.seeds, tagger);
  } catch (const InsufficientCaptions& e) {
    if (!config.allow_partial) throw;
    rep.warnings.push_back(e.what());
    if (e.survivors() == 0) return out;
    SeedSelectionOptions fewer = config.seeds;
    fewer.count = e.survivors();
    seeds = select_seed_prompts(corpus, concept_name, fewer, tagger);
  }
  rep.seeds_selected = seeds.size();

  std::vector<AttributeExtraction> extractions;
  for (const auto& seed : seeds) {
    try {
      extractions.push_back(with_retries(config.llm_retries, rep.protocol_errors,
                                         [&] { return extract_attributes(seed, llm); }));
    } catch (const LlmProtocolError& e) {
      rep.warnings.push_back("seed " + seed.source_id + " dropped: " + e.what());
    } catch (const SubjectMismatch& e) {
      ++rep.subject_mismatches;
      rep.warnings.push_back("seed " + seed.source_id + " dropped: " + e.what());
    }
  }
  const auto types = merge_concept_attributes(extractions, config.filter);
  if (types.empty()) {
    rep.warnings.push_back("no attribute type with >= 2 attributes survived; concept omitted");
    return out;
  }

  for (const auto& ex : extractions) {
    try {
      auto expansion = with_retries(config.llm_retries, rep.protocol_errors,
                                    [&] { return expand_prompts(ex.seed, types, llm); });
      rep.unknown_injections += expansion.unknown_injections;
      rep.invalid_injections += expansion.invalid_injections;
      out.expansions.push_back(std::move(expansion));
    } catch (const LlmProtocolError& e) {
      rep.warnings.push_back("seed " + ex.seed.source_id + " dropped: " + e.what());
    } catch (const CoarseLeakage& e) {
      ++rep.leakages;
      rep.warnings.push_back("seed " + ex.seed.source_id + " dropped: " + e.what());
    }
  }
  if (out.expansions.empty()) {
    rep.warnings.push_back("no seed produced a valid coarse prompt; concept omitted");
    return out;
  }

  // A type whose dense prompts cover a single attribute cannot be scored.
  std::map<std::string, std::set<std::string>> coverage;
  for (const auto& e : out.expansions) {
    for (const auto& inj : e.injections) {
      if (inj.dense_text) coverage[inj.attribute_type].insert(inj.attribute);
    }
  }
  for (auto& e : out.expansions) {
    for (auto& inj : e.injections) {
      if (!inj.dense_text) {
        ++rep.skipped_injections;
      } else if (coverage[inj.attribute_type].size() < 2) {
        inj.dense_text.reset();
        ++rep.degenerate_type_drops;
      }
    }
  }
  out.catalog_entry = Concept{concept_name, types};
  return out;
}

}  // namespace

BuildResult build_dataset(const std::vector<CaptionRecord>& corpus,
                          const std::vector<std::string>& concepts, const BuilderConfig& config,
                          LlmAdapter& llm, const NounTagger* tagger) {
  HeuristicNounTagger fallback;
  fallback.add_concepts(concepts);
  const NounTagger& noun_tagger = tagger ? *tagger : fallback;

  std::vector<ConceptOutcome> outcomes(concepts.size());
  if (config.workers > 1) {
    std::vector<std::future<ConceptOutcome>> futures;
    for (const auto& c : concepts) {
      futures.push_back(std::async(std::launch::async, [&, c] {
        return build_concept(corpus, c, config, llm, noun_tagger);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) outcomes[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < concepts.size(); ++i) {
      outcomes[i] = build_concept(corpus, concepts[i], config, llm, noun_tagger);
    }
  }

  BuildResult result;
  auto& ds = result.dataset;
  ds.metadata = config.metadata.is_object() ? config.metadata : Json::object();
  ds.metadata["builder"] = "dimcim";
  ds.metadata["seeds_per_concept"] = config.seeds.count;
  ds.metadata["rng_seed"] = config.seeds.rng_seed;
  for (auto& o : outcomes) {
    auto& rep = o.report;
    if (o.catalog_entry) {
      const auto& name = o.catalog_entry->name;
      std::size_t dense_index = 0;
      for (std::size_t s = 0; s < o.expansions.size(); ++s) {
        const auto& e = o.expansions[s];
        CoarsePrompt cp{coarse_prompt_id(name, s), name, e.coarse_text, e.seed.caption};
        for (const auto& inj : e.injections) {
          if (!inj.dense_text) continue;
          ds.dense_prompts.push_back({dense_prompt_id(name, dense_index++), cp.id, name,
                                      inj.attribute_type, inj.attribute, *inj.dense_text});
        }
        ds.coarse_prompts.push_back(std::move(cp));
      }
      rep.coarse_prompts = o.expansions.size();
      rep.dense_prompts = dense_index;
      ds.concepts.push_back(std::move(*o.catalog_entry));
    }
    result.report.concepts.push_back(std::move(rep));
  }
  validate(ds);
  return result;
}

}  // namespace dimcim
