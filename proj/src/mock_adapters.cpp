// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/mock_adapters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {
namespace {

using io::Json;

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte
  std::string token;    // lower-cased
};

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::vector<Span> spans_of(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    Span sp;
    sp.begin = i;
    while (i < s.size() && is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
    sp.end = i;
    sp.token = text::to_lower(s.substr(sp.begin, sp.end - sp.begin));
    out.push_back(std::move(sp));
  }
  return out;
}

/// Index of the first span where `needle` starts, or npos.
std::size_t find_tokens(const std::vector<Span>& spans, const std::vector<std::string>& needle,
                        bool plural_last, std::size_t from = 0) {
  if (needle.empty()) return std::string::npos;
  for (std::size_t i = from; i + needle.size() <= spans.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) {
      const auto& t = spans[i + j].token;
      ok = t == needle[j] ||
           (plural_last && j + 1 == needle.size() && text::singularize(t) == needle[j]);
    }
    if (ok) return i;
  }
  return std::string::npos;
}

std::string tidy(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    if ((c == ',' || c == '.' || c == ';' || c == '!' || c == '?') && !out.empty() && out.back() == ' ') {
      out.pop_back();
    }
    out.push_back(c);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  // Re-pick indefinite articles against the (possibly new) following word.
  const auto spans = spans_of(out);
  std::string result;
  std::size_t last = 0;
  for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
    const auto& sp = spans[i];
    if (sp.token != "a" && sp.token != "an") continue;
    const std::string_view next(out.data() + spans[i + 1].begin, spans[i + 1].end - spans[i + 1].begin);
    std::string article(text::indefinite_article(next));
    if (out[sp.begin] >= 'A' && out[sp.begin] <= 'Z') article[0] = static_cast<char>(article[0] - 'a' + 'A');
    result.append(out, last, sp.begin - last);
    result += article;
    last = sp.end;
  }
  result.append(out, last, std::string::npos);
  return result;
}

bool is_preposition_led(std::string_view attribute) {
  static constexpr std::array<std::string_view, 6> kPrepositions{"with", "without", "on",
                                                                 "in",   "near",    "under"};
  const auto tokens = text::tokenize(attribute);
  return !tokens.empty() &&
         std::find(kPrepositions.begin(), kPrepositions.end(), tokens.front()) != kPrepositions.end();
}

double unit_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
}

std::size_t inverse_cdf(const std::vector<double>& weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t a = 0; a < weights.size(); ++a) {
    if (weights[a] <= 0.0) continue;
    last_positive = a;
    cum += weights[a] / total;
    if (u < cum) return a;
  }
  return last_positive;
}

bool token_subset(const std::string& needle, const std::string& hay) {
  const auto n = text::tokenize(needle);
  const auto h = text::tokenize(hay);
  if (n.empty()) return false;
  return std::all_of(n.begin(), n.end(), [&](const std::string& t) {
    return std::find(h.begin(), h.end(), t) != h.end();
  });
}

}  // namespace

std::string remove_phrase(std::string_view text_in, std::string_view phrase) {
  std::string s(text_in);
  const auto needle = text::tokenize(phrase);
  while (true) {
    const auto spans = spans_of(s);
    const std::size_t at = find_tokens(spans, needle, false);
    if (at == std::string::npos) break;
    s.erase(spans[at].begin, spans[at + needle.size() - 1].end - spans[at].begin);
  }
  return tidy(std::move(s));
}

std::string inject_attribute(std::string_view text_in, std::string_view noun,
                             std::string_view attribute) {
  std::string s(text_in);
  const auto spans = spans_of(s);
  const auto noun_tokens = text::tokenize(noun);
  const std::size_t at = find_tokens(spans, noun_tokens, true);
  if (at == std::string::npos) return {};
  if (is_preposition_led(attribute)) {
    s.insert(spans[at + noun_tokens.size() - 1].end, " " + std::string(attribute));
  } else {
    s.insert(spans[at].begin, std::string(attribute) + " ");
  }
  return tidy(std::move(s));
}

// ---------------------------------------------------------------------------

MockGenerator::MockGenerator(MockGeneratorOptions options) : options_(std::move(options)) {}

double MockGenerator::compliance_at(double guidance) const {
  if (options_.compliance_half_saturation <= 0.0) return options_.compliance;
  return options_.compliance * guidance / (guidance + options_.compliance_half_saturation);
}

GenerationBatch MockGenerator::run(const GenerationRequest& request) {
  ++calls_;
  const Concept* depicted = nullptr;
  for (const auto& c : options_.catalog) {
    if (text::contains_noun(request.prompt, c.name)) {
      depicted = &c;
      break;
    }
  }
  const double p_comply = compliance_at(request.guidance_scale);
  const double exponent = 1.0 + options_.guidance_sharpening * request.guidance_scale;
  const std::uint64_t prompt_hash = text::fnv1a(request.prompt);

  GenerationBatch batch;
  for (int i = 0; i < request.n; ++i) {
    const std::int64_t seed = request.seed + i;
    if (options_.failing_seeds.count(seed)) {
      batch.failures.push_back({seed, "mock generation failure"});
      continue;
    }
    const double u_strat = (static_cast<double>(i) + 0.5) / static_cast<double>(request.n);
    Labels labels;
    if (depicted) {
      labels[std::string(kConceptLabel)] = depicted->name;
      for (const auto& type : depicted->attribute_types) {
        const std::uint64_t type_seed =
            mix(mix(prompt_hash, static_cast<std::uint64_t>(seed)), text::fnv1a(type.name));
        // Longest attribute of this type that the prompt asks for.
        const std::string* requested = nullptr;
        for (const auto& a : type.attributes) {
          if (text::contains_phrase(request.prompt, a) && (!requested || a.size() > requested->size())) {
            requested = &a;
          }
        }
        if (requested) {
          const double u = options_.sampler == LabelSampler::kCategorical
                               ? unit_uniform(mix(type_seed, 0xC0FFEE))
                               : u_strat;
          if (u < p_comply) {
            labels[type.name] = *requested;
            continue;
          }
        }
        std::vector<double> weights(type.attributes.size(), 1.0);
        if (auto c = options_.default_weights.find(depicted->name); c != options_.default_weights.end()) {
          if (auto t = c->second.find(type.name); t != c->second.end()) {
            for (std::size_t a = 0; a < type.attributes.size(); ++a) {
              auto w = t->second.find(type.attributes[a]);
              weights[a] = w == t->second.end() ? 0.0 : w->second;
            }
          }
        }
        for (double& w : weights) w = w > 0.0 ? std::pow(w, exponent) : 0.0;
        std::size_t pick = 0;
        switch (options_.sampler) {
          case LabelSampler::kRoundRobin:
            pick = static_cast<std::size_t>(i) % type.attributes.size();
            break;
          case LabelSampler::kStratified:
            pick = inverse_cdf(weights, u_strat);
            break;
          case LabelSampler::kCategorical:
            pick = inverse_cdf(weights, unit_uniform(type_seed));
            break;
        }
        labels[type.name] = type.attributes[pick];
      }
    }
    Json id_doc = Json::array({options_.model_id, request.prompt, request.guidance_scale, seed});
    if (!request.params.empty()) id_doc.push_back(request.params);
    ImageRef img;
    img.id = "img-" + io::sha256_hex(id_doc.dump()).substr(0, 20);
    img.uri = "mock://" + options_.model_id + "/" + img.id + ".png";
    img.seed = seed;
    img.labels = std::move(labels);
    batch.images.push_back(std::move(img));
  }
  return batch;
}

// ---------------------------------------------------------------------------

MockScorer::MockScorer(MockScorerOptions options) : options_(std::move(options)) {
  for (const auto& c : options_.catalog) {
    StyleHints hints;
    if (auto it = options_.style_hints.find(c.name); it != options_.style_hints.end()) hints = it->second;
    for (const auto& t : c.attribute_types) {
      for (const auto& a : t.attributes) {
        targets_[render_query(c.name, a, hints).phrase].push_back({c.name, t.name, a});
      }
    }
    for (auto style : {ConceptQueryStyle::kPhoto, ConceptQueryStyle::kBare}) {
      targets_[render_concept_query(c.name, style)].push_back({c.name, {}, {}});
    }
  }
}

bool MockScorer::shows(const ImageRef& image, const std::string& text) const {
  if (!image.labels) return false;
  const auto concept_it = image.labels->find(std::string(kConceptLabel));
  if (concept_it == image.labels->end()) return false;
  const auto it = targets_.find(text);
  if (it == targets_.end()) return false;
  for (const auto& target : it->second) {
    if (target.concept_name != concept_it->second) continue;
    if (target.attribute_type.empty()) return true;
    const auto label = image.labels->find(target.attribute_type);
    if (label != image.labels->end() && token_subset(target.attribute, label->second)) return true;
  }
  return false;
}

double MockScorer::raw_score(const AlignmentQuery& query) {
  ++calls_;
  if (options_.failing_images.count(query.image.id)) {
    throw ScoringFailure("mock scoring failure for image '" + query.image.id + "'");
  }
  double s = shows(query.image, query.text) ? options_.s_hi : options_.s_lo;
  if (options_.noise > 0.0) {
    const std::uint64_t h = mix(text::fnv1a(query.image.id), text::fnv1a(query.text));
    const double u1 = std::max(unit_uniform(h), 0x1.0p-53);
    const double u2 = unit_uniform(mix(h, 1));
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    s = std::clamp(s + options_.noise * z, 0.0, 1.0);
  }
  return s;
}

// ---------------------------------------------------------------------------

MockLlm::MockLlm(MockLlmOptions options, TemplateSet templates)
    : LlmAdapter(std::move(templates)), options_(std::move(options)) {}

const std::string* MockLlm::find_concept(const std::string& caption) const {
  const std::string* best = nullptr;
  std::size_t best_pos = std::string::npos;
  const auto spans = spans_of(caption);
  for (const auto& [name, _] : options_.knowledge) {
    const std::size_t at = find_tokens(spans, text::tokenize(name), true);
    if (at != std::string::npos && (best == nullptr || at < best_pos)) {
      best = &name;
      best_pos = at;
    }
  }
  return best;
}

bool MockLlm::skips(const std::string& concept_name, const std::string& caption,
                    const std::string& attribute) const {
  if (auto it = options_.skip.find(concept_name); it != options_.skip.end() && it->second.count(attribute)) {
    return true;
  }
  if (options_.skip_fraction > 0.0) {
    const double u = static_cast<double>(text::fnv1a(caption + "\x1f" + attribute) % 1000000) / 1e6;
    return u < options_.skip_fraction;
  }
  return false;
}

std::string MockLlm::reply(const LlmRequest& request) {
  if (request.template_name == kAttributeExtractionTemplate) {
    return extraction_reply(request.substitutions.at("seed_prompt"));
  }
  if (request.template_name == kPromptExpansionTemplate) {
    return expansion_reply(request.substitutions.at("attributes_json"));
  }
  throw BackendUnavailable("mock LLM has no rule for template '" + request.template_name + "'");
}

std::string MockLlm::extraction_reply(const std::string& caption) const {
  Json out = Json::object();
  out["caption"] = caption;
  const std::string* concept_name = find_concept(caption);
  out["main_subject"] = concept_name ? *concept_name : std::string{};
  Json existing = Json::object();
  Json possible = Json::object();
  if (concept_name) {
    for (const auto& type : options_.knowledge.at(*concept_name)) {
      for (const auto& a : type.attributes) {
        if (text::contains_phrase(caption, a)) {
          existing[type.name] = a;
          break;
        }
      }
      possible[type.name] = type.attributes;
    }
  }
  out["visual_modifiers"] = Json::object({{"existing", existing}, {"possible_attributes", possible}});
  return out.dump(4);
}

std::string MockLlm::expansion_reply(const std::string& attributes_json) const {
  const Json in = Json::parse(attributes_json);
  const std::string caption = in.at("caption").get<std::string>();
  const std::string concept_name = in.at("main_subject").get<std::string>();
  const Json& possible = in.at("visual_modifiers").at("possible_attributes");

  std::string coarse = caption;
  for (const auto& [type, values] : possible.items()) {
    for (const auto& v : values) coarse = remove_phrase(coarse, v.get<std::string>());
  }
  if (auto it = options_.knowledge.find(concept_name); it != options_.knowledge.end()) {
    for (const auto& type : it->second) {
      for (const auto& a : type.attributes) coarse = remove_phrase(coarse, a);
    }
  }

  Json modified = Json::array();
  for (const auto& [type, values] : possible.items()) {
    for (const auto& v : values) {
      const std::string attr = v.get<std::string>();
      if (skips(concept_name, caption, attr)) continue;
      std::string dense = inject_attribute(coarse, concept_name, attr);
      if (dense.empty()) continue;
      modified.push_back(Json::object(
          {{"attribute_type", type}, {"attribute_value", attr}, {"generated_prompt", dense}}));
    }
  }
  Json out = Json::object();
  out["original_caption"] = caption;
  out["seed_prompt"] = coarse;
  out["main_subject"] = concept_name;
  out["modified_prompts"] = std::move(modified);
  return out.dump(4);
}

ReplayLlm::ReplayLlm(const std::filesystem::path& transcript, TemplateSet templates)
    : LlmAdapter(std::move(templates)) {
  for (const auto& rec : io::read_jsonl(transcript)) {
    replies_.emplace(rec.at("prompt").get<std::string>(), rec.at("reply").get<std::string>());
  }
}

std::string ReplayLlm::reply(const LlmRequest& request) {
  auto it = replies_.find(request.prompt);
  if (it == replies_.end()) {
    throw BackendUnavailable("no recorded reply for a '" + request.template_name + "' request");
  }
  return it->second;
}

}  // namespace dimcim
