// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic stand-ins for the external models. They make every pipeline
// stage runnable offline and give analytically known scores: a mock image
// carries ground-truth labels, and the mock scorer answers s_hi when the
// queried attribute is among them and s_lo otherwise.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dimcim/adapters.hpp"
#include "dimcim/catalog.hpp"
#include "dimcim/scoring.hpp"

namespace dimcim {

enum class LabelSampler {
  kRoundRobin,   // image i gets attribute i mod k (weights ignored)
  kCategorical,  // independent draws from the weights, seeded per image
  kStratified,   // inverse CDF of the weights at (i + 0.5) / n
};

struct MockGeneratorOptions {
  std::string model_id = "mock";
  std::vector<Concept> catalog;
  LabelSampler sampler = LabelSampler::kRoundRobin;
  /// Default-mode weights per concept, per attribute type, per attribute.
  /// Missing entries are uniform.
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> default_weights;
  /// Probability that an attribute named in the prompt is rendered:
  /// compliance * g / (g + compliance_half_saturation), or plain `compliance`
  /// when the half-saturation constant is 0.
  double compliance = 1.0;
  double compliance_half_saturation = 0.0;
  /// Default-mode weights are raised to the power (1 + sharpening * g) and
  /// renormalized, so stronger guidance concentrates the default mode.
  double guidance_sharpening = 0.0;
  /// Seeds whose generation fails (GenerationFailure records).
  std::set<std::int64_t> failing_seeds;
};

class MockGenerator : public ImageGenerator {
 public:
  explicit MockGenerator(MockGeneratorOptions options);

  GenerationBatch run(const GenerationRequest& request) override;
  std::string fingerprint() const override { return "mock-generator:" + options_.model_id; }
  std::size_t max_concurrency() const override { return 0; }

  std::size_t calls() const noexcept { return calls_.load(); }
  /// Compliance probability at guidance scale g.
  double compliance_at(double guidance) const;

 private:
  MockGeneratorOptions options_;
  std::atomic<std::size_t> calls_{0};
};

struct MockScorerOptions {
  std::vector<Concept> catalog;
  double s_hi = 0.9;
  double s_lo = 0.1;
  /// Standard deviation of Gaussian noise seeded by (image id, text); results
  /// are clamped to [0, 1].
  double noise = 0.0;
  std::map<std::string, StyleHints> style_hints;  // per concept
  std::set<std::string> failing_images;           // ScoringFailure for these ids
};

class MockScorer : public AlignmentScorer {
 public:
  explicit MockScorer(MockScorerOptions options);

  std::string fingerprint() const override { return "mock-scorer"; }
  std::size_t max_concurrency() const override { return 0; }
  std::size_t calls() const noexcept { return calls_.load(); }

  /// True iff the image's labels show what `text` asks about.
  bool shows(const ImageRef& image, const std::string& text) const;

 protected:
  double raw_score(const AlignmentQuery& query) override;

 private:
  struct Target {
    std::string concept_name;
    std::string attribute_type;  // empty for a concept-presence query
    std::string attribute;
  };
  MockScorerOptions options_;
  std::map<std::string, std::vector<Target>> targets_;
  std::atomic<std::size_t> calls_{0};
};

/// Scorer backed by an arbitrary function; handy for fault injection.
class FunctionScorer : public AlignmentScorer {
 public:
  using Fn = std::function<double(const AlignmentQuery&)>;
  explicit FunctionScorer(Fn fn, std::string name = "function-scorer")
      : fn_(std::move(fn)), name_(std::move(name)) {}
  std::string fingerprint() const override { return name_; }

 protected:
  double raw_score(const AlignmentQuery& query) override { return fn_(query); }

 private:
  Fn fn_;
  std::string name_;
};

struct MockLlmOptions {
  /// Candidate attribute types proposed for each concept.
  std::map<std::string, std::vector<AttributeType>> knowledge;
  /// Attributes the mock declines to inject (plausibility skips), per concept.
  std::map<std::string, std::set<std::string>> skip;
  /// Extra fraction of injections skipped, chosen by a hash of (caption, attribute).
  double skip_fraction = 0.0;
};

/// Rule-based LLM answering both built-in meta-prompts from a fixed
/// attribute vocabulary. Replies are pure functions of the request.
class MockLlm : public LlmAdapter {
 public:
  explicit MockLlm(MockLlmOptions options, TemplateSet templates = TemplateSet::defaults());
  std::string fingerprint() const override { return "mock-llm"; }
  bool concurrent_safe() const override { return true; }

  /// Whether the mock skips `attribute` when expanding `caption`.
  bool skips(const std::string& concept_name, const std::string& caption,
             const std::string& attribute) const;

 protected:
  std::string reply(const LlmRequest& request) override;

 private:
  std::string extraction_reply(const std::string& caption) const;
  std::string expansion_reply(const std::string& attributes_json) const;
  const std::string* find_concept(const std::string& caption) const;

  MockLlmOptions options_;
};

/// LLM that replays a recorded transcript ({"prompt","reply"} JSON Lines);
/// unknown prompts raise BackendUnavailable.
class ReplayLlm : public LlmAdapter {
 public:
  explicit ReplayLlm(const std::filesystem::path& transcript,
                     TemplateSet templates = TemplateSet::defaults());
  std::string fingerprint() const override { return "replay-llm"; }
  bool concurrent_safe() const override { return true; }

 protected:
  std::string reply(const LlmRequest& request) override;

 private:
  std::map<std::string, std::string> replies_;
};

/// LLM backed by an arbitrary function of the request.
class FunctionLlm : public LlmAdapter {
 public:
  using Fn = std::function<std::string(const LlmRequest&)>;
  explicit FunctionLlm(Fn fn, TemplateSet templates = TemplateSet::defaults())
      : LlmAdapter(std::move(templates)), fn_(std::move(fn)) {}
  std::string fingerprint() const override { return "function-llm"; }

 protected:
  std::string reply(const LlmRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

/// Removes every whole-word occurrence of `phrase` (case-insensitive) and
/// tidies whitespace and indefinite articles.
std::string remove_phrase(std::string_view text, std::string_view phrase);

/// Inserts `attribute` next to the first mention of `noun`: before it for
/// adjective-like attributes, after it for prepositional ones.
std::string inject_attribute(std::string_view text, std::string_view noun,
                             std::string_view attribute);

}  // namespace dimcim
