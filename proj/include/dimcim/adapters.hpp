// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Contracts for the three external models the toolkit drives: an image
// generator, an image-text alignment scorer and an LLM. Everything here is
// backend-agnostic; see mock_adapters.hpp and http_adapters.hpp for
// implementations.

#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dimcim/io.hpp"

namespace dimcim {

using Labels = std::map<std::string, std::string>;

/// Reserved label key carrying the depicted concept (mock ground truth only).
inline constexpr std::string_view kConceptLabel = "concept";

struct ImageRef {
  std::string id;
  std::string uri;
  std::string prompt_id;
  std::int64_t seed = 0;
  std::optional<Labels> labels;

  bool operator==(const ImageRef&) const = default;
};

struct GenerationConfig {
  int n_images = 30;
  double guidance_scale = 7.5;
  std::int64_t base_seed = 0;
  /// Forwarded untouched to the backend (resolution, steps, ...).
  io::Json params = io::Json::object();

  void check() const;
};

io::Json to_json(const GenerationConfig& config);
GenerationConfig generation_config_from_json(const io::Json& j);

/// Generation manifest record {"prompt_id","image_id","uri","seed","labels"?}.
io::Json to_manifest_record(const ImageRef& image);
ImageRef image_from_manifest_record(const io::Json& record);

struct AlignmentQuery {
  ImageRef image;
  std::string text;
};

// ---------------------------------------------------------------------------
// Image generation

struct GenerationRequest {
  std::string prompt;
  int n = 0;
  double guidance_scale = 0.0;
  std::int64_t seed = 0;  // first image seed; image k uses seed + k
  io::Json params = io::Json::object();
};

struct GenerationFailureRecord {
  std::int64_t seed = 0;
  std::string message;
};

struct GenerationBatch {
  std::vector<ImageRef> images;
  std::vector<GenerationFailureRecord> failures;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual GenerationBatch run(const GenerationRequest& request) = 0;
  virtual std::string fingerprint() const = 0;
  /// 0 means unbounded.
  virtual std::size_t max_concurrency() const { return 1; }
};

/// Front door for generation: fixes seeds, stamps prompt ids, and memoizes
/// complete batches keyed by the content hash of the full request. The memo
/// optionally persists as JSON Lines so interrupted runs resume for free.
class GenerationService {
 public:
  explicit GenerationService(ImageGenerator& backend,
                             std::optional<std::filesystem::path> cache_path = std::nullopt,
                             bool resume = true);

  GenerationBatch generate(const std::string& prompt_id, const std::string& prompt,
                           const GenerationConfig& config);

  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  ImageGenerator& backend() noexcept { return backend_; }

 private:
  ImageGenerator& backend_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::vector<ImageRef>> memo_;
  std::unique_ptr<io::JsonlAppender> log_;
  std::atomic<std::size_t> backend_calls_{0};
};

// ---------------------------------------------------------------------------
// Alignment scoring

class AlignmentScorer {
 public:
  virtual ~AlignmentScorer() = default;

  /// Backend yes-probability, range-checked (ScoreOutOfRange otherwise).
  double score(const AlignmentQuery& query);

  virtual std::string fingerprint() const = 0;
  virtual std::size_t max_concurrency() const { return 1; }

 protected:
  virtual double raw_score(const AlignmentQuery& query) = 0;
};

/// Persistent (image id, text) -> score memo; JSON Lines
/// {"image_id","text","score"}, append-only with an in-memory index.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(const std::filesystem::path& path, bool resume = true);

  std::optional<double> find(const std::string& image_id, const std::string& text) const;
  void insert(const std::string& image_id, const std::string& text, double score);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, double> index_;
  std::unique_ptr<io::JsonlAppender> log_;
};

class CachingScorer : public AlignmentScorer {
 public:
  CachingScorer(AlignmentScorer& backend, ScoreCache& cache) : backend_(backend), cache_(cache) {}

  std::string fingerprint() const override { return backend_.fingerprint(); }
  std::size_t max_concurrency() const override { return backend_.max_concurrency(); }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }

 protected:
  double raw_score(const AlignmentQuery& query) override;

 private:
  AlignmentScorer& backend_;
  ScoreCache& cache_;
  std::atomic<std::size_t> backend_calls_{0};
};

// ---------------------------------------------------------------------------
// LLM

using Substitutions = std::map<std::string, std::string>;

inline constexpr std::string_view kAttributeExtractionTemplate = "attribute_extraction";
inline constexpr std::string_view kPromptExpansionTemplate = "prompt_expansion";

/// Named prompt templates with {identifier} placeholders. Literal braces that
/// do not enclose a bare identifier (e.g. JSON examples) are left alone.
class TemplateSet {
 public:
  /// The two built-in meta-prompts (attribute extraction, prompt expansion).
  static TemplateSet defaults();
  /// Loads "<name>.txt" for both built-in names from `dir`.
  static TemplateSet from_directory(const std::filesystem::path& dir);

  void set(std::string name, std::string body);
  const std::string& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  /// Throws TemplateError for an unknown template or an unfilled placeholder.
  std::string render(std::string_view name, const Substitutions& substitutions) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

struct LlmRequest {
  std::string template_name;
  Substitutions substitutions;
  std::string prompt;  // rendered
};

class LlmAdapter {
 public:
  explicit LlmAdapter(TemplateSet templates = TemplateSet::defaults());
  virtual ~LlmAdapter() = default;

  /// Renders the named template, submits it and returns the raw completion.
  /// Every exchange is appended to the transcript log when one is attached.
  std::string complete(std::string_view template_name, const Substitutions& substitutions);

  void attach_transcript(const std::filesystem::path& path, bool truncate = false);
  const TemplateSet& templates() const noexcept { return templates_; }

  virtual std::string fingerprint() const = 0;
  /// Calls are serialized per instance unless this returns true.
  virtual bool concurrent_safe() const { return false; }

 protected:
  virtual std::string reply(const LlmRequest& request) = 0;

 private:
  TemplateSet templates_;
  std::mutex call_mutex_;
  std::unique_ptr<io::JsonlAppender> transcript_;
};

}  // namespace dimcim
