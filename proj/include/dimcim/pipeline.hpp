// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Stage orchestration. Each stage reads and writes plain artifacts so stages
// can run separately:
//
//   generate  dataset -> generation_manifest.jsonl      (cache: generation_cache.jsonl)
//   score     dataset + manifest -> scores.jsonl        (cache: score_cache.jsonl)
//   metrics   dataset + scores -> report.json, report.csv, coarse_breakdown.csv
//
// run_manifest.json records completed stages with artifact hashes.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dimcim/analysis.hpp"
#include "dimcim/http_adapters.hpp"
#include "dimcim/metrics.hpp"
#include "dimcim/mock_adapters.hpp"
#include "dimcim/promptgen.hpp"

namespace dimcim {

enum class CoarseParity {
  kTotal,  // coarse prompt gets n x (dense prompts derived from it) images
  kFlat,   // n images per coarse prompt
};

std::string_view to_string(CoarseParity parity);
CoarseParity coarse_parity_from_string(std::string_view s);

struct EvaluationOptions {
  std::string model_id = "model";
  GenerationConfig generation;
  CoarseParity coarse_parity = CoarseParity::kTotal;
  DimAveraging dim_averaging = DimAveraging::kEntry;
  std::map<std::string, StyleHints> style_hints;  // per concept
  bool resume = false;
};

/// Seed of the first image of a prompt: base seed plus a hash of the id.
std::int64_t prompt_seed(std::int64_t base_seed, std::string_view prompt_id);

/// Image count requested for a coarse prompt under a parity mode.
int coarse_image_count(const BenchmarkDataset& dataset, const CoarsePrompt& prompt, int n_images,
                       CoarseParity parity);

struct GenerationOutcome {
  std::vector<ImageRef> images;  // prompt order, then seed order
  std::vector<io::Json> failures;
};

GenerationOutcome generate_images(const BenchmarkDataset& dataset, GenerationService& service,
                                  const EvaluationOptions& options);

struct ScoringOutcome {
  std::vector<ScoreMatrix> matrices;  // pooled coarse, per coarse prompt, per dense prompt
  std::vector<io::Json> skipped;      // units with no scorable image
};

/// Builds every score matrix the metrics need from generated images.
ScoringOutcome score_images(const BenchmarkDataset& dataset, const std::vector<ImageRef>& images,
                            AlignmentScorer& scorer, const EvaluationOptions& options);

struct ReportOutcome {
  MetricReport report;
  std::vector<DimEntry> breakdown;
};

/// Routes matrices by unit id (pooled coarse, coarse prompt, dense prompt) and
/// summarizes. OrphanMatrix for an unknown unit.
ReportOutcome compute_report(const BenchmarkDataset& dataset, const std::vector<ScoreMatrix>& matrices,
                             const EvaluationOptions& options);

/// Report config echo: generation config, parity and averaging modes.
io::Json report_config(const EvaluationOptions& options);

struct EvaluationResult {
  ReportOutcome outcome;
  io::Json run_manifest;
  std::size_t generator_calls = 0;
  std::size_t scorer_calls = 0;
};

/// Full generate -> score -> metrics run writing all artifacts into
/// `output_dir`. With options.resume the caches of a previous (possibly
/// interrupted) run are reused, otherwise they are truncated.
EvaluationResult evaluate(const BenchmarkDataset& dataset, ImageGenerator& generator,
                          AlignmentScorer& scorer, const EvaluationOptions& options,
                          const std::filesystem::path& output_dir);

// ---------------------------------------------------------------------------
// Manifests

void write_generation_manifest(const std::vector<ImageRef>& images, const std::filesystem::path& path);
std::vector<ImageRef> read_generation_manifest(const std::filesystem::path& path);

void write_score_cells(const std::vector<ScoreMatrix>& matrices, const std::filesystem::path& path);
std::vector<ScoreMatrix> read_score_cells(const std::filesystem::path& path);

/// Stage marker {"completed": true, "artifacts": [{"path","sha256"}], ...extra}.
io::Json stage_marker(const std::vector<std::filesystem::path>& artifacts,
                      const std::filesystem::path& root, io::Json extra = io::Json::object());

// ---------------------------------------------------------------------------
// Configuration

struct MockConfig {
  std::string model_id = "mock";
  MockGeneratorOptions generator;  // catalog filled from the dataset
  MockScorerOptions scorer;        // catalog filled from the dataset
  MockLlmOptions llm;
};

/// {"model_id", "generator": {...}, "scorer": {...}, "llm": {...}}; every key
/// optional.
MockConfig mock_config_from_json(const io::Json& j);

struct PipelineConfig {
  std::optional<std::filesystem::path> dataset_path;
  std::filesystem::path output_dir = "dimcim_out";
  std::optional<std::string> model_id;
  EvaluationOptions evaluation;
  AnalysisConfig analysis;
  std::optional<Endpoint> generator;
  std::optional<Endpoint> scorer;
  std::optional<Endpoint> llm;
  io::Json mock = io::Json::object();
  io::Json builder = io::Json::object();
  std::uint64_t seed = 0;
};

/// Reads a JSON config file; unknown top-level keys are rejected.
PipelineConfig pipeline_config_from_json(const io::Json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// DIMCIM_GENERATOR_URL, DIMCIM_SCORER_URL, DIMCIM_LLM_URL and
/// DIMCIM_HTTP_TIMEOUT_S override the file's endpoints.
void apply_environment(PipelineConfig& config);

BuilderConfig builder_config_from_json(const io::Json& j, std::uint64_t seed);

/// Concept list: a JSON array of names, or one name per line ('#' comments).
std::vector<std::string> read_concept_list(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Analysis outputs

/// Names accepted by write_figures.
const std::vector<std::string>& figure_names();

/// Writes the selected figure data files (CSV) with declarative plot specs
/// (JSON) under `dir`; all figures when `figures` is empty. Returns the paths.
std::vector<std::filesystem::path> write_figures(const std::vector<MetricReport>& reports,
                                                 const std::vector<std::string>& figures,
                                                 const AnalysisConfig& config,
                                                 const std::filesystem::path& dir);

/// Filename-safe form of a concept or model name.
std::string file_stem(std::string_view name);

}  // namespace dimcim
