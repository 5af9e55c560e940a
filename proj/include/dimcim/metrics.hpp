// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Attribute-level and summary Does-It (DIM) and Can-It (CIM) metrics.
//
//   DIM entry  = S on the pooled coarse-prompt images of a concept
//   CIM entry  = mean S over the dense prompts that request the attribute
//   summary DIM = 1 - mean |DIM entry|       (each entry weighted equally)
//   summary CIM = mean S over dense prompts  (each prompt weighted equally)

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dimcim/catalog.hpp"
#include "dimcim/scoring.hpp"

namespace dimcim {

struct DimEntry {
  std::string unit_id;  // pooled unit, or a coarse prompt id in breakdowns
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double value = 0.0;
  std::size_t n_images = 0;

  bool operator==(const DimEntry&) const = default;
};

struct PromptScore {
  std::string dense_prompt_id;
  double value = 0.0;

  bool operator==(const PromptScore&) const = default;
};

struct CimEntry {
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double value = 0.0;
  std::vector<PromptScore> per_prompt;

  std::size_t n_prompts() const noexcept { return per_prompt.size(); }
  bool operator==(const CimEntry&) const = default;
};

/// One DIM entry per column of every coarse matrix, in input order.
std::vector<DimEntry> dim_attribute_scores(const std::vector<ScoreMatrix>& coarse_matrices);

/// Per-prompt S with the prompt's own attribute as target, grouped by
/// (concept, type, attribute) in catalog order. OrphanMatrix if a unit id is
/// not a dense prompt of `dataset`.
std::vector<CimEntry> cim_attribute_scores(const std::vector<ScoreMatrix>& dense_matrices,
                                           const BenchmarkDataset& dataset);

enum class DimAveraging {
  kEntry,            // over (concept, attribute) entries of the pooled matrices
  kPromptAttribute,  // over (coarse prompt, attribute) pairs of the breakdown
};

std::string_view to_string(DimAveraging averaging);
DimAveraging dim_averaging_from_string(std::string_view s);

struct SummaryOptions {
  DimAveraging averaging = DimAveraging::kEntry;
  /// Per-coarse-prompt entries; required by kPromptAttribute.
  std::vector<DimEntry> coarse_breakdown;
};

struct Rollup {
  double dim = 0.0;  // 1 - mean |DIM entry| within the group
  double cim = 0.0;  // mean per-prompt S within the group
  std::size_t n_dim_entries = 0;
  std::size_t n_prompts = 0;

  bool operator==(const Rollup&) const = default;
};

struct MetricReport {
  std::string model_id;
  std::string dataset_hash;
  io::Json config = io::Json::object();
  double summary_dim = 0.0;
  double summary_cim = 0.0;
  std::vector<DimEntry> dim_entries;
  std::vector<CimEntry> cim_entries;
  std::map<std::string, Rollup> concept_rollups;
  std::map<std::string, Rollup> type_rollups;

  /// True for files carrying only the summary pair.
  bool summary_only() const noexcept { return dim_entries.empty() && cim_entries.empty(); }
  bool operator==(const MetricReport&) const = default;
};

double summary_dim(const std::vector<DimEntry>& entries);
double summary_cim(const std::vector<CimEntry>& entries);

/// EmptyInput if either list is empty. model_id, dataset_hash and config are
/// left for the caller.
MetricReport summarize(const std::vector<DimEntry>& dim_entries,
                       const std::vector<CimEntry>& cim_entries, const SummaryOptions& options = {});

io::Json to_json(const MetricReport& report);
MetricReport report_from_json(const io::Json& j);
/// Canonical byte form: two-space indented JSON plus a trailing newline.
std::string serialize(const MetricReport& report);
MetricReport load_report(const std::filesystem::path& path);
void save_report(const MetricReport& report, const std::filesystem::path& path);

/// Flat rows: model, concept, attribute_type, attribute, kind, value, n.
std::string report_csv(const MetricReport& report);
/// Same columns plus unit_id, for per-coarse-prompt DIM diagnostics.
std::string breakdown_csv(const std::string& model_id, const std::vector<DimEntry>& breakdown);

struct ComparisonRow {
  std::string model_id;
  double dim = 0.0;
  double cim = 0.0;
  double delta_dim = 0.0;  // relative to the first report
  double delta_cim = 0.0;
};

struct EntryDelta {
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  ScoreKind kind = ScoreKind::kCoarse;
  std::vector<std::optional<double>> values;  // one per report
  std::vector<std::optional<double>> deltas;  // value - first report's value
};

struct ComparisonTable {
  std::string dataset_hash;
  std::vector<ComparisonRow> rows;
  std::vector<EntryDelta> entries;
};

/// DatasetMismatch on differing dataset hashes; EmptyInput with fewer than two
/// reports.
ComparisonTable compare_reports(const std::vector<MetricReport>& reports);

std::string comparison_csv(const ComparisonTable& table);
std::string entry_delta_csv(const ComparisonTable& table);

}  // namespace dimcim
