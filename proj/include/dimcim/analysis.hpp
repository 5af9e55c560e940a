// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Failure-mode mining over DIM/CIM entries and the training-data audit.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dimcim/metrics.hpp"

namespace dimcim {

struct AnalysisConfig {
  double tau_fail = 0.0;  // cim below this: the model cannot produce the attribute
  double tau_can = 0.3;   // cim at or above this: the model can
  double tau_bias = 0.3;  // |dim| at or above this: default-mode bias
  std::vector<std::string> negation_markers = {"without", "no "};
  double outlier_percentile = 95.0;
  double filter_threshold = 0.8;
  ConceptQueryStyle concept_query = ConceptQueryStyle::kPhoto;
  std::size_t max_images_per_concept = 0;  // 0 = all survivors
  bool allow_unpaired = false;             // skip instead of MissingCounterpart

  void check() const;
};

enum class QuadrantCategory {
  kOk,
  kGeneralizationFailure,
  kDefaultBiasOver,
  kDefaultBiasUnder,
  kCanButDoesnt,
  kCantButDoes,
};

std::string_view to_string(QuadrantCategory category);

struct QuadrantFinding {
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double dim = 0.0;
  double cim = 0.0;
  QuadrantCategory category = QuadrantCategory::kOk;

  bool operator==(const QuadrantFinding&) const = default;
};

/// Exactly one category per pair; the most specific pattern wins.
QuadrantCategory classify(double dim, double cim, const AnalysisConfig& config = {});

/// Pairs pooled DIM entries with CIM entries by (concept, type, attribute), in
/// DIM entry order. MissingCounterpart for an unpaired entry unless
/// config.allow_unpaired.
std::vector<QuadrantFinding> classify_quadrants(const MetricReport& report,
                                                const AnalysisConfig& config = {});

/// Findings for catalog attributes opening with a negation marker word,
/// sorted by cim ascending. dim is NaN when the report lacks the DIM entry.
std::vector<QuadrantFinding> negation_audit(const MetricReport& report,
                                            const BenchmarkDataset& dataset,
                                            const AnalysisConfig& config = {});

bool is_negation(std::string_view attribute, const std::vector<std::string>& markers);

std::string findings_csv(const std::string& model_id, const std::vector<QuadrantFinding>& findings);

// ---------------------------------------------------------------------------
// Training-data audit

/// JSON Lines {"image_id","uri","labels"?}.
std::vector<ImageRef> read_corpus_manifest(const std::filesystem::path& path);

/// Images whose concept-presence score reaches `threshold` (in (0,1)).
std::vector<ImageRef> filter_training_images(const std::vector<ImageRef>& corpus,
                                             std::string_view concept_name,
                                             AlignmentScorer& scorer, double threshold = 0.8,
                                             ConceptQueryStyle style = ConceptQueryStyle::kPhoto);

struct TrainingAuditResult {
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double train_dim = 0.0;
  double gen_dim = 0.0;  // NaN until joined
  std::size_t n_train_images = 0;
};

/// Unit id of the pooled training-image matrix of a concept.
std::string training_pool_unit(std::string_view concept_name);

/// DIM of every catalog attribute over the filtered corpus images, computed by
/// the same pooled-matrix path as generated DIM. EmptyMatrix if no image
/// survives.
std::vector<TrainingAuditResult> training_dim(const std::vector<ImageRef>& filtered_images,
                                              const Concept& concept_entry, AlignmentScorer& scorer,
                                              const StyleHints& hints = {});

/// Fills gen_dim from the report's pooled DIM entries. MissingCounterpart for
/// an unmatched result unless `allow_unpaired`, in which case it is dropped.
std::vector<TrainingAuditResult> join_gen_dim(std::vector<TrainingAuditResult> results,
                                              const MetricReport& report, bool allow_unpaired = false);

struct Outlier {
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double residual = 0.0;
};

struct CorrelationResult {
  double pearson_r = 0.0;
  std::size_t n_pairs = 0;
  double slope = 0.0;  // least-squares gen_dim on train_dim
  double intercept = 0.0;
  std::vector<Outlier> outliers;
};

/// Pearson r over (x, y). DegenerateVariance if either side is constant;
/// EmptyInput with fewer than two pairs.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Linear-interpolated percentile (p in [0, 100]) of a non-empty sample.
double percentile(std::vector<double> values, double p);

/// r over (train_dim, gen_dim); outliers are pairs whose absolute residual
/// from the least-squares line exceeds the given percentile of all absolute
/// residuals.
CorrelationResult correlate(const std::vector<TrainingAuditResult>& results,
                            double outlier_percentile = 95.0);

struct AuditOutcome {
  std::vector<TrainingAuditResult> results;
  CorrelationResult correlation;
  std::map<std::string, std::size_t> kept_per_concept;
};

/// Filters the corpus per catalog concept, computes training DIM, joins the
/// report's generated DIM and correlates. Concepts with no surviving image
/// are skipped.
AuditOutcome audit_training(const std::vector<ImageRef>& corpus, const BenchmarkDataset& dataset,
                            const MetricReport& report, AlignmentScorer& scorer,
                            const AnalysisConfig& config = {}, const StyleHints& hints = {});

std::string audit_csv(const std::vector<TrainingAuditResult>& results);
io::Json to_json(const CorrelationResult& correlation);

}  // namespace dimcim
