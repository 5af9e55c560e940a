// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/analysis.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "dimcim/concurrency.hpp"
#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

using io::Json;

void AnalysisConfig::check() const {
  if (!(tau_bias >= 0.0)) throw std::invalid_argument("tau_bias must be non-negative");
  if (!(tau_fail <= tau_can)) throw std::invalid_argument("tau_fail must not exceed tau_can");
  if (!(outlier_percentile >= 0.0 && outlier_percentile <= 100.0)) {
    throw std::invalid_argument("outlier percentile must lie in [0, 100]");
  }
  if (!(filter_threshold > 0.0 && filter_threshold < 1.0)) {
    throw std::invalid_argument("filter threshold must lie in (0, 1)");
  }
}

std::string_view to_string(QuadrantCategory category) {
  switch (category) {
    case QuadrantCategory::kOk: return "OK";
    case QuadrantCategory::kGeneralizationFailure: return "GENERALIZATION_FAILURE";
    case QuadrantCategory::kDefaultBiasOver: return "DEFAULT_BIAS_OVER";
    case QuadrantCategory::kDefaultBiasUnder: return "DEFAULT_BIAS_UNDER";
    case QuadrantCategory::kCanButDoesnt: return "CAN_BUT_DOESNT";
    case QuadrantCategory::kCantButDoes: return "CANT_BUT_DOES";
  }
  return "OK";
}

QuadrantCategory classify(double dim, double cim, const AnalysisConfig& c) {
  const bool cannot = cim < c.tau_fail;
  const bool can = cim >= c.tau_can;
  const bool over = dim >= c.tau_bias;
  const bool under = dim <= -c.tau_bias;
  if (cannot && over) return QuadrantCategory::kCantButDoes;
  if (can && under) return QuadrantCategory::kCanButDoesnt;
  if (cannot) return QuadrantCategory::kGeneralizationFailure;
  if (over) return QuadrantCategory::kDefaultBiasOver;
  if (under) return QuadrantCategory::kDefaultBiasUnder;
  return QuadrantCategory::kOk;
}

namespace {

using EntryKey = std::tuple<std::string, std::string, std::string>;

std::map<EntryKey, double> pooled_dim(const MetricReport& report) {
  std::map<EntryKey, double> out;
  for (const auto& e : report.dim_entries) {
    if (is_coarse_pool_unit(e.unit_id)) out[{e.concept_name, e.attribute_type, e.attribute}] = e.value;
  }
  return out;
}

std::string describe(const EntryKey& k) {
  return std::get<0>(k) + "/" + std::get<1>(k) + "/" + std::get<2>(k);
}

}  // namespace

std::vector<QuadrantFinding> classify_quadrants(const MetricReport& report,
                                                const AnalysisConfig& config) {
  std::map<EntryKey, double> cims;
  for (const auto& e : report.cim_entries) cims[{e.concept_name, e.attribute_type, e.attribute}] = e.value;
  const auto dims = pooled_dim(report);

  std::vector<QuadrantFinding> out;
  for (const auto& e : report.dim_entries) {
    if (!is_coarse_pool_unit(e.unit_id)) continue;
    const EntryKey key{e.concept_name, e.attribute_type, e.attribute};
    const auto it = cims.find(key);
    if (it == cims.end()) {
      if (config.allow_unpaired) continue;
      throw MissingCounterpart("DIM entry " + describe(key) + " has no CIM entry");
    }
    out.push_back({e.concept_name, e.attribute_type, e.attribute, e.value, it->second,
                   classify(e.value, it->second, config)});
  }
  if (!config.allow_unpaired) {
    for (const auto& [key, _] : cims) {
      if (!dims.count(key)) throw MissingCounterpart("CIM entry " + describe(key) + " has no DIM entry");
    }
  }
  return out;
}

bool is_negation(std::string_view attribute, const std::vector<std::string>& markers) {
  return std::any_of(markers.begin(), markers.end(),
                     [&](const std::string& m) { return text::starts_with_word(attribute, m); });
}

std::vector<QuadrantFinding> negation_audit(const MetricReport& report,
                                            const BenchmarkDataset& dataset,
                                            const AnalysisConfig& config) {
  std::map<EntryKey, double> cims;
  for (const auto& e : report.cim_entries) cims[{e.concept_name, e.attribute_type, e.attribute}] = e.value;
  const auto dims = pooled_dim(report);

  std::vector<QuadrantFinding> out;
  for (const auto& c : dataset.concepts) {
    for (const auto& t : c.attribute_types) {
      for (const auto& a : t.attributes) {
        if (!is_negation(a, config.negation_markers)) continue;
        const EntryKey key{c.name, t.name, a};
        const auto ci = cims.find(key);
        if (ci == cims.end()) continue;
        const auto di = dims.find(key);
        const double dim = di == dims.end() ? std::nan("") : di->second;
        const auto category = std::isnan(dim) ? (ci->second < config.tau_fail
                                                      ? QuadrantCategory::kGeneralizationFailure
                                                      : QuadrantCategory::kOk)
                                              : classify(dim, ci->second, config);
        out.push_back({c.name, t.name, a, dim, ci->second, category});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const QuadrantFinding& x, const QuadrantFinding& y) { return x.cim < y.cim; });
  return out;
}

std::string findings_csv(const std::string& model_id, const std::vector<QuadrantFinding>& findings) {
  std::ostringstream os;
  os << "model,concept,attribute_type,attribute,dim,cim,category\n";
  for (const auto& f : findings) {
    os << text::csv_field(model_id) << ',' << text::csv_field(f.concept_name) << ','
       << text::csv_field(f.attribute_type) << ',' << text::csv_field(f.attribute) << ','
       << text::format_double(f.dim) << ',' << text::format_double(f.cim) << ','
       << to_string(f.category) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

std::vector<ImageRef> read_corpus_manifest(const std::filesystem::path& path) {
  std::vector<ImageRef> out;
  const auto records = io::read_jsonl(path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(image_from_manifest_record(records[i]));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":record " + std::to_string(i), e.what());
    }
  }
  return out;
}

std::vector<ImageRef> filter_training_images(const std::vector<ImageRef>& corpus,
                                             std::string_view concept_name,
                                             AlignmentScorer& scorer, double threshold,
                                             ConceptQueryStyle style) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("filter threshold must lie in (0, 1)");
  }
  const std::string query = render_concept_query(concept_name, style);
  std::vector<char> keep(corpus.size(), 0);
  parallel_for(corpus.size(), effective_concurrency(scorer.max_concurrency()), [&](std::size_t i) {
    try {
      keep[i] = scorer.score({corpus[i], query}) >= threshold;
    } catch (const RequestFailure&) {
      keep[i] = 0;
    }
  });
  std::vector<ImageRef> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i]) out.push_back(corpus[i]);
  }
  return out;
}

std::string training_pool_unit(std::string_view concept_name) {
  return "train:" + std::string(concept_name);
}

std::vector<TrainingAuditResult> training_dim(const std::vector<ImageRef>& filtered_images,
                                              const Concept& concept_entry, AlignmentScorer& scorer,
                                              const StyleHints& hints) {
  const std::string unit = training_pool_unit(concept_entry.name);
  if (filtered_images.empty()) throw EmptyMatrix(unit);
  std::vector<ScoreMatrix> matrices;
  for (const auto& t : concept_entry.attribute_types) {
    matrices.push_back(build_score_matrix(filtered_images, unit, concept_entry.name, t.name,
                                          t.attributes, scorer, hints));
  }
  std::vector<TrainingAuditResult> out;
  for (const auto& e : dim_attribute_scores(matrices)) {
    out.push_back({e.concept_name, e.attribute_type, e.attribute, e.value, std::nan(""), e.n_images});
  }
  return out;
}

std::vector<TrainingAuditResult> join_gen_dim(std::vector<TrainingAuditResult> results,
                                              const MetricReport& report, bool allow_unpaired) {
  const auto dims = pooled_dim(report);
  std::vector<TrainingAuditResult> out;
  for (auto& r : results) {
    const EntryKey key{r.concept_name, r.attribute_type, r.attribute};
    const auto it = dims.find(key);
    if (it == dims.end()) {
      if (allow_unpaired) continue;
      throw MissingCounterpart("training entry " + describe(key) + " has no generated DIM entry");
    }
    r.gen_dim = it->second;
    out.push_back(std::move(r));
  }
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw EmptyInput("correlation needs at least two pairs");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  if (!xv.allFinite() || !yv.allFinite()) throw std::invalid_argument("pearson: non-finite value");
  if (xv.minCoeff() == xv.maxCoeff()) throw DegenerateVariance("all x values are equal");
  if (yv.minCoeff() == yv.maxCoeff()) throw DegenerateVariance("all y values are equal");
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double r = xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  return std::clamp(r, -1.0, 1.0);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw EmptyInput("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return values[lo] + (values[hi] - values[lo]) * (rank - static_cast<double>(lo));
}

CorrelationResult correlate(const std::vector<TrainingAuditResult>& results,
                            double outlier_percentile) {
  std::vector<double> x, y;
  for (const auto& r : results) {
    x.push_back(r.train_dim);
    y.push_back(r.gen_dim);
  }
  CorrelationResult out;
  out.pearson_r = pearson(x, y);
  out.n_pairs = results.size();

  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  out.slope = xc.dot(yc) / xc.squaredNorm();
  out.intercept = yv.mean() - out.slope * xv.mean();

  constexpr double kResidualFloor = 1e-9;
  std::vector<double> residuals, magnitudes;
  for (std::size_t i = 0; i < results.size(); ++i) {
    residuals.push_back(y[i] - (out.slope * x[i] + out.intercept));
    magnitudes.push_back(std::abs(residuals.back()));
  }
  const double cut = percentile(magnitudes, outlier_percentile);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (magnitudes[i] > cut && magnitudes[i] > kResidualFloor) {
      out.outliers.push_back({results[i].concept_name, results[i].attribute_type,
                              results[i].attribute, residuals[i]});
    }
  }
  return out;
}

AuditOutcome audit_training(const std::vector<ImageRef>& corpus, const BenchmarkDataset& dataset,
                            const MetricReport& report, AlignmentScorer& scorer,
                            const AnalysisConfig& config, const StyleHints& hints) {
  config.check();
  AuditOutcome out;
  std::vector<TrainingAuditResult> train;
  for (const auto& c : dataset.concepts) {
    auto kept = filter_training_images(corpus, c.name, scorer, config.filter_threshold,
                                       config.concept_query);
    if (config.max_images_per_concept && kept.size() > config.max_images_per_concept) {
      kept.resize(config.max_images_per_concept);
    }
    out.kept_per_concept[c.name] = kept.size();
    if (kept.empty()) continue;
    auto rows = training_dim(kept, c, scorer, hints);
    train.insert(train.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  out.results = join_gen_dim(std::move(train), report, config.allow_unpaired);
  out.correlation = correlate(out.results, config.outlier_percentile);
  return out;
}

std::string audit_csv(const std::vector<TrainingAuditResult>& results) {
  std::ostringstream os;
  os << "concept,attribute_type,attribute,train_dim,gen_dim,n_train_images\n";
  for (const auto& r : results) {
    os << text::csv_field(r.concept_name) << ',' << text::csv_field(r.attribute_type) << ','
       << text::csv_field(r.attribute) << ',' << text::format_double(r.train_dim) << ','
       << text::format_double(r.gen_dim) << ',' << r.n_train_images << '\n';
  }
  return os.str();
}

Json to_json(const CorrelationResult& c) {
  Json outliers = Json::array();
  for (const auto& o : c.outliers) {
    outliers.push_back(Json::object({{"concept", o.concept_name},
                                     {"attribute_type", o.attribute_type},
                                     {"attribute", o.attribute},
                                     {"residual", o.residual}}));
  }
  return Json::object({{"pearson_r", c.pearson_r},
                       {"n_pairs", c.n_pairs},
                       {"slope", c.slope},
                       {"intercept", c.intercept},
                       {"outliers", std::move(outliers)}});
}

}  // namespace dimcim
