// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/scoring.hpp"

#include <array>
#include <map>
#include <mutex>
#include <optional>

#include "dimcim/concurrency.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::kCoarse ? "coarse" : "dense";
}

QueryText render_query(std::string_view concept_name, std::string_view attribute,
                       const StyleHints& hints) {
  static constexpr std::array<std::string_view, 6> kPrepositions{"with", "without", "on",
                                                                 "in",   "near",    "under"};
  std::string noun(concept_name);
  if (auto it = hints.find("head_noun"); it != hints.end() && !it->second.empty()) noun = it->second;
  const std::string attr = text::trim(attribute);
  const auto tokens = text::tokenize(attr);
  const bool postpositive =
      !tokens.empty() &&
      std::find(kPrepositions.begin(), kPrepositions.end(), tokens.front()) != kPrepositions.end();

  QueryText q{std::string(concept_name), attr, {}};
  if (postpositive) {
    q.phrase = std::string(text::indefinite_article(noun)) + " " + noun + " " + attr;
  } else {
    q.phrase = std::string(text::indefinite_article(attr)) + " " + attr + " " + noun;
  }
  return q;
}

std::string render_concept_query(std::string_view concept_name, ConceptQueryStyle style) {
  if (style == ConceptQueryStyle::kBare) return std::string(concept_name);
  return "a photo of " + std::string(text::indefinite_article(concept_name)) + " " +
         std::string(concept_name);
}

AttributeConceptScore attribute_concept_score(const ScoreMatrix& matrix, std::string_view target,
                                              ScoreKind kind) {
  const Eigen::Index col = matrix.column_of(target);
  if (col < 0) throw UnknownAttribute(matrix.unit_id, std::string(target));
  matrix.check();
  return {matrix.unit_id,
          matrix.concept_name,
          matrix.attribute_type,
          std::string(target),
          attribute_concept_value(matrix.scores, col),
          static_cast<std::size_t>(matrix.n_images()),
          kind};
}

std::vector<AttributeConceptScore> score_all(const ScoreMatrix& matrix, ScoreKind kind) {
  matrix.check();
  const Eigen::VectorXd values = attribute_concept_values(matrix.scores);
  std::vector<AttributeConceptScore> out;
  out.reserve(matrix.attributes.size());
  for (std::size_t a = 0; a < matrix.attributes.size(); ++a) {
    out.push_back({matrix.unit_id, matrix.concept_name, matrix.attribute_type, matrix.attributes[a],
                   values(static_cast<Eigen::Index>(a)),
                   static_cast<std::size_t>(matrix.n_images()), kind});
  }
  return out;
}

ScoreMatrix build_score_matrix(const std::vector<ImageRef>& images, std::string_view unit_id,
                               std::string_view concept_name, std::string_view attribute_type,
                               const std::vector<std::string>& attributes,
                               AlignmentScorer& scorer, const StyleHints& hints) {
  if (attributes.size() < 2) throw std::invalid_argument("score matrix needs at least 2 attributes");
  if (images.empty()) throw std::invalid_argument("score matrix needs at least one image");

  std::vector<std::string> queries;
  queries.reserve(attributes.size());
  for (const auto& a : attributes) queries.push_back(render_query(concept_name, a, hints).phrase);

  const std::size_t n = images.size();
  const std::size_t k = attributes.size();
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::vector<std::optional<std::string>> failure(n);
  std::mutex failure_mutex;

  parallel_for(n * k, effective_concurrency(scorer.max_concurrency()), [&](std::size_t cell) {
    const std::size_t i = cell / k;
    const std::size_t a = cell % k;
    try {
      grid(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) =
          scorer.score({images[i], queries[a]});
    } catch (const RequestFailure& e) {
      std::lock_guard lock(failure_mutex);
      if (!failure[i]) failure[i] = e.what();
    }
  });

  ScoreMatrix m;
  m.unit_id = unit_id;
  m.concept_name = concept_name;
  m.attribute_type = attribute_type;
  m.attributes = attributes;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (failure[i]) {
      m.dropped.push_back({images[i].id, *failure[i]});
    } else {
      keep.push_back(static_cast<Eigen::Index>(i));
      m.image_ids.push_back(images[i].id);
    }
  }
  if (keep.empty()) throw EmptyMatrix(std::string(unit_id));
  m.scores = grid(keep, Eigen::all);
  return m;
}

ScoreMatrix select_rows(const ScoreMatrix& matrix, const std::vector<Eigen::Index>& rows,
                        std::string unit_id) {
  ScoreMatrix out;
  out.unit_id = std::move(unit_id);
  out.concept_name = matrix.concept_name;
  out.attribute_type = matrix.attribute_type;
  out.attributes = matrix.attributes;
  for (auto r : rows) out.image_ids.push_back(matrix.image_ids.at(static_cast<std::size_t>(r)));
  out.scores = matrix.scores(rows, Eigen::all);
  return out;
}

std::string coarse_pool_unit(std::string_view concept_name) {
  return "pool:" + std::string(concept_name);
}

bool is_coarse_pool_unit(std::string_view unit_id) { return unit_id.rfind("pool:", 0) == 0; }

std::vector<io::Json> to_cell_records(const ScoreMatrix& matrix) {
  std::vector<io::Json> out;
  out.reserve(static_cast<std::size_t>(matrix.scores.size()));
  for (Eigen::Index i = 0; i < matrix.n_images(); ++i) {
    for (Eigen::Index a = 0; a < matrix.n_attributes(); ++a) {
      io::Json rec = io::Json::object();
      rec["unit_id"] = matrix.unit_id;
      rec["image_id"] = matrix.image_ids[static_cast<std::size_t>(i)];
      rec["concept"] = matrix.concept_name;
      rec["attribute_type"] = matrix.attribute_type;
      rec["attribute"] = matrix.attributes[static_cast<std::size_t>(a)];
      rec["score"] = matrix.scores(i, a);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<ScoreMatrix> matrices_from_cells(const std::vector<io::Json>& records) {
  struct Builder {
    std::string unit_id, concept_name, attribute_type;
    std::vector<std::string> images, attributes;
    std::map<std::string, std::size_t> image_index, attribute_index;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
  };
  std::vector<Builder> builders;
  std::map<std::pair<std::string, std::string>, std::size_t> by_key;

  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string loc = "cells[" + std::to_string(r) + "]";
    for (auto key : {"unit_id", "image_id", "concept", "attribute_type", "attribute"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        throw ParseError(loc, std::string("missing string field '") + key + "'");
      }
    }
    if (!rec.contains("score") || !rec["score"].is_number()) {
      throw ParseError(loc, "missing numeric field 'score'");
    }
    const auto unit = rec["unit_id"].get<std::string>();
    const auto type = rec["attribute_type"].get<std::string>();
    auto [it, fresh] = by_key.emplace(std::make_pair(unit, type), builders.size());
    if (fresh) {
      builders.push_back({unit, rec["concept"].get<std::string>(), type, {}, {}, {}, {}, {}});
    }
    Builder& b = builders[it->second];
    const auto img = rec["image_id"].get<std::string>();
    const auto attr = rec["attribute"].get<std::string>();
    auto [ii, new_img] = b.image_index.emplace(img, b.images.size());
    if (new_img) b.images.push_back(img);
    auto [ai, new_attr] = b.attribute_index.emplace(attr, b.attributes.size());
    if (new_attr) b.attributes.push_back(attr);
    if (!b.cells.emplace(std::make_pair(ii->second, ai->second), rec["score"].get<double>()).second) {
      throw ParseError(loc, "duplicate cell (" + img + ", " + attr + ") in unit '" + unit + "'");
    }
  }

  std::vector<ScoreMatrix> out;
  out.reserve(builders.size());
  for (auto& b : builders) {
    if (b.cells.size() != b.images.size() * b.attributes.size()) {
      throw ParseError("unit '" + b.unit_id + "'", "incomplete score grid");
    }
    ScoreMatrix m;
    m.unit_id = b.unit_id;
    m.concept_name = b.concept_name;
    m.attribute_type = b.attribute_type;
    m.image_ids = b.images;
    m.attributes = b.attributes;
    m.scores.resize(static_cast<Eigen::Index>(b.images.size()),
                    static_cast<Eigen::Index>(b.attributes.size()));
    for (const auto& [pos, v] : b.cells) {
      m.scores(static_cast<Eigen::Index>(pos.first), static_cast<Eigen::Index>(pos.second)) = v;
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace dimcim
