// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Attribute-concept scoring. For n images and the k attributes of one
// attribute type, the image-attribute scores s(i, a) form an n x k grid; the
// attribute-concept score of column a is
//
//   S(a) = mean_i s(i, a) - sum_i sum_{j != a} s(i, j) / (n (k - 1))
//
// i.e. the mean score of the target attribute minus the mean score of its
// siblings. Columns of one grid always sum to zero.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dimcim/adapters.hpp"
#include "dimcim/errors.hpp"

namespace dimcim {

enum class ScoreKind { kCoarse, kDense };

std::string_view to_string(ScoreKind kind);

// ---------------------------------------------------------------------------
// Query text

struct QueryText {
  std::string concept_name;
  std::string attribute;
  std::string phrase;
};

/// Recognized key: "head_noun" replaces the concept name in the phrase.
using StyleHints = std::map<std::string, std::string>;

/// "a metal table", "an orange airplane", "a bed without pillows": only the
/// concept and the attribute, never the prompt's scene context. Attributes
/// opening with a preposition follow the noun.
QueryText render_query(std::string_view concept_name, std::string_view attribute,
                       const StyleHints& hints = {});

enum class ConceptQueryStyle { kPhoto, kBare };

/// Concept-presence query: "a photo of a bird" (kPhoto) or "bird" (kBare).
std::string render_concept_query(std::string_view concept_name,
                                 ConceptQueryStyle style = ConceptQueryStyle::kPhoto);

// ---------------------------------------------------------------------------
// Reductions

namespace detail {

template <typename Scalar>
Scalar pairwise_sum_range(const Scalar* data, Eigen::Index n) {
  constexpr Eigen::Index kBlock = 32;
  if (n <= kBlock) {
    Scalar acc(0);
    for (Eigen::Index i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const Eigen::Index half = n / 2;
  return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}

}  // namespace detail

/// Pairwise (cascade) summation of a vector expression.
template <typename Derived>
typename Derived::Scalar pairwise_sum(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat = v.derived().reshaped();
  return detail::pairwise_sum_range(flat.data(), flat.size());
}

/// Per-column sums of a grid. Each column is sorted before pairwise
/// accumulation, so the sums do not depend on row order.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> column_sums(
    const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sums(grid.cols());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> column(grid.rows());
  for (Eigen::Index a = 0; a < grid.cols(); ++a) {
    column = grid.col(a);
    std::sort(column.begin(), column.end());
    sums(a) = detail::pairwise_sum_range(column.data(), column.size());
  }
  return sums;
}

/// S for every column of an n x k grid (n >= 1, k >= 2).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> attribute_concept_values(
    const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = grid.rows();
  const Eigen::Index k = grid.cols();
  if (n < 1 || k < 2) throw std::invalid_argument("score grid needs n >= 1 rows and k >= 2 columns");
  const auto sums = column_sums(grid);
  const Scalar total = pairwise_sum(sums);
  const Scalar n_s = static_cast<Scalar>(n);
  const Scalar others = n_s * static_cast<Scalar>(k - 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    values(a) = sums(a) / n_s - (total - sums(a)) / others;
  }
  return values;
}

template <typename Derived>
typename Derived::Scalar attribute_concept_value(const Eigen::MatrixBase<Derived>& grid,
                                                 Eigen::Index target) {
  if (target < 0 || target >= grid.cols()) throw std::out_of_range("target column out of range");
  return attribute_concept_values(grid)(target);
}

// ---------------------------------------------------------------------------
// Score matrices

struct DroppedRow {
  std::string image_id;
  std::string reason;
};

template <typename Scalar>
struct BasicScoreMatrix {
  using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::string unit_id;
  std::string concept_name;
  std::string attribute_type;
  std::vector<std::string> image_ids;   // one per row
  std::vector<std::string> attributes;  // one per column
  Grid scores;
  std::vector<DroppedRow> dropped;

  Eigen::Index n_images() const { return scores.rows(); }
  Eigen::Index n_attributes() const { return scores.cols(); }

  Eigen::Index column_of(std::string_view attribute) const {
    for (std::size_t a = 0; a < attributes.size(); ++a) {
      if (attributes[a] == attribute) return static_cast<Eigen::Index>(a);
    }
    return -1;
  }

  /// Shape and range invariants.
  void check() const {
    if (scores.rows() != static_cast<Eigen::Index>(image_ids.size()) ||
        scores.cols() != static_cast<Eigen::Index>(attributes.size())) {
      throw std::logic_error("score matrix '" + unit_id + "': grid shape does not match labels");
    }
    if (attributes.size() < 2) {
      throw std::logic_error("score matrix '" + unit_id + "' needs at least 2 attributes");
    }
    if (scores.size() > 0 && !((scores.array() >= Scalar(0)).all() && (scores.array() <= Scalar(1)).all())) {
      throw std::logic_error("score matrix '" + unit_id + "' has scores outside [0,1]");
    }
  }
};

using ScoreMatrix = BasicScoreMatrix<double>;

struct AttributeConceptScore {
  std::string unit_id;
  std::string concept_name;
  std::string attribute_type;
  std::string attribute;
  double value = 0.0;
  std::size_t n_images = 0;
  ScoreKind kind = ScoreKind::kCoarse;
};

/// S for one named column. UnknownAttribute if `target` is not a column.
AttributeConceptScore attribute_concept_score(const ScoreMatrix& matrix, std::string_view target,
                                              ScoreKind kind = ScoreKind::kCoarse);

/// S for every column, in column order.
std::vector<AttributeConceptScore> score_all(const ScoreMatrix& matrix,
                                             ScoreKind kind = ScoreKind::kCoarse);

/// Queries `scorer` for every (image, attribute) pair. An image whose scoring
/// fails for any attribute (RequestFailure) is dropped as a whole row and
/// recorded in `dropped`; EmptyMatrix if no rows survive.
ScoreMatrix build_score_matrix(const std::vector<ImageRef>& images, std::string_view unit_id,
                               std::string_view concept_name, std::string_view attribute_type,
                               const std::vector<std::string>& attributes,
                               AlignmentScorer& scorer, const StyleHints& hints = {});

/// Rows `rows` of `matrix`, as a new matrix with unit id `unit_id`.
ScoreMatrix select_rows(const ScoreMatrix& matrix, const std::vector<Eigen::Index>& rows,
                        std::string unit_id);

/// Unit id of the pooled coarse-image matrix of a concept.
std::string coarse_pool_unit(std::string_view concept_name);
bool is_coarse_pool_unit(std::string_view unit_id);

// Score cell interchange: one JSON Lines record per grid cell
// {"unit_id","image_id","concept","attribute_type","attribute","score"}.
std::vector<io::Json> to_cell_records(const ScoreMatrix& matrix);
/// Regroups cells by (unit_id, attribute_type), keeping first-seen row and
/// column order. ParseError if a grid is incomplete.
std::vector<ScoreMatrix> matrices_from_cells(const std::vector<io::Json>& records);

}  // namespace dimcim
