// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "dimcim/errors.hpp"
#include "dimcim/metrics.hpp"
#include "test_support.hpp"

namespace dimcim {
namespace {

using io::Json;
using testing::TempDir;

DimEntry dim_entry(std::string concept_name, std::string type, std::string attribute, double value) {
  return {coarse_pool_unit(concept_name), std::move(concept_name), std::move(type), std::move(attribute), value, 30};
}

CimEntry cim_entry(std::string concept_name, std::string type, std::string attribute,
                   std::vector<double> per_prompt) {
  CimEntry e{std::move(concept_name), std::move(type), std::move(attribute), 0.0, {}};
  double sum = 0.0;
  for (std::size_t i = 0; i < per_prompt.size(); ++i) {
    e.per_prompt.push_back({e.attribute + "-dp-" + std::to_string(i), per_prompt[i]});
    sum += per_prompt[i];
  }
  e.value = sum / static_cast<double>(per_prompt.size());
  return e;
}

ScoreMatrix dense_matrix(const DensePrompt& p, const std::vector<std::string>& attributes, double on,
                         double off) {
  ScoreMatrix m;
  m.unit_id = p.id;
  m.concept_name = p.concept_name;
  m.attribute_type = p.attribute_type;
  m.attributes = attributes;
  m.image_ids = {p.id + "-a", p.id + "-b"};
  m.scores.resize(2, static_cast<Eigen::Index>(attributes.size()));
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    m.scores.col(static_cast<Eigen::Index>(a)).setConstant(attributes[a] == p.attribute ? on : off);
  }
  return m;
}

TEST(SummaryDim, OneMinusMeanAbsolute) {
  EXPECT_NEAR(summary_dim({dim_entry("bird", "state", "perched", 0.4), dim_entry("bird", "state", "flying", -0.4)}),
              0.6, 1e-15);
  EXPECT_NEAR(summary_dim({dim_entry("bird", "state", "perched", 0.0)}), 1.0, 1e-15);
  EXPECT_THROW(summary_dim({}), EmptyInput);
}

TEST(SummaryCim, WeightsEveryPromptEqually) {
  const std::vector<CimEntry> entries{cim_entry("bird", "state", "perched", {0.8, 0.6}),
                                      cim_entry("bird", "state", "flying", {0.2})};
  EXPECT_NEAR(summary_cim(entries), (0.8 + 0.6 + 0.2) / 3.0, 1e-15);
  EXPECT_THROW(summary_cim({}), EmptyInput);
}

TEST(SummaryProperties, StayInRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DimEntry> dims;
    std::vector<CimEntry> cims;
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int i = 0; i < n; ++i) {
      dims.push_back(dim_entry("c", "t", "a" + std::to_string(i), u(rng)));
      cims.push_back(cim_entry("c", "t", "a" + std::to_string(i), {u(rng), u(rng)}));
    }
    const auto r = summarize(dims, cims);
    EXPECT_GE(r.summary_dim, 0.0);
    EXPECT_LE(r.summary_dim, 1.0);
    EXPECT_GE(r.summary_cim, -1.0);
    EXPECT_LE(r.summary_cim, 1.0);
  }
}

TEST(CimScores, GroupsDensePromptsInCatalogOrder) {
  const auto ds = testing::two_concept_dataset();
  std::vector<ScoreMatrix> matrices;
  // Reverse order on purpose; output follows the catalog.
  for (auto it = ds.dense_prompts.rbegin(); it != ds.dense_prompts.rend(); ++it) {
    const auto* type = ds.find_concept(it->concept_name)->find_type(it->attribute_type);
    const double on = it->attribute == "glass" ? 0.5 : 0.9;
    matrices.push_back(dense_matrix(*it, type->attributes, on, 0.1));
  }
  const auto entries = cim_attribute_scores(matrices, ds);
  ASSERT_EQ(entries.size(), 7u);
  EXPECT_EQ(entries[0].attribute, "wooden");
  EXPECT_EQ(entries[2].attribute, "glass");
  EXPECT_EQ(entries[6].attribute, "without pillows");
  EXPECT_EQ(entries[0].n_prompts(), 2u);
  EXPECT_EQ(entries[0].per_prompt[0].dense_prompt_id, "table-dp-0000");
  EXPECT_EQ(entries[0].per_prompt[1].dense_prompt_id, "table-dp-0005");
  EXPECT_NEAR(entries[0].value, 0.8, 1e-15);
  EXPECT_NEAR(entries[2].value, 0.4, 1e-15);
  EXPECT_NEAR(entries[5].value, 0.8, 1e-15);

  auto orphan = matrices;
  orphan[0].unit_id = "table-dp-9999";
  EXPECT_THROW(cim_attribute_scores(orphan, ds), OrphanMatrix);
}

TEST(DimScores, OneEntryPerColumn) {
  ScoreMatrix m;
  m.unit_id = "pool:bird";
  m.concept_name = "bird";
  m.attribute_type = "state";
  m.attributes = {"perched", "flying"};
  m.image_ids = {"a", "b"};
  m.scores.resize(2, 2);
  m.scores << 0.9, 0.1, 0.9, 0.1;
  const auto entries = dim_attribute_scores({m});
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].attribute, "flying");
  EXPECT_NEAR(entries[1].value, -0.8, 1e-15);
  EXPECT_EQ(entries[1].n_images, 2u);
}

TEST(Summarize, RollupsAndAveragingModes) {
  const std::vector<DimEntry> dims{dim_entry("bird", "state", "perched", 0.4),
                                   dim_entry("bird", "state", "flying", -0.4),
                                   dim_entry("bed", "frame", "wooden", 0.1),
                                   dim_entry("bed", "frame", "metal", -0.1)};
  const std::vector<CimEntry> cims{cim_entry("bird", "state", "perched", {0.8}),
                                   cim_entry("bird", "state", "flying", {0.6, 0.4}),
                                   cim_entry("bed", "frame", "wooden", {0.2})};
  auto r = summarize(dims, cims);
  EXPECT_NEAR(r.summary_dim, 0.75, 1e-15);
  EXPECT_NEAR(r.summary_cim, 0.5, 1e-15);
  EXPECT_NEAR(r.concept_rollups.at("bird").dim, 0.6, 1e-15);
  EXPECT_NEAR(r.concept_rollups.at("bird").cim, 0.6, 1e-15);
  EXPECT_EQ(r.concept_rollups.at("bird").n_prompts, 3u);
  EXPECT_NEAR(r.type_rollups.at("frame").dim, 0.9, 1e-15);
  EXPECT_EQ(r.type_rollups.at("frame").n_dim_entries, 2u);

  SummaryOptions options;
  options.averaging = DimAveraging::kPromptAttribute;
  EXPECT_THROW(summarize(dims, cims, options), EmptyInput);
  options.coarse_breakdown = {dim_entry("bird", "state", "perched", 0.2), dim_entry("bird", "state", "flying", -0.2),
                              dim_entry("bird", "state", "perched", 0.6), dim_entry("bird", "state", "flying", -0.6)};
  r = summarize(dims, cims, options);
  EXPECT_NEAR(r.summary_dim, 0.6, 1e-15);

  EXPECT_THROW(summarize({}, cims), EmptyInput);
  EXPECT_THROW(summarize(dims, {}), EmptyInput);
  EXPECT_EQ(dim_averaging_from_string(to_string(DimAveraging::kPromptAttribute)), DimAveraging::kPromptAttribute);
  EXPECT_THROW(dim_averaging_from_string("mean"), ParseError);
}

MetricReport sample_report(std::string model, double shift = 0.0) {
  auto r = summarize({dim_entry("bird", "state", "perched", 0.4 + shift), dim_entry("bird", "state", "flying", -0.4 - shift)},
                     {cim_entry("bird", "state", "perched", {0.8 + shift}), cim_entry("bird", "state", "flying", {0.6, 0.4})});
  r.model_id = std::move(model);
  r.dataset_hash = "abc";
  r.config = {{"coarse_parity", "total"}};
  return r;
}

TEST(ReportFile, RoundTripIsByteStable) {
  TempDir dir;
  const auto r = sample_report("m,1");
  save_report(r, dir / "r.json");
  const auto back = load_report(dir / "r.json");
  EXPECT_EQ(back, r);
  EXPECT_EQ(serialize(back), io::read_file(dir / "r.json"));
  const auto j = to_json(r);
  EXPECT_EQ(j["summary"]["dim"], r.summary_dim);
  EXPECT_EQ(j["dim_entries"][0]["unit_id"], "pool:bird");
  EXPECT_EQ(j["cim_entries"][1]["n_prompts"], 2);
}

TEST(ReportFile, RandomReportsRoundTrip) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DimEntry> dims;
    std::vector<CimEntry> cims;
    for (int i = 0; i < 5; ++i) {
      dims.push_back(dim_entry("c" + std::to_string(i % 2), "t", "a" + std::to_string(i), u(rng)));
      cims.push_back(cim_entry("c" + std::to_string(i % 2), "t", "a" + std::to_string(i), {u(rng), u(rng), u(rng)}));
    }
    auto r = summarize(dims, cims);
    r.model_id = "m" + std::to_string(trial);
    const auto text = serialize(r);
    EXPECT_EQ(report_from_json(Json::parse(text)), r);
    EXPECT_EQ(serialize(report_from_json(Json::parse(text))), text);
  }
}

TEST(ReportFile, SummaryOnlyAndDefaults) {
  const auto r = report_from_json(Json{{"model_id", "LDM2.1"}, {"summary", {{"dim", 0.815}, {"cim", 0.299}}}});
  EXPECT_TRUE(r.summary_only());
  EXPECT_EQ(r.summary_dim, 0.815);
  EXPECT_EQ(r.dataset_hash, "");

  const auto withentry = report_from_json(
      Json{{"model_id", "m"},
           {"summary", {{"dim", 0.5}, {"cim", 0.5}}},
           {"dim_entries", {{{"concept", "bird"}, {"attribute_type", "state"}, {"attribute", "perched"}, {"value", 0.5}}}}});
  EXPECT_EQ(withentry.dim_entries[0].unit_id, "pool:bird");
  EXPECT_FALSE(withentry.summary_only());

  EXPECT_THROW(report_from_json(Json{{"summary", {{"dim", 0.5}, {"cim", 0.5}}}}), ParseError);
  EXPECT_THROW(report_from_json(Json{{"model_id", "m"}, {"summary", {{"dim", "x"}, {"cim", 0.5}}}}), ParseError);
  TempDir dir;
  io::write_file_atomic(dir / "bad.json", "{nope");
  EXPECT_THROW(load_report(dir / "bad.json"), ParseError);
}

TEST(ReportFile, NanRollupsSerializeAsNull) {
  auto r = summarize({dim_entry("bird", "state", "perched", 0.4), dim_entry("bird", "state", "flying", -0.4),
                      dim_entry("bed", "frame", "wooden", 0.2), dim_entry("bed", "frame", "metal", -0.2)},
                     {cim_entry("bird", "state", "perched", {0.5})});
  const auto j = to_json(r);
  EXPECT_TRUE(j["rollups"]["concept"]["bed"]["cim"].is_null());
  const auto back = report_from_json(j);
  EXPECT_TRUE(std::isnan(back.concept_rollups.at("bed").cim));
}

TEST(Csv, ReportAndBreakdown) {
  const auto csv = report_csv(sample_report("m,1"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,concept,attribute_type,attribute,kind,value,n");
  EXPECT_NE(csv.find("\"m,1\",bird,state,perched,dim,0.4,30\n"), std::string::npos);
  EXPECT_NE(csv.find("\"m,1\",bird,state,flying,cim,0.5,2\n"), std::string::npos);
  const auto b = breakdown_csv("m", {{"bird-cp-000", "bird", "state", "perched", 0.25, 10}});
  EXPECT_EQ(b, "model,unit_id,concept,attribute_type,attribute,kind,value,n\nm,bird-cp-000,bird,state,perched,dim,0.25,10\n");
}

TEST(Compare, DeltasAgainstFirstReport) {
  const auto a = sample_report("a");
  auto b = sample_report("b", 0.1);
  b.cim_entries.pop_back();
  b.dim_entries.push_back({"bird-cp-000", "bird", "state", "perched", 0.9, 3});
  const auto table = compare_reports({a, b});
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].delta_dim, 0.0);
  EXPECT_NEAR(table.rows[1].delta_dim, b.summary_dim - a.summary_dim, 1e-15);
  ASSERT_EQ(table.entries.size(), 4u);
  EXPECT_EQ(table.entries[0].kind, ScoreKind::kCoarse);
  EXPECT_NEAR(*table.entries[0].deltas[1], 0.1, 1e-12);
  EXPECT_FALSE(table.entries[3].values[1].has_value());
  EXPECT_FALSE(table.entries[3].deltas[1].has_value());

  const auto rows = comparison_csv(table);
  EXPECT_EQ(rows.substr(0, rows.find('\n')), "model,dim,cim,delta_dim,delta_cim");
  const auto entries = entry_delta_csv(table);
  EXPECT_EQ(entries.substr(0, entries.find('\n')), "concept,attribute_type,attribute,kind,value:a,value:b,delta:b");
  EXPECT_NE(entries.find("bird,state,flying,cim,0.5,,\n"), std::string::npos);

  EXPECT_THROW(compare_reports({a}), EmptyInput);
  auto other = sample_report("c");
  other.dataset_hash = "def";
  EXPECT_THROW(compare_reports({a, other}), DatasetMismatch);
}

}  // namespace
}  // namespace dimcim
