// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

#include "dimcim/errors.hpp"
#include "dimcim/pipeline.hpp"
#include "test_support.hpp"

namespace dimcim {
namespace {

namespace fs = std::filesystem;
using io::Json;
using testing::TempDir;

EvaluationOptions options(int n = 30) {
  EvaluationOptions o;
  o.model_id = "mock";
  o.generation.n_images = n;
  return o;
}

class FlakyGenerator : public ImageGenerator {
 public:
  FlakyGenerator(MockGeneratorOptions options, std::size_t fail_after)
      : inner_(std::move(options)), fail_after_(fail_after) {}
  GenerationBatch run(const GenerationRequest& request) override {
    if (calls_++ >= fail_after_) throw BackendUnavailable("generator went away");
    return inner_.run(request);
  }
  std::string fingerprint() const override { return inner_.fingerprint(); }

 private:
  MockGenerator inner_;
  std::size_t fail_after_;
  std::atomic<std::size_t> calls_{0};
};

TEST(Evaluate, SkewedGeneratorMatchesClosedForm) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGenerator gen(testing::categorical_generator(ds, {{"bird", {{"state", {{"perched", 1.0}}}}}}));
  MockScorer scorer(testing::exact_scorer(ds));
  const auto result = evaluate(ds, gen, scorer, options(), dir.path());
  const auto& report = result.outcome.report;
  EXPECT_NEAR(report.summary_dim, 0.2, 1e-9);
  EXPECT_NEAR(report.summary_cim, 0.8, 1e-9);
  ASSERT_EQ(report.dim_entries.size(), 2u);
  EXPECT_EQ(report.dim_entries[0].unit_id, "pool:bird");
  EXPECT_EQ(report.dim_entries[0].n_images, 60u);
  EXPECT_NEAR(report.dim_entries[0].value, 0.8, 1e-12);
  EXPECT_EQ(report.dataset_hash, dataset_hash(ds));
  ASSERT_EQ(result.outcome.breakdown.size(), 2u);
  EXPECT_EQ(result.outcome.breakdown[0].unit_id, "bird-cp-000");

  for (const char* name : {"run_manifest.json", "generation_manifest.jsonl", "scores.jsonl", "report.json",
                           "report.csv", "coarse_breakdown.csv", "generation_cache.jsonl",
                           "score_cache.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  const auto manifest = Json::parse(io::read_file(dir / "run_manifest.json"));
  EXPECT_TRUE(manifest["stages"]["metrics"]["completed"].get<bool>());
  EXPECT_EQ(manifest["stages"]["generate"]["images"], 120);
  EXPECT_EQ(manifest["dataset_hash"], dataset_hash(ds));
  EXPECT_EQ(load_report(dir / "report.json"), report);
}

TEST(Evaluate, RoundRobinIsPerfectlyDiverse) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  MockScorer scorer(testing::exact_scorer(ds));
  const auto r = evaluate(ds, gen, scorer, options(), dir.path()).outcome.report;
  EXPECT_NEAR(r.summary_dim, 1.0, 1e-12);
  EXPECT_NEAR(r.summary_cim, 0.8, 1e-12);
}

TEST(Evaluate, ResumeIsFreeAndByteIdentical) {
  TempDir dir;
  const auto ds = testing::two_concept_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  g.sampler = LabelSampler::kCategorical;
  g.compliance = 0.7;
  auto so = testing::exact_scorer(ds);
  so.noise = 0.05;
  MockGenerator gen(g);
  MockScorer scorer(so);
  const auto first = evaluate(ds, gen, scorer, options(6), dir.path());
  const auto bytes = io::read_file(dir / "report.json");
  EXPECT_GT(first.generator_calls, 0u);
  EXPECT_GT(first.scorer_calls, 0u);

  auto resumed = options(6);
  resumed.resume = true;
  const auto second = evaluate(ds, gen, scorer, resumed, dir.path());
  EXPECT_EQ(second.generator_calls, 0u);
  EXPECT_EQ(second.scorer_calls, 0u);
  EXPECT_EQ(io::read_file(dir / "report.json"), bytes);

  TempDir fresh;
  evaluate(ds, gen, scorer, options(6), fresh.path());
  EXPECT_EQ(io::read_file(fresh / "report.json"), bytes);
}

TEST(Evaluate, InterruptedGenerationResumes) {
  const auto ds = testing::two_concept_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  g.sampler = LabelSampler::kCategorical;
  MockScorer scorer(testing::exact_scorer(ds));

  TempDir reference;
  MockGenerator clean(g);
  evaluate(ds, clean, scorer, options(4), reference.path());

  TempDir dir;
  FlakyGenerator flaky(g, 5);
  EXPECT_THROW(evaluate(ds, flaky, scorer, options(4), dir.path()), BackendUnavailable);
  EXPECT_FALSE(fs::exists(dir / "report.json"));
  auto resumed = options(4);
  resumed.resume = true;
  MockGenerator again(g);
  const auto r = evaluate(ds, again, scorer, resumed, dir.path());
  EXPECT_EQ(r.generator_calls, ds.coarse_prompts.size() + ds.dense_prompts.size() - 5);
  EXPECT_EQ(io::read_file(dir / "report.json"), io::read_file(reference / "report.json"));
}

TEST(Evaluate, FailedScoresDropRows) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  std::atomic<int> calls{0};
  MockScorer inner(testing::exact_scorer(ds));
  FunctionScorer scorer([&](const AlignmentQuery& q) {
    if (++calls % 7 == 0) throw RequestFailure("flaky");
    return inner.score(q);
  });
  const auto r = evaluate(ds, gen, scorer, options(10), dir.path());
  const auto manifest = Json::parse(io::read_file(dir / "run_manifest.json"));
  EXPECT_FALSE(manifest["stages"]["score"]["dropped_rows"].empty());
  EXPECT_GE(r.outcome.report.summary_dim, 0.0);
}

TEST(Evaluate, BackendFailureIsFatal) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  FunctionScorer down([](const AlignmentQuery&) -> double { throw BackendUnavailable("down"); });
  EXPECT_THROW(evaluate(ds, gen, down, options(2), dir.path()), BackendUnavailable);
}

TEST(Stages, CoarseParity) {
  const auto ds = testing::two_concept_dataset();
  EXPECT_EQ(coarse_image_count(ds, ds.coarse_prompts[0], 30, CoarseParity::kTotal), 150);
  EXPECT_EQ(coarse_image_count(ds, ds.coarse_prompts[1], 30, CoarseParity::kTotal), 150);
  EXPECT_EQ(coarse_image_count(ds, ds.coarse_prompts[2], 30, CoarseParity::kTotal), 60);
  EXPECT_EQ(coarse_image_count(ds, ds.coarse_prompts[0], 30, CoarseParity::kFlat), 30);
  EXPECT_EQ(coarse_parity_from_string("flat"), CoarseParity::kFlat);
  EXPECT_EQ(to_string(CoarseParity::kTotal), "total");
  EXPECT_THROW(coarse_parity_from_string("half"), ParseError);
}

TEST(Stages, PromptSeedIsStable) {
  EXPECT_EQ(prompt_seed(0, "bird-dp-0000"), prompt_seed(0, "bird-dp-0000"));
  EXPECT_NE(prompt_seed(0, "bird-dp-0000"), prompt_seed(0, "bird-dp-0001"));
  EXPECT_EQ(prompt_seed(100, "x") - prompt_seed(0, "x"), 100);
  EXPECT_GE(prompt_seed(0, "x"), 0);
}

TEST(Stages, GenerateScoreReport) {
  const auto ds = testing::two_concept_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  GenerationService service(gen);
  auto opt = options(2);
  opt.coarse_parity = CoarseParity::kFlat;
  const auto generated = generate_images(ds, service, opt);
  EXPECT_EQ(generated.images.size(), 2u * (ds.coarse_prompts.size() + ds.dense_prompts.size()));
  EXPECT_TRUE(generated.failures.empty());
  EXPECT_EQ(generated.images[0].prompt_id, "table-cp-000");

  MockScorer scorer(testing::exact_scorer(ds));
  const auto scored = score_images(ds, generated.images, scorer, opt);
  // 3 pooled (table x2 types, bed x1), 2+2+2 coarse breakdowns, 14 dense.
  EXPECT_EQ(scored.matrices.size(), 3u + 6u + 14u);
  EXPECT_TRUE(scored.skipped.empty());

  auto matrices = scored.matrices;
  const auto out = compute_report(ds, matrices, opt);
  EXPECT_EQ(out.report.cim_entries.size(), 7u);
  EXPECT_EQ(out.report.config["coarse_parity"], "flat");

  auto orphan = matrices.front();
  orphan.unit_id = "sofa-cp-000";
  matrices.push_back(orphan);
  EXPECT_THROW(compute_report(ds, matrices, opt), OrphanMatrix);
}

TEST(Stages, MissingImagesAreSkipped) {
  const auto ds = testing::bird_dataset();
  MockScorer scorer(testing::exact_scorer(ds));
  const auto scored = score_images(ds, {}, scorer, options());
  EXPECT_TRUE(scored.matrices.empty());
  EXPECT_EQ(scored.skipped.size(), 3u);
}

TEST(Artifacts, ManifestAndCellsRoundTrip) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  GenerationService service(gen);
  const auto images = generate_images(ds, service, options(3)).images;
  write_generation_manifest(images, dir / "m.jsonl");
  const auto back = read_generation_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.size(), images.size());
  EXPECT_EQ(back[4].id, images[4].id);
  EXPECT_EQ(back[4].labels, images[4].labels);

  MockScorer scorer(testing::exact_scorer(ds));
  const auto matrices = score_images(ds, images, scorer, options(3)).matrices;
  write_score_cells(matrices, dir / "s.jsonl");
  const auto cells = read_score_cells(dir / "s.jsonl");
  ASSERT_EQ(cells.size(), matrices.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].unit_id, matrices[i].unit_id);
    EXPECT_EQ(cells[i].scores, matrices[i].scores);
  }
  const auto report_a = compute_report(ds, matrices, options(3)).report;
  const auto report_b = compute_report(ds, cells, options(3)).report;
  EXPECT_EQ(serialize(report_a), serialize(report_b));

  io::write_file_atomic(dir / "bad.jsonl", "{\"prompt_id\": 1}\n");
  EXPECT_THROW(read_generation_manifest(dir / "bad.jsonl"), ParseError);

  const auto marker = stage_marker({dir / "m.jsonl"}, dir.path(), Json::object({{"images", 9}}));
  EXPECT_EQ(marker["artifacts"][0]["path"], "m.jsonl");
  EXPECT_EQ(marker["artifacts"][0]["sha256"], io::sha256_hex(io::read_file(dir / "m.jsonl")));
  EXPECT_EQ(marker["images"], 9);
}

TEST(Config, ParsesEveryKey) {
  const auto c = pipeline_config_from_json(Json::parse(R"({
    "dataset": "ds.json", "output_dir": "out", "model_id": "m1",
    "generation": {"n_images": 12, "guidance_scale": 5.0, "base_seed": 3},
    "coarse_parity": "flat", "dim_averaging": "prompt_attribute",
    "analysis": {"tau_bias": 0.25, "concept_query": "bare", "allow_unpaired": true},
    "endpoints": {"generator": "http://g:1", "scorer": {"url": "http://s:2", "timeout_s": 9}},
    "mock": {"model_id": "mm"}, "builder": {"seeds_per_concept": 5}, "seed": 42})"));
  EXPECT_EQ(*c.dataset_path, fs::path("ds.json"));
  EXPECT_EQ(c.output_dir, fs::path("out"));
  EXPECT_EQ(*c.model_id, "m1");
  EXPECT_EQ(c.evaluation.generation.n_images, 12);
  EXPECT_EQ(c.evaluation.coarse_parity, CoarseParity::kFlat);
  EXPECT_EQ(c.evaluation.dim_averaging, DimAveraging::kPromptAttribute);
  EXPECT_EQ(c.analysis.tau_bias, 0.25);
  EXPECT_EQ(c.analysis.concept_query, ConceptQueryStyle::kBare);
  EXPECT_EQ(c.generator->url, "http://g:1");
  EXPECT_EQ(c.scorer->timeout_s, 9);
  EXPECT_FALSE(c.llm.has_value());
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(mock_config_from_json(c.mock).model_id, "mm");
  EXPECT_EQ(builder_config_from_json(c.builder, c.seed).seeds.count, 5u);
  EXPECT_EQ(builder_config_from_json(c.builder, c.seed).seeds.rng_seed, 42u);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_THROW(pipeline_config_from_json(Json::parse(R"({"datset": "x"})")), ParseError);
  EXPECT_THROW(pipeline_config_from_json(Json::parse(R"({"analysis": {"tau": 1}})")), ParseError);
  EXPECT_THROW(pipeline_config_from_json(Json::parse(R"({"analysis": {"filter_threshold": 2}})")), ParseError);
  EXPECT_THROW(pipeline_config_from_json(Json::parse(R"({"coarse_parity": "most"})")), ParseError);
  EXPECT_THROW(pipeline_config_from_json(Json::parse(R"({"generation": {"n_images": "many"}})")), ParseError);
  EXPECT_THROW(mock_config_from_json(Json::parse(R"({"generator": {"sampler": "random"}})")), ParseError);
  EXPECT_THROW(mock_config_from_json(Json::parse(R"({"scorer": {"bias": 1}})")), ParseError);
  EXPECT_THROW(builder_config_from_json(Json::parse(R"({"seeds": 3})"), 0), ParseError);
  TempDir dir;
  io::write_file_atomic(dir / "c.json", "{oops");
  EXPECT_THROW(load_pipeline_config(dir / "c.json"), ParseError);
  EXPECT_THROW(load_pipeline_config(dir / "none.json"), IoError);
}

TEST(Config, MockSection) {
  const auto m = mock_config_from_json(Json::parse(R"({
    "generator": {"sampler": "stratified", "default_weights": {"bird": {"state": {"perched": 3}}},
                  "compliance": 0.5, "compliance_half_saturation": 2.5, "failing_seeds": [4]},
    "scorer": {"s_hi": 0.8, "noise": 0.1, "failing_images": ["x"]},
    "llm": {"knowledge": {"bird": {"state": ["perched", "flying"]}}, "skip_fraction": 0.2}})"));
  EXPECT_EQ(m.generator.sampler, LabelSampler::kStratified);
  EXPECT_EQ(m.generator.default_weights.at("bird").at("state").at("perched"), 3.0);
  EXPECT_EQ(m.generator.compliance_half_saturation, 2.5);
  EXPECT_EQ(m.generator.failing_seeds.count(4), 1u);
  EXPECT_EQ(m.scorer.s_hi, 0.8);
  EXPECT_EQ(m.scorer.s_lo, MockScorerOptions{}.s_lo);
  EXPECT_EQ(m.llm.knowledge.at("bird")[0].attributes.size(), 2u);
  EXPECT_EQ(m.llm.skip_fraction, 0.2);
  EXPECT_EQ(mock_config_from_json(Json()).model_id, "mock");
}

TEST(Config, EnvironmentOverrides) {
  PipelineConfig c;
  c.scorer = Endpoint{"http://file:1"};
  ::setenv("DIMCIM_SCORER_URL", "http://env:2", 1);
  ::setenv("DIMCIM_LLM_URL", "http://env:3", 1);
  ::setenv("DIMCIM_HTTP_TIMEOUT_S", "4.5", 1);
  apply_environment(c);
  EXPECT_EQ(c.scorer->url, "http://env:2");
  EXPECT_EQ(c.llm->url, "http://env:3");
  EXPECT_EQ(c.llm->timeout_s, 4.5);
  EXPECT_FALSE(c.generator.has_value());
  ::setenv("DIMCIM_HTTP_TIMEOUT_S", "soon", 1);
  EXPECT_THROW(apply_environment(c), ParseError);
  ::unsetenv("DIMCIM_SCORER_URL");
  ::unsetenv("DIMCIM_LLM_URL");
  ::unsetenv("DIMCIM_HTTP_TIMEOUT_S");
}

TEST(Config, ConceptLists) {
  TempDir dir;
  io::write_file_atomic(dir / "a.txt", "# concepts\ndog\n\n  teddy bear \n");
  EXPECT_EQ(read_concept_list(dir / "a.txt"), (std::vector<std::string>{"dog", "teddy bear"}));
  io::write_file_atomic(dir / "b.json", R"(["bus", "cake"])");
  EXPECT_EQ(read_concept_list(dir / "b.json"), (std::vector<std::string>{"bus", "cake"}));
  io::write_file_atomic(dir / "c.json", "[1,");
  EXPECT_THROW(read_concept_list(dir / "c.json"), ParseError);
  EXPECT_EQ(read_concept_list(fs::path(DIMCIM_TEST_DATA_DIR) / "concepts.txt"),
            (std::vector<std::string>{"dog", "bed"}));
}

TEST(Figures, Layout) {
  TempDir run, out;
  const auto ds = testing::two_concept_dataset();
  MockGeneratorOptions g;
  g.catalog = ds.concepts;
  MockGenerator gen(g);
  MockScorer scorer(testing::exact_scorer(ds));
  auto opt = options(2);
  opt.model_id = "mock model";
  const auto report = evaluate(ds, gen, scorer, opt, run.path()).outcome.report;
  MetricReport summary_only;
  summary_only.model_id = "paper";
  summary_only.summary_dim = 0.8;
  summary_only.summary_cim = 0.3;

  const auto written = write_figures({report, summary_only}, {}, AnalysisConfig{}, out.path());
  EXPECT_FALSE(written.empty());
  const auto scatter = out / "dim-cim-scatter" / "mock_model" / "table.csv";
  ASSERT_TRUE(fs::exists(scatter));
  EXPECT_EQ(io::read_file(scatter).rfind("attribute,dim,cim\n", 0), 0u);
  EXPECT_TRUE(fs::exists(out / "dim-cim-scatter" / "mock_model" / "bed.csv"));
  EXPECT_FALSE(fs::exists(out / "dim-cim-scatter" / "paper"));
  for (const auto& name : figure_names()) EXPECT_TRUE(fs::exists(out / (name + ".json"))) << name;
  const auto summary = io::read_file(out / "model-summary.csv");
  EXPECT_NE(summary.find("paper,0.8,0.3\n"), std::string::npos) << summary;

  TempDir only;
  const auto one = write_figures({report}, {"model-summary"}, AnalysisConfig{}, only.path());
  EXPECT_EQ(one.size(), 2u);
  EXPECT_THROW(write_figures({report}, {"pie"}, AnalysisConfig{}, only.path()), std::invalid_argument);
  EXPECT_EQ(file_stem("a/b c"), "a_b_c");
}

}  // namespace
}  // namespace dimcim
