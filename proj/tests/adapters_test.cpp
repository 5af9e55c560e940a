// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "dimcim/adapters.hpp"
#include "dimcim/errors.hpp"
#include "dimcim/http_adapters.hpp"
#include "dimcim/mock_adapters.hpp"
#include "test_support.hpp"

#include <httplib.h>

namespace dimcim {
namespace {

using io::Json;
using testing::TempDir;

GenerationConfig small_config(int n = 4, std::int64_t seed = 100) {
  GenerationConfig c;
  c.n_images = n;
  c.base_seed = seed;
  return c;
}

TEST(GenerationConfig, CheckAndJson) {
  GenerationConfig c;
  EXPECT_NO_THROW(c.check());
  c.n_images = 0;
  EXPECT_THROW(c.check(), std::invalid_argument);
  c.n_images = 3;
  c.guidance_scale = 0.0;
  EXPECT_THROW(c.check(), std::invalid_argument);

  GenerationConfig d;
  d.n_images = 8;
  d.guidance_scale = 2.0;
  d.base_seed = 9;
  d.params = {{"steps", 20}};
  const auto back = generation_config_from_json(to_json(d));
  EXPECT_EQ(back.n_images, 8);
  EXPECT_EQ(back.guidance_scale, 2.0);
  EXPECT_EQ(back.base_seed, 9);
  EXPECT_EQ(back.params, d.params);
}

TEST(ManifestRecord, RoundTrip) {
  ImageRef img{"img-1", "mock://m/img-1.png", "bird-cp-000", 42, Labels{{"state", "flying"}}};
  EXPECT_EQ(image_from_manifest_record(to_manifest_record(img)), img);
  img.labels.reset();
  EXPECT_EQ(image_from_manifest_record(to_manifest_record(img)), img);
  EXPECT_THROW(image_from_manifest_record(Json{{"uri", "x"}}), ParseError);
}

TEST(MockGenerator, DeterministicAndSeeded) {
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions options;
  options.catalog = ds.concepts;
  MockGenerator gen(options);
  const GenerationRequest request{"a bird on a branch", 5, 7.5, 10, Json::object()};
  const auto a = gen.run(request);
  const auto b = gen.run(request);
  ASSERT_EQ(a.images.size(), 5u);
  EXPECT_EQ(a.images, b.images);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(a.images[k].seed, 10 + k);
    EXPECT_EQ(a.images[k].labels->at("concept"), "bird");
  }
  // Round robin over {perched, flying}.
  EXPECT_EQ(a.images[0].labels->at("state"), "perched");
  EXPECT_EQ(a.images[1].labels->at("state"), "flying");
  EXPECT_EQ(gen.calls(), 2u);
}

TEST(MockGenerator, HonorsRequestedAttribute) {
  const auto ds = testing::bird_dataset();
  auto options = testing::categorical_generator(ds, {{"bird", {{"state", {{"perched", 1.0}}}}}});
  MockGenerator gen(options);
  const auto dense = gen.run({"a flying bird on a branch", 20, 7.5, 0, Json::object()});
  for (const auto& img : dense.images) EXPECT_EQ(img.labels->at("state"), "flying");
  const auto coarse = gen.run({"a bird on a branch", 20, 7.5, 0, Json::object()});
  for (const auto& img : coarse.images) EXPECT_EQ(img.labels->at("state"), "perched");
}

TEST(MockGenerator, ComplianceAndFailures) {
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions options;
  options.catalog = ds.concepts;
  options.compliance = 0.9;
  options.compliance_half_saturation = 2.5;
  options.failing_seeds = {3};
  MockGenerator gen(options);
  EXPECT_NEAR(gen.compliance_at(2.5), 0.45, 1e-15);
  EXPECT_LT(gen.compliance_at(2.0), gen.compliance_at(7.5));
  const auto batch = gen.run({"a bird", 5, 7.5, 0, Json::object()});
  EXPECT_EQ(batch.images.size(), 4u);
  ASSERT_EQ(batch.failures.size(), 1u);
  EXPECT_EQ(batch.failures[0].seed, 3);
}

TEST(MockGenerator, StratifiedMatchesWeights) {
  const auto ds = testing::bird_dataset();
  auto options = testing::categorical_generator(ds, {{"bird", {{"state", {{"perched", 3.0}, {"flying", 1.0}}}}}});
  options.sampler = LabelSampler::kStratified;
  MockGenerator gen(options);
  const auto batch = gen.run({"a bird", 40, 7.5, 0, Json::object()});
  int perched = 0;
  for (const auto& img : batch.images) perched += img.labels->at("state") == "perched";
  EXPECT_EQ(perched, 30);
}

TEST(GenerationService, MemoizesAndPersists) {
  TempDir dir;
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions options;
  options.catalog = ds.concepts;
  MockGenerator gen(options);
  const auto cache = dir / "gen.jsonl";
  std::vector<ImageRef> first;
  {
    GenerationService service(gen, cache, false);
    first = service.generate("bird-cp-000", "a bird on a branch", small_config()).images;
    const auto again = service.generate("other-id", "a bird on a branch", small_config()).images;
    EXPECT_EQ(service.backend_calls(), 1u);
    ASSERT_EQ(again.size(), first.size());
    EXPECT_EQ(again[0].prompt_id, "other-id");
    EXPECT_EQ(again[0].id, first[0].id);
    service.generate("bird-cp-000", "a bird on a branch", small_config(4, 101));
    EXPECT_EQ(service.backend_calls(), 2u);
  }
  GenerationService resumed(gen, cache, true);
  const auto replay = resumed.generate("bird-cp-000", "a bird on a branch", small_config()).images;
  EXPECT_EQ(resumed.backend_calls(), 0u);
  EXPECT_EQ(replay, first);

  GenerationService fresh(gen, cache, false);
  fresh.generate("bird-cp-000", "a bird on a branch", small_config());
  EXPECT_EQ(fresh.backend_calls(), 1u);
}

TEST(GenerationService, FailedBatchesAreNotCached) {
  const auto ds = testing::bird_dataset();
  MockGeneratorOptions options;
  options.catalog = ds.concepts;
  options.failing_seeds = {101};
  MockGenerator gen(options);
  GenerationService service(gen);
  const auto batch = service.generate("p", "a bird", small_config());
  EXPECT_EQ(batch.images.size(), 3u);
  EXPECT_EQ(batch.failures.size(), 1u);
  service.generate("p", "a bird", small_config());
  EXPECT_EQ(service.backend_calls(), 2u);
}

TEST(MockScorer, AnswersFromLabels) {
  const auto ds = testing::two_concept_dataset();
  MockScorer scorer(testing::exact_scorer(ds, 0.8, 0.2));
  ImageRef img{"i", "u", "p", 0, Labels{{"concept", "bed"}, {"pillows", "without pillows"}}};
  EXPECT_EQ(scorer.score({img, "a bed without pillows"}), 0.8);
  EXPECT_EQ(scorer.score({img, "a bed with pillows"}), 0.2);
  EXPECT_EQ(scorer.score({img, "a photo of a bed"}), 0.8);
  EXPECT_EQ(scorer.score({img, "a photo of a table"}), 0.2);
  EXPECT_EQ(scorer.score({img, "an unrelated text"}), 0.2);
  EXPECT_THROW(scorer.score({img, ""}), std::invalid_argument);
  EXPECT_EQ(scorer.calls(), 5u);
}

TEST(MockScorer, NoiseIsDeterministicAndClamped) {
  const auto ds = testing::bird_dataset();
  auto options = testing::exact_scorer(ds);
  options.noise = 0.5;
  MockScorer scorer(options);
  ImageRef img{"i", "u", "p", 0, Labels{{"concept", "bird"}, {"state", "flying"}}};
  const double a = scorer.score({img, "a flying bird"});
  EXPECT_EQ(a, scorer.score({img, "a flying bird"}));
  for (int k = 0; k < 50; ++k) {
    img.id = "img" + std::to_string(k);
    const double s = scorer.score({img, "a perched bird"});
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(AlignmentScorer, RangeCheck) {
  FunctionScorer bad([](const AlignmentQuery&) { return 1.5; });
  EXPECT_THROW(bad.score({ImageRef{}, "x"}), ScoreOutOfRange);
  FunctionScorer nan([](const AlignmentQuery&) { return std::nan(""); });
  EXPECT_THROW(nan.score({ImageRef{}, "x"}), ScoreOutOfRange);
}

TEST(ScoreCache, PersistsAndDeduplicates) {
  TempDir dir;
  const auto path = dir / "scores.jsonl";
  int calls = 0;
  FunctionScorer backend([&](const AlignmentQuery& q) {
    ++calls;
    return q.text.size() / 100.0;
  });
  {
    ScoreCache cache(path, false);
    CachingScorer scorer(backend, cache);
    ImageRef img{"a", "u", "p", 0, std::nullopt};
    EXPECT_EQ(scorer.score({img, "hello"}), 0.05);
    EXPECT_EQ(scorer.score({img, "hello"}), 0.05);
    EXPECT_EQ(scorer.backend_calls(), 1u);
    cache.insert("a", "hello", 0.9);
    EXPECT_EQ(cache.find("a", "hello"), 0.05);
  }
  EXPECT_EQ(io::read_jsonl(path).size(), 1u);
  ScoreCache resumed(path, true);
  EXPECT_EQ(resumed.size(), 1u);
  EXPECT_EQ(resumed.find("a", "hello"), 0.05);
  EXPECT_FALSE(resumed.find("a", "other").has_value());
  EXPECT_EQ(calls, 1);
}

TEST(Templates, DefaultsRenderAndCheckPlaceholders) {
  const auto set = TemplateSet::defaults();
  ASSERT_TRUE(set.contains(kAttributeExtractionTemplate));
  ASSERT_TRUE(set.contains(kPromptExpansionTemplate));
  const auto out = set.render(kAttributeExtractionTemplate, {{"seed_prompt", "A dog on a couch."}});
  EXPECT_NE(out.find("A dog on a couch."), std::string::npos);
  EXPECT_EQ(out.find("{seed_prompt}"), std::string::npos);
  EXPECT_THROW(set.render(kAttributeExtractionTemplate, {}), TemplateError);
  EXPECT_THROW(set.render("missing", {}), TemplateError);
}

TEST(Templates, LiteralBracesAreKept) {
  TemplateSet set;
  set.set("t", "json {\"a\": 1} for {name} and { spaced }");
  EXPECT_EQ(set.render("t", {{"name", "x"}}), "json {\"a\": 1} for x and { spaced }");
}

TEST(Templates, LoadFromDirectory) {
  TempDir dir;
  io::write_file_atomic(dir / "attribute_extraction.txt", "E {seed_prompt}");
  io::write_file_atomic(dir / "prompt_expansion.txt", "X {attributes_json}");
  const auto set = TemplateSet::from_directory(dir.path());
  EXPECT_EQ(set.render(kPromptExpansionTemplate, {{"attributes_json", "{}"}}), "X {}");
  TempDir empty;
  EXPECT_THROW(TemplateSet::from_directory(empty.path()), IoError);
}

TEST(Llm, TranscriptAndReplay) {
  TempDir dir;
  const auto transcript = dir / "t.jsonl";
  FunctionLlm llm([](const LlmRequest& r) { return "reply to " + r.substitutions.at("seed_prompt"); });
  llm.attach_transcript(transcript, true);
  EXPECT_EQ(llm.complete(kAttributeExtractionTemplate, {{"seed_prompt", "A cat."}}), "reply to A cat.");
  const auto records = io::read_jsonl(transcript);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0]["template"], "attribute_extraction");
  EXPECT_EQ(records[0]["reply"], "reply to A cat.");

  ReplayLlm replay(transcript);
  EXPECT_EQ(replay.complete(kAttributeExtractionTemplate, {{"seed_prompt", "A cat."}}), "reply to A cat.");
  EXPECT_THROW(replay.complete(kAttributeExtractionTemplate, {{"seed_prompt", "A dog."}}), BackendUnavailable);
}

TEST(MockLlm, ExtractionAndExpansion) {
  MockLlmOptions options;
  options.knowledge["bed"] = {{"pillows", {"with pillows", "without pillows"}}, {"frame", {"wooden", "metal"}}};
  options.skip["bed"] = {"metal"};
  MockLlm llm(options);
  const auto extraction = Json::parse(llm.complete(kAttributeExtractionTemplate,
                                                   {{"seed_prompt", "A wooden bed in a room."}}));
  EXPECT_EQ(extraction["main_subject"], "bed");
  EXPECT_EQ(extraction["visual_modifiers"]["existing"]["frame"], "wooden");
  EXPECT_EQ(extraction["visual_modifiers"]["possible_attributes"]["pillows"].size(), 2u);

  Json input = {{"caption", "A wooden bed in a room."},
                {"main_subject", "bed"},
                {"visual_modifiers",
                 {{"existing", {{"frame", "wooden"}}},
                  {"possible_attributes",
                   {{"pillows", {"with pillows", "without pillows"}}, {"frame", {"wooden", "metal"}}}}}}};
  const auto expansion =
      Json::parse(llm.complete(kPromptExpansionTemplate, {{"attributes_json", input.dump()}}));
  EXPECT_EQ(expansion["seed_prompt"], "A bed in a room.");
  std::vector<std::string> dense;
  for (const auto& m : expansion["modified_prompts"]) dense.push_back(m["generated_prompt"]);
  EXPECT_EQ(dense, (std::vector<std::string>{"A bed with pillows in a room.", "A bed without pillows in a room.",
                                             "A wooden bed in a room."}));
  EXPECT_TRUE(llm.skips("bed", "anything", "metal"));
}

TEST(TextEdits, RemoveAndInject) {
  EXPECT_EQ(remove_phrase("An orange cat on a mat.", "orange"), "A cat on a mat.");
  EXPECT_EQ(remove_phrase("A bed with pillows near a lamp", "with pillows"), "A bed near a lamp");
  EXPECT_EQ(inject_attribute("A cat on a mat.", "cat", "orange"), "An orange cat on a mat.");
  EXPECT_EQ(inject_attribute("Two cats on a mat.", "cat", "with collars"), "Two cats with collars on a mat.");
  EXPECT_EQ(inject_attribute("A dog", "cat", "orange"), "");
}

TEST(Wire, RequestAndReplyShapes) {
  const GenerationRequest request{"a bird", 3, 5.0, 40, Json{{"steps", 10}}};
  const auto body = wire::generation_request(request);
  EXPECT_EQ(body["prompt"], "a bird");
  EXPECT_EQ(body["n"], 3);
  EXPECT_EQ(body["seed"], 40);
  EXPECT_EQ(body["params"]["steps"], 10);

  const Json reply = {{"images", {{{"id", "a"}, {"uri", "file:///a.png"}},
                                   {{"error", "nsfw"}},
                                   {{"id", "c"}, {"uri", "file:///c.png"}}}}};
  const auto batch = wire::generation_reply(reply, request);
  ASSERT_EQ(batch.images.size(), 2u);
  EXPECT_EQ(batch.images[1].seed, 42);
  ASSERT_EQ(batch.failures.size(), 1u);
  EXPECT_EQ(batch.failures[0].seed, 41);
  EXPECT_THROW(wire::generation_reply(Json{{"imgs", 1}}, request), RequestFailure);

  const auto score = wire::score_request({ImageRef{"i", "file:///i.png", "", 0, {}}, "a bird"});
  EXPECT_EQ(score["image_uri"], "file:///i.png");
  EXPECT_EQ(wire::score_reply(Json{{"score", 0.25}}), 0.25);
  EXPECT_THROW(wire::score_reply(Json{{"score", "high"}}), ScoringFailure);
  EXPECT_EQ(wire::llm_request("p")["temperature"], 0);
  EXPECT_EQ(wire::llm_reply(Json{{"text", "ok"}}), "ok");
  EXPECT_THROW(wire::llm_reply(Json::object()), RequestFailure);
}

/// Local HTTP server speaking the three wire protocols.
class LoopbackServer {
 public:
  LoopbackServer() {
    server_.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      Json images = Json::array();
      for (int k = 0; k < body["n"].get<int>(); ++k) {
        const std::string id = "img" + std::to_string(body["seed"].get<int>() + k);
        images.push_back({{"id", id}, {"uri", "file:///" + id + ".png"}});
      }
      res.set_content(Json{{"images", images}}.dump(), "application/json");
    });
    server_.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      const double s = body["text"].get<std::string>().find("flying") != std::string::npos ? 0.75 : 0.25;
      res.set_content(Json{{"score", s}}.dump(), "application/json");
    });
    server_.Post("/llm", [](const httplib::Request& req, httplib::Response& res) {
      res.set_content(Json{{"text", "echo:" + std::to_string(req.body.size())}}.dump(), "application/json");
    });
    server_.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
    });
    server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(Http, LoopbackBackends) {
  LoopbackServer server;
  HttpGenerator gen({server.url("/generate"), 5.0, 2});
  const auto batch = gen.run({"a bird", 2, 7.5, 7, Json::object()});
  ASSERT_EQ(batch.images.size(), 2u);
  EXPECT_EQ(batch.images[1].id, "img8");
  EXPECT_EQ(batch.images[1].seed, 8);
  EXPECT_EQ(gen.max_concurrency(), 2u);

  HttpScorer scorer({server.url("/score"), 5.0, 1});
  EXPECT_EQ(scorer.score({batch.images[0], "a flying bird"}), 0.75);

  HttpLlm llm({server.url("/llm"), 5.0, 1});
  EXPECT_EQ(llm.complete(kAttributeExtractionTemplate, {{"seed_prompt", "x"}}).rfind("echo:", 0), 0u);

  EXPECT_THROW(post_json({server.url("/broken"), 5.0, 1}, Json::object()), BackendUnavailable);
  EXPECT_THROW(post_json({server.url("/garbage"), 5.0, 1}, Json::object()), RequestFailure);
  EXPECT_THROW(post_json({"not a url", 5.0, 1}, Json::object()), BackendUnavailable);
}

TEST(Http, UnreachableEndpointIsBackendUnavailable) {
  HttpScorer scorer({"http://127.0.0.1:1/score", 2.0, 1});
  EXPECT_THROW(scorer.score({ImageRef{}, "x"}), BackendUnavailable);
}

}  // namespace
}  // namespace dimcim
