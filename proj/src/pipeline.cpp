// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>

#include "dimcim/concurrency.hpp"
#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

namespace fs = std::filesystem;
using io::Json;

std::string_view to_string(CoarseParity parity) {
  return parity == CoarseParity::kTotal ? "total" : "flat";
}

CoarseParity coarse_parity_from_string(std::string_view s) {
  if (s == "total") return CoarseParity::kTotal;
  if (s == "flat") return CoarseParity::kFlat;
  throw ParseError("coarse_parity", "expected 'total' or 'flat', got '" + std::string(s) + "'");
}

std::int64_t prompt_seed(std::int64_t base_seed, std::string_view prompt_id) {
  return base_seed + static_cast<std::int64_t>(text::fnv1a(prompt_id) >> 34);
}

int coarse_image_count(const BenchmarkDataset& dataset, const CoarsePrompt& prompt, int n_images,
                       CoarseParity parity) {
  if (parity == CoarseParity::kFlat) return n_images;
  const auto derived = std::count_if(dataset.dense_prompts.begin(), dataset.dense_prompts.end(),
                                     [&](const DensePrompt& d) { return d.coarse_id == prompt.id; });
  return n_images * static_cast<int>(derived);
}

// ---------------------------------------------------------------------------
// Stages

GenerationOutcome generate_images(const BenchmarkDataset& dataset, GenerationService& service,
                                  const EvaluationOptions& options) {
  struct Job {
    std::string id;
    std::string text;
    int n;
  };
  std::vector<Job> jobs;
  for (const auto& p : dataset.coarse_prompts) {
    const int n = coarse_image_count(dataset, p, options.generation.n_images, options.coarse_parity);
    if (n > 0) jobs.push_back({p.id, p.text, n});
  }
  for (const auto& p : dataset.dense_prompts) jobs.push_back({p.id, p.text, options.generation.n_images});

  std::vector<GenerationBatch> batches(jobs.size());
  parallel_for(jobs.size(), effective_concurrency(service.backend().max_concurrency()),
               [&](std::size_t i) {
                 GenerationConfig config = options.generation;
                 config.n_images = jobs[i].n;
                 config.base_seed = prompt_seed(options.generation.base_seed, jobs[i].id);
                 batches[i] = service.generate(jobs[i].id, jobs[i].text, config);
               });

  GenerationOutcome out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (auto& img : batches[i].images) out.images.push_back(std::move(img));
    for (const auto& f : batches[i].failures) {
      out.failures.push_back(Json::object({{"prompt_id", jobs[i].id}, {"seed", f.seed}, {"message", f.message}}));
    }
  }
  return out;
}

namespace {

StyleHints hints_for(const EvaluationOptions& options, const std::string& concept_name) {
  auto it = options.style_hints.find(concept_name);
  return it == options.style_hints.end() ? StyleHints{} : it->second;
}

Json skipped_unit(const std::string& unit, const std::string& type, const std::string& reason) {
  return Json::object({{"unit_id", unit}, {"attribute_type", type}, {"reason", reason}});
}

}  // namespace

ScoringOutcome score_images(const BenchmarkDataset& dataset, const std::vector<ImageRef>& images,
                            AlignmentScorer& scorer, const EvaluationOptions& options) {
  std::map<std::string, std::vector<ImageRef>> by_prompt;
  for (const auto& img : images) by_prompt[img.prompt_id].push_back(img);

  ScoringOutcome out;
  for (const auto& c : dataset.concepts) {
    const auto hints = hints_for(options, c.name);
    std::vector<ImageRef> pool;
    std::vector<const CoarsePrompt*> coarse;
    for (const auto& p : dataset.coarse_prompts) {
      if (p.concept_name != c.name) continue;
      coarse.push_back(&p);
      if (auto it = by_prompt.find(p.id); it != by_prompt.end()) {
        pool.insert(pool.end(), it->second.begin(), it->second.end());
      }
    }
    const std::string unit = coarse_pool_unit(c.name);
    for (const auto& t : c.attribute_types) {
      if (pool.empty()) {
        out.skipped.push_back(skipped_unit(unit, t.name, "no coarse images"));
        continue;
      }
      ScoreMatrix pooled;
      try {
        pooled = build_score_matrix(pool, unit, c.name, t.name, t.attributes, scorer, hints);
      } catch (const EmptyMatrix& e) {
        out.skipped.push_back(skipped_unit(unit, t.name, e.what()));
        continue;
      }
      std::map<std::string, Eigen::Index> row_of;
      for (std::size_t r = 0; r < pooled.image_ids.size(); ++r) {
        row_of[pooled.image_ids[r]] = static_cast<Eigen::Index>(r);
      }
      std::vector<ScoreMatrix> breakdown;
      for (const auto* p : coarse) {
        std::vector<Eigen::Index> rows;
        if (auto it = by_prompt.find(p->id); it != by_prompt.end()) {
          for (const auto& img : it->second) {
            if (auto r = row_of.find(img.id); r != row_of.end()) rows.push_back(r->second);
          }
        }
        if (!rows.empty()) breakdown.push_back(select_rows(pooled, rows, p->id));
      }
      out.matrices.push_back(std::move(pooled));
      for (auto& m : breakdown) out.matrices.push_back(std::move(m));
    }
  }

  for (const auto& d : dataset.dense_prompts) {
    const auto* concept_entry = dataset.find_concept(d.concept_name);
    const auto* type = concept_entry ? concept_entry->find_type(d.attribute_type) : nullptr;
    if (!type) throw OrphanMatrix(d.id);
    auto it = by_prompt.find(d.id);
    if (it == by_prompt.end() || it->second.empty()) {
      out.skipped.push_back(skipped_unit(d.id, d.attribute_type, "no images"));
      continue;
    }
    try {
      out.matrices.push_back(build_score_matrix(it->second, d.id, d.concept_name, d.attribute_type,
                                                type->attributes, scorer,
                                                hints_for(options, d.concept_name)));
    } catch (const EmptyMatrix& e) {
      out.skipped.push_back(skipped_unit(d.id, d.attribute_type, e.what()));
    }
  }
  return out;
}

Json report_config(const EvaluationOptions& options) {
  Json j = Json::object();
  j["generation"] = to_json(options.generation);
  j["coarse_parity"] = to_string(options.coarse_parity);
  j["dim_averaging"] = to_string(options.dim_averaging);
  return j;
}

ReportOutcome compute_report(const BenchmarkDataset& dataset, const std::vector<ScoreMatrix>& matrices,
                             const EvaluationOptions& options) {
  std::vector<ScoreMatrix> pooled, coarse, dense;
  for (const auto& m : matrices) {
    if (is_coarse_pool_unit(m.unit_id)) {
      pooled.push_back(m);
    } else if (dataset.find_coarse(m.unit_id)) {
      coarse.push_back(m);
    } else if (dataset.find_dense(m.unit_id)) {
      dense.push_back(m);
    } else {
      throw OrphanMatrix(m.unit_id);
    }
  }
  ReportOutcome out;
  out.breakdown = dim_attribute_scores(coarse);
  SummaryOptions summary{options.dim_averaging, out.breakdown};
  out.report = summarize(dim_attribute_scores(pooled), cim_attribute_scores(dense, dataset), summary);
  out.report.model_id = options.model_id;
  out.report.dataset_hash = dataset_hash(dataset);
  out.report.config = report_config(options);
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_generation_manifest(const std::vector<ImageRef>& images, const fs::path& path) {
  std::vector<Json> records;
  records.reserve(images.size());
  for (const auto& img : images) records.push_back(to_manifest_record(img));
  io::write_file_atomic(path, io::to_jsonl(records));
}

std::vector<ImageRef> read_generation_manifest(const fs::path& path) {
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

void write_score_cells(const std::vector<ScoreMatrix>& matrices, const fs::path& path) {
  std::vector<Json> records;
  for (const auto& m : matrices) {
    auto cells = to_cell_records(m);
    records.insert(records.end(), std::make_move_iterator(cells.begin()), std::make_move_iterator(cells.end()));
  }
  io::write_file_atomic(path, io::to_jsonl(records));
}

std::vector<ScoreMatrix> read_score_cells(const fs::path& path) {
  try {
    return matrices_from_cells(io::read_jsonl(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.locator(), e.what());
  }
}

Json stage_marker(const std::vector<fs::path>& artifacts, const fs::path& root, Json extra) {
  Json list = Json::array();
  for (const auto& a : artifacts) {
    list.push_back(Json::object({{"path", fs::relative(a, root).generic_string()},
                                 {"sha256", io::sha256_hex(io::read_file(a))}}));
  }
  Json marker = Json::object({{"completed", true}, {"artifacts", std::move(list)}});
  for (auto& [k, v] : extra.items()) marker[k] = v;
  return marker;
}

EvaluationResult evaluate(const BenchmarkDataset& dataset, ImageGenerator& generator,
                          AlignmentScorer& scorer, const EvaluationOptions& options,
                          const fs::path& output_dir) {
  options.generation.check();
  fs::create_directories(output_dir);
  const fs::path manifest_path = output_dir / "run_manifest.json";
  const fs::path gen_manifest = output_dir / "generation_manifest.jsonl";
  const fs::path scores_path = output_dir / "scores.jsonl";
  const fs::path report_path = output_dir / "report.json";
  const fs::path csv_path = output_dir / "report.csv";
  const fs::path breakdown_path = output_dir / "coarse_breakdown.csv";

  const std::string ds_hash = dataset_hash(dataset);
  Json manifest = Json::object();
  manifest["run_id"] =
      io::sha256_hex(ds_hash + "\n" + options.model_id + "\n" + report_config(options).dump()).substr(0, 16);
  manifest["dataset_hash"] = ds_hash;
  manifest["model_id"] = options.model_id;
  manifest["generation_config"] = to_json(options.generation);
  manifest["fingerprints"] =
      Json::object({{"generator", generator.fingerprint()}, {"scorer", scorer.fingerprint()}});
  manifest["stages"] = Json::object();
  manifest["timing_s"] = Json::object();
  auto save_manifest = [&] { io::write_file_atomic(manifest_path, manifest.dump(2) + "\n"); };
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };

  EvaluationResult result;

  auto t0 = Clock::now();
  GenerationService service(generator, output_dir / "generation_cache.jsonl", options.resume);
  const auto generated = generate_images(dataset, service, options);
  write_generation_manifest(generated.images, gen_manifest);
  result.generator_calls = service.backend_calls();
  manifest["stages"]["generate"] = stage_marker(
      {gen_manifest}, output_dir,
      Json::object({{"images", generated.images.size()}, {"failures", generated.failures}}));
  manifest["timing_s"]["generate"] = seconds_since(t0);
  save_manifest();

  t0 = Clock::now();
  ScoreCache cache(output_dir / "score_cache.jsonl", options.resume);
  CachingScorer caching(scorer, cache);
  const auto scored = score_images(dataset, generated.images, caching, options);
  write_score_cells(scored.matrices, scores_path);
  result.scorer_calls = caching.backend_calls();
  Json dropped = Json::array();
  for (const auto& m : scored.matrices) {
    for (const auto& d : m.dropped) {
      dropped.push_back(Json::object({{"unit_id", m.unit_id}, {"attribute_type", m.attribute_type},
                                      {"image_id", d.image_id}, {"reason", d.reason}}));
    }
  }
  manifest["stages"]["score"] = stage_marker(
      {scores_path}, output_dir,
      Json::object({{"matrices", scored.matrices.size()}, {"skipped", scored.skipped}, {"dropped_rows", dropped}}));
  manifest["timing_s"]["score"] = seconds_since(t0);
  save_manifest();

  t0 = Clock::now();
  result.outcome = compute_report(dataset, scored.matrices, options);
  save_report(result.outcome.report, report_path);
  io::write_file_atomic(csv_path, report_csv(result.outcome.report));
  io::write_file_atomic(breakdown_path, breakdown_csv(options.model_id, result.outcome.breakdown));
  manifest["stages"]["metrics"] = stage_marker({report_path, csv_path, breakdown_path}, output_dir);
  manifest["timing_s"]["metrics"] = seconds_since(t0);
  save_manifest();

  result.run_manifest = std::move(manifest);
  return result;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void expect_keys(const Json& j, const std::string& loc, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ParseError(loc, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(loc, "unknown key '" + key + "'");
    }
  }
}

std::vector<AttributeType> types_from_json(const Json& j, const std::string& loc) {
  if (!j.is_object()) throw ParseError(loc, "expected an object of type -> [attributes]");
  std::vector<AttributeType> out;
  for (const auto& [type, attrs] : j.items()) {
    out.push_back({type, attrs.get<std::vector<std::string>>()});
  }
  return out;
}

LabelSampler sampler_from_string(const std::string& s) {
  if (s == "round_robin") return LabelSampler::kRoundRobin;
  if (s == "categorical") return LabelSampler::kCategorical;
  if (s == "stratified") return LabelSampler::kStratified;
  throw ParseError("mock.generator.sampler", "expected round_robin, categorical or stratified");
}

Endpoint endpoint_from_json(const Json& j, const std::string& loc) {
  if (j.is_string()) return Endpoint{j.get<std::string>()};
  expect_keys(j, loc, {"url", "timeout_s", "max_concurrency"});
  Endpoint e;
  e.url = j.at("url").get<std::string>();
  e.timeout_s = j.value("timeout_s", e.timeout_s);
  e.max_concurrency = j.value("max_concurrency", e.max_concurrency);
  return e;
}

}  // namespace

MockConfig mock_config_from_json(const Json& j) {
  MockConfig m;
  if (j.is_null()) return m;
  try {
    expect_keys(j, "mock", {"model_id", "generator", "scorer", "llm"});
    m.model_id = j.value("model_id", m.model_id);
    m.generator.model_id = m.model_id;
    if (j.contains("generator")) {
      const auto& g = j["generator"];
      expect_keys(g, "mock.generator",
                  {"sampler", "default_weights", "compliance", "compliance_half_saturation",
                   "guidance_sharpening", "failing_seeds"});
      if (g.contains("sampler")) m.generator.sampler = sampler_from_string(g["sampler"].get<std::string>());
      if (g.contains("default_weights")) {
        m.generator.default_weights = g["default_weights"]
            .get<std::map<std::string, std::map<std::string, std::map<std::string, double>>>>();
      }
      m.generator.compliance = g.value("compliance", m.generator.compliance);
      m.generator.compliance_half_saturation =
          g.value("compliance_half_saturation", m.generator.compliance_half_saturation);
      m.generator.guidance_sharpening = g.value("guidance_sharpening", m.generator.guidance_sharpening);
      if (g.contains("failing_seeds")) {
        m.generator.failing_seeds = g["failing_seeds"].get<std::set<std::int64_t>>();
      }
    }
    if (j.contains("scorer")) {
      const auto& s = j["scorer"];
      expect_keys(s, "mock.scorer", {"s_hi", "s_lo", "noise", "style_hints", "failing_images"});
      m.scorer.s_hi = s.value("s_hi", m.scorer.s_hi);
      m.scorer.s_lo = s.value("s_lo", m.scorer.s_lo);
      m.scorer.noise = s.value("noise", m.scorer.noise);
      if (s.contains("style_hints")) {
        m.scorer.style_hints = s["style_hints"].get<std::map<std::string, StyleHints>>();
      }
      if (s.contains("failing_images")) {
        m.scorer.failing_images = s["failing_images"].get<std::set<std::string>>();
      }
    }
    if (j.contains("llm")) {
      const auto& l = j["llm"];
      expect_keys(l, "mock.llm", {"knowledge", "skip", "skip_fraction"});
      if (l.contains("knowledge")) {
        for (const auto& [concept_name, types] : l["knowledge"].items()) {
          m.llm.knowledge[concept_name] = types_from_json(types, "mock.llm.knowledge." + concept_name);
        }
      }
      if (l.contains("skip")) m.llm.skip = l["skip"].get<std::map<std::string, std::set<std::string>>>();
      m.llm.skip_fraction = l.value("skip_fraction", m.llm.skip_fraction);
    }
  } catch (const Json::exception& e) {
    throw ParseError("mock", e.what());
  }
  return m;
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c;
  try {
    expect_keys(j, "config",
                {"dataset", "output_dir", "model_id", "generation", "coarse_parity", "dim_averaging",
                 "style_hints", "analysis", "endpoints", "mock", "builder", "seed"});
    if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("model_id")) c.model_id = j["model_id"].get<std::string>();
    if (j.contains("generation")) c.evaluation.generation = generation_config_from_json(j["generation"]);
    if (j.contains("coarse_parity")) {
      c.evaluation.coarse_parity = coarse_parity_from_string(j["coarse_parity"].get<std::string>());
    }
    if (j.contains("dim_averaging")) {
      c.evaluation.dim_averaging = dim_averaging_from_string(j["dim_averaging"].get<std::string>());
    }
    if (j.contains("style_hints")) {
      c.evaluation.style_hints = j["style_hints"].get<std::map<std::string, StyleHints>>();
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      expect_keys(a, "config.analysis",
                  {"tau_fail", "tau_can", "tau_bias", "negation_markers", "outlier_percentile",
                   "filter_threshold", "concept_query", "max_images_per_concept", "allow_unpaired"});
      auto& ac = c.analysis;
      ac.tau_fail = a.value("tau_fail", ac.tau_fail);
      ac.tau_can = a.value("tau_can", ac.tau_can);
      ac.tau_bias = a.value("tau_bias", ac.tau_bias);
      if (a.contains("negation_markers")) ac.negation_markers = a["negation_markers"].get<std::vector<std::string>>();
      ac.outlier_percentile = a.value("outlier_percentile", ac.outlier_percentile);
      ac.filter_threshold = a.value("filter_threshold", ac.filter_threshold);
      if (a.contains("concept_query")) {
        const auto q = a["concept_query"].get<std::string>();
        if (q != "photo" && q != "bare") throw ParseError("config.analysis.concept_query", "expected 'photo' or 'bare'");
        ac.concept_query = q == "photo" ? ConceptQueryStyle::kPhoto : ConceptQueryStyle::kBare;
      }
      ac.max_images_per_concept = a.value("max_images_per_concept", ac.max_images_per_concept);
      ac.allow_unpaired = a.value("allow_unpaired", ac.allow_unpaired);
      ac.check();
    }
    if (j.contains("endpoints")) {
      const auto& e = j["endpoints"];
      expect_keys(e, "config.endpoints", {"generator", "scorer", "llm"});
      if (e.contains("generator")) c.generator = endpoint_from_json(e["generator"], "config.endpoints.generator");
      if (e.contains("scorer")) c.scorer = endpoint_from_json(e["scorer"], "config.endpoints.scorer");
      if (e.contains("llm")) c.llm = endpoint_from_json(e["llm"], "config.endpoints.llm");
    }
    if (j.contains("mock")) c.mock = j["mock"];
    if (j.contains("builder")) c.builder = j["builder"];
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ParseError("config", e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError("config", e.what());
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return pipeline_config_from_json(j);
}

void apply_environment(PipelineConfig& config) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  auto set_url = [](std::optional<Endpoint>& e, const std::string& url) {
    if (!e) e = Endpoint{};
    e->url = url;
  };
  if (auto v = env("DIMCIM_GENERATOR_URL")) set_url(config.generator, *v);
  if (auto v = env("DIMCIM_SCORER_URL")) set_url(config.scorer, *v);
  if (auto v = env("DIMCIM_LLM_URL")) set_url(config.llm, *v);
  if (auto v = env("DIMCIM_HTTP_TIMEOUT_S")) {
    double t = 0.0;
    try {
      t = std::stod(*v);
    } catch (const std::exception&) {
      throw ParseError("DIMCIM_HTTP_TIMEOUT_S", "expected a number, got '" + *v + "'");
    }
    for (auto* e : {&config.generator, &config.scorer, &config.llm}) {
      if (*e) (*e)->timeout_s = t;
    }
  }
}

BuilderConfig builder_config_from_json(const Json& j, std::uint64_t seed) {
  BuilderConfig b;
  b.seeds.rng_seed = seed;
  if (j.is_null() || j.empty()) return b;
  try {
    expect_keys(j, "config.builder",
                {"seeds_per_concept", "exclusion_words", "allow_partial", "workers", "llm_retries",
                 "filter", "metadata"});
    b.seeds.count = j.value("seeds_per_concept", b.seeds.count);
    if (j.contains("exclusion_words")) b.seeds.exclusion_words = j["exclusion_words"].get<std::vector<std::string>>();
    b.allow_partial = j.value("allow_partial", b.allow_partial);
    b.workers = j.value("workers", b.workers);
    b.llm_retries = j.value("llm_retries", b.llm_retries);
    if (j.contains("filter")) {
      b.filter = j["filter"].is_string() ? AttributeFilter::load(j["filter"].get<std::string>())
                                         : AttributeFilter::from_json(j["filter"]);
    }
    if (j.contains("metadata")) b.metadata = j["metadata"];
  } catch (const Json::exception& e) {
    throw ParseError("config.builder", e.what());
  }
  return b;
}

std::vector<std::string> read_concept_list(const fs::path& path) {
  const std::string contents = io::read_file(path);
  const std::string trimmed = text::trim(contents);
  if (!trimmed.empty() && trimmed.front() == '[') {
    try {
      return Json::parse(trimmed).get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), e.what());
    }
  }
  std::vector<std::string> out;
  std::istringstream is(contents);
  std::string line;
  while (std::getline(is, line)) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figures

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> kNames{"dim-cim-scatter", "attribute-bars", "concept-rollup",
                                               "model-summary"};
  return kNames;
}

std::string file_stem(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

namespace {

Json axis(const char* column, const char* label, double lo, double hi) {
  return Json::object({{"column", column}, {"label", label}, {"range", Json::array({lo, hi})}});
}

void write_spec(const fs::path& path, Json spec, std::vector<fs::path>& written) {
  io::write_file_atomic(path, spec.dump(2) + "\n");
  written.push_back(path);
}

}  // namespace

std::vector<fs::path> write_figures(const std::vector<MetricReport>& reports,
                                    const std::vector<std::string>& figures,
                                    const AnalysisConfig& config, const fs::path& dir) {
  for (const auto& f : figures) {
    if (std::find(figure_names().begin(), figure_names().end(), f) == figure_names().end()) {
      throw std::invalid_argument("unknown figure '" + f + "'");
    }
  }
  auto wanted = [&](const std::string& name) {
    return figures.empty() || std::find(figures.begin(), figures.end(), name) != figures.end();
  };
  fs::create_directories(dir);
  std::vector<fs::path> written;
  AnalysisConfig pairing = config;
  pairing.allow_unpaired = true;

  if (wanted("dim-cim-scatter")) {
    Json data = Json::array();
    for (const auto& r : reports) {
      if (r.summary_only()) continue;
      std::map<std::string, std::ostringstream> per_concept;
      for (const auto& f : classify_quadrants(r, pairing)) {
        auto& os = per_concept[f.concept_name];
        if (os.tellp() == 0) os << "attribute,dim,cim\n";
        os << text::csv_field(f.attribute) << ',' << text::format_double(f.dim) << ','
           << text::format_double(f.cim) << '\n';
      }
      for (auto& [concept_name, os] : per_concept) {
        const fs::path rel = fs::path("dim-cim-scatter") / file_stem(r.model_id) / (file_stem(concept_name) + ".csv");
        fs::create_directories((dir / rel).parent_path());
        io::write_file_atomic(dir / rel, os.str());
        written.push_back(dir / rel);
        data.push_back(Json::object({{"model", r.model_id}, {"concept", concept_name}, {"file", rel.generic_string()}}));
      }
    }
    write_spec(dir / "dim-cim-scatter.json",
               Json::object({{"figure", "dim-cim-scatter"},
                             {"kind", "scatter"},
                             {"x", axis("dim", "Does-It score", -1.0, 1.0)},
                             {"y", axis("cim", "Can-It score", -1.0, 1.0)},
                             {"labels", "attribute"},
                             {"guides", Json::object({{"x", Json::array({-config.tau_bias, config.tau_bias})},
                                                      {"y", Json::array({config.tau_fail, config.tau_can})}})},
                             {"series", std::move(data)}}),
               written);
  }

  if (wanted("attribute-bars")) {
    std::ostringstream os;
    os << "model,concept,attribute_type,attribute,dim,cim\n";
    for (const auto& r : reports) {
      if (r.summary_only()) continue;
      for (const auto& f : classify_quadrants(r, pairing)) {
        os << text::csv_field(r.model_id) << ',' << text::csv_field(f.concept_name) << ','
           << text::csv_field(f.attribute_type) << ',' << text::csv_field(f.attribute) << ','
           << text::format_double(f.dim) << ',' << text::format_double(f.cim) << '\n';
      }
    }
    io::write_file_atomic(dir / "attribute-bars.csv", os.str());
    written.push_back(dir / "attribute-bars.csv");
    write_spec(dir / "attribute-bars.json",
               Json::object({{"figure", "attribute-bars"},
                             {"kind", "bar"},
                             {"data", "attribute-bars.csv"},
                             {"x", Json::object({{"column", "attribute"}, {"label", "attribute"}})},
                             {"y", Json::array({axis("dim", "Does-It score", -1.0, 1.0),
                                                axis("cim", "Can-It score", -1.0, 1.0)})},
                             {"facet", Json::array({"concept", "attribute_type"})},
                             {"series", "model"}}),
               written);
  }

  if (wanted("concept-rollup")) {
    std::ostringstream os;
    os << "model,concept,dim,cim\n";
    for (const auto& r : reports) {
      for (const auto& [concept_name, ro] : r.concept_rollups) {
        os << text::csv_field(r.model_id) << ',' << text::csv_field(concept_name) << ','
           << text::format_double(ro.dim) << ',' << text::format_double(ro.cim) << '\n';
      }
    }
    io::write_file_atomic(dir / "concept-rollup.csv", os.str());
    written.push_back(dir / "concept-rollup.csv");
    write_spec(dir / "concept-rollup.json",
               Json::object({{"figure", "concept-rollup"},
                             {"kind", "bar"},
                             {"data", "concept-rollup.csv"},
                             {"x", Json::object({{"column", "concept"}, {"label", "concept"}})},
                             {"y", Json::array({axis("dim", "Does-It", 0.0, 1.0),
                                                axis("cim", "Can-It", -1.0, 1.0)})},
                             {"series", "model"}}),
               written);
  }

  if (wanted("model-summary")) {
    std::ostringstream os;
    os << "model,dim,cim\n";
    for (const auto& r : reports) {
      os << text::csv_field(r.model_id) << ',' << text::format_double(r.summary_dim) << ','
         << text::format_double(r.summary_cim) << '\n';
    }
    io::write_file_atomic(dir / "model-summary.csv", os.str());
    written.push_back(dir / "model-summary.csv");
    write_spec(dir / "model-summary.json",
               Json::object({{"figure", "model-summary"},
                             {"kind", "scatter"},
                             {"data", "model-summary.csv"},
                             {"x", axis("dim", "Does-It", 0.0, 1.0)},
                             {"y", axis("cim", "Can-It", -1.0, 1.0)},
                             {"labels", "model"}}),
               written);
  }
  return written;
}

}  // namespace dimcim
