// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// dimcim: command-line front end for building DIM/CIM benchmarks, evaluating
// text-to-image models on them and analyzing the resulting reports.
//
// Exit codes: 0 ok, 1 I/O, 2 validation or mismatch, 3 backend.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dimcim/errors.hpp"
#include "dimcim/pipeline.hpp"
#include "dimcim/text.hpp"

namespace fs = std::filesystem;
using dimcim::io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

int exit_code(dimcim::ErrorKind kind) {
  switch (kind) {
    case dimcim::ErrorKind::kIo: return kExitIo;
    case dimcim::ErrorKind::kValidation: return kExitValidation;
    case dimcim::ErrorKind::kData: return kExitValidation;
    case dimcim::ErrorKind::kBackend: return kExitBackend;
  }
  return kExitIo;
}

struct GlobalOptions {
  std::string config_path;
  bool mock = false;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool resume = false;
};

struct Context {
  GlobalOptions global;
  dimcim::PipelineConfig config;
  dimcim::MockConfig mock;

  fs::path out() const { return config.output_dir; }
};

Context make_context(const GlobalOptions& g) {
  Context ctx;
  ctx.global = g;
  if (!g.config_path.empty()) ctx.config = dimcim::load_pipeline_config(g.config_path);
  dimcim::apply_environment(ctx.config);
  if (!g.output_dir.empty()) ctx.config.output_dir = g.output_dir;
  if (g.seed) {
    ctx.config.seed = *g.seed;
    ctx.config.evaluation.generation.base_seed = static_cast<std::int64_t>(*g.seed);
  }
  ctx.config.evaluation.resume = g.resume;
  ctx.mock = dimcim::mock_config_from_json(ctx.config.mock);
  return ctx;
}

void override_url(std::optional<dimcim::Endpoint>& endpoint, const std::string& url) {
  if (url.empty()) return;
  if (!endpoint) endpoint = dimcim::Endpoint{};
  endpoint->url = url;
}

fs::path dataset_path(const Context& ctx, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (ctx.config.dataset_path) return *ctx.config.dataset_path;
  throw dimcim::ParseError("--dataset", "no dataset given (flag or config 'dataset')");
}

std::string model_id(const Context& ctx, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (ctx.config.model_id) return *ctx.config.model_id;
  if (ctx.global.mock) return ctx.mock.model_id;
  if (ctx.config.generator) return ctx.config.generator->url;
  return "model";
}

void sync_style_hints(Context& ctx) {
  auto& eval_hints = ctx.config.evaluation.style_hints;
  auto& mock_hints = ctx.mock.scorer.style_hints;
  if (mock_hints.empty()) mock_hints = eval_hints;
  if (eval_hints.empty()) eval_hints = mock_hints;
}

std::unique_ptr<dimcim::ImageGenerator> make_generator(const Context& ctx,
                                                       const dimcim::BenchmarkDataset& dataset) {
  if (ctx.global.mock) {
    auto options = ctx.mock.generator;
    options.catalog = dataset.concepts;
    options.model_id = ctx.mock.model_id;
    return std::make_unique<dimcim::MockGenerator>(std::move(options));
  }
  if (!ctx.config.generator) {
    throw dimcim::BackendUnavailable("no generator endpoint (use --generator-url or DIMCIM_GENERATOR_URL)");
  }
  return std::make_unique<dimcim::HttpGenerator>(*ctx.config.generator);
}

std::unique_ptr<dimcim::AlignmentScorer> make_scorer(const Context& ctx,
                                                     const dimcim::BenchmarkDataset& dataset) {
  if (ctx.global.mock) {
    auto options = ctx.mock.scorer;
    options.catalog = dataset.concepts;
    return std::make_unique<dimcim::MockScorer>(std::move(options));
  }
  if (!ctx.config.scorer) {
    throw dimcim::BackendUnavailable("no scorer endpoint (use --scorer-url or DIMCIM_SCORER_URL)");
  }
  return std::make_unique<dimcim::HttpScorer>(*ctx.config.scorer);
}

void print_summary(const dimcim::MetricReport& report) {
  std::cout << "model " << report.model_id << "  DIM " << dimcim::text::format_double(report.summary_dim)
            << "  CIM " << dimcim::text::format_double(report.summary_cim) << "\n";
}

// ---------------------------------------------------------------------------

struct BuildFlags {
  std::string corpus, concepts, out, filter, llm_url, replay, templates;
  bool allow_partial = false;
  std::optional<std::size_t> seeds_per_concept, workers;
};

int cmd_build_dataset(Context& ctx, const BuildFlags& f) {
  auto builder = dimcim::builder_config_from_json(ctx.config.builder, ctx.config.seed);
  if (f.allow_partial) builder.allow_partial = true;
  if (f.seeds_per_concept) builder.seeds.count = *f.seeds_per_concept;
  if (f.workers) builder.workers = *f.workers;
  if (!f.filter.empty()) builder.filter = dimcim::AttributeFilter::load(f.filter);
  override_url(ctx.config.llm, f.llm_url);

  const auto corpus = dimcim::read_caption_corpus(f.corpus);
  const auto concepts = dimcim::read_concept_list(f.concepts);
  auto templates = f.templates.empty() ? dimcim::TemplateSet::defaults()
                                       : dimcim::TemplateSet::from_directory(f.templates);

  std::unique_ptr<dimcim::LlmAdapter> llm;
  if (!f.replay.empty()) {
    llm = std::make_unique<dimcim::ReplayLlm>(f.replay, std::move(templates));
  } else if (ctx.global.mock) {
    llm = std::make_unique<dimcim::MockLlm>(ctx.mock.llm, std::move(templates));
  } else if (ctx.config.llm) {
    llm = std::make_unique<dimcim::HttpLlm>(*ctx.config.llm, std::move(templates));
  } else {
    throw dimcim::BackendUnavailable("no LLM endpoint (use --llm-url, DIMCIM_LLM_URL, --replay or --mock)");
  }
  fs::create_directories(ctx.out());
  llm->attach_transcript(ctx.out() / "llm_transcript.jsonl", /*truncate=*/true);

  const auto result = dimcim::build_dataset(corpus, concepts, builder, *llm);
  const fs::path out = f.out.empty() ? ctx.out() / "dataset.json" : fs::path(f.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  dimcim::save_dataset(result.dataset, out);
  const Json report = result.report.to_json();
  dimcim::io::write_file_atomic(ctx.out() / "build_report.json", report.dump(2) + "\n");

  const auto stats = dimcim::dataset_stats(result.dataset);
  std::cout << "wrote " << out.string() << ": " << stats.concepts << " concepts, " << stats.attributes
            << " attributes, " << stats.coarse_prompts << " coarse, " << stats.dense_prompts
            << " dense prompts\n"
            << "sha256 " << dimcim::dataset_hash(result.dataset) << "\n"
            << "warnings " << result.report.warnings() << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  const auto dataset = dimcim::load_dataset(path);
  const auto stats = dimcim::dataset_stats(dataset);
  Json j = Json::object();
  j["concepts"] = stats.concepts;
  j["attributes"] = stats.attributes;
  j["coarse_prompts"] = stats.coarse_prompts;
  j["dense_prompts"] = stats.dense_prompts;
  j["mean_types_per_concept"] = stats.mean_types_per_concept;
  j["mean_attributes_per_concept"] = stats.mean_attributes_per_concept;
  j["mean_dense_per_coarse"] = stats.mean_dense_per_coarse;
  j["sha256"] = dimcim::dataset_hash(dataset);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string dataset, generator_url, scorer_url, model_id, coarse_parity, dim_averaging;
  std::optional<int> n_images;
  std::optional<double> guidance_scale;
};

void apply_eval_flags(Context& ctx, const EvalFlags& f) {
  auto& e = ctx.config.evaluation;
  if (f.n_images) e.generation.n_images = *f.n_images;
  if (f.guidance_scale) e.generation.guidance_scale = *f.guidance_scale;
  if (!f.coarse_parity.empty()) e.coarse_parity = dimcim::coarse_parity_from_string(f.coarse_parity);
  if (!f.dim_averaging.empty()) e.dim_averaging = dimcim::dim_averaging_from_string(f.dim_averaging);
  override_url(ctx.config.generator, f.generator_url);
  override_url(ctx.config.scorer, f.scorer_url);
  e.model_id = model_id(ctx, f.model_id);
  sync_style_hints(ctx);
}

int cmd_evaluate(Context& ctx, const EvalFlags& f) {
  apply_eval_flags(ctx, f);
  const auto dataset = dimcim::load_dataset(dataset_path(ctx, f.dataset));
  auto generator = make_generator(ctx, dataset);
  auto scorer = make_scorer(ctx, dataset);
  const auto result = dimcim::evaluate(dataset, *generator, *scorer, ctx.config.evaluation, ctx.out());
  print_summary(result.outcome.report);
  std::cout << "generator calls " << result.generator_calls << ", scorer calls " << result.scorer_calls
            << "\nreport " << (ctx.out() / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_score(Context& ctx, const EvalFlags& f, const std::string& manifest_flag) {
  apply_eval_flags(ctx, f);
  const auto dataset = dimcim::load_dataset(dataset_path(ctx, f.dataset));
  const fs::path manifest = manifest_flag.empty() ? ctx.out() / "generation_manifest.jsonl" : fs::path(manifest_flag);
  const auto images = dimcim::read_generation_manifest(manifest);
  auto scorer = make_scorer(ctx, dataset);
  fs::create_directories(ctx.out());
  dimcim::ScoreCache cache(ctx.out() / "score_cache.jsonl", ctx.global.resume);
  dimcim::CachingScorer caching(*scorer, cache);
  const auto scored = dimcim::score_images(dataset, images, caching, ctx.config.evaluation);
  dimcim::write_score_cells(scored.matrices, ctx.out() / "scores.jsonl");
  std::cout << "scored " << scored.matrices.size() << " matrices (" << caching.backend_calls()
            << " scorer calls, " << scored.skipped.size() << " units skipped)\n";
  return kExitOk;
}

int cmd_metrics(Context& ctx, const EvalFlags& f, const std::string& scores_flag) {
  apply_eval_flags(ctx, f);
  const auto dataset = dimcim::load_dataset(dataset_path(ctx, f.dataset));
  const fs::path scores = scores_flag.empty() ? ctx.out() / "scores.jsonl" : fs::path(scores_flag);
  const auto matrices = dimcim::read_score_cells(scores);
  const auto outcome = dimcim::compute_report(dataset, matrices, ctx.config.evaluation);
  fs::create_directories(ctx.out());
  dimcim::save_report(outcome.report, ctx.out() / "report.json");
  dimcim::io::write_file_atomic(ctx.out() / "report.csv", dimcim::report_csv(outcome.report));
  dimcim::io::write_file_atomic(ctx.out() / "coarse_breakdown.csv",
                                dimcim::breakdown_csv(outcome.report.model_id, outcome.breakdown));
  print_summary(outcome.report);
  return kExitOk;
}

struct AnalyzeFlags {
  std::vector<std::string> reports, figures;
  std::string dataset;
  std::optional<double> tau_fail, tau_can, tau_bias;
  bool allow_unpaired = false;
};

void apply_thresholds(Context& ctx, const AnalyzeFlags& f) {
  auto& a = ctx.config.analysis;
  if (f.tau_fail) a.tau_fail = *f.tau_fail;
  if (f.tau_can) a.tau_can = *f.tau_can;
  if (f.tau_bias) a.tau_bias = *f.tau_bias;
  if (f.allow_unpaired) a.allow_unpaired = true;
}

std::vector<dimcim::MetricReport> load_reports(const std::vector<std::string>& paths) {
  std::vector<dimcim::MetricReport> reports;
  for (const auto& p : paths) reports.push_back(dimcim::load_report(p));
  return reports;
}

void write_comparison(const std::vector<dimcim::MetricReport>& reports, const fs::path& dir) {
  const auto table = dimcim::compare_reports(reports);
  fs::create_directories(dir);
  dimcim::io::write_file_atomic(dir / "comparison.csv", dimcim::comparison_csv(table));
  dimcim::io::write_file_atomic(dir / "comparison_entries.csv", dimcim::entry_delta_csv(table));
  std::cout << dimcim::comparison_csv(table);
}

int cmd_analyze(Context& ctx, const AnalyzeFlags& f) {
  apply_thresholds(ctx, f);
  ctx.config.analysis.check();
  const auto reports = load_reports(f.reports);
  const fs::path dir = ctx.out() / "analysis";
  fs::create_directories(dir);
  if (reports.size() >= 2) write_comparison(reports, dir);

  std::string quadrants = "model,concept,attribute_type,attribute,dim,cim,category\n";
  for (const auto& r : reports) {
    if (r.summary_only()) continue;
    const auto csv = dimcim::findings_csv(r.model_id, dimcim::classify_quadrants(r, ctx.config.analysis));
    quadrants += csv.substr(csv.find('\n') + 1);
  }
  dimcim::io::write_file_atomic(dir / "quadrants.csv", quadrants);

  if (!f.dataset.empty() || ctx.config.dataset_path) {
    const auto dataset = dimcim::load_dataset(dataset_path(ctx, f.dataset));
    const auto hash = dimcim::dataset_hash(dataset);
    std::string negation = "model,concept,attribute_type,attribute,dim,cim,category\n";
    for (const auto& r : reports) {
      if (!r.dataset_hash.empty() && r.dataset_hash != hash) {
        throw dimcim::DatasetMismatch("report '" + r.model_id + "' was computed on another dataset");
      }
      if (r.summary_only()) continue;
      const auto csv = dimcim::findings_csv(r.model_id, dimcim::negation_audit(r, dataset, ctx.config.analysis));
      negation += csv.substr(csv.find('\n') + 1);
    }
    dimcim::io::write_file_atomic(dir / "negation.csv", negation);
  }
  const auto written = dimcim::write_figures(reports, f.figures, ctx.config.analysis, dir / "figures");
  std::cout << "analysis written to " << dir.string() << " (" << written.size() << " figure files)\n";
  return kExitOk;
}

int cmd_compare(Context& ctx, const std::vector<std::string>& paths) {
  write_comparison(load_reports(paths), ctx.out());
  return kExitOk;
}

struct AuditFlags {
  std::string corpus_manifest, report, dataset, scorer_url;
  std::optional<double> threshold, percentile;
  std::optional<std::size_t> max_images;
  bool allow_unpaired = false;
};

int cmd_audit_train(Context& ctx, const AuditFlags& f) {
  auto& a = ctx.config.analysis;
  if (f.threshold) a.filter_threshold = *f.threshold;
  if (f.percentile) a.outlier_percentile = *f.percentile;
  if (f.max_images) a.max_images_per_concept = *f.max_images;
  if (f.allow_unpaired) a.allow_unpaired = true;
  a.check();
  override_url(ctx.config.scorer, f.scorer_url);
  sync_style_hints(ctx);

  const auto dataset = dimcim::load_dataset(dataset_path(ctx, f.dataset));
  const auto report = dimcim::load_report(f.report);
  if (!report.dataset_hash.empty() && report.dataset_hash != dimcim::dataset_hash(dataset)) {
    throw dimcim::DatasetMismatch("report '" + report.model_id + "' was computed on another dataset");
  }
  const auto corpus = dimcim::read_corpus_manifest(f.corpus_manifest);
  auto backend = make_scorer(ctx, dataset);
  fs::create_directories(ctx.out());
  dimcim::ScoreCache cache(ctx.out() / "audit_score_cache.jsonl", ctx.global.resume);
  dimcim::CachingScorer scorer(*backend, cache);

  const auto outcome = dimcim::audit_training(corpus, dataset, report, scorer, a);
  dimcim::io::write_file_atomic(ctx.out() / "audit.csv", dimcim::audit_csv(outcome.results));
  Json corr = dimcim::to_json(outcome.correlation);
  corr["filter_threshold"] = a.filter_threshold;
  corr["kept_per_concept"] = outcome.kept_per_concept;
  dimcim::io::write_file_atomic(ctx.out() / "correlation.json", corr.dump(2) + "\n");
  const Json spec = Json::object(
      {{"figure", "train-gen-scatter"},
       {"kind", "scatter"},
       {"data", "audit.csv"},
       {"x", Json::object({{"column", "train_dim"}, {"label", "training-data DIM"}, {"range", {-1.0, 1.0}}})},
       {"y", Json::object({{"column", "gen_dim"}, {"label", "generated DIM"}, {"range", {-1.0, 1.0}}})},
       {"labels", "attribute"},
       {"fit", Json::object({{"slope", outcome.correlation.slope}, {"intercept", outcome.correlation.intercept}})},
       {"annotation", "pearson_r"}});
  dimcim::io::write_file_atomic(ctx.out() / "train-gen-scatter.json", spec.dump(2) + "\n");
  std::cout << "pearson_r " << dimcim::text::format_double(outcome.correlation.pearson_r) << " over "
            << outcome.correlation.n_pairs << " pairs, " << outcome.correlation.outliers.size()
            << " outliers\n";
  return kExitOk;
}

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
  cmd->add_option("--dataset", f.dataset, "Benchmark dataset JSON");
  cmd->add_option("--generator-url", f.generator_url, "Generator endpoint URL");
  cmd->add_option("--scorer-url", f.scorer_url, "Scorer endpoint URL");
  cmd->add_option("--model-id", f.model_id, "Model label written into the report");
  cmd->add_option("--n-images", f.n_images, "Images per dense prompt")->check(CLI::PositiveNumber);
  cmd->add_option("--guidance-scale", f.guidance_scale, "Classifier-free guidance scale")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--coarse-parity", f.coarse_parity, "Coarse image count: total or flat")
      ->check(CLI::IsMember({"total", "flat"}));
  cmd->add_option("--dim-averaging", f.dim_averaging, "Summary DIM averaging: entry or prompt_attribute")
      ->check(CLI::IsMember({"entry", "prompt_attribute"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIM/CIM diversity benchmark for text-to-image models"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config JSON");
  app.add_flag("--mock", g.mock, "Use deterministic mock backends");
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--output-dir", g.output_dir, "Artifact directory");
  app.add_flag("--resume", g.resume, "Reuse caches of a previous run");

  BuildFlags build;
  auto* build_cmd = app.add_subcommand("build-dataset", "Build a benchmark from a caption corpus");
  build_cmd->add_option("--corpus", build.corpus, "Caption corpus (JSON Lines {id, caption})")->required();
  build_cmd->add_option("--concepts", build.concepts, "Concept list (JSON array or one per line)")->required();
  build_cmd->add_option("--out", build.out, "Dataset output path");
  build_cmd->add_option("--filter", build.filter, "Attribute filter JSON");
  build_cmd->add_option("--llm-url", build.llm_url, "LLM endpoint URL");
  build_cmd->add_option("--replay", build.replay, "Replay a recorded LLM transcript");
  build_cmd->add_option("--templates", build.templates, "Directory of meta-prompt templates");
  build_cmd->add_option("--seeds-per-concept", build.seeds_per_concept, "Seed captions per concept");
  build_cmd->add_option("--workers", build.workers, "Concurrent concept builds");
  build_cmd->add_flag("--allow-partial", build.allow_partial, "Accept concepts with too few captions");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Validate a dataset file and print its statistics");
  validate_cmd->add_option("dataset", validate_path, "Dataset JSON")->required();

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Generate, score and report");
  add_eval_flags(eval_cmd, eval);

  EvalFlags score;
  std::string manifest;
  auto* score_cmd = app.add_subcommand("score", "Score the images of a generation manifest");
  add_eval_flags(score_cmd, score);
  score_cmd->add_option("--manifest", manifest, "Generation manifest JSON Lines");

  EvalFlags metrics;
  std::string scores;
  auto* metrics_cmd = app.add_subcommand("metrics", "Recompute a report from score cells");
  add_eval_flags(metrics_cmd, metrics);
  metrics_cmd->add_option("--scores", scores, "Score cells JSON Lines");

  AnalyzeFlags analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Quadrant, negation and comparison analysis");
  analyze_cmd->add_option("--report", analyze.reports, "Report JSON (repeatable)")->required();
  analyze_cmd->add_option("--dataset", analyze.dataset, "Dataset JSON (enables the negation audit)");
  analyze_cmd->add_option("--figure", analyze.figures, "Figure to emit (repeatable; default all)")
      ->check(CLI::IsMember(dimcim::figure_names()));
  analyze_cmd->add_option("--tau-fail", analyze.tau_fail, "CIM below this is a generalization failure");
  analyze_cmd->add_option("--tau-can", analyze.tau_can, "CIM at or above this counts as capable");
  analyze_cmd->add_option("--tau-bias", analyze.tau_bias, "|DIM| at or above this is a default-mode bias");
  analyze_cmd->add_flag("--allow-unpaired", analyze.allow_unpaired, "Skip entries lacking a DIM/CIM partner");

  AuditFlags audit;
  auto* audit_cmd = app.add_subcommand("audit-train", "Correlate training-data DIM with generated DIM");
  audit_cmd->add_option("--corpus-manifest", audit.corpus_manifest, "Training images JSON Lines")->required();
  audit_cmd->add_option("--report", audit.report, "Report JSON of the model")->required();
  audit_cmd->add_option("--dataset", audit.dataset, "Dataset JSON");
  audit_cmd->add_option("--scorer-url", audit.scorer_url, "Scorer endpoint URL");
  audit_cmd->add_option("--threshold", audit.threshold, "Concept-presence filter threshold");
  audit_cmd->add_option("--percentile", audit.percentile, "Outlier residual percentile");
  audit_cmd->add_option("--max-images", audit.max_images, "Cap on training images per concept");
  audit_cmd->add_flag("--allow-unpaired", audit.allow_unpaired, "Drop attributes missing from the report");

  std::vector<std::string> compare_paths;
  auto* compare_cmd = app.add_subcommand("compare", "Compare reports over the same dataset");
  compare_cmd->add_option("--report", compare_paths, "Report JSON (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    Context ctx = make_context(g);
    if (*build_cmd) return cmd_build_dataset(ctx, build);
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*eval_cmd) return cmd_evaluate(ctx, eval);
    if (*score_cmd) return cmd_score(ctx, score, manifest);
    if (*metrics_cmd) return cmd_metrics(ctx, metrics, scores);
    if (*analyze_cmd) return cmd_analyze(ctx, analyze);
    if (*audit_cmd) return cmd_audit_train(ctx, audit);
    if (*compare_cmd) return cmd_compare(ctx, compare_paths);
  } catch (const dimcim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
