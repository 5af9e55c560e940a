// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/adapters.hpp"

#include <regex>

#include "dimcim/errors.hpp"
#include "dimcim/text.hpp"

namespace dimcim {

namespace detail {
extern const std::string_view kDefaultAttributeExtraction;
extern const std::string_view kDefaultPromptExpansion;
}  // namespace detail

using io::Json;

void GenerationConfig::check() const {
  if (n_images < 1) throw std::invalid_argument("n_images must be >= 1");
  if (!(guidance_scale > 0.0)) throw std::invalid_argument("guidance_scale must be > 0");
}

Json to_json(const GenerationConfig& config) {
  Json j = Json::object();
  j["n_images"] = config.n_images;
  j["guidance_scale"] = config.guidance_scale;
  j["base_seed"] = config.base_seed;
  if (!config.params.empty()) j["params"] = config.params;
  return j;
}

GenerationConfig generation_config_from_json(const Json& j) {
  GenerationConfig c;
  if (!j.is_object()) throw ParseError("config", "expected an object");
  c.n_images = j.value("n_images", c.n_images);
  c.guidance_scale = j.value("guidance_scale", c.guidance_scale);
  c.base_seed = j.value("base_seed", c.base_seed);
  if (j.contains("params")) c.params = j["params"];
  return c;
}

Json to_manifest_record(const ImageRef& image) {
  Json j = Json::object();
  j["prompt_id"] = image.prompt_id;
  j["image_id"] = image.id;
  j["uri"] = image.uri;
  j["seed"] = image.seed;
  if (image.labels) j["labels"] = *image.labels;
  return j;
}

ImageRef image_from_manifest_record(const Json& record) {
  if (!record.is_object() || !record.contains("image_id") || !record["image_id"].is_string()) {
    throw ParseError("image record", "expected an object with a string 'image_id'");
  }
  ImageRef img;
  img.id = record["image_id"].get<std::string>();
  img.uri = record.value("uri", std::string{});
  img.prompt_id = record.value("prompt_id", std::string{});
  img.seed = record.value("seed", std::int64_t{0});
  if (record.contains("labels")) {
    if (!record["labels"].is_object()) throw ParseError("image record.labels", "expected an object");
    img.labels = record["labels"].get<Labels>();
  }
  return img;
}

// ---------------------------------------------------------------------------

namespace {

Json image_to_cache(const ImageRef& img) {
  Json j = Json::object();
  j["id"] = img.id;
  j["uri"] = img.uri;
  j["seed"] = img.seed;
  if (img.labels) j["labels"] = *img.labels;
  return j;
}

ImageRef image_from_cache(const Json& j) {
  ImageRef img;
  img.id = j.at("id").get<std::string>();
  img.uri = j.at("uri").get<std::string>();
  img.seed = j.at("seed").get<std::int64_t>();
  if (j.contains("labels")) img.labels = j["labels"].get<Labels>();
  return img;
}

}  // namespace

GenerationService::GenerationService(ImageGenerator& backend,
                                     std::optional<std::filesystem::path> cache_path,
                                     bool resume)
    : backend_(backend) {
  if (!cache_path) return;
  if (resume && std::filesystem::exists(*cache_path)) {
    for (const auto& rec : io::read_jsonl(*cache_path, /*tolerate_torn_tail=*/true)) {
      std::vector<ImageRef> images;
      for (const auto& j : rec.at("images")) images.push_back(image_from_cache(j));
      memo_.emplace(rec.at("key").get<std::string>(), std::move(images));
    }
  }
  log_ = std::make_unique<io::JsonlAppender>(*cache_path, !resume);
}

GenerationBatch GenerationService::generate(const std::string& prompt_id,
                                            const std::string& prompt,
                                            const GenerationConfig& config) {
  config.check();
  GenerationRequest request{prompt, config.n_images, config.guidance_scale, config.base_seed,
                            config.params};
  Json key_doc = Json::object();
  key_doc["backend"] = backend_.fingerprint();
  key_doc["prompt"] = request.prompt;
  key_doc["n"] = request.n;
  key_doc["guidance_scale"] = request.guidance_scale;
  key_doc["seed"] = request.seed;
  if (!request.params.empty()) key_doc["params"] = request.params;
  const std::string key = io::sha256_hex(key_doc.dump());

  GenerationBatch batch;
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) batch.images = it->second;
  }
  if (batch.images.empty()) {
    ++backend_calls_;
    batch = backend_.run(request);
    if (batch.images.size() + batch.failures.size() != static_cast<std::size_t>(request.n)) {
      throw GenerationFailure("backend returned " + std::to_string(batch.images.size()) +
                              " images for n=" + std::to_string(request.n));
    }
    if (batch.failures.empty()) {
      std::lock_guard lock(mutex_);
      memo_.emplace(key, batch.images);
      if (log_) {
        Json rec = Json::object();
        rec["key"] = key;
        rec["prompt"] = prompt;
        Json imgs = Json::array();
        for (const auto& img : batch.images) imgs.push_back(image_to_cache(img));
        rec["images"] = std::move(imgs);
        log_->append(rec);
      }
    }
  }
  for (auto& img : batch.images) img.prompt_id = prompt_id;
  return batch;
}

// ---------------------------------------------------------------------------

double AlignmentScorer::score(const AlignmentQuery& query) {
  if (query.text.empty()) throw std::invalid_argument("alignment query text must be non-empty");
  const double s = raw_score(query);
  if (!(s >= 0.0 && s <= 1.0)) throw ScoreOutOfRange(s);
  return s;
}

ScoreCache::ScoreCache(const std::filesystem::path& path, bool resume) {
  if (resume && std::filesystem::exists(path)) {
    for (const auto& rec : io::read_jsonl(path, /*tolerate_torn_tail=*/true)) {
      index_[{rec.at("image_id").get<std::string>(), rec.at("text").get<std::string>()}] =
          rec.at("score").get<double>();
    }
  }
  log_ = std::make_unique<io::JsonlAppender>(path, !resume);
}

std::optional<double> ScoreCache::find(const std::string& image_id, const std::string& text) const {
  std::lock_guard lock(mutex_);
  if (auto it = index_.find({image_id, text}); it != index_.end()) return it->second;
  return std::nullopt;
}

void ScoreCache::insert(const std::string& image_id, const std::string& text, double score) {
  std::lock_guard lock(mutex_);
  if (!index_.emplace(std::make_pair(image_id, text), score).second) return;
  if (log_) {
    Json rec = Json::object();
    rec["image_id"] = image_id;
    rec["text"] = text;
    rec["score"] = score;
    log_->append(rec);
  }
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return index_.size();
}

double CachingScorer::raw_score(const AlignmentQuery& query) {
  if (auto hit = cache_.find(query.image.id, query.text)) return *hit;
  ++backend_calls_;
  const double s = backend_.score(query);
  cache_.insert(query.image.id, query.text, s);
  return s;
}

// ---------------------------------------------------------------------------

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  set.set(std::string(kAttributeExtractionTemplate), std::string(detail::kDefaultAttributeExtraction));
  set.set(std::string(kPromptExpansionTemplate), std::string(detail::kDefaultPromptExpansion));
  return set;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
  TemplateSet set;
  for (auto name : {kAttributeExtractionTemplate, kPromptExpansionTemplate}) {
    set.set(std::string(name), io::read_file(dir / (std::string(name) + ".txt")));
  }
  return set;
}

void TemplateSet::set(std::string name, std::string body) {
  templates_[std::move(name)] = std::move(body);
}

bool TemplateSet::contains(std::string_view name) const {
  return templates_.find(name) != templates_.end();
}

const std::string& TemplateSet::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw TemplateError("unknown template '" + std::string(name) + "'");
  return it->second;
}

std::string TemplateSet::render(std::string_view name, const Substitutions& substitutions) const {
  static const std::regex kPlaceholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  const std::string& body = get(name);
  std::string out;
  out.reserve(body.size());
  auto begin = std::sregex_iterator(body.begin(), body.end(), kPlaceholder);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(body, last, static_cast<std::size_t>(m.position(0)) - last);
    const std::string key = m[1].str();
    auto sub = substitutions.find(key);
    if (sub == substitutions.end()) {
      throw TemplateError("placeholder {" + key + "} in '" + std::string(name) + "' is not substituted");
    }
    out += sub->second;
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(body, last, std::string::npos);
  return out;
}

LlmAdapter::LlmAdapter(TemplateSet templates) : templates_(std::move(templates)) {}

void LlmAdapter::attach_transcript(const std::filesystem::path& path, bool truncate) {
  transcript_ = std::make_unique<io::JsonlAppender>(path, truncate);
}

std::string LlmAdapter::complete(std::string_view template_name,
                                 const Substitutions& substitutions) {
  LlmRequest request{std::string(template_name), substitutions,
                     templates_.render(template_name, substitutions)};
  std::string completion;
  if (concurrent_safe()) {
    completion = reply(request);
  } else {
    std::lock_guard lock(call_mutex_);
    completion = reply(request);
  }
  if (transcript_) {
    Json rec = Json::object();
    rec["template"] = request.template_name;
    rec["prompt"] = request.prompt;
    rec["reply"] = completion;
    transcript_->append(rec);
  }
  return completion;
}

}  // namespace dimcim
