// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/http_adapters.hpp"

#include <httplib.h>

#include <regex>

#include "dimcim/errors.hpp"

namespace dimcim {

using io::Json;

namespace wire {

Json generation_request(const GenerationRequest& request) {
  Json j = Json::object();
  j["prompt"] = request.prompt;
  j["n"] = request.n;
  j["guidance_scale"] = request.guidance_scale;
  j["seed"] = request.seed;
  if (!request.params.empty()) j["params"] = request.params;
  return j;
}

GenerationBatch generation_reply(const Json& reply, const GenerationRequest& request) {
  if (!reply.is_object() || !reply.contains("images") || !reply["images"].is_array()) {
    throw RequestFailure("generator reply lacks an 'images' array");
  }
  GenerationBatch batch;
  const auto& images = reply["images"];
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& j = images[k];
    const std::int64_t seed = request.seed + static_cast<std::int64_t>(k);
    if (j.is_object() && j.contains("error")) {
      batch.failures.push_back({seed, j["error"].dump()});
      continue;
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("uri") ||
        !j["uri"].is_string()) {
      throw RequestFailure("generator reply image " + std::to_string(k) + " lacks 'id'/'uri'");
    }
    ImageRef img;
    img.id = j["id"].get<std::string>();
    img.uri = j["uri"].get<std::string>();
    img.seed = seed;
    batch.images.push_back(std::move(img));
  }
  return batch;
}

Json score_request(const AlignmentQuery& query) {
  Json j = Json::object();
  j["image_uri"] = query.image.uri;
  j["text"] = query.text;
  return j;
}

double score_reply(const Json& reply) {
  if (!reply.is_object() || !reply.contains("score") || !reply["score"].is_number()) {
    throw ScoringFailure("scorer reply lacks a numeric 'score'");
  }
  return reply["score"].get<double>();
}

Json llm_request(const std::string& prompt) {
  Json j = Json::object();
  j["prompt"] = prompt;
  j["temperature"] = 0;
  return j;
}

std::string llm_reply(const Json& reply) {
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw RequestFailure("LLM reply lacks a string 'text'");
  }
  return reply["text"].get<std::string>();
}

}  // namespace wire

Json post_json(const Endpoint& endpoint, const Json& body) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint.url, m, kUrl)) {
    throw BackendUnavailable("malformed endpoint URL '" + endpoint.url + "'");
  }
  const std::string path = m[2].matched ? m[2].str() : "/";
  httplib::Client client(m[1].str());
  const auto secs = static_cast<time_t>(endpoint.timeout_s);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw BackendUnavailable(endpoint.url + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendUnavailable(endpoint.url + ": HTTP " + std::to_string(res->status));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw RequestFailure(endpoint.url + ": reply is not JSON: " + e.what());
  }
}

GenerationBatch HttpGenerator::run(const GenerationRequest& request) {
  return wire::generation_reply(post_json(endpoint_, wire::generation_request(request)), request);
}

double HttpScorer::raw_score(const AlignmentQuery& query) {
  return wire::score_reply(post_json(endpoint_, wire::score_request(query)));
}

std::string HttpLlm::reply(const LlmRequest& request) {
  return wire::llm_reply(post_json(endpoint_, wire::llm_request(request.prompt)));
}

}  // namespace dimcim
