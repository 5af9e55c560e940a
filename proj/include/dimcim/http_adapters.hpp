// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// JSON-over-HTTP backends.
//
//   generator  POST {"prompt","n","guidance_scale","seed"[,"params"]}
//              -> {"images": [{"id","uri"}, ...]}
//   scorer     POST {"image_uri","text"} -> {"score": number}
//   llm        POST {"prompt","temperature"} -> {"text": string}

#pragma once

#include <string>

#include "dimcim/adapters.hpp"

namespace dimcim {

struct Endpoint {
  std::string url;  // http://host[:port][/path]
  double timeout_s = 300.0;
  std::size_t max_concurrency = 4;
};

namespace wire {

io::Json generation_request(const GenerationRequest& request);
/// Assigns seeds request.seed + k to the k-th returned image.
GenerationBatch generation_reply(const io::Json& reply, const GenerationRequest& request);

io::Json score_request(const AlignmentQuery& query);
double score_reply(const io::Json& reply);

io::Json llm_request(const std::string& prompt);
std::string llm_reply(const io::Json& reply);

}  // namespace wire

/// POSTs `body` as JSON and parses the JSON reply. Connection errors and
/// non-2xx statuses raise BackendUnavailable; an unparseable body raises
/// RequestFailure.
io::Json post_json(const Endpoint& endpoint, const io::Json& body);

class HttpGenerator : public ImageGenerator {
 public:
  explicit HttpGenerator(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  GenerationBatch run(const GenerationRequest& request) override;
  std::string fingerprint() const override { return "http-generator:" + endpoint_.url; }
  std::size_t max_concurrency() const override { return endpoint_.max_concurrency; }

 private:
  Endpoint endpoint_;
};

class HttpScorer : public AlignmentScorer {
 public:
  explicit HttpScorer(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string fingerprint() const override { return "http-scorer:" + endpoint_.url; }
  std::size_t max_concurrency() const override { return endpoint_.max_concurrency; }

 protected:
  double raw_score(const AlignmentQuery& query) override;

 private:
  Endpoint endpoint_;
};

class HttpLlm : public LlmAdapter {
 public:
  explicit HttpLlm(Endpoint endpoint, TemplateSet templates = TemplateSet::defaults())
      : LlmAdapter(std::move(templates)), endpoint_(std::move(endpoint)) {}
  std::string fingerprint() const override { return "http-llm:" + endpoint_.url; }

 protected:
  std::string reply(const LlmRequest& request) override;

 private:
  Endpoint endpoint_;
};

}  // namespace dimcim
