// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dimcim::io {

using Json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" then renames over `path`, so readers never observe
/// a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Parses a JSON Lines file. Blank lines are skipped. A malformed final line
/// (a torn append from an interrupted writer) is dropped when
/// `tolerate_torn_tail` is set; any other malformed line raises ParseError.
std::vector<Json> read_jsonl(const std::filesystem::path& path,
                             bool tolerate_torn_tail = false);

std::string to_jsonl(const std::vector<Json>& records);

/// Append-only JSON Lines sink. Every record is flushed before append()
/// returns; safe to call from several threads.
class JsonlAppender {
 public:
  JsonlAppender() = default;
  JsonlAppender(const std::filesystem::path& path, bool truncate);
  JsonlAppender(JsonlAppender&&) = delete;
  ~JsonlAppender();

  void append(const Json& record);
  bool is_open() const noexcept { return file_ != nullptr; }

 private:
  std::mutex mutex_;
  std::FILE* file_ = nullptr;
};

}  // namespace dimcim::io
