// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dimcim/errors.hpp"

namespace dimcim::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed on '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::vector<Json> read_jsonl(const fs::path& path, bool tolerate_torn_tail) {
  const std::string data = read_file(path);
  std::vector<Json> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    const bool last = end == std::string::npos;
    if (last) end = data.size();
    ++line_no;
    std::string_view line(data.data() + pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      if (tolerate_torn_tail && last) break;
      throw ParseError(path.string() + ":" + std::to_string(line_no), e.what());
    }
  }
  return records;
}

std::string to_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

JsonlAppender::JsonlAppender(const fs::path& path, bool truncate) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  if (!truncate && fs::exists(path) && fs::file_size(path) > 0) {
    // Drop a torn final record (no trailing newline) left by an interrupted writer.
    std::string contents = read_file(path);
    if (contents.back() != '\n') {
      const auto cut = contents.rfind('\n');
      fs::resize_file(path, cut == std::string::npos ? 0 : cut + 1);
    }
  }
  file_ = std::fopen(path.c_str(), truncate ? "wb" : "ab");
  if (!file_) throw IoError("cannot open '" + path.string() + "' for appending");
}

JsonlAppender::~JsonlAppender() {
  if (file_) std::fclose(file_);
}

void JsonlAppender::append(const Json& record) {
  const std::string line = record.dump() + "\n";
  std::lock_guard lock(mutex_);
  if (!file_) throw IoError("append on a closed JSON Lines sink");
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw IoError("append failed");
  }
}

}  // namespace dimcim::io
