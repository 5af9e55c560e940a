// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dimcim {

/// Coarse error category; the CLI maps these onto process exit codes.
enum class ErrorKind {
  kIo,          // exit 1
  kValidation,  // exit 2: parse, validation, dataset mismatch
  kBackend,     // exit 3: external model unavailable or misbehaving
  kData,        // exit 2: computation preconditions on loaded artifacts
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

/// Malformed document. `locator` is a path-like pointer into the document,
/// e.g. "concepts[3].attribute_types[1]".
class ParseError : public Error {
 public:
  ParseError(std::string locator, const std::string& what)
      : Error(ErrorKind::kValidation,
              locator.empty() ? what : locator + ": " + what),
        locator_(std::move(locator)) {}
  const std::string& locator() const noexcept { return locator_; }

 private:
  std::string locator_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string locator, std::string rule, const std::string& what)
      : Error(ErrorKind::kValidation, locator + ": [" + rule + "] " + what),
        locator_(std::move(locator)),
        rule_(std::move(rule)) {}
  const std::string& locator() const noexcept { return locator_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string locator_;
  std::string rule_;
};

// promptgen

class InsufficientCaptions : public Error {
 public:
  InsufficientCaptions(std::string concept_name, std::size_t survivors,
                       std::size_t requested)
      : Error(ErrorKind::kData,
              "concept '" + concept_name + "': only " +
                  std::to_string(survivors) + " captions survive filtering, " +
                  std::to_string(requested) + " requested"),
        concept_(std::move(concept_name)),
        survivors_(survivors) {}
  const std::string& concept_name() const noexcept { return concept_; }
  std::size_t survivors() const noexcept { return survivors_; }

 private:
  std::string concept_;
  std::size_t survivors_;
};

class LlmProtocolError : public Error {
 public:
  LlmProtocolError(const std::string& what, std::string raw_reply)
      : Error(ErrorKind::kBackend, "LLM protocol error: " + what),
        raw_reply_(std::move(raw_reply)) {}
  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

class SubjectMismatch : public Error {
 public:
  SubjectMismatch(const std::string& expected, const std::string& got)
      : Error(ErrorKind::kData,
              "main subject '" + got + "' does not match concept '" + expected + "'") {}
};

class CoarseLeakage : public Error {
 public:
  CoarseLeakage(const std::string& text, std::string attribute)
      : Error(ErrorKind::kData,
              "coarse prompt '" + text + "' still mentions attribute '" + attribute + "'"),
        attribute_(std::move(attribute)) {}
  const std::string& attribute() const noexcept { return attribute_; }

 private:
  std::string attribute_;
};

// adapters

class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& what)
      : Error(ErrorKind::kBackend, "backend unavailable: " + what) {}
};

/// Failure confined to a single request (one image, one score). Callers may
/// drop the affected item and continue.
class RequestFailure : public Error {
 public:
  explicit RequestFailure(const std::string& what) : Error(ErrorKind::kBackend, what) {}
};

class GenerationFailure : public RequestFailure {
 public:
  using RequestFailure::RequestFailure;
};

class ScoringFailure : public RequestFailure {
 public:
  using RequestFailure::RequestFailure;
};

class ScoreOutOfRange : public Error {
 public:
  explicit ScoreOutOfRange(double value)
      : Error(ErrorKind::kBackend,
              "scorer returned " + std::to_string(value) + ", outside [0,1]"),
        value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& what)
      : Error(ErrorKind::kValidation, "template error: " + what) {}
};

// scoring / metrics / analysis

class EmptyMatrix : public Error {
 public:
  explicit EmptyMatrix(const std::string& unit)
      : Error(ErrorKind::kData, "score matrix '" + unit + "' has no complete rows") {}
};

class UnknownAttribute : public Error {
 public:
  UnknownAttribute(const std::string& unit, const std::string& attribute)
      : Error(ErrorKind::kData,
              "attribute '" + attribute + "' is not a column of '" + unit + "'") {}
};

class OrphanMatrix : public Error {
 public:
  explicit OrphanMatrix(const std::string& unit)
      : Error(ErrorKind::kValidation,
              "score matrix unit '" + unit + "' is not a dense prompt of the dataset") {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class DatasetMismatch : public Error {
 public:
  explicit DatasetMismatch(const std::string& what)
      : Error(ErrorKind::kValidation, "dataset mismatch: " + what) {}
};

class MissingCounterpart : public Error {
 public:
  explicit MissingCounterpart(const std::string& what)
      : Error(ErrorKind::kData, "missing counterpart: " + what) {}
};

class DegenerateVariance : public Error {
 public:
  explicit DegenerateVariance(const std::string& what)
      : Error(ErrorKind::kData, "degenerate variance: " + what) {}
};

}  // namespace dimcim
