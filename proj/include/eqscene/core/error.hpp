// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace eqscene {

/// Failure categories; the CLI maps them to exit codes 1, 2 and 3.
enum class ErrorCategory { runtime = 1, usage = 2, data_format = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class RuntimeError : public Error {
 public:
  explicit RuntimeError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class DataFormatError : public Error {
 public:
  explicit DataFormatError(const std::string& what) : Error(ErrorCategory::data_format, what) {}
};

/// Arguments that violate a documented precondition (shape, frame, index).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

}  // namespace eqscene
