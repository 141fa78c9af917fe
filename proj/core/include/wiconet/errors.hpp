// Copyright 2026 The wiconet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wiconet {

// Coarse failure classes. The CLI maps each onto an exit code and prints the
// category name so callers can dispatch on it.
enum class ErrorCategory {
  kGeometry,
  kContract,
  kData,
  kConfig,
  kIo,
  kTraining,
};

constexpr std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kGeometry: return "geometry";
    case ErrorCategory::kContract: return "contract";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kTraining: return "training";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& what) : Error(ErrorCategory::kGeometry, what) {}
};
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& what) : Error(ErrorCategory::kContract, what) {}
};
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& what) : Error(ErrorCategory::kTraining, what) {}
};

}  // namespace wiconet
