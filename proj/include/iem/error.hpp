// Copyright 2026 The IEM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IEM_ERROR_HPP_
#define IEM_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace iem {

enum class ErrorCode {
  kInvalidPrior,
  kInvalidGamma,
  kInvalidRange,
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kNotPSD,
  kAtKink,
  kUnsupported,
  kSingular,
  kInvalidMatrix,
  kBadK,
  kTooManyClusters,
  kParse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidPrior: return "InvalidPrior";
    case ErrorCode::kInvalidGamma: return "InvalidGamma";
    case ErrorCode::kInvalidRange: return "InvalidRange";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNotPSD: return "NotPSD";
    case ErrorCode::kAtKink: return "AtKink";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kSingular: return "Singular";
    case ErrorCode::kInvalidMatrix: return "InvalidMatrix";
    case ErrorCode::kBadK: return "BadK";
    case ErrorCode::kTooManyClusters: return "TooManyClusters";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the category prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

namespace detail {

/// Throws when condition is false. message may be a string or a callable
/// returning one, so hot paths only format text on failure.
template <typename Message>
inline void require(bool condition, ErrorCode code, Message&& message) {
  if (condition) [[likely]] return;
  if constexpr (std::is_invocable_v<Message>) {
    throw Error(code, std::string(message()));
  } else {
    throw Error(code, std::string(message));
  }
}

}  // namespace detail
}  // namespace iem

#endif  // IEM_ERROR_HPP_
