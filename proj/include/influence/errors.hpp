// Copyright 2026 The Influence Authors.
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

namespace influence {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit codes through is_user_error().
enum class Errc {
  // corpus
  MissingFile,
  NotUtf8,
  EmptyDocument,
  EmptyText,
  MarkerNotFound,
  MarkerAmbiguous,
  InvalidDateRange,
  DuplicateId,
  RoleMismatch,
  // preprocess
  SpanOutOfBounds,
  OverlappingSpans,
  SpanConflict,
  PolicyViolation,
  InvalidAnnotation,
  InvalidLexicon,
  IsolationViolation,
  // embed
  EmptyVocabulary,
  AllMasked,
  EmptySentenceList,
  ModelLoadFailure,
  TokenizationFailure,
  InferenceFailure,
  CacheCorrupt,
  ParityFailure,
  // similarity
  DimensionMismatch,
  ZeroNormVector,
  ModelMismatch,
  AllRowsZeroNorm,
  EmptyMatrix,
  // ensemble
  IncompleteGrid,
  // report
  TooFewAxes,
  IoFailure,
  // cli
  ConfigInvalid,
  UnknownModel,
  PrecedenceViolation,
  MissingUpstreamArtifact,
};

std::string_view errc_name(Errc code);

// True for errors caused by the caller's inputs or configuration (exit 1);
// false for runtime failures (exit 2).
bool is_user_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace influence
