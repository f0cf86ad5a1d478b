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

#include "influence/errors.hpp"

namespace influence {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::NotUtf8: return "NotUtf8";
    case Errc::EmptyDocument: return "EmptyDocument";
    case Errc::EmptyText: return "EmptyText";
    case Errc::MarkerNotFound: return "MarkerNotFound";
    case Errc::MarkerAmbiguous: return "MarkerAmbiguous";
    case Errc::InvalidDateRange: return "InvalidDateRange";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::RoleMismatch: return "RoleMismatch";
    case Errc::SpanOutOfBounds: return "SpanOutOfBounds";
    case Errc::OverlappingSpans: return "OverlappingSpans";
    case Errc::SpanConflict: return "SpanConflict";
    case Errc::PolicyViolation: return "PolicyViolation";
    case Errc::InvalidAnnotation: return "InvalidAnnotation";
    case Errc::InvalidLexicon: return "InvalidLexicon";
    case Errc::IsolationViolation: return "IsolationViolation";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::AllMasked: return "AllMasked";
    case Errc::EmptySentenceList: return "EmptySentenceList";
    case Errc::ModelLoadFailure: return "ModelLoadFailure";
    case Errc::TokenizationFailure: return "TokenizationFailure";
    case Errc::InferenceFailure: return "InferenceFailure";
    case Errc::CacheCorrupt: return "CacheCorrupt";
    case Errc::ParityFailure: return "ParityFailure";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroNormVector: return "ZeroNormVector";
    case Errc::ModelMismatch: return "ModelMismatch";
    case Errc::AllRowsZeroNorm: return "AllRowsZeroNorm";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::IncompleteGrid: return "IncompleteGrid";
    case Errc::TooFewAxes: return "TooFewAxes";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::UnknownModel: return "UnknownModel";
    case Errc::PrecedenceViolation: return "PrecedenceViolation";
    case Errc::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
  }
  return "Unknown";
}

bool is_user_error(Errc code) {
  switch (code) {
    case Errc::ModelLoadFailure:
    case Errc::TokenizationFailure:
    case Errc::InferenceFailure:
    case Errc::CacheCorrupt:
    case Errc::ParityFailure:
    case Errc::IoFailure:
    case Errc::IncompleteGrid:
    case Errc::DimensionMismatch:
    case Errc::ZeroNormVector:
    case Errc::ModelMismatch:
    case Errc::AllRowsZeroNorm:
    case Errc::EmptyMatrix:
    case Errc::AllMasked:
    case Errc::EmptyVocabulary:
      return false;
    default:
      return true;
  }
}

}  // namespace influence
