#include "rosprompt/error.hpp"

namespace rosprompt {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateEmbedding: return "DEGENERATE_EMBEDDING";
    case ErrorCode::InvalidNeighborhood: return "INVALID_NEIGHBORHOOD";
    case ErrorCode::UnknownSurface: return "UNKNOWN_SURFACE";
    case ErrorCode::InvalidEmbeddingFile: return "INVALID_EMBEDDING_FILE";
    case ErrorCode::InvalidLabelToken: return "INVALID_LABEL_TOKEN";
    case ErrorCode::AmbiguousVerbalizer: return "AMBIGUOUS_VERBALIZER";
    case ErrorCode::EmptyVerbalizer: return "EMPTY_VERBALIZER";
    case ErrorCode::InvalidVerbalizer: return "INVALID_VERBALIZER";
    case ErrorCode::DegenerateSmoothing: return "DEGENERATE_SMOOTHING";
    case ErrorCode::UnknownClass: return "UNKNOWN_CLASS";
    case ErrorCode::NumericalUnderflow: return "NUMERICAL_UNDERFLOW";
    case ErrorCode::PenaltyUndefined: return "PENALTY_UNDEFINED";
    case ErrorCode::InputTooLong: return "INPUT_TOO_LONG";
    case ErrorCode::InvalidCheckpoint: return "INVALID_CHECKPOINT";
    case ErrorCode::IncompatiblePrompt: return "INCOMPATIBLE_PROMPT";
    case ErrorCode::PromptNotFound: return "PROMPT_NOT_FOUND";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::NotEnoughShots: return "NOT_ENOUGH_SHOTS";
    case ErrorCode::DivergenceDetected: return "DIVERGENCE_DETECTED";
    case ErrorCode::MalformedRecord: return "MALFORMED_RECORD";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::FileNotFound: return "FILE_NOT_FOUND";
    case ErrorCode::Io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DivergenceDetected:
    case ErrorCode::NumericalUnderflow:
    case ErrorCode::Io:
      return false;
    default:
      return true;
  }
}

}  // namespace rosprompt
