#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rosprompt {

enum class ErrorCode {
  DegenerateEmbedding,
  InvalidNeighborhood,
  UnknownSurface,
  InvalidEmbeddingFile,
  InvalidLabelToken,
  AmbiguousVerbalizer,
  EmptyVerbalizer,
  InvalidVerbalizer,
  DegenerateSmoothing,
  UnknownClass,
  NumericalUnderflow,
  PenaltyUndefined,
  InputTooLong,
  InvalidCheckpoint,
  IncompatiblePrompt,
  PromptNotFound,
  InvalidConfig,
  NotEnoughShots,
  DivergenceDetected,
  MalformedRecord,
  DuplicateId,
  InvalidArgument,
  FileNotFound,
  Io,
};

// Stable upper-snake identifier used in machine-readable error output.
std::string_view code_name(ErrorCode code) noexcept;

// Validation errors are caused by inputs (files, configs, arguments); the
// rest are failures that happen while running an otherwise valid job.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rosprompt
