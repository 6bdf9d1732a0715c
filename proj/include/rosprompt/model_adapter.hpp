#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rosprompt/vocab_embed.hpp"

namespace rosprompt {

enum class BackendKind { EncoderOnly, DecoderOnly, EncoderDecoder };

std::string_view kind_name(BackendKind kind) noexcept;
// Accepts "encoder-only", "decoder-only", "encoder-decoder".
BackendKind parse_backend_kind(std::string_view name);

struct BackendDescriptor {
  BackendKind kind = BackendKind::DecoderOnly;
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::size_t max_length = 512;
};

// Trainable prompt: length() rows of dim float32 values, row-major.
struct SoftPrompt {
  std::size_t dim = 0;
  std::vector<float> values;
  std::string init_source = "random";
  std::uint64_t trained_steps = 0;

  std::size_t length() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
  std::span<float> row(std::size_t i) {
    return std::span<float>(values).subspan(i * dim, dim);
  }
  // Throws IncompatiblePrompt unless length >= 1, entries are finite and the
  // dimension matches `expected_dim`.
  void validate(std::size_t expected_dim) const;
};

// Where the backend reads its prediction. The prompt always trails the input;
// the mask slot (encoder-only) or the next-token position (decoder-only and
// encoder-decoder) immediately follows the prompt.
enum class ScoringPosition { MaskSlot, NextToken };

ScoringPosition default_position(BackendKind kind) noexcept;

struct ScoringRequest {
  std::span<const TokenId> input;
  const SoftPrompt& prompt;
  ScoringPosition position = ScoringPosition::NextToken;
};

struct LogitVector {
  std::vector<double> logits;
};

// Gradient with respect to the prompt, same layout as SoftPrompt::values.
struct PromptGradient {
  std::size_t dim = 0;
  std::vector<double> values;
};

// Contract between the training/inference code and a frozen language model.
// Implementations never modify their own parameters; score, grad_prompt and
// tokenize must be deterministic and callable concurrently.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const noexcept = 0;
  virtual const EmbeddingTable& embeddings() const noexcept = 0;
  virtual const Tokenizer& tokenizer() const noexcept = 0;

  // Throws InputTooLong when input + prompt + scoring slot exceed max_length.
  virtual LogitVector score(const ScoringRequest& request) const = 0;

  // Exact gradient of (upstream . logits) with respect to the prompt.
  virtual PromptGradient grad_prompt(const ScoringRequest& request,
                                     std::span<const double> upstream) const = 0;

  // Hash over every frozen parameter; used to assert the model stays frozen.
  virtual std::uint64_t parameter_fingerprint() const = 0;

  std::vector<TokenId> tokenize(std::string_view text) const {
    return tokenizer().tokenize(text);
  }
};

// Deterministic reference backend:
//   h = (sum_i emb(x_i) + sum_j P_j) / (|x| + m),   z = E h
// with the output head tied to the embedding table E and a whitespace
// tokenizer. Input positions holding kUnknownToken are skipped (they add
// nothing to the sum or the count).
class ToyBackend final : public Backend {
 public:
  ToyBackend(std::shared_ptr<const EmbeddingTable> table,
             BackendKind kind = BackendKind::DecoderOnly,
             std::size_t max_length = 512);

  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }
  const EmbeddingTable& embeddings() const noexcept override { return *table_; }
  const Tokenizer& tokenizer() const noexcept override { return tokenizer_; }

  LogitVector score(const ScoringRequest& request) const override;
  PromptGradient grad_prompt(const ScoringRequest& request,
                             std::span<const double> upstream) const override;
  std::uint64_t parameter_fingerprint() const override;

  // The pooled hidden state h for a request.
  std::vector<double> hidden(const ScoringRequest& request) const;

 private:
  std::size_t effective_length(const ScoringRequest& request) const;

  std::shared_ptr<const EmbeddingTable> table_;
  BackendDescriptor descriptor_;
  WhitespaceTokenizer tokenizer_;
};

// Checkpoint layout (little-endian): magic "RSPPRMPT", u32 format version (1),
// u32 length m, u32 dim d, u32 byte length + UTF-8 init_source,
// u64 trained_steps, then m*d float32 values row-major. Nothing may follow.
inline constexpr std::uint32_t kPromptFormatVersion = 1;

void save_prompt(const SoftPrompt& prompt, const std::filesystem::path& path);

// Throws PromptNotFound (missing file), InvalidCheckpoint (corrupt or
// truncated) or IncompatiblePrompt (dim differs from the backend).
SoftPrompt load_prompt(const std::filesystem::path& path, const Backend& backend);
SoftPrompt load_prompt(const std::filesystem::path& path, std::size_t expected_dim);

}  // namespace rosprompt
