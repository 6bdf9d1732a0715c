#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rosprompt/kernels.hpp"

namespace rosprompt {

using TokenId = std::int32_t;

// Returned by tokenizers for pieces that have no vocabulary entry.
inline constexpr TokenId kUnknownToken = -1;

struct Token {
  TokenId id = 0;
  std::string surface;
};

// Token vocabulary paired with a |V| x d float32 embedding matrix.
//
// Invariants (checked on construction): |V| >= 2, d >= 1, surfaces are
// non-empty and unique, every entry is finite, and no row is all zeros.
// The table is immutable and safe for concurrent readers.
class EmbeddingTable {
 public:
  EmbeddingTable(std::vector<std::string> surfaces, std::vector<float> vectors,
                 std::size_t dim);

  std::size_t vocab_size() const noexcept { return surfaces_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> row(TokenId id) const;
  const std::string& surface(TokenId id) const;
  Token token(TokenId id) const { return {id, surface(id)}; }
  std::optional<TokenId> find(std::string_view surface) const;
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < surfaces_.size();
  }

  kernels::MatrixView matrix() const noexcept {
    return {vectors_, surfaces_.size(), dim_};
  }
  std::span<const float> data() const noexcept { return vectors_; }
  // Precomputed Euclidean norm of every row.
  std::span<const double> norms() const noexcept { return norms_; }

 private:
  std::vector<std::string> surfaces_;
  std::vector<float> vectors_;
  std::size_t dim_;
  std::vector<double> norms_;
  std::unordered_map<std::string, TokenId> index_;
};

// Segments text into token ids. Implementations must be deterministic and
// safe to call concurrently.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  // Id produced for out-of-vocabulary pieces; kUnknownToken when the
  // vocabulary carries no dedicated unknown entry.
  virtual TokenId unknown_id() const noexcept = 0;
};

// Splits on ASCII whitespace and looks each piece up verbatim. Pieces that are
// not in the table map to the id of `unknown_surface` when the table has it,
// and to kUnknownToken otherwise.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  explicit WhitespaceTokenizer(const EmbeddingTable& table,
                               std::string_view unknown_surface = "<unk>");
  std::vector<TokenId> tokenize(std::string_view text) const override;
  TokenId unknown_id() const noexcept override { return unknown_id_; }

 private:
  const EmbeddingTable* table_;
  TokenId unknown_id_;
};

// a.b / (|a||b|), accumulated in double and rounded to float32.
// Throws DegenerateEmbedding for a zero-norm input.
float cosine_similarity(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  TokenId id = 0;
  float similarity = 0.0f;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// The k tokens most cosine-similar to `anchor`, descending by similarity with
// ties broken by ascending id. Throws InvalidNeighborhood unless 1 <= k <= |V|.
std::vector<Neighbor> top_k_neighbors(const EmbeddingTable& table,
                                      std::span<const float> anchor,
                                      std::size_t k);

// Embedding of a possibly multi-token surface: the row of its single token,
// or the arithmetic mean of the rows of its known tokens. Unknown pieces are
// ignored; if none remain, throws UnknownSurface.
std::vector<float> embed_surface(std::string_view surface,
                                 const EmbeddingTable& table,
                                 const Tokenizer& tokenizer);

// Embedding files.
//
// Text layout: first line "<vocab_size> <dim>", then one line per token:
// the surface followed by dim floats printed with 9 significant digits
// (which round-trips float32 exactly). Surfaces may not contain whitespace.
//
// Binary layout (little-endian): magic "RSPEMB01", u32 vocab_size, u32 dim,
// then per token: u32 byte length, surface bytes, dim float32 values.
//
// load_embeddings detects the layout from the magic.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable load_embeddings_text(const std::filesystem::path& path);
EmbeddingTable load_embeddings_binary(const std::filesystem::path& path);
void save_embeddings_text(const EmbeddingTable& table,
                          const std::filesystem::path& path);
void save_embeddings_binary(const EmbeddingTable& table,
                            const std::filesystem::path& path);

}  // namespace rosprompt
