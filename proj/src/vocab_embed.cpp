#include "rosprompt/vocab_embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "rosprompt/error.hpp"

namespace rosprompt {

namespace {

constexpr char kBinaryMagic[8] = {'R', 'S', 'P', 'E', 'M', 'B', '0', '1'};
constexpr std::uint32_t kMaxSurfaceBytes = 1u << 16;

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

[[noreturn]] void bad_file(const std::filesystem::path& path,
                           const std::string& what) {
  throw Error(ErrorCode::InvalidEmbeddingFile, path.string() + ": " + what);
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> surfaces,
                               std::vector<float> vectors, std::size_t dim)
    : surfaces_(std::move(surfaces)), vectors_(std::move(vectors)), dim_(dim) {
  if (surfaces_.size() < 2) {
    throw Error(ErrorCode::InvalidEmbeddingFile,
                "embedding table needs at least 2 tokens");
  }
  if (dim_ == 0 || vectors_.size() != surfaces_.size() * dim_) {
    throw Error(ErrorCode::InvalidEmbeddingFile,
                "embedding matrix size does not match vocab_size x dim");
  }
  for (const float v : vectors_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidEmbeddingFile,
                  "embedding table contains a non-finite entry");
    }
  }
  norms_.resize(surfaces_.size());
  kernels::row_norms(matrix(), norms_);
  index_.reserve(surfaces_.size());
  for (std::size_t i = 0; i < surfaces_.size(); ++i) {
    if (surfaces_[i].empty()) {
      throw Error(ErrorCode::InvalidEmbeddingFile,
                  "token " + std::to_string(i) + " has an empty surface");
    }
    if (norms_[i] == 0.0) {
      throw Error(ErrorCode::DegenerateEmbedding,
                  "token '" + surfaces_[i] + "' has an all-zero embedding");
    }
    if (!index_.emplace(surfaces_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::InvalidEmbeddingFile,
                  "duplicate surface '" + surfaces_[i] + "'");
    }
  }
}

std::span<const float> EmbeddingTable::row(TokenId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::InvalidArgument,
                "token id " + std::to_string(id) + " out of range");
  }
  return matrix().row(static_cast<std::size_t>(id));
}

const std::string& EmbeddingTable::surface(TokenId id) const {
  if (!contains(id)) {
    throw Error(ErrorCode::InvalidArgument,
                "token id " + std::to_string(id) + " out of range");
  }
  return surfaces_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> EmbeddingTable::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WhitespaceTokenizer::WhitespaceTokenizer(const EmbeddingTable& table,
                                         std::string_view unknown_surface)
    : table_(&table),
      unknown_id_(table.find(unknown_surface).value_or(kUnknownToken)) {}

std::vector<TokenId> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      ids.push_back(table_->find(text.substr(i, j - i)).value_or(unknown_id_));
    }
    i = j;
  }
  return ids;
}

float cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::DegenerateEmbedding,
                "cosine similarity of a zero-norm vector");
  }
  return static_cast<float>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

std::vector<Neighbor> top_k_neighbors(const EmbeddingTable& table,
                                      std::span<const float> anchor,
                                      std::size_t k) {
  const std::size_t n = table.vocab_size();
  if (k < 1 || k > n) {
    throw Error(ErrorCode::InvalidNeighborhood,
                "neighborhood size " + std::to_string(k) +
                    " outside [1, " + std::to_string(n) + "]");
  }
  if (anchor.size() != table.dim()) {
    throw Error(ErrorCode::InvalidArgument, "anchor dimension mismatch");
  }
  std::vector<double> anchor_d(anchor.begin(), anchor.end());
  double anchor_norm = 0.0;
  for (double x : anchor_d) anchor_norm += x * x;
  anchor_norm = std::sqrt(anchor_norm);
  if (anchor_norm == 0.0) {
    throw Error(ErrorCode::DegenerateEmbedding, "zero-norm neighborhood anchor");
  }

  std::vector<float> sims(n);
  kernels::cosine_rows(table.matrix(), table.norms(), anchor_d, anchor_norm, sims);

  std::vector<Neighbor> all(n);
  for (std::size_t i = 0; i < n; ++i) {
    all[i] = {static_cast<TokenId>(i), sims[i]};
  }
  auto order = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end(), order);
  all.resize(k);
  return all;
}

std::vector<float> embed_surface(std::string_view surface,
                                 const EmbeddingTable& table,
                                 const Tokenizer& tokenizer) {
  std::vector<TokenId> ids;
  for (TokenId id : tokenizer.tokenize(surface)) {
    if (id != kUnknownToken && id != tokenizer.unknown_id() && table.contains(id)) {
      ids.push_back(id);
    }
  }
  if (ids.empty()) {
    throw Error(ErrorCode::UnknownSurface,
                "'" + std::string(surface) + "' has no known tokens");
  }
  if (ids.size() == 1) {
    auto r = table.row(ids.front());
    return {r.begin(), r.end()};
  }
  std::vector<double> acc(table.dim(), 0.0);
  for (TokenId id : ids) {
    auto r = table.row(id);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += r[j];
  }
  std::vector<float> mean(table.dim());
  for (std::size_t j = 0; j < acc.size(); ++j) {
    mean[j] = static_cast<float>(acc[j] / static_cast<double>(ids.size()));
  }
  return mean;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_file(path, "cannot open");
  char magic[sizeof(kBinaryMagic)] = {};
  in.read(magic, sizeof(magic));
  const bool binary = in.gcount() == sizeof(magic) &&
                      std::equal(std::begin(magic), std::end(magic), kBinaryMagic);
  in.close();
  return binary ? load_embeddings_binary(path) : load_embeddings_text(path);
}

EmbeddingTable load_embeddings_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad_file(path, "cannot open");
  std::string line;
  if (!std::getline(in, line)) bad_file(path, "missing header line");
  std::size_t vocab = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> vocab >> dim)) bad_file(path, "malformed header line");
  }
  std::vector<std::string> surfaces;
  std::vector<float> vectors;
  surfaces.reserve(vocab);
  vectors.reserve(vocab * dim);
  std::size_t line_no = 1;
  while (surfaces.size() < vocab && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream rec(line);
    std::string surface;
    rec >> surface;
    surfaces.push_back(surface);
    for (std::size_t j = 0; j < dim; ++j) {
      std::string field;
      if (!(rec >> field)) {
        bad_file(path, "line " + std::to_string(line_no) + ": expected " +
                           std::to_string(dim) + " values");
      }
      char* end = nullptr;
      const float v = std::strtof(field.c_str(), &end);
      if (end != field.c_str() + field.size()) {
        bad_file(path, "line " + std::to_string(line_no) + ": bad number '" +
                           field + "'");
      }
      vectors.push_back(v);
    }
    std::string extra;
    if (rec >> extra) {
      bad_file(path, "line " + std::to_string(line_no) + ": trailing fields");
    }
  }
  if (surfaces.size() != vocab) bad_file(path, "fewer records than header states");
  return EmbeddingTable(std::move(surfaces), std::move(vectors), dim);
}

EmbeddingTable load_embeddings_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_file(path, "cannot open");
  std::string magic;
  if (!detail::read_bytes(in, magic, sizeof(kBinaryMagic)) ||
      !std::equal(magic.begin(), magic.end(), kBinaryMagic)) {
    bad_file(path, "bad magic");
  }
  std::uint32_t vocab = 0, dim = 0;
  if (!detail::read_le(in, vocab) || !detail::read_le(in, dim)) {
    bad_file(path, "truncated header");
  }
  std::vector<std::string> surfaces;
  std::vector<float> vectors;
  for (std::uint32_t i = 0; i < vocab; ++i) {
    std::uint32_t len = 0;
    if (!detail::read_le(in, len) || len > kMaxSurfaceBytes) {
      bad_file(path, "bad surface length for token " + std::to_string(i));
    }
    std::string surface;
    if (!detail::read_bytes(in, surface, len)) bad_file(path, "truncated surface");
    surfaces.push_back(std::move(surface));
    for (std::uint32_t j = 0; j < dim; ++j) {
      float v = 0.0f;
      if (!detail::read_le(in, v)) bad_file(path, "truncated vector data");
      vectors.push_back(v);
    }
  }
  return EmbeddingTable(std::move(surfaces), std::move(vectors), dim);
}

void save_embeddings_text(const EmbeddingTable& table,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << table.vocab_size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const std::string& s = table.surface(id);
    if (std::any_of(s.begin(), s.end(), is_space)) {
      throw Error(ErrorCode::InvalidArgument,
                  "surface '" + s + "' contains whitespace; use the binary layout");
    }
    out << s;
    for (float v : table.row(id)) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void save_embeddings_binary(const EmbeddingTable& table,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  detail::write_le(out, static_cast<std::uint32_t>(table.vocab_size()));
  detail::write_le(out, static_cast<std::uint32_t>(table.dim()));
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const std::string& s = table.surface(id);
    detail::write_le(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    for (float v : table.row(id)) detail::write_le(out, v);
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace rosprompt
