#include "rosprompt/model_adapter.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "rosprompt/error.hpp"
#include "rosprompt/rng.hpp"

namespace rosprompt {

namespace {

constexpr char kPromptMagic[8] = {'R', 'S', 'P', 'P', 'R', 'M', 'P', 'T'};
constexpr std::uint32_t kMaxInitSourceBytes = 1u << 20;

[[noreturn]] void bad_checkpoint(const std::filesystem::path& path,
                                 const std::string& what) {
  throw Error(ErrorCode::InvalidCheckpoint, path.string() + ": " + what);
}

}  // namespace

std::string_view kind_name(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::EncoderOnly: return "encoder-only";
    case BackendKind::DecoderOnly: return "decoder-only";
    case BackendKind::EncoderDecoder: return "encoder-decoder";
  }
  return "unknown";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "encoder-only") return BackendKind::EncoderOnly;
  if (name == "decoder-only") return BackendKind::DecoderOnly;
  if (name == "encoder-decoder") return BackendKind::EncoderDecoder;
  throw Error(ErrorCode::InvalidConfig,
              "unknown backend kind '" + std::string(name) + "'");
}

ScoringPosition default_position(BackendKind kind) noexcept {
  return kind == BackendKind::EncoderOnly ? ScoringPosition::MaskSlot
                                          : ScoringPosition::NextToken;
}

void SoftPrompt::validate(std::size_t expected_dim) const {
  if (dim != expected_dim) {
    throw Error(ErrorCode::IncompatiblePrompt,
                "prompt dim " + std::to_string(dim) + " does not match backend dim " +
                    std::to_string(expected_dim));
  }
  if (dim == 0 || values.empty() || values.size() % dim != 0) {
    throw Error(ErrorCode::IncompatiblePrompt, "prompt needs at least one full row");
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::IncompatiblePrompt, "prompt has a non-finite entry");
    }
  }
}

ToyBackend::ToyBackend(std::shared_ptr<const EmbeddingTable> table,
                       BackendKind kind, std::size_t max_length)
    : table_(std::move(table)),
      descriptor_{kind, table_->vocab_size(), table_->dim(), max_length},
      tokenizer_(*table_) {}

std::size_t ToyBackend::effective_length(const ScoringRequest& request) const {
  if (request.input.empty()) {
    throw Error(ErrorCode::InvalidArgument, "scoring request has no input tokens");
  }
  request.prompt.validate(descriptor_.dim);
  const std::size_t total = request.input.size() + request.prompt.length() + 1;
  if (total > descriptor_.max_length) {
    throw Error(ErrorCode::InputTooLong,
                "sequence of " + std::to_string(total) + " exceeds max length " +
                    std::to_string(descriptor_.max_length));
  }
  std::size_t known = 0;
  for (TokenId id : request.input) {
    if (id == kUnknownToken) continue;
    if (!table_->contains(id)) {
      throw Error(ErrorCode::InvalidArgument,
                  "input token id " + std::to_string(id) + " out of range");
    }
    ++known;
  }
  return known + request.prompt.length();
}

std::vector<double> ToyBackend::hidden(const ScoringRequest& request) const {
  const std::size_t count = effective_length(request);
  const std::size_t d = descriptor_.dim;
  std::vector<double> h(d, 0.0);
  for (TokenId id : request.input) {
    if (id == kUnknownToken) continue;
    auto r = table_->row(id);
    for (std::size_t j = 0; j < d; ++j) h[j] += r[j];
  }
  for (std::size_t i = 0; i < request.prompt.length(); ++i) {
    auto r = request.prompt.row(i);
    for (std::size_t j = 0; j < d; ++j) h[j] += r[j];
  }
  for (double& x : h) x /= static_cast<double>(count);
  return h;
}

LogitVector ToyBackend::score(const ScoringRequest& request) const {
  const auto h = hidden(request);
  LogitVector out;
  out.logits.resize(descriptor_.vocab_size);
  kernels::matvec(table_->matrix(), h, out.logits);
  return out;
}

PromptGradient ToyBackend::grad_prompt(const ScoringRequest& request,
                                       std::span<const double> upstream) const {
  if (upstream.size() != descriptor_.vocab_size) {
    throw Error(ErrorCode::InvalidArgument, "upstream gradient has wrong size");
  }
  const std::size_t count = effective_length(request);
  const std::size_t d = descriptor_.dim;
  std::vector<double> gh(d);
  kernels::matvec_transposed(table_->matrix(), upstream, gh);
  for (double& x : gh) x /= static_cast<double>(count);

  PromptGradient g;
  g.dim = d;
  g.values.resize(request.prompt.values.size());
  for (std::size_t i = 0; i < request.prompt.length(); ++i) {
    std::copy(gh.begin(), gh.end(), g.values.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return g;
}

std::uint64_t ToyBackend::parameter_fingerprint() const {
  const auto data = table_->data();
  std::string_view bytes(reinterpret_cast<const char*>(data.data()),
                         data.size() * sizeof(float));
  std::uint64_t h = fnv1a64(bytes);
  for (std::size_t i = 0; i < table_->vocab_size(); ++i) {
    h = splitmix64(h ^ fnv1a64(table_->surface(static_cast<TokenId>(i))));
  }
  return splitmix64(h ^ static_cast<std::uint64_t>(descriptor_.kind));
}

void save_prompt(const SoftPrompt& prompt, const std::filesystem::path& path) {
  prompt.validate(prompt.dim);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kPromptMagic, sizeof(kPromptMagic));
  detail::write_le(out, kPromptFormatVersion);
  detail::write_le(out, static_cast<std::uint32_t>(prompt.length()));
  detail::write_le(out, static_cast<std::uint32_t>(prompt.dim));
  detail::write_le(out, static_cast<std::uint32_t>(prompt.init_source.size()));
  out.write(prompt.init_source.data(),
            static_cast<std::streamsize>(prompt.init_source.size()));
  detail::write_le(out, prompt.trained_steps);
  for (float v : prompt.values) detail::write_le(out, v);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

SoftPrompt load_prompt(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::PromptNotFound, "prompt checkpoint not found: " + path.string());
  }
  std::string magic;
  if (!detail::read_bytes(in, magic, sizeof(kPromptMagic)) ||
      std::memcmp(magic.data(), kPromptMagic, sizeof(kPromptMagic)) != 0) {
    bad_checkpoint(path, "bad magic");
  }
  std::uint32_t version = 0, rows = 0, dim = 0, src_len = 0;
  if (!detail::read_le(in, version) || !detail::read_le(in, rows) ||
      !detail::read_le(in, dim) || !detail::read_le(in, src_len)) {
    bad_checkpoint(path, "truncated header");
  }
  if (version != kPromptFormatVersion) {
    bad_checkpoint(path, "unsupported format version " + std::to_string(version));
  }
  if (rows == 0 || dim == 0 || src_len > kMaxInitSourceBytes) {
    bad_checkpoint(path, "implausible header values");
  }
  SoftPrompt p;
  if (!detail::read_bytes(in, p.init_source, src_len)) {
    bad_checkpoint(path, "truncated init source");
  }
  if (!detail::read_le(in, p.trained_steps)) bad_checkpoint(path, "truncated header");
  if (dim != expected_dim) {
    throw Error(ErrorCode::IncompatiblePrompt,
                path.string() + ": prompt dim " + std::to_string(dim) +
                    " does not match backend dim " + std::to_string(expected_dim));
  }
  p.dim = dim;
  p.values.resize(static_cast<std::size_t>(rows) * dim);
  for (float& v : p.values) {
    if (!detail::read_le(in, v)) bad_checkpoint(path, "truncated prompt values");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    bad_checkpoint(path, "trailing bytes after prompt values");
  }
  for (float v : p.values) {
    if (!std::isfinite(v)) bad_checkpoint(path, "non-finite prompt value");
  }
  return p;
}

SoftPrompt load_prompt(const std::filesystem::path& path, const Backend& backend) {
  return load_prompt(path, backend.descriptor().dim);
}

}  // namespace rosprompt
