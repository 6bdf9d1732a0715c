#include "rosprompt/defaults.hpp"

#include <string>

#include "rosprompt/error.hpp"

namespace rosprompt::defaults {

namespace {

struct Hyper {
  double learning_rate;
  double alpha;
  double epsilon;
  std::size_t prompt_length;
};

// Columns: decoder-only, encoder-only, encoder-decoder.
constexpr Hyper kHyper[3] = {
    {0.01, 100.0, 0.2, 8},
    {0.01, 10.0, 0.1, 8},
    {0.3, 200.0, 0.8, 9},
};

// [method][dataset][kind]
constexpr std::size_t kNeighborhood[3][3][3] = {
    // RoSPrompt
    {{3, 4, 14}, {4, 2, 8}, {300, 5, 7}},
    // NPPrompt
    {{4, 3, 6}, {3, 2, 5}, {5, 4, 6}},
    // SPT
    {{2, 17, 5}, {100, 7, 12}, {200, 16, 7}},
};

constexpr std::size_t column(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::DecoderOnly: return 0;
    case BackendKind::EncoderOnly: return 1;
    case BackendKind::EncoderDecoder: return 2;
  }
  return 0;
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "rosprompt") return Method::RoSPrompt;
  if (name == "npprompt") return Method::NPPrompt;
  if (name == "spt") return Method::SPT;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

Dataset parse_dataset(std::string_view name) {
  if (name == "sib200") return Dataset::SIB200;
  if (name == "mtop") return Dataset::MTOP;
  if (name == "mlsum") return Dataset::MLSUM;
  throw Error(ErrorCode::InvalidConfig, "unknown dataset tag '" + std::string(name) + "'");
}

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::RoSPrompt: return "rosprompt";
    case Method::NPPrompt: return "npprompt";
    case Method::SPT: return "spt";
  }
  return "unknown";
}

std::string_view dataset_name(Dataset d) noexcept {
  switch (d) {
    case Dataset::SIB200: return "sib200";
    case Dataset::MTOP: return "mtop";
    case Dataset::MLSUM: return "mlsum";
  }
  return "unknown";
}

std::string_view reference_model(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::DecoderOnly: return "XGLM-564M";
    case BackendKind::EncoderOnly: return "XLM-RoBERTa-large";
    case BackendKind::EncoderDecoder: return "mT0-base";
  }
  return "unknown";
}

TrainConfig train_config(BackendKind kind) {
  const Hyper& h = kHyper[column(kind)];
  TrainConfig c;
  c.batch_size = 8;
  c.learning_rate = h.learning_rate;
  c.epochs = 10;
  c.loss.alpha = h.alpha;
  c.loss.epsilon = h.epsilon;
  c.prompt_length = h.prompt_length;
  c.shots_per_class = 8;
  c.init_text = std::string(kInitText);
  return c;
}

std::size_t neighborhood_number(Method method, Dataset dataset, BackendKind kind) noexcept {
  return kNeighborhood[static_cast<int>(method)][static_cast<int>(dataset)][column(kind)];
}

}  // namespace rosprompt::defaults
