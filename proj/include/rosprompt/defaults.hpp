#pragma once

#include <cstddef>
#include <string_view>

#include "rosprompt/model_adapter.hpp"
#include "rosprompt/trainer.hpp"

// Bundled hyperparameter and neighborhood-number tables. The reference models
// are keyed by architecture: decoder-only = XGLM-564M, encoder-only =
// XLM-RoBERTa-large, encoder-decoder = mT0-base.
namespace rosprompt::defaults {

enum class Method { RoSPrompt, NPPrompt, SPT };
enum class Dataset { SIB200, MTOP, MLSUM };

Method parse_method(std::string_view name);
Dataset parse_dataset(std::string_view name);
std::string_view method_name(Method m) noexcept;
std::string_view dataset_name(Dataset d) noexcept;
std::string_view reference_model(BackendKind kind) noexcept;

inline constexpr std::string_view kInitText = "In this sentence, the topic is about";
inline constexpr std::size_t kPromptSeedCount = 4;

// Batch size, learning rate, epochs, alpha, epsilon and prompt length for the
// given architecture; optimizer settings at their AdamW defaults.
TrainConfig train_config(BackendKind kind);

std::size_t neighborhood_number(Method method, Dataset dataset, BackendKind kind) noexcept;

}  // namespace rosprompt::defaults
