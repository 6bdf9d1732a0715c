#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rosprompt/corpus.hpp"
#include "rosprompt/error.hpp"
#include "rosprompt/model_adapter.hpp"
#include "rosprompt/objective.hpp"
#include "rosprompt/verbalizer.hpp"

namespace rosprompt {

// AdamW with decoupled weight decay.
struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  LossConfig loss;
  // Only used for random initialization; a text-initialized prompt takes the
  // token count of its text.
  std::size_t prompt_length = 8;
  std::size_t shots_per_class = 8;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  // Empty selects a random N(0, 0.5^2) initialization of prompt_length rows.
  std::string init_text = "In this sentence, the topic is about";
  // 0 disables each of these.
  double max_grad_norm = 0.0;
  std::size_t max_steps = 0;

  void validate() const;
};

struct FewShotSample {
  std::string id;
  std::string text;
  std::string label;
  std::string language;
};

// Prompt rows are the embedding rows of the tokenized text, in order; unknown
// pieces are dropped. Throws UnknownSurface if nothing remains.
SoftPrompt init_prompt_from_text(std::string_view text, const Backend& backend);

SoftPrompt random_prompt(std::size_t length, std::size_t dim, std::uint64_t seed,
                         double scale = 0.5);

// Exactly `shots` examples per class drawn without replacement, deterministic
// per seed, returned in a seeded shuffled order. `classes` restricts the
// classes sampled (corpus catalog when empty). Throws NotEnoughShots.
std::vector<FewShotSample> sample_few_shot(const LabeledCorpus& corpus,
                                           std::size_t shots, std::uint64_t seed,
                                           std::span<const std::string> classes = {});

struct StepRecord {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;
  double ce = 0.0;
  double omega = 0.0;
  double total = 0.0;
};

struct TrainResult {
  SoftPrompt prompt;
  std::vector<StepRecord> log;
};

// Called with every batch before it is used.
using BatchObserver =
    std::function<void(std::size_t step, std::span<const FewShotSample* const> batch)>;

// Raised when a step produces a non-finite loss or gradient; carries the
// prompt as it was before that step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, SoftPrompt last_good)
      : Error(ErrorCode::DivergenceDetected, message), last_good_(std::move(last_good)) {}
  const SoftPrompt& last_good() const noexcept { return last_good_; }

 private:
  SoftPrompt last_good_;
};

// Optimizes only the prompt under the batch-mean objective for
// epochs * ceil(N / batch_size) steps (capped by max_steps). Sample order is
// reshuffled every epoch from the config seed.
TrainResult train(const TrainConfig& config, std::span<const FewShotSample> samples,
                  const TrainingVerbalizer& verbalizer, const Backend& backend,
                  const SoftPrompt& initial, const BatchObserver& observer = {});

// As above, initializing from config.init_text (or randomly when empty).
TrainResult train(const TrainConfig& config, std::span<const FewShotSample> samples,
                  const TrainingVerbalizer& verbalizer, const Backend& backend,
                  const BatchObserver& observer = {});

// One JSON object per line: {"step", "ce", "omega", "total"}.
void write_training_log(std::span<const StepRecord> log,
                        const std::filesystem::path& path);

}  // namespace rosprompt
