#pragma once

// Narrator objective and training loop. Only the visual mapper is
// optimised; the language model and the character refiner stay frozen.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/char_refine.hpp"
#include "adgen/data_model.hpp"
#include "adgen/language_model.hpp"
#include "adgen/prompt.hpp"
#include "adgen/visual_mapper.hpp"

namespace adgen {

struct TrainingConfig {
  std::size_t batch_size = 96;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  double warmup_fraction = 0.1;
  std::size_t context_depth = 0;  // K past clips
  bool use_context_ads = false;
  bool use_contrastive = true;
  bool oracle_characters = false;
  double weight_decay = 0.01;
  // Caps the total number of optimizer steps when non-zero.
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossBreakdown {
  double autoregressive = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

// −Σ log P(target_n | prompt, target_<n).
ag::Tensor autoregressive_loss(const ToyLM& lm, const PromptSequence& prompt,
                               std::span<const int> targets);
// Mean teacher-forced log-probability over the tokens of `text` (no EOS).
ag::Tensor sequence_score(const ToyLM& lm, const PromptSequence& prompt, const std::string& text);
double contrastive_loss(double s_last, double s_current);

// Everything one narration prompt is built from, before mapping.
struct NarrationContext {
  std::vector<Matrix> past_clips;       // oldest first
  Matrix current;
  std::vector<CharacterEntry> characters;
  std::vector<std::string> context_ads; // oldest first
};

// The clips preceding `clip_id` in `movie` (at most `depth`, oldest first).
std::vector<Matrix> past_clip_features(const Movie& movie, const std::string& clip_id,
                                       std::size_t depth);

// Characters conditioning an AD: annotation-derived when `refiner` is null,
// otherwise the refiner's selection for the AD's clip.
std::vector<CharacterEntry> select_characters(const MovieDataset& dataset, const Movie& movie,
                                              const ADRecord& ad, const CharacterRefiner* refiner);

// Context for the AD at `ad_index`: its clip, up to `depth` preceding
// clips, its characters and, with `with_context_ads`, the non-empty texts of
// up to `depth` preceding reference ADs.
NarrationContext narration_context(const MovieDataset& dataset, const Movie& movie, std::size_t ad_index,
                                   std::size_t depth, bool with_context_ads, const CharacterRefiner* refiner);

// Maps the context and builds the prompt. Context ADs are dropped (oldest
// first) while prompt plus `reserve` tokens exceeds the context limit; past
// clips are dropped (oldest first) while the frame total exceeds the
// mapper's max_frames. The current clip is never dropped.
PromptSequence assemble_prompt(const VisualMapper& mapper, const ToyLM& lm, NarrationContext context,
                               std::size_t reserve);

// Loss terms for one AD; `previous` is empty for the first AD of a movie.
struct ExampleLoss {
  ag::Tensor autoregressive;
  ag::Tensor contrastive;  // 1×1, zero without a predecessor
  ag::Tensor total;
};
ExampleLoss example_loss(const ToyLM& lm, const PromptSequence& prompt, const std::string& target,
                         const std::string& previous, bool use_contrastive);

struct TrainingLogRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  LossBreakdown loss;
  double wall_time = 0.0;
};

struct TrainingHooks {
  std::function<void(const TrainingLogRecord&)> on_step;
  std::function<void(std::size_t epoch, const VisualMapper&, std::size_t step)> on_epoch;
};

// `refiner` may be null only with config.oracle_characters.
void train_narrator(VisualMapper& mapper, const ToyLM& lm, const MovieDataset& dataset,
                    const CharacterRefiner* refiner, const TrainingConfig& config,
                    const TrainingHooks& hooks = {});

// Mean per-AD autoregressive loss over the dataset without updating.
LossBreakdown evaluate_losses(const VisualMapper& mapper, const ToyLM& lm,
                              const MovieDataset& dataset, const CharacterRefiner* refiner,
                              const TrainingConfig& config);

}  // namespace adgen
