#pragma once

// Pretraining for the toy language model. A randomly initialised model
// ignores any embedding prefix, so before it is frozen it is trained jointly
// with a throwaway prefix encoder: each sentence's own token embeddings are
// squeezed into num_latent rows and placed where mapped video embeddings go
// in a narration prompt. The model thereby learns to decode text from a
// latent prefix, which is the ability the visual mapper later relies on.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adgen/language_model.hpp"

namespace adgen {

struct PretrainOptions {
  std::size_t steps = 1500;
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  double warmup_fraction = 0.05;
  // Rows of the encoded prefix; should match the narrator's num_latent.
  std::size_t prefix_latents = 6;
  // Chance that a prompt also lists characters / carries context ADs.
  double character_probability = 0.3;
  double context_probability = 0.2;
  std::uint64_t seed = 0;
};

struct PretrainLogRecord {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double nll_per_token = 0.0;
};

// Names offered as distractor characters, as (name, actor) pairs.
struct PretrainCast {
  std::string name;
  std::string actor;
};

ToyLM pretrain_lm(const LMProfile& profile, std::span<const std::string> corpus,
                  std::span<const PretrainCast> cast, const PretrainOptions& options,
                  const std::function<void(const PretrainLogRecord&)>& on_step = {});

}  // namespace adgen
