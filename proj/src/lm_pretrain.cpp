#include "adgen/lm_pretrain.hpp"

#include <cmath>

#include "adgen/optim.hpp"
#include "adgen/prompt.hpp"
#include "adgen/visual_mapper.hpp"

namespace adgen {

ToyLM pretrain_lm(const LMProfile& profile, std::span<const std::string> corpus,
                  std::span<const PretrainCast> cast, const PretrainOptions& options,
                  const std::function<void(const PretrainLogRecord&)>& on_step) {
  ToyLM lm(profile);
  if (corpus.empty() || options.steps == 0) return lm;
  lm.mutable_params().set_requires_grad(true);

  MapperConfig ec = MapperConfig::toy_profile(profile.d_lm);
  ec.channel = profile.d_lm;
  ec.num_latent = options.prefix_latents;
  ec.share_networks = true;
  ec.seed = options.seed ^ 0x5eedULL;
  ec.validate();
  VisualMapper encoder(ec);

  const AdamWOptions adam{0.9, 0.999, 1e-8, 0.0};
  AdamW lm_opt(lm.mutable_params(), adam);
  AdamW enc_opt(encoder.params(), adam);
  Rng rng(options.seed);
  const auto encode = [&](const std::string& text) {
    return encoder.map(lm.token_embeddings(tokenize(text)), Network::Video);
  };

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t step = 0; step < options.steps; ++step) {
    lm.mutable_params().zero_grad();
    encoder.params().zero_grad();
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::string& text = corpus[rng.below(corpus.size())];
      std::vector<PromptCharacter> characters;
      if (!cast.empty() && rng.uniform() < options.character_probability) {
        const std::size_t n = 1 + rng.below(std::min<std::size_t>(3, cast.size()));
        for (std::size_t c = 0; c < n; ++c) {
          const PretrainCast& pc = cast[rng.below(cast.size())];
          characters.push_back({pc.name, pc.actor, encode(pc.name)});
        }
      }
      std::vector<std::string> context;
      if (rng.uniform() < options.context_probability) {
        context.push_back(corpus[rng.below(corpus.size())]);
      }
      std::vector<int> targets = tokenize(text);
      targets.push_back(profile.eos_id);
      const PromptSequence prompt = build_prompt(characters, encode(text), context);
      const ag::Tensor total = ag::sum(sequence_logprob_graph(lm, prompt, targets));
      if (!std::isfinite(total.item())) {
        throw NumericError("lm pretraining: non-finite loss at step " + std::to_string(step));
      }
      ag::backward(ag::scale(total, -1.0 / static_cast<double>(batch)));
      nll -= total.item();
      tokens += targets.size();
    }
    const double lr = learning_rate_at(step, options.steps, options.learning_rate,
                                       options.warmup_fraction);
    lm_opt.step(lr);
    enc_opt.step(lr);
    if (on_step) on_step({step, lr, nll / static_cast<double>(tokens)});
  }
  lm.mutable_params().set_requires_grad(false);
  lm.mutable_params().zero_grad();
  return lm;
}

}  // namespace adgen
