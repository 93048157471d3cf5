#include "adgen/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "adgen/errors.hpp"
#include "adgen/optim.hpp"

namespace adgen {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("training: learning_rate must be positive");
  if (batch_size == 0) throw ValidationError("training: batch_size must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ValidationError("training: warmup fraction must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ValidationError("training: weight decay must be non-negative");
}

ag::Tensor autoregressive_loss(const ToyLM& lm, const PromptSequence& prompt,
                               std::span<const int> targets) {
  if (targets.empty()) throw ValidationError("autoregressive loss: empty target");
  return ag::scale(ag::sum(sequence_logprob_graph(lm, prompt, targets)), -1.0);
}

ag::Tensor sequence_score(const ToyLM& lm, const PromptSequence& prompt, const std::string& text) {
  if (text.empty()) throw ValidationError("sequence score: empty text");
  const std::vector<int> ids = tokenize(text);
  return ag::mean(sequence_logprob_graph(lm, prompt, ids));
}

double contrastive_loss(double s_last, double s_current) { return std::max(0.0, s_last - s_current); }

std::vector<Matrix> past_clip_features(const Movie& movie, const std::string& clip_id,
                                       std::size_t depth) {
  std::size_t pos = movie.clips.size();
  for (std::size_t i = 0; i < movie.clips.size(); ++i) {
    if (movie.clips[i].clip_id == clip_id) pos = i;
  }
  if (pos == movie.clips.size()) throw ValidationError("unknown clip '" + clip_id + "'");
  std::vector<Matrix> out;
  for (std::size_t i = pos - std::min(pos, depth); i < pos; ++i) out.push_back(movie.clips[i].features);
  return out;
}

std::vector<CharacterEntry> select_characters(const MovieDataset& dataset, const Movie& movie,
                                              const ADRecord& ad, const CharacterRefiner* refiner) {
  if (movie.bank.entries.empty()) return {};
  std::vector<CharacterEntry> chosen;
  if (refiner) {
    chosen = refiner->refine(movie.bank, movie.clip(ad.clip_id));
  } else {
    const auto labels = derive_refinement_labels(ad, movie.bank, dataset.aliases);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].ad_related) chosen.push_back(movie.bank.entries[i]);
    }
  }
  for (const auto& c : chosen) {
    if (!c.exemplar) {
      throw ValidationError("character '" + c.character_name + "' in movie '" + movie.bank.movie_id +
                            "' has no exemplar");
    }
  }
  return chosen;
}

NarrationContext narration_context(const MovieDataset& dataset, const Movie& movie, std::size_t ad_index,
                                   std::size_t depth, bool with_context_ads, const CharacterRefiner* refiner) {
  const ADRecord& ad = movie.ads.at(ad_index);
  NarrationContext c;
  c.current = movie.clip(ad.clip_id).features;
  c.past_clips = past_clip_features(movie, ad.clip_id, depth);
  c.characters = select_characters(dataset, movie, ad, refiner);
  if (with_context_ads) {
    for (std::size_t j = ad_index - std::min(ad_index, depth); j < ad_index; ++j) {
      if (!movie.ads[j].text.empty()) c.context_ads.push_back(movie.ads[j].text);
    }
  }
  return c;
}

namespace {

PromptSequence build_from(const VisualMapper& mapper, const NarrationContext& c, bool placeholder) {
  const std::size_t m = mapper.config().num_latent;
  const auto dummy = [&] { return ag::Tensor::constant(Matrix(m, mapper.config().channel)); };
  std::vector<PromptCharacter> characters;
  for (const auto& e : c.characters) {
    characters.push_back({e.character_name, e.actor_name,
                          placeholder ? dummy()
                                      : mapper.map(ag::Tensor::constant(Matrix::row_vector(*e.exemplar)),
                                                   Network::Image)});
  }
  const MappedEmbeddings video = placeholder ? dummy() : mapper.map_with_context(c.past_clips, c.current);
  return build_prompt(characters, video, c.context_ads);
}

}  // namespace

PromptSequence assemble_prompt(const VisualMapper& mapper, const ToyLM& lm, NarrationContext c,
                               std::size_t reserve) {
  const std::size_t limit = lm.profile().context_limit;
  while (prompt_length(build_from(mapper, c, true)) + reserve > limit && !c.context_ads.empty()) {
    c.context_ads.erase(c.context_ads.begin());
  }
  const auto frames = [&] {
    std::size_t f = c.current.rows();
    for (const auto& p : c.past_clips) f += p.rows();
    return f;
  };
  while (frames() > mapper.config().max_frames && !c.past_clips.empty()) {
    c.past_clips.erase(c.past_clips.begin());
  }
  if (prompt_length(build_from(mapper, c, true)) + reserve > limit) {
    throw ContextOverflowError("prompt does not fit the context limit of " + std::to_string(limit));
  }
  return build_from(mapper, c, false);
}

ExampleLoss example_loss(const ToyLM& lm, const PromptSequence& prompt, const std::string& target,
                         const std::string& previous, bool use_contrastive) {
  if (target.empty()) throw ValidationError("training: empty AD text");
  std::vector<int> ids = tokenize(target);
  const std::size_t n = ids.size();
  ids.push_back(lm.profile().eos_id);
  const ag::Tensor lp = sequence_logprob_graph(lm, prompt, ids);
  ExampleLoss out;
  out.autoregressive = ag::scale(ag::sum(lp), -1.0);
  if (use_contrastive && !previous.empty()) {
    const ag::Tensor s_current = ag::mean(ag::slice_rows(lp, 0, n));
    const ag::Tensor s_last = sequence_score(lm, prompt, previous);
    out.contrastive = ag::hinge(ag::sub(s_last, s_current));
  } else {
    out.contrastive = ag::Tensor::constant(Matrix(1, 1));
  }
  out.total = ag::add(out.autoregressive, out.contrastive);
  return out;
}

namespace {

struct Example {
  std::string batch_label;
  NarrationContext context;
  std::string target;
  std::string previous;
};

std::vector<Example> collect_examples(const MovieDataset& dataset, const CharacterRefiner* refiner,
                                      const TrainingConfig& config) {
  if (!refiner && !config.oracle_characters) {
    throw ValidationError("training: a refiner is required unless oracle characters are used");
  }
  const CharacterRefiner* chooser = config.oracle_characters ? nullptr : refiner;
  std::vector<Example> out;
  for (const auto& [movie_id, movie] : dataset.movies) {
    for (std::size_t i = 0; i < movie.ads.size(); ++i) {
      const ADRecord& ad = movie.ads[i];
      if (ad.text.empty()) continue;
      Example ex;
      ex.batch_label = ad.ad_id;
      ex.context = narration_context(dataset, movie, i, config.context_depth, config.use_context_ads, chooser);
      ex.target = ad.text;
      if (i > 0) ex.previous = movie.ads[i - 1].text;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::size_t reserve_for(const Example& ex) {
  return std::max(ex.target.size(), ex.previous.size()) + 1;
}

}  // namespace

void train_narrator(VisualMapper& mapper, const ToyLM& lm, const MovieDataset& dataset,
                    const CharacterRefiner* refiner, const TrainingConfig& config,
                    const TrainingHooks& hooks) {
  config.validate();
  if (mapper.config().channel != lm.profile().d_lm) {
    throw ValidationError("training: mapper channel " + std::to_string(mapper.config().channel) +
                          " does not match d_lm " + std::to_string(lm.profile().d_lm));
  }
  const std::vector<Example> examples = collect_examples(dataset, refiner, config);
  if (examples.empty()) return;

  const std::size_t batch = std::min(config.batch_size, examples.size());
  const std::size_t per_epoch = (examples.size() + batch - 1) / batch;
  std::size_t total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);
  if (total == 0) return;

  mapper.params().set_requires_grad(true);
  AdamW optimizer(mapper.params(), AdamWOptions{0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  const auto start = std::chrono::steady_clock::now();

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    for (std::size_t b = 0; b < per_epoch && step < total; ++b, ++step) {
      mapper.params().zero_grad();
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(lo + batch, order.size());
      const double inv = 1.0 / static_cast<double>(hi - lo);
      LossBreakdown logged;
      for (std::size_t j = lo; j < hi; ++j) {
        const Example& ex = examples[order[j]];
        const std::string where = "batch " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                                  ", AD '" + ex.batch_label + "')";
        ExampleLoss loss;
        try {
          const PromptSequence prompt = assemble_prompt(mapper, lm, ex.context, reserve_for(ex));
          loss = example_loss(lm, prompt, ex.target, ex.previous, config.use_contrastive);
        } catch (const NumericError& e) {
          throw NumericError("training: " + where + ": " + e.what());
        }
        if (!std::isfinite(loss.total.item())) throw NumericError("training: non-finite loss in " + where);
        ag::backward(ag::scale(loss.total, inv));
        logged.autoregressive += inv * loss.autoregressive.item();
        logged.contrastive += inv * loss.contrastive.item();
        logged.total += inv * loss.total.item();
      }
      const double lr = learning_rate_at(step, total, config.learning_rate, config.warmup_fraction);
      optimizer.step(lr);
      if (hooks.on_step) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        hooks.on_step({step, epoch, lr, logged, wall});
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, mapper, step);
  }
  mapper.params().zero_grad();
}

LossBreakdown evaluate_losses(const VisualMapper& mapper, const ToyLM& lm,
                              const MovieDataset& dataset, const CharacterRefiner* refiner,
                              const TrainingConfig& config) {
  ag::NoGradGuard no_grad;
  const std::vector<Example> examples = collect_examples(dataset, refiner, config);
  LossBreakdown out;
  if (examples.empty()) return out;
  for (const auto& ex : examples) {
    const PromptSequence prompt = assemble_prompt(mapper, lm, ex.context, reserve_for(ex));
    const ExampleLoss loss = example_loss(lm, prompt, ex.target, ex.previous, config.use_contrastive);
    out.autoregressive += loss.autoregressive.item();
    out.contrastive += loss.contrastive.item();
    out.total += loss.total.item();
  }
  const double n = static_cast<double>(examples.size());
  out.autoregressive /= n;
  out.contrastive /= n;
  out.total /= n;
  return out;
}

}  // namespace adgen
