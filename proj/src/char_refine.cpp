#include "adgen/char_refine.hpp"

#include <algorithm>
#include <cmath>

#include "adgen/errors.hpp"
#include "adgen/optim.hpp"

namespace adgen {

RefineConfig RefineConfig::toy_profile(std::size_t input_dim) {
  RefineConfig c;
  c.channel = 64;
  c.num_heads = 4;
  c.ffn_dim = 128;
  c.input_dim = input_dim;
  return c;
}

void RefineConfig::validate() const {
  if (num_blocks < 1) throw ValidationError("refiner: num_blocks must be at least 1");
  if (num_heads < 1 || channel % num_heads != 0) {
    throw ValidationError("refiner: channel not divisible by num_heads");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("refiner: threshold must lie strictly inside (0, 1)");
  }
  if (input_dim < 1 || ffn_dim < 1) throw ValidationError("refiner: dimensions must be positive");
  if (!(positive_weight > 0.0)) throw ValidationError("refiner: positive_weight must be positive");
}

namespace {

nn::ParamStore init_params(const RefineConfig& c) {
  nn::ParamStore store;
  Rng rng(c.seed);
  nn::add_linear(store, "query_proj", c.input_dim, c.channel, rng);
  nn::add_linear(store, "context_proj", c.input_dim, c.channel, rng);
  const nn::BlockShape shape{c.channel, c.num_heads, c.ffn_dim};
  for (std::size_t b = 0; b < c.num_blocks; ++b) {
    nn::add_cross_block(store, "block" + std::to_string(b), shape, rng);
  }
  nn::add_layer_norm(store, "ln_out", c.channel);
  nn::add_linear(store, "head", c.channel, 1, rng);
  return store;
}

Matrix signed_permutation(const Matrix& m, const std::vector<std::size_t>& dims, const std::vector<double>& signs) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = signs[c] * m(r, dims[c]);
  return out;
}

struct RefineExample {
  const Matrix* exemplars;
  const Matrix* clip;
  std::vector<double> labels;
};

}  // namespace

CharacterRefiner::CharacterRefiner(RefineConfig config) : config_(config) {
  config_.validate();
  params_ = init_params(config_);
}

CharacterRefiner::CharacterRefiner(RefineConfig config, nn::ParamStore params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const nn::ParamStore reference = init_params(config_);
  if (reference.size() != params_.size()) {
    throw ValidationError("refiner: parameter count does not match config");
  }
  for (const auto& [name, t] : reference) {
    const auto& mine = params_.at(name);
    if (mine.rows() != t.rows() || mine.cols() != t.cols()) {
      throw ValidationError("refiner: parameter '" + name + "' has the wrong shape");
    }
  }
  params_.set_requires_grad(true);
}

ag::Tensor CharacterRefiner::logits(const ag::Tensor& exemplars, const ag::Tensor& clip) const {
  if (exemplars.rows() == 0) throw ValidationError("refiner: no characters to score");
  if (clip.rows() == 0) throw ValidationError("refiner: clip has no frames");
  if (exemplars.cols() != config_.input_dim || clip.cols() != config_.input_dim) {
    throw DimensionError("refiner: expected width " + std::to_string(config_.input_dim) +
                         ", got exemplars " + std::to_string(exemplars.cols()) + " and clip " +
                         std::to_string(clip.cols()));
  }
  ag::Tensor q = nn::apply_linear(params_, "query_proj", exemplars);
  const ag::Tensor ctx = nn::apply_linear(params_, "context_proj", clip);
  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    q = nn::cross_block(params_, "block" + std::to_string(b), q, ctx, config_.num_heads);
    if (!q.value().all_finite()) {
      throw NumericError("refiner: non-finite activation in block " + std::to_string(b));
    }
  }
  return nn::apply_linear(params_, "head", nn::apply_layer_norm(params_, "ln_out", q));
}

std::vector<double> CharacterRefiner::score_characters(const Matrix& exemplars,
                                                       const Matrix& clip) const {
  ag::NoGradGuard no_grad;
  const ag::Tensor p = ag::sigmoid(logits(ag::Tensor::constant(exemplars), ag::Tensor::constant(clip)));
  return {p.value().values().begin(), p.value().values().end()};
}

Matrix exemplar_matrix(const CharacterBank& bank) {
  std::vector<Matrix> rows;
  rows.reserve(bank.entries.size());
  for (const auto& e : bank.entries) {
    if (!e.exemplar) {
      throw ValidationError("refiner: character '" + e.character_name + "' has no exemplar");
    }
    rows.push_back(Matrix::row_vector(*e.exemplar));
  }
  return vstack(rows);
}

std::vector<CharacterEntry> CharacterRefiner::refine(const CharacterBank& bank,
                                                     const VideoClip& clip) const {
  if (bank.entries.empty()) return {};
  const auto probs = score_characters(exemplar_matrix(bank), clip.features);
  std::vector<CharacterEntry> kept;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > config_.threshold) kept.push_back(bank.entries[i]);
  }
  return kept;
}

double refinement_bce_loss(std::span<const double> probabilities, const std::vector<bool>& labels) {
  if (probabilities.empty()) throw ValidationError("bce: empty input");
  if (probabilities.size() != labels.size()) throw ValidationError("bce: length mismatch");
  constexpr double kFloor = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    total -= labels[i] ? std::log(std::clamp(p, kFloor, 1.0))
                       : std::log(std::clamp(1.0 - p, kFloor, 1.0));
  }
  return total / static_cast<double>(probabilities.size());
}

PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrecisionRecall pr;
  pr.true_positives = tp;
  pr.false_positives = fp;
  pr.false_negatives = fn;
  if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return pr;
}

PrecisionRecall evaluate_refiner(const MovieDataset& dataset, const CharacterRefiner& refiner) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [movie_id, movie] : dataset.movies) {
    if (movie.bank.entries.empty()) continue;
    const Matrix exemplars = exemplar_matrix(movie.bank);
    for (const auto& ad : movie.ads) {
      const auto labels = derive_refinement_labels(ad, movie.bank, dataset.aliases);
      const auto probs = refiner.score_characters(exemplars, movie.clip(ad.clip_id).features);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probs[i] > refiner.config().threshold;
        if (predicted && labels[i].ad_related) ++tp;
        if (predicted && !labels[i].ad_related) ++fp;
        if (!predicted && labels[i].ad_related) ++fn;
      }
    }
  }
  return precision_recall(tp, fp, fn);
}

CharacterRefiner train_refiner(const MovieDataset& dataset, const RefineConfig& config,
                               const RefinerTrainingOptions& options,
                               const std::function<void(const RefinerLogRecord&)>& on_step) {
  CharacterRefiner refiner(config);
  std::vector<Matrix> exemplar_mats;
  std::vector<RefineExample> examples;
  exemplar_mats.reserve(dataset.movies.size());
  for (const auto& [movie_id, movie] : dataset.movies) {
    if (movie.bank.entries.empty() || movie.ads.empty()) continue;
    exemplar_mats.push_back(exemplar_matrix(movie.bank));
    for (const auto& ad : movie.ads) {
      RefineExample ex{&exemplar_mats.back(), &movie.clip(ad.clip_id).features, {}};
      for (const auto& l : derive_refinement_labels(ad, movie.bank, dataset.aliases)) {
        ex.labels.push_back(l.ad_related ? 1.0 : 0.0);
      }
      examples.push_back(std::move(ex));
    }
  }
  if (examples.empty() || options.steps == 0) return refiner;

  AdamW optimizer(refiner.params(), AdamWOptions{0.9, 0.999, 1e-8, options.weight_decay});
  Rng rng(options.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  std::vector<std::size_t> dims(config.input_dim);
  for (std::size_t i = 0; i < dims.size(); ++i) dims[i] = i;
  std::vector<double> signs(config.input_dim, 1.0);
  const std::size_t batch = std::max<std::size_t>(1, std::min(options.batch_size, examples.size()));
  for (std::size_t step = 0; step < options.steps; ++step) {
    refiner.params().zero_grad();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const RefineExample& ex = examples[order[cursor++]];
      ag::Tensor z;
      if (options.augment) {
        rng.shuffle(dims.begin(), dims.end());
        for (double& v : signs) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        z = refiner.logits(ag::Tensor::constant(signed_permutation(*ex.exemplars, dims, signs)),
                           ag::Tensor::constant(signed_permutation(*ex.clip, dims, signs)));
      } else {
        z = refiner.logits(ag::Tensor::constant(*ex.exemplars), ag::Tensor::constant(*ex.clip));
      }
      const ag::Tensor loss = ag::scale(
          ag::bce_with_logits(z, ex.labels, config.positive_weight), 1.0 / static_cast<double>(batch));
      if (!std::isfinite(loss.item())) {
        throw NumericError("refiner: non-finite loss at step " + std::to_string(step));
      }
      ag::backward(loss);
      batch_loss += loss.item();
    }
    const double lr = learning_rate_at(step, options.steps, options.learning_rate,
                                       options.warmup_fraction);
    optimizer.step(lr);
    if (on_step) on_step({step, lr, batch_loss});
  }
  return refiner;
}

}  // namespace adgen
