#pragma once

// Character refinement: a stack of cross-attention blocks in which each
// candidate character's exemplar is a query over the clip's frame features.
// A linear head turns each query's output into the probability that the
// character is AD-related; candidates above the threshold are kept.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/data_model.hpp"
#include "adgen/nn.hpp"

namespace adgen {

struct RefineConfig {
  std::size_t num_blocks = 3;
  std::size_t channel = 768;
  std::size_t num_heads = 12;
  std::size_t ffn_dim = 3072;
  std::size_t input_dim = 512;
  double threshold = 0.5;
  // Multiplier on positive terms of the training loss.
  double positive_weight = 1.0;
  std::uint64_t seed = 0;

  static RefineConfig toy_profile(std::size_t input_dim);
  void validate() const;

  friend bool operator==(const RefineConfig&, const RefineConfig&) = default;
};

class CharacterRefiner {
 public:
  explicit CharacterRefiner(RefineConfig config);
  CharacterRefiner(RefineConfig config, nn::ParamStore params);

  const RefineConfig& config() const noexcept { return config_; }
  RefineConfig& mutable_config() noexcept { return config_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  // C×1 logits for C exemplars (C×input_dim) against F clip frames.
  ag::Tensor logits(const ag::Tensor& exemplars, const ag::Tensor& clip) const;

  std::vector<double> score_characters(const Matrix& exemplars, const Matrix& clip) const;

  // Entries whose probability exceeds the configured threshold, in bank
  // order. Every entry needs an exemplar.
  std::vector<CharacterEntry> refine(const CharacterBank& bank, const VideoClip& clip) const;

 private:
  RefineConfig config_;
  nn::ParamStore params_;
};

// Stacks populated exemplars of `bank` into a C×D matrix; throws naming the
// first character without one.
Matrix exemplar_matrix(const CharacterBank& bank);

// Mean binary cross-entropy with log arguments clamped to [1e-12, 1].
double refinement_bce_loss(std::span<const double> probabilities, const std::vector<bool>& labels);

struct PrecisionRecall {
  std::optional<double> precision;  // absent without positive predictions
  std::optional<double> recall;     // absent without positive labels
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn);

// Micro-averaged over every (AD, bank entry) pair of the dataset.
PrecisionRecall evaluate_refiner(const MovieDataset& dataset, const CharacterRefiner& refiner);

struct RefinerTrainingOptions {
  std::size_t steps = 1000;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double warmup_fraction = 0.05;
  double weight_decay = 0.01;
  // Each example's exemplars and frames go through the same random signed
  // permutation of feature dimensions, so the classifier learns to compare
  // them instead of memorising particular characters.
  bool augment = true;
  std::uint64_t seed = 0;
};

struct RefinerLogRecord {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
};

// Trains on labels derived from the dataset's ADs. Movies with empty banks
// contribute nothing.
CharacterRefiner train_refiner(const MovieDataset& dataset, const RefineConfig& config,
                               const RefinerTrainingOptions& options,
                               const std::function<void(const RefinerLogRecord&)>& on_step = {});

}  // namespace adgen
