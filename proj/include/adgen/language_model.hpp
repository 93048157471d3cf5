#pragma once

// Frozen causal language model contract and a small byte-level transformer
// implementing it. The model's parameters never require gradients, but
// gradients flow through it into whatever produced the input embeddings.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/errors.hpp"
#include "adgen/nn.hpp"
#include "adgen/prompt.hpp"

namespace adgen {

class ContextOverflowError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct LMProfile {
  std::size_t vocab_size = 259;  // 256 bytes + BOS, EOS, PAD
  std::size_t d_lm = 64;
  std::size_t context_limit = 512;
  int bos_id = 256;
  int eos_id = 257;
  int pad_id = 258;
  std::size_t num_blocks = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  std::uint64_t seed = 0;

  static LMProfile toy();
  void validate() const;

  friend bool operator==(const LMProfile&, const LMProfile&) = default;
};

// Byte-level, reversible for any byte string.
std::vector<int> tokenize(std::string_view text);
// Special ids are dropped.
std::string detokenize(std::span<const int> ids);

class ToyLM {
 public:
  explicit ToyLM(LMProfile profile);
  ToyLM(LMProfile profile, nn::ParamStore params);

  const LMProfile& profile() const noexcept { return profile_; }
  const nn::ParamStore& params() const noexcept { return params_; }
  // Mutable access exists for loading and for constructing test models.
  nn::ParamStore& mutable_params() noexcept { return params_; }

  ag::Tensor token_embeddings(std::span<const int> ids) const;
  // Final hidden states (T×d_lm) of a causal pass over `sequence` (T×d_lm).
  ag::Tensor hidden(const ag::Tensor& sequence) const;
  // Vocabulary logits for every row of `hidden_states`.
  ag::Tensor head(const ag::Tensor& hidden_states) const;
  // T×V logits for every position.
  ag::Tensor forward(const ag::Tensor& sequence) const;
  // 1×V logits at the final position.
  Matrix next_token_logits(const Matrix& sequence) const;

 private:
  void check_length(std::size_t rows) const;

  LMProfile profile_;
  nn::ParamStore params_;
};

struct EmbeddedPrompt {
  ag::Tensor sequence;              // T×d_lm
  std::vector<bool> generation;     // true for positions after BOS
  std::size_t bos_index = 0;        // row of the BOS embedding
};

// Text spans become token embeddings, embedding spans pass through
// unchanged, BOS becomes the BOS token embedding. `continuation` tokens are
// appended after BOS (teacher forcing).
EmbeddedPrompt embed_prompt(const PromptSequence& prompt, const ToyLM& lm,
                            std::span<const int> continuation = {});

// Number of rows embed_prompt() produces without a continuation.
std::size_t prompt_length(const PromptSequence& prompt);

// log P(target_n | prompt, target_<n) for each n, as an n×1 column.
ag::Tensor sequence_logprob_graph(const ToyLM& lm, const PromptSequence& prompt,
                                  std::span<const int> targets);
std::vector<double> sequence_logprob(const ToyLM& lm, const PromptSequence& prompt,
                                     std::span<const int> targets);

struct DecodingResult {
  std::vector<int> token_ids;        // includes EOS when emitted
  std::string text;                  // without EOS
  std::optional<double> avg_logprob; // absent when nothing was emitted
  bool truncated = false;            // stopped by the context limit
};

// Argmax decoding until EOS or max_len tokens; ties go to the lower id.
DecodingResult greedy_decode(const ToyLM& lm, const PromptSequence& prompt, std::size_t max_len);

}  // namespace adgen
