#include "adgen/language_model.hpp"

#include <cmath>

namespace adgen {

LMProfile LMProfile::toy() { return LMProfile{}; }

void LMProfile::validate() const {
  const auto v = static_cast<int>(vocab_size);
  if (bos_id < 0 || eos_id < 0 || pad_id < 0 || bos_id >= v || eos_id >= v || pad_id >= v) {
    throw ValidationError("lm: special token ids must be below vocab_size");
  }
  if (vocab_size < 259) throw ValidationError("lm: byte vocabulary needs at least 259 ids");
  if (num_heads < 1 || d_lm % num_heads != 0) {
    throw ValidationError("lm: d_lm not divisible by num_heads");
  }
  if (context_limit < 1 || num_blocks < 1) throw ValidationError("lm: bad profile");
}

std::vector<int> tokenize(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string detokenize(std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
  }
  return out;
}

ToyLM::ToyLM(LMProfile profile) : profile_(profile) {
  profile_.validate();
  Rng rng(profile_.seed);
  params_.add("tok_emb", nn::normal(profile_.vocab_size, profile_.d_lm, 1.0, rng));
  params_.add("pos_emb", nn::normal(profile_.context_limit, profile_.d_lm, 0.1, rng));
  const nn::BlockShape shape{profile_.d_lm, profile_.num_heads, profile_.ffn_dim};
  for (std::size_t b = 0; b < profile_.num_blocks; ++b) {
    nn::add_self_block(params_, "block" + std::to_string(b), shape, rng);
  }
  nn::add_layer_norm(params_, "ln_f", profile_.d_lm);
  nn::add_linear(params_, "head", profile_.d_lm, profile_.vocab_size, rng);
  params_.set_requires_grad(false);
}

ToyLM::ToyLM(LMProfile profile, nn::ParamStore params)
    : profile_(profile), params_(std::move(params)) {
  profile_.validate();
  const ToyLM reference_shapes(profile_);
  if (reference_shapes.params_.size() != params_.size()) {
    throw ValidationError("lm: parameter count does not match profile");
  }
  for (const auto& [name, t] : reference_shapes.params_) {
    const auto& mine = params_.at(name);
    if (mine.rows() != t.rows() || mine.cols() != t.cols()) {
      throw ValidationError("lm: parameter '" + name + "' has the wrong shape");
    }
  }
  params_.set_requires_grad(false);
}

void ToyLM::check_length(std::size_t rows) const {
  if (rows > profile_.context_limit) {
    throw ContextOverflowError("lm: sequence of " + std::to_string(rows) +
                               " positions exceeds context limit " +
                               std::to_string(profile_.context_limit));
  }
}

ag::Tensor ToyLM::token_embeddings(std::span<const int> ids) const {
  return ag::gather_rows(params_.at("tok_emb"), ids);
}

ag::Tensor ToyLM::hidden(const ag::Tensor& sequence) const {
  if (sequence.cols() != profile_.d_lm) {
    throw DimensionError("lm: embedding width " + std::to_string(sequence.cols()) +
                         " does not match d_lm " + std::to_string(profile_.d_lm));
  }
  check_length(sequence.rows());
  ag::Tensor x = ag::add(sequence, ag::slice_rows(params_.at("pos_emb"), 0, sequence.rows()));
  for (std::size_t b = 0; b < profile_.num_blocks; ++b) {
    x = nn::self_block(params_, "block" + std::to_string(b), x, profile_.num_heads, true);
  }
  return nn::apply_layer_norm(params_, "ln_f", x);
}

ag::Tensor ToyLM::head(const ag::Tensor& hidden_states) const {
  return nn::apply_linear(params_, "head", hidden_states);
}

ag::Tensor ToyLM::forward(const ag::Tensor& sequence) const { return head(hidden(sequence)); }

Matrix ToyLM::next_token_logits(const Matrix& sequence) const {
  ag::NoGradGuard no_grad;
  const ag::Tensor h = hidden(ag::Tensor::constant(sequence));
  Matrix logits = head(ag::slice_rows(h, h.rows() - 1, 1)).value();
  if (!logits.all_finite()) throw NumericError("lm: non-finite logits");
  return logits;
}

std::size_t prompt_length(const PromptSequence& prompt) {
  std::size_t n = 0;
  for (const auto& seg : prompt.segments) {
    switch (seg.kind) {
      case SegmentKind::Text:
        n += seg.text.size();
        break;
      case SegmentKind::Embedding:
        n += seg.embeddings.rows();
        break;
      case SegmentKind::Bos:
        n += 1;
        break;
    }
  }
  return n;
}

EmbeddedPrompt embed_prompt(const PromptSequence& prompt, const ToyLM& lm,
                            std::span<const int> continuation) {
  std::vector<ag::Tensor> parts;
  EmbeddedPrompt out;
  std::size_t rows = 0;
  bool seen_bos = false;
  for (const auto& seg : prompt.segments) {
    switch (seg.kind) {
      case SegmentKind::Text: {
        if (seg.text.empty()) break;
        const auto ids = tokenize(seg.text);
        parts.push_back(lm.token_embeddings(ids));
        rows += ids.size();
        break;
      }
      case SegmentKind::Embedding:
        if (seg.embeddings.cols() != lm.profile().d_lm) {
          throw DimensionError("embed_prompt: embedding span width " +
                               std::to_string(seg.embeddings.cols()) + " != d_lm " +
                               std::to_string(lm.profile().d_lm));
        }
        parts.push_back(seg.embeddings);
        rows += seg.embeddings.rows();
        break;
      case SegmentKind::Bos: {
        if (seen_bos) throw ValidationError("embed_prompt: more than one BOS");
        seen_bos = true;
        const int bos = lm.profile().bos_id;
        parts.push_back(lm.token_embeddings(std::span<const int>(&bos, 1)));
        out.bos_index = rows;
        rows += 1;
        break;
      }
    }
  }
  if (!seen_bos) throw ValidationError("embed_prompt: prompt has no BOS");
  if (!continuation.empty()) {
    parts.push_back(lm.token_embeddings(continuation));
    rows += continuation.size();
  }
  out.sequence = ag::concat_rows(parts);
  out.generation.assign(rows, false);
  for (std::size_t i = out.bos_index + 1; i < rows; ++i) out.generation[i] = true;
  return out;
}

ag::Tensor sequence_logprob_graph(const ToyLM& lm, const PromptSequence& prompt,
                                  std::span<const int> targets) {
  if (targets.empty()) throw ValidationError("sequence_logprob: empty target");
  const EmbeddedPrompt e = embed_prompt(prompt, lm, targets.first(targets.size() - 1));
  const ag::Tensor h = lm.hidden(e.sequence);
  const ag::Tensor logits =
      lm.head(ag::slice_rows(h, e.bos_index, targets.size()));
  return ag::log_softmax_pick(logits, 0, targets);
}

std::vector<double> sequence_logprob(const ToyLM& lm, const PromptSequence& prompt,
                                     std::span<const int> targets) {
  ag::NoGradGuard no_grad;
  const ag::Tensor lp = sequence_logprob_graph(lm, prompt, targets);
  return {lp.value().values().begin(), lp.value().values().end()};
}

DecodingResult greedy_decode(const ToyLM& lm, const PromptSequence& prompt, std::size_t max_len) {
  ag::NoGradGuard no_grad;
  DecodingResult result;
  if (max_len == 0) return result;
  const EmbeddedPrompt e = embed_prompt(prompt, lm);
  if (e.sequence.rows() > lm.profile().context_limit) {
    throw ContextOverflowError("greedy_decode: prompt of " + std::to_string(e.sequence.rows()) +
                               " positions exceeds context limit " +
                               std::to_string(lm.profile().context_limit));
  }
  const std::size_t d = lm.profile().d_lm;
  const Matrix& tok_emb = lm.params().at("tok_emb").value();
  Matrix seq = e.sequence.value();
  double total = 0.0;
  for (std::size_t step = 0; step < max_len; ++step) {
    if (seq.rows() > lm.profile().context_limit) {
      result.truncated = true;
      break;
    }
    const Matrix logits = lm.next_token_logits(seq);
    std::size_t best = 0;
    double mx = logits(0, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(0, c) > mx) {
        mx = logits(0, c);
        best = c;
      }
    }
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(0, c) - mx);
    total += -std::log(z);  // logit[best] - logsumexp
    const int id = static_cast<int>(best);
    result.token_ids.push_back(id);
    if (id == lm.profile().eos_id) break;
    Matrix grown(seq.rows() + 1, d);
    std::copy(seq.data(), seq.data() + seq.size(), grown.data());
    std::copy(tok_emb.row(best).begin(), tok_emb.row(best).end(), grown.data() + seq.size());
    seq = std::move(grown);
  }
  if (!result.token_ids.empty()) {
    result.avg_logprob = total / static_cast<double>(result.token_ids.size());
  }
  result.text = detokenize(result.token_ids);
  return result;
}

}  // namespace adgen
