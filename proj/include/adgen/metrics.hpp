#pragma once

// Caption metrics over generated descriptions: ROUGE-L, CIDEr, R@k/N, a
// name-matching character IoU (critic-nm), and an optional 1..5 judge.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adgen/data_model.hpp"
#include "adgen/errors.hpp"

namespace adgen::metrics {

// Lowercase, ASCII punctuation removed, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

inline constexpr double kRougeBetaSquared = 1.2;

// 0 when either side has no tokens.
double rouge_l(std::string_view candidate, std::string_view reference,
               double beta_squared = kRougeBetaSquared);

struct CiderResult {
  double corpus = 0.0;             // mean of per-item scores
  std::vector<double> per_item;    // each in [0, 10]
};

// IDF over the reference sets of this corpus, one item per candidate.
CiderResult cider(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references, std::size_t n_max = 4);

using Similarity = std::function<double(std::string_view, std::string_view)>;

// Multiset token overlap F1; 0 when either side is empty.
double token_f1(std::string_view a, std::string_view b);

// [begin, end) of the reference window for ground-truth index `i` out of
// `count`: N wide, centered on i, shifted to stay inside the movie.
std::pair<std::size_t, std::size_t> recall_window(std::size_t i, std::size_t count, std::size_t n);

struct RecallCounts {
  std::size_t hits = 0;
  std::size_t total = 0;
  double percentage() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total); }
};

// One movie's ordered predictions against its ordered references.
RecallCounts recall_at_k_counts(const std::vector<std::string>& predictions,
                                const std::vector<std::string>& references, std::size_t k = 5,
                                std::size_t n = 16, const Similarity& similarity = token_f1);

// Percentage over all movies; each inner vector is one movie in order.
double recall_at_k_within_n(const std::vector<std::vector<std::string>>& predictions,
                            const std::vector<std::vector<std::string>>& references,
                            std::size_t k = 5, std::size_t n = 16,
                            const Similarity& similarity = token_f1);

// Indices of bank entries mentioned in `text`.
std::vector<std::size_t> mentioned_characters(std::string_view text, const CharacterBank& bank,
                                              const AliasTable& aliases = {});

// IoU of mentioned name sets; absent when neither text names anyone.
std::optional<double> critic(std::string_view prediction, std::string_view reference,
                             const CharacterBank& bank, const AliasTable& aliases = {});

// Mean of the present values; absent when none are present.
std::optional<double> mean_present(const std::vector<std::optional<double>>& values);

class JudgeUnavailableError : public Error {
 public:
  using Error::Error;
  bool retriable() const noexcept { return true; }
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual int score(std::string_view prediction, std::string_view reference) = 0;
  virtual std::string name() const = 0;
};

// Token-F1 bands: ≥0.8 → 5, ≥0.6 → 4, ≥0.4 → 3, ≥0.2 → 2, else 1.
class StubJudge : public JudgeClient {
 public:
  int score(std::string_view prediction, std::string_view reference) override;
  std::string name() const override { return "stub-token-f1"; }
};

inline constexpr const char* kJudgeRubric =
    "Rate how well the predicted audio description matches the reference, from 1 (lowest) to 5 "
    "(highest). Reply with the integer only.";

// POSTs a plain-text body to a remote endpoint and expects an integer back.
class HttpJudge : public JudgeClient {
 public:
  HttpJudge(std::string url, std::string token);
  // From ADGEN_JUDGE_URL / ADGEN_JUDGE_TOKEN; throws when the URL is unset.
  static HttpJudge from_environment();
  int score(std::string_view prediction, std::string_view reference) override;
  std::string name() const override { return "http"; }

 private:
  std::string url_;
  std::string token_;
};

// Judge score as requested by the evaluator; throws on values outside 1..5.
int llm_judge_score(std::string_view prediction, std::string_view reference, JudgeClient& client);

struct PredictionRow {
  std::string movie_id;
  std::string ad_id;
  std::string text;
};

struct MetricValues {
  double rouge_l = 0.0;
  double cider = 0.0;
  double recall_at_k = 0.0;
  std::optional<double> critic;
  std::optional<double> judge;
  std::size_t count = 0;
};

struct MetricReport {
  std::map<std::string, MetricValues> per_movie;
  MetricValues corpus;
};

// Predictions are matched to reference ADs by (movie_id, ad_id); every
// reference AD needs exactly one prediction.
MetricReport evaluate(const MovieDataset& references, const std::vector<PredictionRow>& predictions,
                      JudgeClient* judge = nullptr, std::size_t k = 5, std::size_t n = 16);

}  // namespace adgen::metrics
