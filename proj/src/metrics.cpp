#include "adgen/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace adgen::metrics {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (c < 128 && std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference, double beta_squared) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (c.empty() || r.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  return (1.0 + beta_squared) * p * rec / (rec + beta_squared * p);
}

namespace {

using Counts = std::map<std::string, double>;

Counts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  Counts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      if (j) key.push_back(' ');
      key += tokens[i + j];
    }
    out[key] += 1.0;
  }
  return out;
}

double cosine(const Counts& a, const Counts& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    if (auto it = b.find(k); it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

CiderResult cider(const std::vector<std::string>& candidates,
                  const std::vector<std::vector<std::string>>& references, std::size_t n_max) {
  if (candidates.empty()) throw ValidationError("cider: empty corpus");
  if (candidates.size() != references.size()) throw ValidationError("cider: candidate/reference count mismatch");
  if (n_max == 0) throw ValidationError("cider: n_max must be positive");
  const std::size_t items = candidates.size();
  std::vector<std::vector<std::vector<Counts>>> ref_grams(items);  // item, ref, n
  std::vector<std::vector<Counts>> cand_grams(items);
  std::map<std::string, double> df;
  for (std::size_t i = 0; i < items; ++i) {
    if (references[i].empty()) throw ValidationError("cider: item " + std::to_string(i) + " has no reference");
    std::set<std::string> seen;
    for (const auto& r : references[i]) {
      const auto tokens = tokenize(r);
      std::vector<Counts> per_n;
      for (std::size_t n = 1; n <= n_max; ++n) {
        per_n.push_back(ngrams(tokens, n));
        for (const auto& [g, c] : per_n.back()) seen.insert(g);
      }
      ref_grams[i].push_back(std::move(per_n));
    }
    for (const auto& g : seen) df[g] += 1.0;
    const auto tokens = tokenize(candidates[i]);
    for (std::size_t n = 1; n <= n_max; ++n) cand_grams[i].push_back(ngrams(tokens, n));
  }
  const double log_items = std::log(static_cast<double>(items));
  const auto weigh = [&](Counts c) {
    for (auto& [g, v] : c) {
      const auto it = df.find(g);
      v *= log_items - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
    }
    return c;
  };
  CiderResult out;
  for (std::size_t i = 0; i < items; ++i) {
    double total = 0.0;
    for (std::size_t n = 0; n < n_max; ++n) {
      const Counts c = weigh(cand_grams[i][n]);
      double per_ref = 0.0;
      for (const auto& r : ref_grams[i]) per_ref += cosine(c, weigh(r[n]));
      total += per_ref / static_cast<double>(ref_grams[i].size());
    }
    out.per_item.push_back(10.0 * total / static_cast<double>(n_max));
  }
  for (double v : out.per_item) out.corpus += v;
  out.corpus /= static_cast<double>(items);
  return out;
}

double token_f1(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, int> count;
  for (const auto& t : ta) ++count[t];
  std::size_t overlap = 0;
  for (const auto& t : tb) {
    if (auto it = count.find(t); it != count.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(ta.size() + tb.size());
}

std::pair<std::size_t, std::size_t> recall_window(std::size_t i, std::size_t count, std::size_t n) {
  const std::size_t width = std::min(n, count);
  std::size_t begin = i >= n / 2 ? i - n / 2 : 0;
  begin = std::min(begin, count - width);
  return {begin, begin + width};
}

RecallCounts recall_at_k_counts(const std::vector<std::string>& predictions,
                                const std::vector<std::string>& references, std::size_t k,
                                std::size_t n, const Similarity& similarity) {
  if (k == 0 || n < k) throw ValidationError("recall@k/N: need 0 < k <= N");
  if (predictions.size() != references.size()) {
    throw ValidationError("recall@k/N: predictions and references are not aligned");
  }
  RecallCounts out;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto [begin, end] = recall_window(i, references.size(), n);
    const double truth = similarity(predictions[i], references[i]);
    std::size_t rank = 0;
    for (std::size_t j = begin; j < end; ++j) {
      if (j == i) continue;
      const double s = similarity(predictions[i], references[j]);
      if (s > truth || (s == truth && j < i)) ++rank;
    }
    out.hits += rank < k ? 1 : 0;
    ++out.total;
  }
  return out;
}

double recall_at_k_within_n(const std::vector<std::vector<std::string>>& predictions,
                            const std::vector<std::vector<std::string>>& references, std::size_t k,
                            std::size_t n, const Similarity& similarity) {
  if (predictions.size() != references.size()) throw ValidationError("recall@k/N: movie count mismatch");
  RecallCounts total;
  for (std::size_t m = 0; m < predictions.size(); ++m) {
    const RecallCounts c = recall_at_k_counts(predictions[m], references[m], k, n, similarity);
    total.hits += c.hits;
    total.total += c.total;
  }
  return total.percentage();
}

std::vector<std::size_t> mentioned_characters(std::string_view text, const CharacterBank& bank,
                                              const AliasTable& aliases) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    if (mentions(text, bank.entries[i].character_name, aliases)) out.push_back(i);
  }
  return out;
}

std::optional<double> critic(std::string_view prediction, std::string_view reference,
                             const CharacterBank& bank, const AliasTable& aliases) {
  const auto p = mentioned_characters(prediction, bank, aliases);
  const auto r = mentioned_characters(reference, bank, aliases);
  if (p.empty() && r.empty()) return std::nullopt;
  std::vector<std::size_t> inter, uni;
  std::set_intersection(p.begin(), p.end(), r.begin(), r.end(), std::back_inserter(inter));
  std::set_union(p.begin(), p.end(), r.begin(), r.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

std::optional<double> mean_present(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

int StubJudge::score(std::string_view prediction, std::string_view reference) {
  const double f = token_f1(prediction, reference);
  if (f >= 0.8) return 5;
  if (f >= 0.6) return 4;
  if (f >= 0.4) return 3;
  if (f >= 0.2) return 2;
  return 1;
}

int llm_judge_score(std::string_view prediction, std::string_view reference, JudgeClient& client) {
  const int s = client.score(prediction, reference);
  if (s < 1 || s > 5) {
    throw JudgeUnavailableError("judge '" + client.name() + "' returned out-of-range score " +
                                std::to_string(s));
  }
  return s;
}

MetricReport evaluate(const MovieDataset& references, const std::vector<PredictionRow>& predictions,
                      JudgeClient* judge, std::size_t k, std::size_t n) {
  std::map<std::pair<std::string, std::string>, const PredictionRow*> by_key;
  for (const auto& p : predictions) {
    if (!by_key.emplace(std::pair{p.movie_id, p.ad_id}, &p).second) {
      throw ValidationError("duplicate prediction for AD '" + p.ad_id + "' in movie '" + p.movie_id + "'");
    }
  }
  struct Item {
    std::string movie;
    std::string prediction;
    std::string reference;
  };
  std::vector<Item> items;
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> ordered;
  for (const auto& [movie_id, movie] : references.movies) {
    for (const auto& ad : movie.ads) {
      const auto it = by_key.find({movie_id, ad.ad_id});
      if (it == by_key.end()) {
        throw ValidationError("no prediction for AD '" + ad.ad_id + "' in movie '" + movie_id + "'");
      }
      items.push_back({movie_id, it->second->text, ad.text});
      ordered[movie_id].first.push_back(it->second->text);
      ordered[movie_id].second.push_back(ad.text);
    }
  }
  if (by_key.size() != items.size()) throw ValidationError("predictions reference unknown ADs");
  MetricReport report;
  if (items.empty()) return report;

  std::vector<std::string> cands;
  std::vector<std::vector<std::string>> refs;
  for (const auto& it : items) {
    cands.push_back(it.prediction);
    refs.push_back({it.reference});
  }
  const CiderResult c = cider(cands, refs);

  std::map<std::string, std::vector<std::optional<double>>> critic_by_movie, judge_by_movie;
  std::vector<std::optional<double>> critic_all, judge_all;
  std::map<std::string, std::vector<double>> rouge_by_movie, cider_by_movie;
  double rouge_total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    const double r = rouge_l(it.prediction, it.reference);
    rouge_total += r;
    rouge_by_movie[it.movie].push_back(r);
    cider_by_movie[it.movie].push_back(c.per_item[i]);
    const auto cr = critic(it.prediction, it.reference, references.movies.at(it.movie).bank,
                           references.aliases);
    critic_by_movie[it.movie].push_back(cr);
    critic_all.push_back(cr);
    if (judge) {
      const double j = llm_judge_score(it.prediction, it.reference, *judge);
      judge_by_movie[it.movie].push_back(j);
      judge_all.push_back(j);
    }
  }
  RecallCounts recall_total;
  for (const auto& [movie_id, pr] : ordered) {
    MetricValues& v = report.per_movie[movie_id];
    const auto& rs = rouge_by_movie[movie_id];
    const auto& cs = cider_by_movie[movie_id];
    v.count = rs.size();
    for (double x : rs) v.rouge_l += x / static_cast<double>(rs.size());
    for (double x : cs) v.cider += x / static_cast<double>(cs.size());
    const RecallCounts rc = recall_at_k_counts(pr.first, pr.second, k, n);
    v.recall_at_k = rc.percentage();
    recall_total.hits += rc.hits;
    recall_total.total += rc.total;
    v.critic = mean_present(critic_by_movie[movie_id]);
    if (judge) v.judge = mean_present(judge_by_movie[movie_id]);
  }
  report.corpus.count = items.size();
  report.corpus.rouge_l = rouge_total / static_cast<double>(items.size());
  report.corpus.cider = c.corpus;
  report.corpus.recall_at_k = recall_total.percentage();
  report.corpus.critic = mean_present(critic_all);
  if (judge) report.corpus.judge = mean_present(judge_all);
  return report;
}

}  // namespace adgen::metrics
