// Acceptance run: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "adgen/checkpoint.hpp"
#include "adgen/exemplar.hpp"
#include "adgen/generation.hpp"
#include "adgen/io.hpp"
#include "adgen/metrics.hpp"
#include "adgen/synth.hpp"
#include "adgen/training.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace adgen;
using adgen::testing::gradient_check;
using adgen::testing::random_matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Args {
  std::string adgen;
  std::string lm;
  std::string fixtures;
  std::string work;
  std::vector<int> only;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MovieDataset synth_dataset(std::uint64_t seed, std::size_t movies, std::size_t clips, std::size_t characters) {
  SynthOptions o;
  o.seed = seed;
  o.movies = movies;
  o.clips_per_movie = clips;
  o.characters_per_movie = characters;
  return populate_exemplars(synthesize(o).dataset);
}

// ---------------------------------------------------------------- 1
Outcome gradients(const Args&) {
  const auto t0 = std::chrono::steady_clock::now();
  const MovieDataset d = synth_dataset(21, 1, 4, 4);
  const Movie& m = d.movies.begin()->second;
  LMProfile lp = LMProfile::toy();
  lp.seed = 3;
  const ToyLM lm(lp);
  VisualMapper mapper(MapperConfig::toy_profile(32));

  // An AD with a predecessor and a named character exercises both terms
  // and the image network.
  std::size_t idx = 1;
  while (idx < m.ads.size() && select_characters(d, m, m.ads[idx], nullptr).empty()) ++idx;
  if (idx == m.ads.size()) return {false, "fixture has no AD naming a character"};
  const NarrationContext ctx = narration_context(d, m, idx, 1, false, nullptr);
  const auto total = [&] {
    const PromptSequence p = assemble_prompt(mapper, lm, ctx, 64);
    return example_loss(lm, p, m.ads[idx].text, m.ads[idx - 1].text, true);
  };
  double margin = 0;
  {
    ag::NoGradGuard g;
    const PromptSequence p = assemble_prompt(mapper, lm, ctx, 64);
    margin = std::abs(sequence_score(lm, p, m.ads[idx - 1].text).item() - sequence_score(lm, p, m.ads[idx].text).item());
  }
  if (margin < 1e-3) return {false, "scores too close to the hinge kink for finite differences"};
  const auto mr = gradient_check(mapper.params(), [&] { return total().total; }, 3);

  CharacterRefiner refiner(RefineConfig::toy_profile(32));
  const Matrix ex = exemplar_matrix(m.bank);
  std::vector<double> labels;
  for (const auto& l : derive_refinement_labels(m.ads[idx], m.bank)) labels.push_back(l.ad_related ? 1.0 : 0.0);
  const Matrix clip = m.clip(m.ads[idx].clip_id).features;
  const auto rr = gradient_check(refiner.params(), [&] {
    return ag::bce_with_logits(refiner.logits(ag::Tensor::constant(ex), ag::Tensor::constant(clip)), labels);
  }, 3);
  const double elapsed = seconds_since(t0);
  const bool pass = mr.worst <= 1e-4 && rr.worst <= 1e-4 && elapsed < 60.0;
  return {pass, "mapper max rel err " + fmt(mr.worst) + " over " + std::to_string(mr.checked) +
                    " entries, refiner " + fmt(rr.worst) + " over " + std::to_string(rr.checked) + ", " +
                    fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------- 2
Outcome shape_law(const Args&) {
  const VisualMapper mapper(MapperConfig::toy_profile(32));
  const std::size_t M = mapper.config().num_latent;
  Rng rng(2);
  ag::NoGradGuard g;
  std::size_t cases = 0;
  for (std::size_t f : {1, 4, 8, 64}) {
    if (mapper.map_visual(random_matrix(f, 32, rng)).rows() != M) return {false, "map_visual rows wrong at F=" + std::to_string(f)};
    for (std::size_t k : {0, 1, 3}) {
      std::vector<Matrix> past;
      for (std::size_t i = 0; i < k; ++i) past.push_back(random_matrix(f, 32, rng));
      if (f * (k + 1) > mapper.config().max_frames) continue;
      if (mapper.map_with_context(past, random_matrix(f, 32, rng)).rows() != M) {
        return {false, "map_with_context rows wrong at F=" + std::to_string(f) + " K=" + std::to_string(k)};
      }
      ++cases;
    }
  }
  MapperConfig c = MapperConfig::toy_profile(32);
  c.use_positional = false;
  const VisualMapper plain(c);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const Matrix f = random_matrix(2 + rng.below(30), 32, rng);
    std::vector<std::size_t> order(f.rows());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    Matrix shuffled(f.rows(), f.cols());
    for (std::size_t r = 0; r < order.size(); ++r)
      for (std::size_t col = 0; col < f.cols(); ++col) shuffled(r, col) = f(order[r], col);
    const Matrix a = plain.map_visual(f).value(), b = plain.map_visual(shuffled).value();
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return {worst <= 1e-6, std::to_string(cases) + " (F, K) shapes give M=" + std::to_string(M) +
                             " rows; max permutation deviation " + fmt(worst)};
}

// ---------------------------------------------------------------- 3
Outcome frozen_lm(const Args& a) {
  const ToyLM lm = load_lm(a.lm);
  const auto before = lm.params().checksum();
  const MovieDataset d = synth_dataset(31, 2, 6, 3);
  VisualMapper mapper(MapperConfig::toy_profile(32));
  TrainingConfig tc;
  tc.batch_size = 4;
  tc.epochs = 2;
  tc.context_depth = 1;
  tc.use_context_ads = true;
  tc.oracle_characters = true;
  train_narrator(mapper, lm, d, nullptr, tc);
  const bool same = lm.params().checksum() == before;

  Rng rng(3);
  ag::NoGradGuard g;
  std::size_t violations = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t len = 2 + rng.below(60);
    const Matrix seq = random_matrix(len, lm.profile().d_lm, rng);
    const std::size_t p = 1 + rng.below(len - 1);
    Matrix moved = seq;
    for (std::size_t r = p; r < len; ++r)
      for (std::size_t c = 0; c < moved.cols(); ++c) moved(r, c) += rng.normal();
    const Matrix x = lm.forward(ag::Tensor::constant(seq)).value();
    const Matrix y = lm.forward(ag::Tensor::constant(moved)).value();
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) violations += x(r, c) != y(r, c);
  }
  return {same && violations == 0, std::string("LM checksum ") + (same ? "unchanged" : "CHANGED") +
                                        " after training; " + std::to_string(violations) +
                                        " causality violations over 100 sequences"};
}

// ---------------------------------------------------------------- 4
Outcome overfit(const Args& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const ToyLM lm = load_lm(a.lm);
  const MovieDataset d = synth_dataset(41, 1, 8, 4);
  VisualMapper mapper(MapperConfig::toy_profile(32));
  TrainingConfig tc;
  tc.batch_size = 8;
  tc.epochs = 600;
  tc.learning_rate = 3e-3;
  tc.warmup_fraction = 0.05;
  tc.weight_decay = 0.0;
  tc.oracle_characters = true;
  train_narrator(mapper, lm, d, nullptr, tc);
  const std::size_t steps = tc.epochs;

  double nll = 0;
  std::size_t tokens = 0;
  {
    ag::NoGradGuard g;
    for (const auto& [id, m] : d.movies)
      for (std::size_t i = 0; i < m.ads.size(); ++i) {
        const PromptSequence p = assemble_prompt(mapper, lm, narration_context(d, m, i, 0, false, nullptr), 64);
        std::vector<int> ids = tokenize(m.ads[i].text);
        ids.push_back(lm.profile().eos_id);
        nll += autoregressive_loss(lm, p, ids).item();
        tokens += ids.size();
      }
  }
  nll /= static_cast<double>(tokens);
  GenerationOptions go;
  go.oracle_characters = true;
  const auto preds = generate_descriptions(mapper, lm, d, nullptr, go);
  std::size_t exact = 0, i = 0;
  for (const auto& [id, m] : d.movies)
    for (const auto& ad : m.ads) exact += preds[i++].text == ad.text;
  const double elapsed = seconds_since(t0);
  return {nll < 0.1 && exact == 8 && elapsed < 300.0,
          "per-token NLL " + fmt(nll) + ", " + std::to_string(exact) + "/8 exact after " + std::to_string(steps) +
              " steps, " + fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------- 5
Outcome contrastive(const Args&) {
  Rng rng(5);
  std::size_t negative = 0, nonzero_when_ordered = 0;
  for (int t = 0; t < 1000; ++t) {
    const double last = rng.uniform(-5, 0), cur = rng.uniform(-5, 0);
    const double l = contrastive_loss(last, cur);
    negative += l < 0;
    if (cur >= last && l != 0.0) ++nonzero_when_ordered;
  }
  const bool hand = contrastive_loss(-1.0, -2.0) == 1.0;
  LMProfile lp;
  lp.d_lm = 16;
  lp.num_heads = 2;
  lp.ffn_dim = 32;
  const ToyLM lm(lp);
  Rng r2(6);
  const PromptSequence p = build_prompt({}, ag::Tensor::constant(random_matrix(2, 16, r2)), {});
  const double first = example_loss(lm, p, "Lisa runs.", "", true).contrastive.item();
  return {negative == 0 && nonzero_when_ordered == 0 && hand && first == 0.0,
          std::to_string(negative) + " negative values, " + std::to_string(nonzero_when_ordered) +
              " non-zero with s_current >= s_last over 1000 pairs; (-1, -2) -> " + fmt(contrastive_loss(-1.0, -2.0)) +
              "; first clip -> " + fmt(first)};
}

// ---------------------------------------------------------------- 6, 7
struct RefinerRun {
  std::optional<CharacterRefiner> refiner;
  MovieDataset held_out;
};

RefinerRun& refiner_run() {
  static RefinerRun run;
  if (!run.refiner) {
    const MovieDataset train = synth_dataset(61, 10, 50, 6);
    run.refiner.emplace(train_refiner(train, RefineConfig::toy_profile(32), RefinerTrainingOptions{}));
    run.held_out = synth_dataset(62, 4, 50, 6);
  }
  return run;
}

Outcome refinement(const Args&) {
  const auto t0 = std::chrono::steady_clock::now();
  RefinerRun& run = refiner_run();
  const PrecisionRecall pr = evaluate_refiner(run.held_out, *run.refiner);
  const double p = pr.precision.value_or(0.0), r = pr.recall.value_or(0.0);
  return {p >= 0.9 && r >= 0.9, "held-out precision " + fmt(p) + ", recall " + fmt(r) + " at threshold " +
                                    fmt(run.refiner->config().threshold) + " (500 training clips, 6 characters per movie, " +
                                    fmt(seconds_since(t0)) + " s)"};
}

Outcome threshold(const Args&) {
  RefinerRun& run = refiner_run();
  CharacterRefiner r = *run.refiner;
  std::size_t clips = 0, increases = 0, at_low = 0, at_high = 0;
  for (const auto& [id, m] : run.held_out.movies)
    for (const auto& clip : m.clips) {
      std::size_t prev = m.bank.entries.size() + 1;
      for (double t = 0.5; t <= 0.9 + 1e-9; t += 0.05) {
        r.mutable_config().threshold = t;
        const std::size_t n = r.refine(m.bank, clip).size();
        increases += n > prev;
        if (t == 0.5) at_low += n;
        prev = n;
      }
      at_high += prev;
      ++clips;
    }
  return {increases == 0, std::to_string(clips) + " clips, " + std::to_string(increases) +
                              " increases; refined total " + std::to_string(at_low) + " at 0.5 vs " +
                              std::to_string(at_high) + " at 0.9"};
}

// ---------------------------------------------------------------- 8
Outcome metric_oracles(const Args& a) {
  std::ifstream cin_(a.fixtures + "/metric_corpus.json"), win(a.fixtures + "/metric_expected.json");
  const auto corpus = nlohmann::json::parse(cin_);
  const auto want = nlohmann::json::parse(win);
  MovieDataset d;
  std::vector<metrics::PredictionRow> rows, identical;
  std::vector<std::string> cands, refs;
  std::vector<CharacterBank> banks;
  for (const auto& m : corpus["movies"]) {
    Movie& movie = d.movies[m["movie_id"]];
    movie.bank.movie_id = m["movie_id"];
    for (const auto& n : m["characters"]) movie.bank.entries.push_back({n, "", {}, std::nullopt});
    std::int64_t i = 0;
    for (const auto& it : m["items"]) {
      movie.ads.push_back({it["ad_id"], m["movie_id"], "c", it["reference"], i++});
      rows.push_back({m["movie_id"], it["ad_id"], it["prediction"]});
      identical.push_back({m["movie_id"], it["ad_id"], it["reference"]});
      cands.push_back(it["prediction"]);
      refs.push_back(it["reference"]);
      banks.push_back(movie.bank);
    }
  }
  std::vector<std::vector<std::string>> ref_sets;
  for (const auto& r : refs) ref_sets.push_back({r});
  const auto c = metrics::cider(cands, ref_sets);
  double worst = 0;
  const auto dev = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& w = want["items"][i];
    dev(metrics::rouge_l(cands[i], refs[i]), w["rouge_l"]);
    dev(c.per_item[i], w["cider"]);
    const auto cr = metrics::critic(cands[i], refs[i], banks[i]);
    if (cr.has_value() == w["critic"].is_null()) return {false, "critic presence differs at item " + std::to_string(i)};
    if (cr) dev(*cr, w["critic"]);
  }
  const auto report = metrics::evaluate(d, rows, nullptr, 5, 16);
  dev(report.corpus.recall_at_k, want["recall"]["5/16"]);
  dev(report.corpus.rouge_l, want["corpus"]["rouge_l"]);
  dev(report.corpus.cider, want["corpus"]["cider"]);
  dev(*report.corpus.critic, want["corpus"]["critic"]);

  // Identical texts. CIDEr reaches 10 only where every n-gram order exists,
  // so that case uses the references of four or more tokens.
  const auto same = metrics::evaluate(d, identical, nullptr, 5, 16);
  std::vector<std::string> long_refs;
  for (const auto& r : refs)
    if (metrics::tokenize(r).size() >= 4) long_refs.push_back(r);
  std::vector<std::vector<std::string>> long_sets;
  for (const auto& r : long_refs) long_sets.push_back({r});
  const double cider_same = metrics::cider(long_refs, long_sets).corpus;
  const bool ceiling = std::abs(same.corpus.rouge_l - 1.0) < 1e-12 && std::abs(cider_same - 10.0) < 1e-9 &&
                       same.corpus.recall_at_k == 100.0 && *same.corpus.critic == 1.0;
  return {worst <= 1e-9 && ceiling, "max deviation from oracle " + fmt(worst) + " over " +
                                        std::to_string(cands.size()) + " items; identical texts give " +
                                        fmt(same.corpus.rouge_l) + " / " + fmt(cider_same) + " / " +
                                        fmt(same.corpus.recall_at_k) + " / " + fmt(*same.corpus.critic)};
}

// ---------------------------------------------------------------- 9
Outcome golden(const Args& a) {
  std::string want = io::read_file(a.fixtures + "/prompt_golden.txt");
  while (!want.empty() && (want.back() == '\n' || want.back() == '\r')) want.pop_back();
  const auto rows = [] { return ag::Tensor::constant(Matrix(30, 4)); };
  const std::vector<PromptCharacter> chars{{"Lisa", "R. Witherspoon", rows()}, {"Matty", "O. Wilson", rows()}};
  const PromptSequence p = build_prompt(chars, rows(), {});
  const std::string got = render_debug(p);
  const bool bos_after_colon = p.bos_position == p.segments.size() - 1 && p.bos_position > 0 &&
                               p.segments[p.bos_position - 1].text == ":";
  return {got == want && bos_after_colon, got == want ? "render matches golden; BOS follows \":\"" : "render: " + got};
}

// ---------------------------------------------------------------- 10
Outcome exemplar(const Args&) {
  Rng rng(10);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = t % 2 == 0 ? 1 : 5;
    const std::size_t dim = 2 + rng.below(15), rows = 1 + rng.below(20);
    const Matrix frames = random_matrix(rows, dim, rng);
    std::vector<double> portrait(dim);
    for (double& v : portrait) v = rng.normal();
    // Exhaustive: rank every frame by cosine, ties to the lower row.
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t c = 0; c < dim; ++c) {
        dot += portrait[c] * frames(r, c);
        na += portrait[c] * portrait[c];
        nb += frames(r, c) * frames(r, c);
      }
      sims.push_back({-dot / std::sqrt(na * nb), r});
    }
    std::sort(sims.begin(), sims.end());
    const std::size_t take = std::min(k, rows);
    std::vector<double> want(dim, 0.0);
    for (std::size_t i = 0; i < take; ++i)
      for (std::size_t c = 0; c < dim; ++c) want[c] += frames(sims[i].second, c) / static_cast<double>(take);
    const auto got = compute_exemplar(portrait, frames, k);
    for (std::size_t c = 0; c < dim; ++c) mismatches += std::abs(got[c] - want[c]) > 1e-12;
  }
  // Constructed ties: duplicate rows and scaled copies have equal cosine.
  Matrix tied(4, 3);
  const double base[] = {1, 2, 3};
  const double scale[] = {2, 1, 3, 1};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) tied(r, c) = base[c] * scale[r];
  const std::vector<double> portrait{1, 2, 3};
  const auto order = top_similar_frames(portrait, tied, 4);
  bool ties_ok = order == std::vector<std::size_t>{0, 1, 2, 3};
  for (int t = 0; t < 5; ++t) ties_ok = ties_ok && compute_exemplar(portrait, tied, 2) == std::vector<double>{1.5, 3, 4.5};
  return {mismatches == 0 && ties_ok, std::to_string(mismatches) + " mismatching entries over 100 instances (k in {1, 5}); ties " +
                                          (ties_ok ? "resolved to lower rows" : "NOT deterministic")};
}

// ---------------------------------------------------------------- 11
int run_in(const fs::path& dir, const std::string& cmd) {
  const std::string full = "cd '" + dir.string() + "' && " + cmd + " > cli.out 2>&1";
  return std::system(full.c_str());
}

Outcome determinism(const Args& a) {
  const fs::path root = fs::path(a.work) / "determinism";
  fs::remove_all(root);
  const std::string exe = fs::absolute(a.adgen).string();
  const std::vector<std::string> steps = {
      "synth --out data --movies 2 --clips-per-movie 10",
      "train-refiner --data data --out refiner.ckpt --steps 100 --batch-size 8",
      "train-narrator --data data --lm lm.ckpt --refiner refiner.ckpt --out mapper.ckpt --max-steps 12 --context-depth 1",
      "generate --data data --lm lm.ckpt --mapper mapper.ckpt --refiner refiner.ckpt --out predictions.jsonl "
      "--context-depth 1 --recurrent --workers 2",
      "evaluate --data data --predictions predictions.jsonl --out report.json --judge stub",
  };
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    fs::copy_file(a.lm, dir / "lm.ckpt");
    for (const auto& s : steps) {
      if (run_in(dir, "'" + exe + "' --seed 5 " + s) != 0) {
        return {false, "run " + std::string(run) + " failed at: " + s + "\n" + io::read_file(dir / "cli.out")};
      }
    }
  }
  std::vector<std::string> differing;
  for (const char* f : {"predictions.jsonl", "report.json", "mapper.ckpt", "refiner.ckpt"}) {
    if (io::read_file(root / "a" / f) != io::read_file(root / "b" / f)) differing.push_back(f);
  }
  std::string detail = differing.empty() ? "predictions.jsonl, report.json and checkpoints byte-identical"
                                         : "differing:";
  for (const auto& f : differing) detail += " " + f;
  return {differing.empty(), detail};
}

// ---------------------------------------------------------------- 12
Outcome context_reduction(const Args& a) {
  const VisualMapper mapper(MapperConfig::toy_profile(32));
  Rng rng(12);
  ag::NoGradGuard g;
  bool bitwise = true;
  for (std::size_t f : {1, 4, 8, 64}) {
    const Matrix cur = random_matrix(f, 32, rng);
    bitwise = bitwise && mapper.map_with_context({}, cur).value() == mapper.map_visual(cur).value();
  }
  const ToyLM lm = load_lm(a.lm);
  const MovieDataset d = synth_dataset(12, 2, 6, 3);
  std::size_t audited = 0, changed = 0, bad = 0;
  for (const auto& [id, m] : d.movies)
    for (std::size_t i = 0; i < m.ads.size(); ++i) {
      const PromptSequence off = assemble_prompt(mapper, lm, narration_context(d, m, i, 1, false, nullptr), 64);
      const PromptSequence on = assemble_prompt(mapper, lm, narration_context(d, m, i, 1, true, nullptr), 64);
      std::vector<const PromptSegment*> rest_off, rest_on;
      std::size_t ctx_on = 0;
      for (const auto& s : off.segments) {
        if (s.tag == SegmentTag::ContextAd) ++bad;  // never present without the flag
        rest_off.push_back(&s);
      }
      for (const auto& s : on.segments) {
        if (s.tag == SegmentTag::ContextAd) ++ctx_on;
        else rest_on.push_back(&s);
      }
      if (rest_on.size() != rest_off.size()) {
        ++bad;
        continue;
      }
      for (std::size_t j = 0; j < rest_on.size(); ++j) {
        const PromptSegment& x = *rest_on[j];
        const PromptSegment& y = *rest_off[j];
        const bool same = x.kind == y.kind && x.tag == y.tag && x.text == y.text &&
                          (x.kind != SegmentKind::Embedding || x.embeddings.value() == y.embeddings.value());
        bad += !same;
      }
      if (ctx_on != (i > 0 ? 1u : 0u)) ++bad;
      changed += ctx_on > 0;
      ++audited;
    }
  return {bitwise && bad == 0 && changed > 0,
          std::string("K=0 ") + (bitwise ? "bitwise equal" : "DIFFERS") + "; " + std::to_string(audited) +
              " prompts audited, " + std::to_string(changed) + " gained context segments, " + std::to_string(bad) +
              " other differences"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Args a;
  app.add_option("--adgen", a.adgen, "Path to the adgen executable")->required();
  app.add_option("--lm", a.lm, "Pretrained language-model checkpoint")->required();
  app.add_option("--fixtures", a.fixtures)->required();
  app.add_option("--work", a.work, "Scratch directory")->required();
  app.add_option("--only", a.only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(const Args&)>>> criteria = {
      {"gradient correctness", gradients},   {"shape law", shape_law},
      {"frozen language model", frozen_lm},  {"overfit", overfit},
      {"contrastive loss", contrastive},     {"refinement learnability", refinement},
      {"threshold monotonicity", threshold}, {"metric oracles", metric_oracles},
      {"prompt golden", golden},             {"exemplar oracle", exemplar},
      {"determinism", determinism},          {"context reduction", context_reduction},
  };
  fs::create_directories(a.work);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!a.only.empty() && std::find(a.only.begin(), a.only.end(), n) == a.only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second(a);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << n << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
