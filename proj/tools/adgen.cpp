// adgen: dataset synthesis, training, refinement, generation and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adgen/char_refine.hpp"
#include "adgen/checkpoint.hpp"
#include "adgen/data_model.hpp"
#include "adgen/errors.hpp"
#include "adgen/exemplar.hpp"
#include "adgen/generation.hpp"
#include "adgen/io.hpp"
#include "adgen/kernels.hpp"
#include "adgen/lm_pretrain.hpp"
#include "adgen/metrics.hpp"
#include "adgen/synth.hpp"
#include "adgen/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace adgen;

namespace {

constexpr const char* kMetricVersions[][2] = {
    {"rouge_l", "lcs-f/beta2=1.2/v1"},
    {"cider", "tfidf-cosine/n=1..4/idf=eval-refs/x10/v1"},
    {"recall_at_k", "token-f1/window=centered-clipped/ties=lower-index/v1"},
    {"critic-nm", "name-iou/no-coref/both-empty-excluded/v1"},
};

json option_values(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto r = opt->reduced_results();
      out[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (opt->get_expected_max() == 0) {
      out[name] = opt->get_default_str().empty() ? "false" : opt->get_default_str();
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

// Every option of the root and the selected subcommand, flag values taking
// precedence over the config file over defaults (CLI11 resolves that).
json effective_config(const CLI::App& root, const CLI::App& sub) {
  return {{"command", sub.get_name()}, {"global", option_values(root)}, {"options", option_values(sub)}};
}

MovieDataset load_prepared(const fs::path& dir, std::size_t k) {
  MovieDataset d = load_dataset(dir);
  bool missing = false;
  for (const auto& [id, m] : d.movies) {
    for (const auto& e : m.bank.entries) missing = missing || !e.exemplar;
  }
  return missing ? populate_exemplars(std::move(d), k) : d;
}

void write_jsonl(const fs::path& path, const json& header, const std::vector<json>& rows) {
  std::string out = json{{"header", header}}.dump() + "\n";
  for (const auto& r : rows) out += r.dump() + "\n";
  io::write_file_atomic(path, out);
}

std::vector<json> read_jsonl_rows(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("header")) continue;
    rows.push_back(std::move(j));
  }
  return rows;
}

void check_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw ValidationError("output '" + path.string() + "' exists; pass --force to overwrite");
  }
}

class LogFile {
 public:
  LogFile(const std::string& path, const json& header) : path_(path) {
    if (path_.empty()) return;
    out_.open(path_ + ".tmp", std::ios::binary | std::ios::trunc);
    if (!out_) throw ValidationError("cannot write log '" + path_ + "'");
    out_ << json{{"header", header}}.dump() << "\n";
  }
  void write(const json& j) {
    if (out_.is_open()) out_ << j.dump() << "\n";
  }
  void close() {
    if (!out_.is_open()) return;
    out_.close();
    fs::rename(path_ + ".tmp", path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "eval") return Split::Eval;
  throw ValidationError("split must be 'train' or 'eval', got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-description generation pipeline over precomputed frame features."};
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  std::size_t exemplar_frames = kDefaultExemplarFrames;
  std::string kernels = "auto";
  app.add_option("--seed", seed, "Seed for every stochastic choice");
  app.add_option("--exemplar-frames", exemplar_frames, "Top-k frames averaged into each exemplar")
      ->check(CLI::PositiveNumber);
  app.add_option("--kernels", kernels, "Kernel backend")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic dataset");
  SynthOptions so;
  std::string synth_out, synth_split = "train";
  bool force = false;
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--movies", so.movies);
  synth->add_option("--clips-per-movie", so.clips_per_movie);
  synth->add_option("--characters-per-movie", so.characters_per_movie);
  synth->add_option("--dim", so.dim)->check(CLI::PositiveNumber);
  synth->add_option("--frames-per-clip", so.frames_per_clip)->check(CLI::PositiveNumber);
  synth->add_option("--split", synth_split)->check(CLI::IsMember({"train", "eval"}));
  synth->add_flag("--force", force, "Overwrite an existing output directory");

  // lm-init
  auto* lm_init = app.add_subcommand("lm-init", "Pretrain and freeze the toy language model");
  PretrainOptions po;
  std::size_t corpus_size = 5000;
  std::string lm_out, lm_log;
  lm_init->add_option("--out", lm_out, "Checkpoint path")->required();
  lm_init->add_option("--steps", po.steps);
  lm_init->add_option("--batch-size", po.batch_size)->check(CLI::PositiveNumber);
  lm_init->add_option("--lr", po.learning_rate)->check(CLI::PositiveNumber);
  lm_init->add_option("--prefix-latents", po.prefix_latents)->check(CLI::PositiveNumber);
  lm_init->add_option("--corpus-size", corpus_size)->check(CLI::PositiveNumber);
  lm_init->add_option("--log", lm_log, "Line-delimited training log");

  // train-refiner
  auto* train_ref = app.add_subcommand("train-refiner", "Train the character-refinement classifier");
  RefinerTrainingOptions ro;
  std::string ref_data, ref_out, ref_log, ref_profile = "toy";
  double threshold = 0.5;
  std::size_t ref_blocks = 3;
  train_ref->add_option("--data", ref_data)->required();
  train_ref->add_option("--out", ref_out)->required();
  train_ref->add_option("--steps", ro.steps);
  train_ref->add_option("--batch-size", ro.batch_size)->check(CLI::PositiveNumber);
  train_ref->add_option("--lr", ro.learning_rate)->check(CLI::PositiveNumber);
  train_ref->add_option("--blocks", ref_blocks)->check(CLI::PositiveNumber);
  train_ref->add_option("--threshold", threshold);
  train_ref->add_option("--profile", ref_profile)->check(CLI::IsMember({"toy", "paper"}));
  train_ref->add_option("--log", ref_log);

  // train-narrator
  auto* train_nar = app.add_subcommand("train-narrator", "Train the visual mapping network");
  TrainingConfig tc;
  tc.batch_size = 8;
  tc.epochs = 40;
  std::string nar_data, nar_lm, nar_refiner, nar_out, nar_log, nar_profile = "toy";
  std::size_t num_latent = 0;
  bool share_networks = false, no_positional = false;
  train_nar->add_option("--data", nar_data)->required();
  train_nar->add_option("--lm", nar_lm)->required();
  train_nar->add_option("--refiner", nar_refiner, "Refiner checkpoint (not needed with --oracle-characters)");
  train_nar->add_option("--out", nar_out, "Mapper checkpoint, rewritten after every epoch")->required();
  train_nar->add_option("--epochs", tc.epochs);
  train_nar->add_option("--batch-size", tc.batch_size)->check(CLI::PositiveNumber);
  train_nar->add_option("--lr", tc.learning_rate)->check(CLI::PositiveNumber);
  train_nar->add_option("--warmup", tc.warmup_fraction);
  train_nar->add_option("--weight-decay", tc.weight_decay);
  train_nar->add_option("--max-steps", tc.max_steps);
  train_nar->add_option("--context-depth", tc.context_depth);
  train_nar->add_flag("--use-context-ads", tc.use_context_ads);
  train_nar->add_flag("--contrastive,!--no-contrastive", tc.use_contrastive);
  train_nar->add_flag("--oracle-characters", tc.oracle_characters);
  train_nar->add_option("--threshold", threshold, "Overrides the refiner checkpoint's threshold");
  train_nar->add_option("--num-latent", num_latent, "Latent count (profile default when 0)");
  train_nar->add_flag("--share-networks", share_networks, "One mapping network for video and images");
  train_nar->add_flag("--no-positional", no_positional);
  train_nar->add_option("--profile", nar_profile)->check(CLI::IsMember({"toy", "small", "large"}));
  train_nar->add_option("--log", nar_log);

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "Write refined character lists per AD");
  std::string rf_data, rf_refiner, rf_out;
  refine_cmd->add_option("--data", rf_data)->required();
  refine_cmd->add_option("--refiner", rf_refiner)->required();
  refine_cmd->add_option("--out", rf_out)->required();
  refine_cmd->add_option("--threshold", threshold);

  // generate
  auto* gen = app.add_subcommand("generate", "Decode one AD per clip");
  GenerationOptions go;
  std::string g_data, g_lm, g_mapper, g_refiner, g_out;
  bool recurrent = false, oracle_context = false, g_context_ads = false;
  gen->add_option("--data", g_data)->required();
  gen->add_option("--lm", g_lm)->required();
  gen->add_option("--mapper", g_mapper)->required();
  gen->add_option("--refiner", g_refiner);
  gen->add_option("--out", g_out)->required();
  gen->add_option("--context-depth", go.context_depth);
  gen->add_flag("--use-context-ads", g_context_ads, "Ground-truth past ADs as context (same as --oracle-context)");
  gen->add_flag("--oracle-context", oracle_context);
  gen->add_flag("--recurrent", recurrent, "Feed generated ADs back as context");
  gen->add_flag("--oracle-characters", go.oracle_characters);
  gen->add_option("--threshold", threshold);
  gen->add_option("--max-length", go.max_length)->check(CLI::PositiveNumber);
  gen->add_option("--workers", go.workers)->check(CLI::PositiveNumber);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against reference ADs");
  std::string e_data, e_pred, e_out, judge = "none";
  std::size_t k = 5, window = 16;
  eval->add_option("--data", e_data)->required();
  eval->add_option("--predictions", e_pred)->required();
  eval->add_option("--out", e_out)->required();
  eval->add_option("--judge", judge)->check(CLI::IsMember({"none", "stub", "http"}));
  eval->add_option("--k", k)->check(CLI::PositiveNumber);
  eval->add_option("--window", window)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (kernels == "scalar") kernels::select(kernels::Backend::Scalar);
    if (kernels == "avx2") kernels::select(kernels::Backend::Avx2);
    const CLI::App* sub = app.get_subcommands().front();
    const json config = effective_config(app, *sub);

    if (sub == synth) {
      so.seed = seed;
      so.split = parse_split(synth_split);
      check_output(synth_out, force);
      const SynthDataset sd = synthesize(so);
      write_dataset(sd.dataset, synth_out);
      json labels = json::object();
      for (const auto& [ad, names] : sd.mentioned) labels[ad] = names;
      io::write_file_atomic(fs::path(synth_out) / "generator.json",
                            json{{"config", config}, {"mentioned", labels}}.dump(1) + "\n");
      std::printf("wrote %zu movies to %s\n", sd.dataset.movies.size(), synth_out.c_str());
    } else if (sub == lm_init) {
      po.seed = seed;
      LMProfile profile = LMProfile::toy();
      profile.seed = seed;
      std::vector<PretrainCast> cast;
      for (const auto& c : cast_pool()) cast.push_back({c.character, c.actor});
      const auto corpus = grammar_sentences(seed ^ 0xc0ffeeULL, corpus_size);
      LogFile log(lm_log, config);
      const ToyLM lm = pretrain_lm(profile, corpus, cast, po, [&](const PretrainLogRecord& r) {
        log.write({{"step", r.step}, {"lr", r.learning_rate}, {"nll", r.nll_per_token}});
      });
      log.close();
      save_lm(lm_out, lm, po.steps);
      std::printf("wrote %s (params checksum %s)\n", lm_out.c_str(), io::hex64(lm.params().checksum()).c_str());
    } else if (sub == train_ref) {
      const MovieDataset data = load_prepared(ref_data, exemplar_frames);
      RefineConfig rc = ref_profile == "toy" ? RefineConfig::toy_profile(data.encoder_dim) : RefineConfig{};
      rc.input_dim = data.encoder_dim;
      rc.num_blocks = ref_blocks;
      rc.threshold = threshold;
      rc.seed = seed;
      ro.seed = seed;
      LogFile log(ref_log, config);
      const CharacterRefiner refiner = train_refiner(data, rc, ro, [&](const RefinerLogRecord& r) {
        log.write({{"step", r.step}, {"lr", r.learning_rate}, {"loss", r.loss}});
      });
      log.close();
      save_refiner(ref_out, refiner, ro.steps);
      const PrecisionRecall pr = evaluate_refiner(data, refiner);
      std::printf("precision %s recall %s\n",
                  pr.precision ? std::to_string(*pr.precision).c_str() : "n/a",
                  pr.recall ? std::to_string(*pr.recall).c_str() : "n/a");
    } else if (sub == train_nar) {
      const ToyLM lm = load_lm(nar_lm);
      const MovieDataset data = load_prepared(nar_data, exemplar_frames);
      MapperConfig mc = nar_profile == "toy"     ? MapperConfig::toy_profile(data.encoder_dim)
                        : nar_profile == "small" ? MapperConfig::small_profile()
                                                 : MapperConfig::large_profile();
      mc.input_dim = data.encoder_dim;
      if (num_latent > 0) mc.num_latent = num_latent;
      mc.share_networks = share_networks;
      mc.use_positional = !no_positional;
      mc.seed = seed;
      mc.validate();
      check_compatible(mc, lm.profile());
      std::optional<CharacterRefiner> refiner;
      if (!nar_refiner.empty()) {
        refiner = load_refiner(nar_refiner);
        if (train_nar->count("--threshold")) refiner->mutable_config().threshold = threshold;
        refiner->mutable_config().validate();
      }
      tc.seed = seed;
      VisualMapper mapper(mc);
      LogFile log(nar_log, config);
      TrainingHooks hooks;
      hooks.on_step = [&](const TrainingLogRecord& r) {
        log.write({{"step", r.step},
                   {"epoch", r.epoch},
                   {"lr", r.learning_rate},
                   {"auto", r.loss.autoregressive},
                   {"contrastive", r.loss.contrastive},
                   {"total", r.loss.total},
                   {"wall_time", r.wall_time}});
      };
      hooks.on_epoch = [&](std::size_t, const VisualMapper& m, std::size_t step) { save_mapper(nar_out, m, step); };
      train_narrator(mapper, lm, data, refiner ? &*refiner : nullptr, tc, hooks);
      log.close();
      if (!fs::exists(nar_out)) save_mapper(nar_out, mapper, 0);
      const LossBreakdown loss = evaluate_losses(mapper, lm, data, refiner ? &*refiner : nullptr, tc);
      std::printf("final mean auto %.6f contrastive %.6f\n", loss.autoregressive, loss.contrastive);
    } else if (sub == refine_cmd) {
      const MovieDataset data = load_prepared(rf_data, exemplar_frames);
      CharacterRefiner refiner = load_refiner(rf_refiner);
      if (refine_cmd->count("--threshold")) refiner.mutable_config().threshold = threshold;
      refiner.mutable_config().validate();
      std::vector<json> rows;
      for (const auto& [movie_id, movie] : data.movies) {
        for (const auto& ad : movie.ads) {
          json row{{"movie_id", movie_id}, {"clip_id", ad.clip_id}, {"ad_id", ad.ad_id}};
          std::vector<std::string> names;
          std::vector<double> probs;
          if (!movie.bank.entries.empty()) {
            probs = refiner.score_characters(exemplar_matrix(movie.bank), movie.clip(ad.clip_id).features);
            for (std::size_t i = 0; i < probs.size(); ++i) {
              if (probs[i] > refiner.config().threshold) names.push_back(movie.bank.entries[i].character_name);
            }
          }
          row["probabilities"] = probs;
          row["characters"] = names;
          rows.push_back(std::move(row));
        }
      }
      write_jsonl(rf_out, config, rows);
    } else if (sub == gen) {
      const ToyLM lm = load_lm(g_lm);
      const VisualMapper mapper = load_mapper(g_mapper);
      check_compatible(mapper.config(), lm.profile());
      const MovieDataset data = load_prepared(g_data, exemplar_frames);
      std::optional<CharacterRefiner> refiner;
      if (!g_refiner.empty()) {
        refiner = load_refiner(g_refiner);
        if (gen->count("--threshold")) refiner->mutable_config().threshold = threshold;
        refiner->mutable_config().validate();
      }
      if (recurrent && (oracle_context || g_context_ads)) {
        throw ValidationError("--recurrent cannot be combined with --oracle-context");
      }
      go.context_mode = recurrent                         ? ContextMode::Recurrent
                        : (oracle_context || g_context_ads) ? ContextMode::Oracle
                                                            : ContextMode::None;
      const auto preds = generate_descriptions(mapper, lm, data, refiner ? &*refiner : nullptr, go);
      std::vector<json> rows;
      for (const auto& p : preds) {
        rows.push_back({{"movie_id", p.movie_id},
                        {"clip_id", p.clip_id},
                        {"ad_id", p.ad_id},
                        {"text", p.text},
                        {"s", p.s},
                        {"characters", p.characters},
                        {"prompt_hash", p.prompt_hash}});
      }
      write_jsonl(g_out, config, rows);
      std::printf("wrote %zu predictions to %s\n", rows.size(), g_out.c_str());
    } else if (sub == eval) {
      const MovieDataset data = load_dataset(e_data);
      std::vector<metrics::PredictionRow> preds;
      for (const auto& r : read_jsonl_rows(e_pred)) {
        try {
          preds.push_back({r.at("movie_id").get<std::string>(), r.at("ad_id").get<std::string>(),
                           r.at("text").get<std::string>()});
        } catch (const json::exception& ex) {
          throw ValidationError(e_pred + ": " + ex.what());
        }
      }
      std::unique_ptr<metrics::JudgeClient> client;
      if (judge == "stub") client = std::make_unique<metrics::StubJudge>();
      if (judge == "http") client = std::make_unique<metrics::HttpJudge>(metrics::HttpJudge::from_environment());
      const metrics::MetricReport report = metrics::evaluate(data, preds, client.get(), k, window);
      const auto values = [](const metrics::MetricValues& v) {
        json j{{"count", v.count},
               {"rouge_l", v.rouge_l},
               {"cider", v.cider},
               {"recall_at_k_within_n", v.recall_at_k},
               {"critic-nm", v.critic ? json(*v.critic) : json(nullptr)}};
        if (v.judge) j["judge"] = *v.judge;
        return j;
      };
      json out;
      out["config"] = config;
      json versions = json::object();
      for (const auto& [name, version] : kMetricVersions) versions[name] = version;
      out["metric_versions"] = versions;
      out["recall_window"] = {{"k", k}, {"n", window}, {"construction", "centered on the reference index, clipped to the movie"}};
      if (client) out["judge"] = client->name();
      json per_movie = json::object();
      for (const auto& [id, v] : report.per_movie) per_movie[id] = values(v);
      out["per_movie"] = per_movie;
      out["corpus"] = values(report.corpus);
      const std::string pred_text = io::read_file(e_pred);
      const json first = json::parse(pred_text.substr(0, pred_text.find('\n')), nullptr, false);
      if (first.is_object() && first.contains("header")) out["predictions_config"] = first["header"];
      io::write_file_atomic(e_out, out.dump(2) + "\n");
      std::printf("rouge_l %.4f cider %.4f R@%zu/%zu %.2f\n", report.corpus.rouge_l, report.corpus.cider, k,
                  window, report.corpus.recall_at_k);
    }
    return 0;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
