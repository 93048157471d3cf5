#include "adgen/synth.hpp"

#include <cmath>
#include <cstdio>

#include "adgen/errors.hpp"
#include "adgen/rng.hpp"

namespace adgen {
namespace {

const std::vector<std::string>& solo_actions() {
  static const std::vector<std::string> v = {"smiles",      "runs",     "walks away", "sits down",
                                             "turns around", "nods",     "laughs",     "looks up"};
  return v;
}

const std::vector<std::string>& pair_actions() {
  static const std::vector<std::string> v = {"glares at", "hugs",     "follows",
                                             "kisses",    "talks to", "waves at"};
  return v;
}

std::string first_word(const std::string& s) { return s.substr(0, s.find(' ')); }

std::string two_digit(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, i);
  return buf;
}

std::string three_digit(const std::string& prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return prefix + buf;
}

// Unit-norm-ish random direction rounded to float precision so datasets
// survive the 32-bit feature file unchanged.
std::vector<double> direction(std::size_t dim, Rng& rng, double scale = 1.0) {
  std::vector<double> v(dim);
  const double s = scale / std::sqrt(static_cast<double>(dim));
  for (double& x : v) x = static_cast<float>(s * rng.normal());
  return v;
}

struct Sentence {
  std::string text;
  std::vector<std::size_t> who;  // indices into the cast used
  std::size_t action = 0;        // index into solo or pair actions
  bool paired = false;
};

Sentence make_sentence(std::size_t cast_size, Rng& rng,
                       const std::vector<std::string>& first_names) {
  std::size_t mention = 0;
  if (cast_size >= 1) {
    const double u = rng.uniform();
    mention = u < 0.2 ? 0 : (u < 0.65 || cast_size < 2 ? 1 : 2);
  }
  Sentence s;
  if (mention == 2) {
    const std::size_t a = rng.below(cast_size);
    std::size_t b = rng.below(cast_size - 1);
    if (b >= a) ++b;
    s.paired = true;
    s.action = rng.below(pair_actions().size());
    s.who = {a, b};
    s.text = first_names[a] + " " + pair_actions()[s.action] + " " + first_names[b] + ".";
  } else {
    s.action = rng.below(solo_actions().size());
    if (mention == 1) {
      const std::size_t a = rng.below(cast_size);
      s.who = {a};
      s.text = first_names[a] + " " + solo_actions()[s.action] + ".";
    } else {
      s.text = "Someone " + solo_actions()[s.action] + ".";
    }
  }
  return s;
}

}  // namespace

const std::vector<CastMember>& cast_pool() {
  static const std::vector<CastMember> pool = {
      {"Lisa Jorgenson", "R. Whitfield"}, {"Matty Reynolds", "O. Wilmot"},
      {"George Madison", "P. Rudge"},     {"Annie Cole", "K. Hadley"},
      {"Nora Quinn", "T. Marsh"},         {"Oscar Bell", "D. Pryor"},
      {"Ruth Adler", "M. Okafor"},        {"Felix Hart", "J. Lindqvist"},
      {"Clara Voss", "E. Brandt"},        {"Hugo Finch", "S. Achebe"},
      {"Ivy Monroe", "L. Castell"},       {"Tobias Crane", "N. Varga"},
  };
  return pool;
}

SynthDataset synthesize(const SynthOptions& o) {
  if (o.dim == 0 || o.frames_per_clip == 0) throw ValidationError("synth: dim and frames must be positive");
  if (o.characters_per_movie > cast_pool().size()) {
    throw ValidationError("synth: at most " + std::to_string(cast_pool().size()) +
                          " characters per movie");
  }
  Rng rng(o.seed);
  SynthDataset out;
  out.dataset.encoder_dim = o.dim;
  out.dataset.split = o.split;

  std::vector<std::vector<double>> solo_dirs, pair_dirs;
  for (std::size_t i = 0; i < solo_actions().size(); ++i) solo_dirs.push_back(direction(o.dim, rng));
  for (std::size_t i = 0; i < pair_actions().size(); ++i) pair_dirs.push_back(direction(o.dim, rng));

  for (std::size_t m = 0; m < o.movies; ++m) {
    const std::string movie_id = two_digit("movie", m);
    const std::string tag = "m" + std::to_string(m);
    Movie& movie = out.dataset.movies[movie_id];
    movie.bank.movie_id = movie_id;

    // Choose the cast without replacement from the pool.
    std::vector<std::size_t> pool_idx(cast_pool().size());
    for (std::size_t i = 0; i < pool_idx.size(); ++i) pool_idx[i] = i;
    rng.shuffle(pool_idx.begin(), pool_idx.end());
    std::vector<std::string> first_names;
    std::vector<std::vector<double>> portraits;
    for (std::size_t c = 0; c < o.characters_per_movie; ++c) {
      const CastMember& cm = cast_pool()[pool_idx[c]];
      CharacterEntry e;
      e.character_name = cm.character;
      e.actor_name = cm.actor;
      e.portrait = direction(o.dim, rng);
      portraits.push_back(e.portrait);
      first_names.push_back(first_word(cm.character));
      movie.bank.entries.push_back(std::move(e));
    }
    const std::vector<double> style = direction(o.dim, rng, 0.3);

    for (std::size_t k = 0; k < o.clips_per_movie; ++k) {
      const Sentence s = make_sentence(first_names.size(), rng, first_names);
      VideoClip clip;
      clip.clip_id = three_digit(tag + "_c", k);
      clip.movie_id = movie_id;
      clip.start = static_cast<float>(10.0 * static_cast<double>(k) + rng.uniform(0.0, 2.0));
      clip.end = static_cast<float>(clip.start + 3.0 + rng.uniform(0.0, 2.0));
      clip.features = Matrix(o.frames_per_clip, o.dim);
      const auto& action = s.paired ? pair_dirs[s.action] : solo_dirs[s.action];
      const double noise = 0.3 / std::sqrt(static_cast<double>(o.dim));
      // The first frames are close-ups, two per mentioned character; the
      // rest are wide shots of the action with everyone in it.
      const std::size_t close_ups = std::min(o.frames_per_clip - 1, 2 * s.who.size());
      for (std::size_t f = 0; f < o.frames_per_clip; ++f) {
        const bool close = f < close_ups;
        for (std::size_t d = 0; d < o.dim; ++d) {
          double v = (close ? 0.3 : 1.0) * style[d] + (close ? 0.2 : 0.8) * action[d] + noise * rng.normal();
          if (close) {
            v += (1.0 + 0.1 * rng.normal()) * portraits[s.who[f % s.who.size()]][d];
          } else {
            for (std::size_t who : s.who) v += (0.7 + 0.1 * rng.normal()) * portraits[who][d];
          }
          clip.features(f, d) = static_cast<float>(v);
        }
      }
      ADRecord ad;
      ad.ad_id = three_digit(tag + "_ad", k);
      ad.movie_id = movie_id;
      ad.clip_id = clip.clip_id;
      ad.text = s.text;
      ad.index = static_cast<std::int64_t>(k);
      std::set<std::string> names;
      for (std::size_t who : s.who) names.insert(movie.bank.entries[who].character_name);
      out.mentioned[ad.ad_id] = std::move(names);
      movie.clips.push_back(std::move(clip));
      movie.ads.push_back(std::move(ad));
    }
  }
  validate(out.dataset);
  return out;
}

std::vector<std::string> grammar_sentences(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<std::string> names;
  for (const auto& c : cast_pool()) names.push_back(first_word(c.character));
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_sentence(names.size(), rng, names).text);
  return out;
}

}  // namespace adgen
