#pragma once

// Deterministic synthetic movie corpus. AD texts come from a small grammar
// over character names and actions. Each clip opens with close-ups of the
// characters its AD mentions, followed by wide shots holding the action
// direction and those same portraits, so both refinement and narration are
// learnable.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adgen/data_model.hpp"

namespace adgen {

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t movies = 2;
  std::size_t clips_per_movie = 12;
  std::size_t characters_per_movie = 4;
  std::size_t dim = 32;
  std::size_t frames_per_clip = 8;
  Split split = Split::Train;
};

struct SynthDataset {
  MovieDataset dataset;
  // ad_id → character names the generator put into that AD.
  std::map<std::string, std::set<std::string>> mentioned;
};

struct CastMember {
  std::string character;
  std::string actor;
};

// Characters are drawn from this pool; first names are distinct.
const std::vector<CastMember>& cast_pool();

SynthDataset synthesize(const SynthOptions& options);

// Sentences from the same grammar with names from the whole pool; used as
// the language-model pretraining corpus.
std::vector<std::string> grammar_sentences(std::uint64_t seed, std::size_t count);

}  // namespace adgen
