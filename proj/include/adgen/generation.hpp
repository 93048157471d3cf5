#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adgen/char_refine.hpp"
#include "adgen/data_model.hpp"
#include "adgen/language_model.hpp"
#include "adgen/visual_mapper.hpp"

namespace adgen {

enum class ContextMode { None, Oracle, Recurrent };

struct GenerationOptions {
  std::size_t context_depth = 0;
  ContextMode context_mode = ContextMode::None;
  bool oracle_characters = false;
  std::size_t max_length = 64;
  std::size_t workers = 1;
};

struct Prediction {
  std::string movie_id;
  std::string clip_id;
  std::string ad_id;
  std::string text;
  double s = 0.0;  // mean log-probability of the decoded tokens, EOS included
  std::vector<std::string> characters;
  std::string prompt_hash;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// One prediction per AD record, ordered by movie id then AD index. Results
// do not depend on the worker count.
std::vector<Prediction> generate_descriptions(const VisualMapper& mapper, const ToyLM& lm,
                                              const MovieDataset& dataset,
                                              const CharacterRefiner* refiner,
                                              const GenerationOptions& options);

}  // namespace adgen
