#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adgen/data_model.hpp"
#include "adgen/errors.hpp"

namespace adgen {

inline constexpr std::size_t kDefaultExemplarFrames = 5;

class DegenerateSimilarityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Row indices of the min(k, rows) frames most cosine-similar to `portrait`,
// best first. Equal similarities keep the lower row first.
std::vector<std::size_t> top_similar_frames(std::span<const double> portrait, const Matrix& frames,
                                            std::size_t k);

// Mean of the frames selected by top_similar_frames.
std::vector<double> compute_exemplar(std::span<const double> portrait, const Matrix& frames,
                                     std::size_t k = kDefaultExemplarFrames);

// All frames of a movie, clips ordered by clip_id then frame index. This
// ordering is what resolves similarity ties.
Matrix movie_frames(const Movie& movie);

MovieDataset populate_exemplars(MovieDataset dataset, std::size_t k = kDefaultExemplarFrames);

}  // namespace adgen
