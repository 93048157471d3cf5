#include "adgen/exemplar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "adgen/kernels.hpp"

namespace adgen {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const auto& k = kernels::active();
  const double na = std::sqrt(k.dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(k.dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) throw DegenerateSimilarityError("cosine of a zero-norm vector");
  return k.dot(a.data(), b.data(), a.size()) / (na * nb);
}

std::vector<std::size_t> top_similar_frames(std::span<const double> portrait, const Matrix& frames,
                                            std::size_t k) {
  if (k == 0) throw ValidationError("exemplar: k must be at least 1");
  if (frames.rows() == 0) throw ValidationError("exemplar: no movie frames");
  if (portrait.size() != frames.cols()) {
    throw DimensionError("exemplar: portrait has " + std::to_string(portrait.size()) +
                         " values, frames have " + std::to_string(frames.cols()));
  }
  std::vector<double> sims(frames.rows());
  for (std::size_t i = 0; i < frames.rows(); ++i) {
    try {
      sims[i] = cosine_similarity(portrait, frames.row(i));
    } catch (const DegenerateSimilarityError&) {
      throw DegenerateSimilarityError("exemplar: zero-norm " +
                                      std::string(std::all_of(portrait.begin(), portrait.end(),
                                                              [](double v) { return v == 0.0; })
                                                      ? "portrait"
                                                      : "frame " + std::to_string(i)));
    }
  }
  std::vector<std::size_t> order(frames.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
                    });
  order.resize(take);
  return order;
}

std::vector<double> compute_exemplar(std::span<const double> portrait, const Matrix& frames,
                                     std::size_t k) {
  const auto picked = top_similar_frames(portrait, frames, k);
  std::vector<double> mean(frames.cols(), 0.0);
  for (std::size_t idx : picked) {
    kernels::active().axpy(1.0, frames.row(idx).data(), mean.data(), mean.size());
  }
  for (double& v : mean) v /= static_cast<double>(picked.size());
  return mean;
}

Matrix movie_frames(const Movie& movie) {
  std::vector<const VideoClip*> clips;
  for (const auto& c : movie.clips) clips.push_back(&c);
  std::sort(clips.begin(), clips.end(),
            [](const VideoClip* a, const VideoClip* b) { return a->clip_id < b->clip_id; });
  std::vector<Matrix> parts;
  parts.reserve(clips.size());
  for (const auto* c : clips) parts.push_back(c->features);
  return vstack(parts);
}

MovieDataset populate_exemplars(MovieDataset dataset, std::size_t k) {
  for (auto& [movie_id, movie] : dataset.movies) {
    if (movie.bank.entries.empty()) continue;
    const Matrix frames = movie_frames(movie);
    for (auto& entry : movie.bank.entries) {
      try {
        entry.exemplar = compute_exemplar(entry.portrait, frames, k);
      } catch (const DegenerateSimilarityError& e) {
        throw DegenerateSimilarityError("movie '" + movie_id + "' character '" +
                                        entry.character_name + "': " + e.what());
      } catch (const ValidationError& e) {
        throw ValidationError("movie '" + movie_id + "' character '" + entry.character_name +
                              "': " + e.what());
      }
    }
  }
  return dataset;
}

}  // namespace adgen
