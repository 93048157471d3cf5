#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "adgen/data_model.hpp"
#include "adgen/rng.hpp"

namespace adgen::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("adgen_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Values representable in float32 so they survive the feature file.
inline std::vector<double> float_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<float>(rng.normal());
  return v;
}

inline Matrix float_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.values()) x = static_cast<float>(rng.normal());
  return m;
}

// Two movies; the first has 2 clips and 2 ADs, the second 1 clip and 1 AD;
// both banks hold 2 characters.
inline MovieDataset small_dataset(std::size_t dim = 4, std::uint64_t seed = 1) {
  Rng rng(seed);
  MovieDataset d;
  d.encoder_dim = dim;
  const auto add_movie = [&](const std::string& id, std::vector<std::string> texts,
                             std::vector<std::pair<std::string, std::string>> cast) {
    Movie& m = d.movies[id];
    m.bank.movie_id = id;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      VideoClip c{id + "_c" + std::to_string(i), id, 10.0 * i, 10.0 * i + 3, float_matrix(3, dim, rng)};
      m.ads.push_back({id + "_ad" + std::to_string(i), id, c.clip_id, texts[i], static_cast<std::int64_t>(i)});
      m.clips.push_back(std::move(c));
    }
    for (auto& [name, actor] : cast) m.bank.entries.push_back({name, actor, float_vector(dim, rng), std::nullopt});
  };
  add_movie("alpha", {"Lisa glares at Matty.", "Matty walks away."},
            {{"Lisa Jorgenson", "R. Witherspoon"}, {"Matty Reynolds", "O. Wilson"}});
  add_movie("beta", {"Annie smiles."}, {{"Annie Cole", "K. Hadley"}, {"George Madison", "P. Rudge"}});
  return d;
}

}  // namespace adgen::testing
