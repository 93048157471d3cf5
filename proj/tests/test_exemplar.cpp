#include <algorithm>
#include <numeric>

#include "adgen/exemplar.hpp"
#include "doctest.h"
#include "fixtures_util.hpp"
#include "test_util.hpp"

using namespace adgen;
using adgen::testing::random_matrix;

namespace {

// Exhaustive oracle: every cosine, full stable sort, mean of the first k.
std::vector<double> brute_exemplar(const std::vector<double>& portrait, const Matrix& frames, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      dot += portrait[c] * frames(r, c);
      na += portrait[c] * portrait[c];
      nb += frames(r, c) * frames(r, c);
    }
    scored.push_back({dot / std::sqrt(na * nb), r});
  }
  std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first; });
  const std::size_t n = std::min(k, scored.size());
  std::vector<double> mean(frames.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < frames.cols(); ++c) mean[c] += frames(scored[i].second, c) / n;
  return mean;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("exemplar") {
  TEST_CASE("default k is 5") { CHECK(kDefaultExemplarFrames == 5); }

  TEST_CASE("single frame is returned for any k") {
    const Matrix f = Matrix::row_vector(std::vector<double>{1.0, -2.0, 3.0});
    for (std::size_t k : {1, 5, 9}) check_close(compute_exemplar(std::vector<double>{0.3, 1, 0}, f, k), {1.0, -2.0, 3.0});
  }

  TEST_CASE("portrait matching one of several orthogonal frames picks it") {
    Matrix f(3, 3);
    f(0, 0) = 2;
    f(1, 1) = 3;
    f(2, 2) = 4;
    check_close(compute_exemplar(std::vector<double>{0, 3, 0}, f, 1), {0, 3, 0});
  }

  TEST_CASE("random instances match the exhaustive oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t frames = 1 + rng.below(30), dim = 2 + rng.below(12);  // D=1 makes every cosine ±1, an exact tie
      const Matrix f = random_matrix(frames, dim, rng);
      std::vector<double> portrait(dim);
      for (double& x : portrait) x = rng.normal();
      for (std::size_t k : {1, 5}) check_close(compute_exemplar(portrait, f, k), brute_exemplar(portrait, f, k));
    }
  }

  TEST_CASE("ties resolve to the lower frame index") {
    Matrix f(4, 2);
    f(0, 0) = 1;           // cos 0
    f(1, 1) = 2;           // cos 1
    f(2, 1) = 5;           // cos 1, later
    f(3, 0) = f(3, 1) = 1; // cos 0.707
    const std::vector<double> p{0, 1};
    CHECK(top_similar_frames(p, f, 1) == std::vector<std::size_t>{1});
    CHECK(top_similar_frames(p, f, 3) == std::vector<std::size_t>{1, 2, 3});
    check_close(compute_exemplar(p, f, 1), {0, 2});
  }

  TEST_CASE("zero vectors are degenerate") {
    Matrix f(2, 2, 1.0);
    CHECK_THROWS_AS(compute_exemplar(std::vector<double>{0, 0}, f, 1), DegenerateSimilarityError);
    f(1, 0) = f(1, 1) = 0;
    CHECK_THROWS_AS(compute_exemplar(std::vector<double>{1, 0}, f, 1), DegenerateSimilarityError);
  }

  TEST_CASE("properties") {
    Rng rng(22);
    const Matrix f = random_matrix(20, 6, rng);
    std::vector<double> p(6);
    for (double& x : p) x = rng.normal();
    SUBCASE("scale invariance") {
      std::vector<double> scaled = p;
      for (double& x : scaled) x *= 37.5;
      CHECK(top_similar_frames(p, f, 5) == top_similar_frames(scaled, f, 5));
    }
    SUBCASE("norm bounded by the largest frame norm") {
      const auto e = compute_exemplar(p, f, 5);
      double max_norm = 0;
      for (std::size_t r = 0; r < f.rows(); ++r) {
        double n = 0;
        for (double v : f.row(r)) n += v * v;
        max_norm = std::max(max_norm, std::sqrt(n));
      }
      CHECK(std::sqrt(std::inner_product(e.begin(), e.end(), e.begin(), 0.0)) <= max_norm + 1e-12);
    }
    SUBCASE("adding a worse frame changes nothing") {
      const auto before = compute_exemplar(p, f, 5);
      Matrix g(f.rows() + 1, f.cols());
      std::copy(f.data(), f.data() + f.size(), g.data());
      for (std::size_t c = 0; c < 6; ++c) g(f.rows(), c) = -p[c];  // cosine -1
      CHECK(compute_exemplar(p, g, 5) == before);
    }
  }

  TEST_CASE("populate_exemplars fills every entry from all movie frames") {
    MovieDataset d = adgen::testing::small_dataset(4, 5);
    const MovieDataset out = populate_exemplars(d, 2);
    for (const auto& [id, m] : out.movies) {
      const Matrix frames = movie_frames(m);
      CHECK(frames.rows() == 3 * m.clips.size());
      for (const auto& e : m.bank.entries) {
        REQUIRE(e.exemplar);
        check_close(*e.exemplar, brute_exemplar(e.portrait, frames, 2));
      }
    }
    MovieDataset empty = d;
    for (auto& [id, m] : empty.movies) m.bank.entries.clear();
    CHECK(populate_exemplars(empty) == empty);
  }

  TEST_CASE("identical frames give that frame") {
    MovieDataset d = adgen::testing::small_dataset(3, 6);
    for (auto& [id, m] : d.movies)
      for (auto& c : m.clips)
        for (std::size_t r = 0; r < c.features.rows(); ++r) {
          c.features(r, 0) = 1;
          c.features(r, 1) = 2;
          c.features(r, 2) = 3;
        }
    for (const auto& [id, m] : populate_exemplars(d).movies)
      for (const auto& e : m.bank.entries) check_close(*e.exemplar, {1, 2, 3});
  }

  TEST_CASE("errors name the character") {
    MovieDataset d = adgen::testing::small_dataset(3, 7);
    d.movies["beta"].bank.entries[1].portrait = {0, 0, 0};
    try {
      populate_exemplars(d);
      FAIL("expected an error");
    } catch (const DegenerateSimilarityError& e) {
      CHECK(std::string(e.what()).find("George Madison") != std::string::npos);
    }
  }
}
