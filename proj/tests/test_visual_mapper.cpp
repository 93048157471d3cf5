#include <algorithm>
#include <numeric>

#include "adgen/errors.hpp"
#include "adgen/visual_mapper.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace adgen;
using adgen::testing::gradient_check;
using adgen::testing::random_matrix;

namespace {

MapperConfig tiny(std::size_t input_dim = 8) {
  MapperConfig c = MapperConfig::toy_profile(input_dim);
  c.channel = 16;
  c.num_heads = 2;
  c.ffn_dim = 24;
  c.num_latent = 3;
  return c;
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < order.size(); ++r) std::copy(m.row(order[r]).begin(), m.row(order[r]).end(), out.row(r).begin());
  return out;
}

}  // namespace

TEST_SUITE("visual-mapper") {
  TEST_CASE("profiles") {
    const MapperConfig s = MapperConfig::small_profile();
    CHECK(s.num_latent == 30);
    CHECK(s.num_blocks == 2);
    CHECK(s.channel == 768);
    CHECK(s.num_heads == 12);
    CHECK(s.ffn_dim == 3072);
    CHECK(s.input_dim == 512);
    const MapperConfig l = MapperConfig::large_profile();
    CHECK(l.channel == 4096);
    CHECK(l.num_heads == 32);
    CHECK(l.ffn_dim == 16384);
    const MapperConfig t = MapperConfig::toy_profile(32);
    CHECK(t.channel == 64);
    CHECK(t.num_heads == 4);
    CHECK(t.ffn_dim == 128);
    CHECK(t.num_latent == 6);
    MapperConfig bad = t;
    bad.num_heads = 5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = t;
    bad.num_latent = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("small profile shapes: 8×512 frames → 8×768 projection, 30×768 latents") {
    MapperConfig c = MapperConfig::small_profile();
    c.share_networks = true;
    const VisualMapper m(c);
    Rng rng(1);
    const Matrix f = random_matrix(8, 512, rng);
    ag::NoGradGuard g;
    const auto p = m.project(ag::Tensor::constant(f));
    CHECK(p.rows() == 8);
    CHECK(p.cols() == 768);
    const auto out = m.map_visual(f);
    CHECK(out.rows() == 30);
    CHECK(out.cols() == 768);
  }

  TEST_CASE("projection edge cases") {
    MapperConfig c = tiny(16);
    VisualMapper m(c);
    Rng rng(2);
    const Matrix f = random_matrix(5, 16, rng);
    ag::NoGradGuard g;
    m.params().at("video.proj.weight").mutable_value().fill(0.0);
    CHECK(m.project(ag::Tensor::constant(f)).value() == Matrix(5, 16));
    Matrix& w = m.params().at("video.proj.weight").mutable_value();
    for (std::size_t i = 0; i < 16; ++i) w(i, i) = 1.0;
    CHECK(m.project(ag::Tensor::constant(f)).value() == f);
  }

  TEST_CASE("row count is M for any frame and context count") {
    const VisualMapper m(tiny());
    Rng rng(3);
    ag::NoGradGuard g;
    for (std::size_t f : {1, 4, 8, 64}) {
      CHECK(m.map_visual(random_matrix(f, 8, rng)).rows() == 3);
      for (std::size_t k : {0, 1, 3}) {
        std::vector<Matrix> past;
        for (std::size_t i = 0; i < k; ++i) past.push_back(random_matrix(f, 8, rng));
        const auto out = m.map_with_context(past, random_matrix(f, 8, rng));
        CHECK(out.rows() == 3);
        CHECK(out.cols() == 16);
      }
    }
  }

  TEST_CASE("context maps the concatenated frames") {
    const VisualMapper m(tiny());
    Rng rng(4);
    const Matrix past = random_matrix(8, 8, rng), cur = random_matrix(8, 8, rng);
    ag::NoGradGuard g;
    const Matrix parts[] = {past, cur};
    CHECK(m.map_with_context(std::span(parts, 1), cur).value() ==
          m.map(ag::Tensor::constant(vstack(parts)), Network::Video).value());
    CHECK(m.map_with_context({}, cur).value() == m.map_visual(cur).value());
  }

  TEST_CASE("deterministic forward and seeded init") {
    const VisualMapper a(tiny()), b(tiny());
    CHECK(a.params().checksum() == b.params().checksum());
    MapperConfig other = tiny();
    other.seed = 9;
    CHECK(VisualMapper(other).params().checksum() != a.params().checksum());
    Rng rng(5);
    const Matrix f = random_matrix(6, 8, rng);
    ag::NoGradGuard g;
    CHECK(a.map_visual(f).value() == a.map_visual(f).value());
  }

  TEST_CASE("without positions the readout ignores frame order") {
    MapperConfig c = tiny();
    c.use_positional = false;
    const VisualMapper m(c);
    Rng rng(6);
    const Matrix f = random_matrix(7, 8, rng);
    std::vector<std::size_t> order(7);
    std::iota(order.begin(), order.end(), 0);
    ag::NoGradGuard g;
    const Matrix base = m.map_visual(f).value();
    for (int t = 0; t < 5; ++t) {
      rng.shuffle(order.begin(), order.end());
      const Matrix moved = m.map_visual(permute_rows(f, order)).value();
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(moved.data()[i] == doctest::Approx(base.data()[i]).epsilon(1e-6));
    }
    // With positions the order matters.
    const VisualMapper p(tiny());
    std::reverse(order.begin(), order.end());
    CHECK_FALSE(p.map_visual(permute_rows(f, order)).value() == p.map_visual(f).value());
  }

  TEST_CASE("characters are mapped independently") {
    const VisualMapper m(tiny());
    Rng rng(7);
    std::vector<std::vector<double>> ex(2, std::vector<double>(8));
    for (auto& e : ex)
      for (double& v : e) v = rng.normal();
    ag::NoGradGuard g;
    CHECK(m.map_characters({}).empty());
    const auto out = m.map_characters(ex);
    REQUIRE(out.size() == 2);
    CHECK(out[0].rows() == 3);
    std::vector<std::vector<double>> swapped{ex[1], ex[0]};
    const auto out2 = m.map_characters(swapped);
    CHECK(out2[0].value() == out[1].value());
    CHECK(out2[1].value() == out[0].value());
    ex[1][3] += 1.0;
    CHECK(m.map_characters(ex)[0].value() == out[0].value());
  }

  TEST_CASE("separate and shared networks") {
    MapperConfig c = tiny();
    const VisualMapper separate(c);
    CHECK(separate.params().contains("video.latents"));
    CHECK(separate.params().contains("image.latents"));
    c.share_networks = true;
    const VisualMapper shared(c);
    CHECK(shared.params().contains("shared.latents"));
    CHECK_FALSE(shared.params().contains("image.latents"));
    CHECK(shared.params().scalar_count() * 2 == separate.params().scalar_count());
  }

  TEST_CASE("gradients match finite differences for every parameter") {
    VisualMapper m(tiny());
    Rng rng(8);
    const Matrix f = random_matrix(4, 8, rng);
    const Matrix past = random_matrix(3, 8, rng);
    const std::vector<double> ex{0.3, -1.0, 0.5, 2.0, 0.1, -0.2, 0.7, 1.1};
    const Matrix readout = random_matrix(16, 1, rng);
    const auto loss = [&] {
      const Matrix pasts[] = {past};
      const auto v = m.map_with_context(pasts, f);
      const auto c = m.map_characters(std::span(&ex, 1))[0];
      const ag::Tensor both[] = {v, c};
      return ag::sum(ag::matmul(ag::gelu(ag::concat_rows(both)), ag::Tensor::constant(readout)));
    };
    const auto r = gradient_check(m.params(), loss, 4);
    INFO("worst at " << r.worst_name);
    CHECK(r.worst <= 1e-4);
    CHECK(r.checked > 100);
  }

  TEST_CASE("errors") {
    MapperConfig c = tiny();
    c.max_frames = 4;
    const VisualMapper m(c);
    Rng rng(9);
    ag::NoGradGuard g;
    CHECK_THROWS_AS(m.map_visual(random_matrix(5, 8, rng)), DimensionError);
    CHECK_THROWS_AS(m.map_visual(random_matrix(2, 7, rng)), DimensionError);
    Matrix bad = random_matrix(2, 8, rng);
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(m.map_visual(bad), NumericError);
    nn::ParamStore wrong = m.params().clone();
    CHECK_THROWS_AS(VisualMapper(tiny(16), wrong), ValidationError);
  }
}
