#include "adgen/exemplar.hpp"
#include "adgen/generation.hpp"
#include "adgen/synth.hpp"
#include "adgen/training.hpp"
#include "doctest.h"

using namespace adgen;

namespace {

struct Setup {
  MovieDataset dataset;
  ToyLM lm;
  VisualMapper mapper;
};

Setup setup() {
  SynthOptions so;
  so.clips_per_movie = 5;
  so.dim = 8;
  so.frames_per_clip = 3;
  LMProfile lp;
  lp.d_lm = 16;
  lp.num_heads = 2;
  lp.ffn_dim = 32;
  lp.context_limit = 256;
  MapperConfig mc = MapperConfig::toy_profile(8);
  mc.channel = 16;
  mc.num_heads = 2;
  mc.ffn_dim = 24;
  mc.num_latent = 2;
  return {populate_exemplars(synthesize(so).dataset), ToyLM(lp), VisualMapper(mc)};
}

}  // namespace

TEST_SUITE("generation") {
  TEST_CASE("one prediction per AD in dataset order, independent of workers") {
    const Setup s = setup();
    GenerationOptions o;
    o.oracle_characters = true;
    o.max_length = 12;
    const auto one = generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o);
    REQUIRE(one.size() == 10);
    CHECK(one[0].ad_id == "m0_ad000");
    CHECK(one[9].ad_id == "m1_ad004");
    for (const auto& p : one) CHECK(p.prompt_hash.size() > 0);
    o.workers = 4;
    CHECK(generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o) == one);
    o.context_mode = ContextMode::Recurrent;
    o.context_depth = 2;
    const auto rec1 = generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o);
    o.workers = 1;
    CHECK(generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o) == rec1);
  }

  TEST_CASE("context modes feed different past texts") {
    const Setup s = setup();
    const Movie& m = s.dataset.movies.at("movie00");
    const NarrationContext oracle = narration_context(s.dataset, m, 3, 2, true, nullptr);
    REQUIRE(oracle.context_ads.size() == 2);
    CHECK(oracle.context_ads[0] == m.ads[1].text);
    CHECK(oracle.context_ads[1] == m.ads[2].text);
    CHECK(oracle.past_clips.size() == 2);
    CHECK(narration_context(s.dataset, m, 0, 2, true, nullptr).context_ads.empty());
    CHECK(narration_context(s.dataset, m, 3, 2, false, nullptr).context_ads.empty());

    GenerationOptions o;
    o.oracle_characters = true;
    o.max_length = 8;
    o.context_depth = 1;
    o.context_mode = ContextMode::Oracle;
    const auto with_oracle = generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o);
    o.context_mode = ContextMode::None;
    const auto without = generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, o);
    CHECK(with_oracle[0].prompt_hash == without[0].prompt_hash);  // first AD has no past
    CHECK(with_oracle[1].prompt_hash != without[1].prompt_hash);
  }

  TEST_CASE("requires a refiner or oracle characters") {
    const Setup s = setup();
    CHECK_THROWS_AS(generate_descriptions(s.mapper, s.lm, s.dataset, nullptr, {}), ValidationError);
  }
}
