#include "adgen/generation.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "adgen/training.hpp"

namespace adgen {
namespace {

struct Job {
  const Movie* movie;
  std::size_t first;  // AD range [first, last)
  std::size_t last;
  std::size_t out;    // index of the first output slot
};

}  // namespace

std::vector<Prediction> generate_descriptions(const VisualMapper& mapper, const ToyLM& lm,
                                              const MovieDataset& dataset,
                                              const CharacterRefiner* refiner,
                                              const GenerationOptions& options) {
  if (!refiner && !options.oracle_characters) {
    throw ValidationError("generation: a refiner is required unless oracle characters are used");
  }
  if (mapper.config().channel != lm.profile().d_lm) {
    throw ValidationError("generation: mapper channel does not match d_lm");
  }
  const CharacterRefiner* chooser = options.oracle_characters ? nullptr : refiner;

  // Recurrent context chains the ADs of a movie, so a movie is one job;
  // otherwise every AD is independent.
  std::vector<Job> jobs;
  std::size_t slots = 0;
  for (const auto& [id, movie] : dataset.movies) {
    if (options.context_mode == ContextMode::Recurrent) {
      jobs.push_back({&movie, 0, movie.ads.size(), slots});
    } else {
      for (std::size_t i = 0; i < movie.ads.size(); ++i) jobs.push_back({&movie, i, i + 1, slots + i});
    }
    slots += movie.ads.size();
  }
  std::vector<Prediction> out(slots);

  const auto run = [&](const Job& job) {
    ag::NoGradGuard no_grad;
    const Movie& movie = *job.movie;
    for (std::size_t i = job.first; i < job.last; ++i) {
      const ADRecord& ad = movie.ads[i];
      NarrationContext ctx = narration_context(dataset, movie, i, options.context_depth,
                                               options.context_mode == ContextMode::Oracle, chooser);
      if (options.context_mode == ContextMode::Recurrent) {
        for (std::size_t j = i - std::min(i, options.context_depth); j < i; ++j) {
          const std::string& text = out[job.out + (j - job.first)].text;
          // Empty generated texts carry no context.
          if (!text.empty()) ctx.context_ads.push_back(text);
        }
      }
      Prediction& p = out[job.out + (i - job.first)];
      p.movie_id = movie.bank.movie_id.empty() ? ad.movie_id : movie.bank.movie_id;
      p.clip_id = ad.clip_id;
      p.ad_id = ad.ad_id;
      for (const auto& c : ctx.characters) p.characters.push_back(c.character_name);
      const PromptSequence prompt = assemble_prompt(mapper, lm, std::move(ctx), options.max_length);
      p.prompt_hash = prompt_hash(prompt);
      const DecodingResult r = greedy_decode(lm, prompt, options.max_length);
      p.text = r.text;
      p.s = r.avg_logprob.value_or(0.0);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  if (workers == 1) {
    for (const auto& job : jobs) run(job);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t j = next++; j < jobs.size(); j = next++) {
        try {
          run(jobs[j]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = jobs.size();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace adgen
