#pragma once

#include <cstddef>
#include <vector>

#include "adgen/matrix.hpp"
#include "adgen/nn.hpp"

namespace adgen {

// Linear warm-up over the first warmup_fraction of total_steps (reaching
// `peak` at the end of warm-up), then cosine decay to exactly 0 at the
// final step (total_steps - 1).
double learning_rate_at(std::size_t step, std::size_t total_steps, double peak,
                        double warmup_fraction);

std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay over every parameter of one store.
class AdamW {
 public:
  AdamW(nn::ParamStore& params, AdamWOptions options = {});

  void step(double learning_rate);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  nn::ParamStore* params_;
  AdamWOptions opt_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

}  // namespace adgen
