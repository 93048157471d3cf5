#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "adgen/autograd.hpp"
#include "adgen/nn.hpp"
#include "adgen/rng.hpp"

namespace adgen::testing {

struct GradCheckResult {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
};

// Relative error with a floor on the denominator so that gradients that are
// zero up to round-off compare by absolute error instead.
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences at `per_tensor` random entries of every tensor in
// `store`; `loss` must rebuild the graph from the current values.
inline GradCheckResult gradient_check(nn::ParamStore& store, const std::function<ag::Tensor()>& loss,
                                      std::size_t per_tensor = 3, double h = 1e-5,
                                      std::uint64_t seed = 11) {
  store.zero_grad();
  ag::backward(loss());
  Rng rng(seed);
  GradCheckResult out;
  for (auto& [name, t] : store) {
    Matrix& w = t.mutable_value();
    const std::size_t n = std::min(per_tensor, w.size());
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t j = per_tensor >= w.size() ? s : rng.below(w.size());
      const double saved = w.data()[j];
      double plus, minus;
      {
        ag::NoGradGuard g;
        w.data()[j] = saved + h;
        plus = loss().item();
        w.data()[j] = saved - h;
        minus = loss().item();
      }
      w.data()[j] = saved;
      const double numeric = (plus - minus) / (2 * h);
      const double analytic = t.mutable_grad().data()[j];
      const double err = relative_error(analytic, numeric);
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.worst_name = name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return out;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

}  // namespace adgen::testing
