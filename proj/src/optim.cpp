#include "adgen/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adgen {

std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction) {
  if (total_steps == 0) return 0;
  const auto w = static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  return std::min(w, total_steps - 1);
}

double learning_rate_at(std::size_t step, std::size_t total_steps, double peak,
                        double warmup_fraction) {
  if (total_steps <= 1) return peak;
  const std::size_t warm = warmup_steps(total_steps, warmup_fraction);
  if (step < warm) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(warm);
  }
  const std::size_t last = total_steps - 1;
  if (step >= last) return 0.0;
  // Step `warm` is the last warm-up point when warm > 0, so decay starts
  // there at the full peak.
  const std::size_t decay_start = warm == 0 ? 0 : warm - 1;
  const double progress =
      static_cast<double>(step - decay_start) / static_cast<double>(last - decay_start);
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(nn::ParamStore& params, AdamWOptions options) : params_(&params), opt_(options) {
  for (const auto& [name, t] : params) {
    m_.emplace_back(t.rows(), t.cols());
    v_.emplace_back(t.rows(), t.cols());
  }
}

void AdamW::step(double learning_rate) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  std::size_t i = 0;
  for (auto& [name, t] : *params_) {
    Matrix& w = t.mutable_value();
    const Matrix& g = t.mutable_grad();
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.data()[j];
      m.data()[j] = opt_.beta1 * m.data()[j] + (1.0 - opt_.beta1) * gj;
      v.data()[j] = opt_.beta2 * v.data()[j] + (1.0 - opt_.beta2) * gj * gj;
      const double mhat = m.data()[j] / bc1;
      const double vhat = v.data()[j] / bc2;
      w.data()[j] -= learning_rate * (mhat / (std::sqrt(vhat) + opt_.eps) +
                                      opt_.weight_decay * w.data()[j]);
    }
    ++i;
  }
}

}  // namespace adgen
