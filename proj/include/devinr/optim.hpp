#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "devinr/errors.hpp"
#include "devinr/network.hpp"

namespace devinr {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Moment buffers for one parameter tensor. Each tensor keeps its own step
// counter so sparsely updated tensors (latent vectors) get correct bias
// correction.
struct AdamWState {
  std::int64_t step = 0;
  std::vector<float> m, v;

  void ensure(std::size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.0f);
      v.assign(n, 0.0f);
      step = 0;
    }
  }
};

// One AdamW update. Weight decay is decoupled (param -= lr*wd*param) and only
// applied when `decayable` is set. Returns false and leaves params and state
// untouched if any gradient entry is non-finite.
inline bool adamw_step(std::span<float> params, std::span<const double> grads,
                       AdamWState& state, const AdamWConfig& cfg,
                       bool decayable) {
  if (params.size() != grads.size())
    throw DataError("adamw_step: parameter/gradient size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) return false;
  state.ensure(params.size());
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double wd = decayable ? cfg.weight_decay : 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double mh = m / bc1;
    const double vh = v / bc2;
    const double p = params[i];
    params[i] = static_cast<float>(p - cfg.lr * wd * p -
                                   cfg.lr * mh / (std::sqrt(vh) + cfg.eps));
  }
  return true;
}

// Contiguous partition of a pixel list into micro-batches.
struct MicroBatchPlan {
  std::size_t total = 0;
  std::size_t micro_batch = 0;

  MicroBatchPlan(std::size_t n, std::size_t micro)
      : total(n), micro_batch(std::min(micro, n)) {
    if (n == 0) throw DataError("micro-batch plan: empty pixel list");
    if (micro == 0) throw DataError("micro-batch plan: micro-batch size 0");
  }

  std::size_t count() const {
    return (total + micro_batch - 1) / micro_batch;
  }

  std::pair<std::size_t, std::size_t> range(std::size_t i) const {
    const std::size_t b0 = i * micro_batch;
    return {b0, std::min(b0 + micro_batch, total)};
  }
};

// Runs the evaluator over every micro-batch, accumulating loss and gradient
// sums, and converts the totals to the exact full-batch mean. The evaluator
// receives (begin, end, grads, loss_sum) and must add unnormalized sums for
// the pixel range [begin, end).
template <typename EvalFn>
double accumulate(const MicroBatchPlan& plan, EvalFn&& eval,
                  GradientSet& grads) {
  grads.zero();
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < plan.count(); ++i) {
    const auto [b0, b1] = plan.range(i);
    try {
      eval(b0, b1, grads, loss_sum);
    } catch (const std::exception& e) {
      throw NumericError("micro-batch " + std::to_string(i) + " of " +
                         std::to_string(plan.count()) + ": " + e.what());
    }
  }
  const double inv = 1.0 / static_cast<double>(plan.total);
  grads.scale(inv);
  return loss_sum * inv;
}

}  // namespace devinr
