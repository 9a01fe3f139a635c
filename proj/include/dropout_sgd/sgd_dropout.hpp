#pragma once

// Streaming SGD with Bernoulli dropout in the linear model,
//   β_k = β_{k-1} + α D_k x_k (y_k - x_k' D_k β_{k-1}),
// with Ruppert-Polyak averaging and lockstep multi-rate runs.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dropout_sgd/dropout_moments.hpp"
#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/gd_dropout.hpp"
#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/randgen.hpp"

namespace dsgd {

struct SgdConfig {
  std::size_t d = 1;
  double p = 1.0;
  double alpha = 0.01;
  Vector beta_star;
  std::size_t burn_in = 0;  // iterates excluded from the running average

  void validate() const {
    if (d < 1) throw ParameterError("SgdConfig: d must be >= 1");
    detail::require_probability(p, "SgdConfig");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("SgdConfig: alpha must be positive");
    if (beta_star.dim() != d) throw DimensionError("SgdConfig: beta_star has wrong dimension");
  }
};

struct SgdState {
  Vector beta;
  std::size_t step = 0;

  static SgdState zero(std::size_t d) { return {Vector(d), 0}; }
};

using AsgdState = RunningMean;

// In-place form used by the hot loops.
inline void sgd_step_inplace(double alpha, SgdState& state, const StreamSample& sample, const DropoutMask& mask) {
  const std::size_t d = state.beta.dim();
  if (sample.x.dim() != d || mask.dim() != d) throw DimensionError("sgd_step: dimension mismatch");
  double fit = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    if (mask.retained[j]) fit += sample.x[j] * state.beta[j];
  const double g = alpha * (sample.y - fit);
  for (std::size_t j = 0; j < d; ++j)
    if (mask.retained[j]) state.beta[j] += g * sample.x[j];
  ++state.step;
}

inline SgdState sgd_step(const SgdConfig& config, SgdState state, const StreamSample& sample,
                         const DropoutMask& mask) {
  if (state.beta.dim() != config.d) throw DimensionError("sgd_step: state has wrong dimension");
  sgd_step_inplace(config.alpha, state, sample, mask);
  return state;
}

inline AsgdState asgd_update(AsgdState avg, const Vector& beta_k) {
  avg.push(beta_k);
  return avg;
}

// β̆ solves E[𝕏_{1,p}] β̆ = E[y x].
inline Vector l2_minimizer_sgd(const Matrix& ex_gram_p, const Vector& ex_yx) {
  detail::require_square(ex_gram_p, "l2_minimizer_sgd");
  if (ex_yx.dim() != ex_gram_p.rows()) throw DimensionError("l2_minimizer_sgd: dimension mismatch");
  return solve(ex_gram_p, ex_yx);
}

inline constexpr std::size_t kMinAdmissibilityDraws = 1000;

struct Admissibility {
  double threshold;  // sup of admissible α, 0 if none
  bool admissible;   // for config.alpha
  double lambda_min;  // λ_min(M̂(config.alpha))
};

// M(α) = E[2 D𝕏D - α D𝕏D𝕏D] with the dropout expectation taken exactly and
// the design expectation estimated from the supplied x draws. Since the α
// coefficient E[D𝕏D𝕏D] is PSD, λ_min(M(α)) is non-increasing and the
// admissible set is an interval (0, threshold).
inline Admissibility lr_admissible_q2(const SgdConfig& config, std::span<const Vector> draws) {
  detail::require_probability(config.p, "lr_admissible_q2");
  if (draws.size() < kMinAdmissibilityDraws)
    throw ContractError("lr_admissible_q2: need at least 1000 design draws");
  const std::size_t d = config.d;
  Matrix first(d, d), second(d, d);
  for (const Vector& x : draws) {
    if (x.dim() != d) throw DimensionError("lr_admissible_q2: draw has wrong dimension");
    const Matrix g = Matrix::outer(x, x);
    first += e_dad(g, config.p);
    second += e_dadbd(g, g, config.p);
  }
  const double inv = 1.0 / static_cast<double>(draws.size());
  first *= 2.0 * inv;
  second *= inv;
  first = symmetrize(first);
  second = symmetrize(second);

  auto lmin = [&](double a) { return lambda_min(symmetrize(first - a * second)); };

  Admissibility out{0.0, false, 0.0};
  out.lambda_min = lmin(config.alpha);
  out.admissible = out.lambda_min > 0.0;
  if (!(lmin(0.0) > 0.0)) return out;

  double lo = 0.0, hi = 1.0;
  while (lmin(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) {
      out.threshold = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  while (hi - lo > 1e-7 * hi) {
    const double mid = 0.5 * (lo + hi);
    (lmin(mid) > 0.0 ? lo : hi) = mid;
  }
  out.threshold = 0.5 * (lo + hi);
  return out;
}

// s chains, one per learning rate, advanced on the same (y_k, x_k, D_k).
struct MultiRateRun {
  std::vector<double> rates;
  std::vector<SgdState> states;
  std::vector<AsgdState> averages;

  std::size_t chains() const noexcept { return rates.size(); }

  // vec(β̄(α_1), ..., β̄(α_s)), length d·s.
  Vector stacked() const {
    const std::size_t d = states.empty() ? 0 : states.front().beta.dim();
    Vector out(d * rates.size());
    for (std::size_t s = 0; s < rates.size(); ++s)
      for (std::size_t j = 0; j < d; ++j) out[s * d + j] = averages[s].mean()[j];
    return out;
  }
};

using StepObserver = std::function<void(std::size_t step, const MultiRateRun& run)>;

// Runs n lockstep steps from zero (or config-defined) initialization. The
// observer, if set, is called after every step once averaging has begun.
inline MultiRateRun parallel_run(const std::vector<double>& rates, const SgdConfig& config, std::size_t n,
                                 RngStream& rng, const StepObserver& observer = {}) {
  if (rates.empty()) throw ContractError("parallel_run: empty rate list");
  config.validate();
  for (double a : rates)
    if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("parallel_run: rates must be positive");
  const std::size_t d = config.d;
  MultiRateRun run;
  run.rates = rates;
  run.states.assign(rates.size(), SgdState::zero(d));
  run.averages.assign(rates.size(), AsgdState(d));

  StreamSample sample;
  DropoutMask mask;
  for (std::size_t k = 1; k <= n; ++k) {
    stream_sample_into(sample, config.beta_star, rng);
    sample_dropout_into(mask, d, config.p, rng);
    for (std::size_t s = 0; s < rates.size(); ++s) {
      sgd_step_inplace(rates[s], run.states[s], sample, mask);
      if (k > config.burn_in) run.averages[s].push(run.states[s].beta);
    }
    if (observer && k > config.burn_in) observer(k, run);
  }
  return run;
}

}  // namespace dsgd
