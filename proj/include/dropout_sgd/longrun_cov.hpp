#pragma once

// Non-overlapping batch-means (NBM) estimate of the long-run covariance of a
// vector sequence, offline and as an O(d^2)-memory online recursion.
//
// Blocks B_m = {η_m, ..., η_{m+1}-1} with η_m = ⌊c m^ζ⌋. With n observations
// and ψ(n) the index of the block holding n,
//   Σ̂_n = (1/n) [ Σ_{m<ψ} S_m S_m' + R R' ],
// S_m = Σ_{k∈B_m}(β_k - β̄_n) and R the centered sum over the open tail block.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/gd_dropout.hpp"
#include "dropout_sgd/linalg.hpp"

namespace dsgd {

class BlockSchedule {
 public:
  BlockSchedule(double c = 1.0, double zeta = 1.5) : c_(c), zeta_(zeta) {
    if (!(c_ > 0.0) || !std::isfinite(c_)) throw ParameterError("BlockSchedule: c must be positive");
    if (!(zeta_ > 1.0) || !std::isfinite(zeta_)) throw ParameterError("BlockSchedule: zeta must exceed 1");
    // Increments satisfy η_{m+1} - η_m >= ⌊c ζ m^{ζ-1}⌋, so distinctness only
    // needs checking until c ζ m^{ζ-1} >= 1.
    std::size_t prev = eta(1);
    for (std::size_t m = 2;; ++m) {
      const std::size_t cur = eta(m);
      if (cur <= prev)
        throw ParameterError("BlockSchedule: eta_" + std::to_string(m) + " repeats eta_" + std::to_string(m - 1) +
                             " (empty block)");
      prev = cur;
      if (c_ * zeta_ * std::pow(static_cast<double>(m), zeta_ - 1.0) >= 1.0) break;
      if (m > 10'000'000) throw ParameterError("BlockSchedule: schedule grows too slowly");
    }
    // Blocks with η_m = 0 hold no observations; skip them.
    first_m_ = 1;
    while (eta(first_m_) < 1) ++first_m_;
    leading_ = eta(first_m_) > 1 ? 1 : 0;
  }

  double c() const noexcept { return c_; }
  double zeta() const noexcept { return zeta_; }

  // ⌊c m^ζ⌋; the relative nudge keeps exact integer powers from flooring down.
  std::size_t eta(std::size_t m) const {
    if (m < 1) throw ParameterError("eta: m must be >= 1");
    const double v = c_ * std::pow(static_cast<double>(m), zeta_);
    return static_cast<std::size_t>(std::floor(v * (1.0 + 4e-16) + 1e-12));
  }

  // First index of the j-th nonempty block (j >= 1). When the first positive
  // η exceeds 1, observations before it form an extra leading block so every
  // index is covered.
  std::size_t block_start(std::size_t j) const {
    if (j < 1) throw ParameterError("block_start: j must be >= 1");
    if (leading_ && j == 1) return 1;
    return eta(first_m_ + j - 1 - leading_);
  }

 private:
  double c_;
  double zeta_;
  std::size_t first_m_ = 1;
  std::size_t leading_ = 0;
};

// Online state. The accumulators obey, at every n >= 1,
//   V = Σ_{m<ψ} T_m T_m' + R R',  K = Σ_{m<ψ} |B_m|^2 + δ^2,  H = Σ_{m<ψ} |B_m| T_m + δ R,
// with T_m the uncentered block sums, R the uncentered tail sum and δ its length.
class CovState {
 public:
  CovState(std::size_t d, BlockSchedule schedule)
      : schedule_(schedule), v_(d, d), h_(d), r_(d), mean_(d), next_start_(schedule_.block_start(1)) {
    if (d < 1) throw ParameterError("CovState: d must be >= 1");
  }

  void update(const Vector& beta) {
    if (beta.dim() != dim()) throw DimensionError("cov_update: dimension mismatch");
    mean_.push(beta);
    ++n_;
    const std::size_t d = dim();
    if (n_ < next_start_) {
      // Extend the tail. Same result as removing the old tail terms and
      // adding the new ones, written as increments to avoid cancellation.
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) v_(i, j) += r_[i] * beta[j] + beta[i] * r_[j] + beta[i] * beta[j];
      const double dl = static_cast<double>(delta_);
      for (std::size_t i = 0; i < d; ++i) h_[i] += r_[i] + (dl + 1.0) * beta[i];
      k_ += 2.0 * dl + 1.0;
      r_ += beta;
      ++delta_;
    } else {
      r_ = beta;
      delta_ = 1;
      ++psi_;
      k_ += 1.0;
      h_ += r_;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) v_(i, j) += r_[i] * r_[j];
      next_start_ = schedule_.block_start(psi_ + 1);
    }
  }

  // Σ̂_n = (1/n)[V + K β̄β̄' - H β̄' - β̄ H'], symmetrized and clamped to PSD.
  Matrix finalize() const;

  std::size_t dim() const noexcept { return r_.dim(); }
  std::size_t n() const noexcept { return n_; }
  std::size_t psi() const noexcept { return psi_; }
  std::size_t delta() const noexcept { return delta_; }
  double K() const noexcept { return k_; }
  const Matrix& V() const noexcept { return v_; }
  const Vector& H() const noexcept { return h_; }
  const Vector& R() const noexcept { return r_; }
  const Vector& mean() const noexcept { return mean_.mean(); }
  const BlockSchedule& schedule() const noexcept { return schedule_; }

 private:
  BlockSchedule schedule_;
  Matrix v_;
  double k_ = 0.0;
  Vector h_;
  Vector r_;
  std::size_t psi_ = 0;
  std::size_t delta_ = 0;
  RunningMean mean_;
  std::size_t n_ = 0;
  std::size_t next_start_;
};

namespace detail {

// Symmetrize; eigenvalues down to -1e-10 * scale are rounding and go to 0.
inline Matrix clamp_psd(Matrix m, double scale) {
  m = symmetrize(m);
  const double tol = 1e-10 * std::max(scale, std::numeric_limits<double>::min());
  const Vector ev = sym_eigenvalues(m);
  const double low = ev[ev.dim() - 1];
  if (low >= 0.0) return m;
  if (low < -tol) throw ContractError("long-run covariance: estimate is not positive semidefinite");
  const SymEigen eig = sym_eigen(m);
  const std::size_t d = m.rows();
  Matrix out(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double lam = std::max(eig.values[k], 0.0);
    if (lam == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out(i, j) += lam * eig.vectors(i, k) * eig.vectors(j, k);
  }
  return symmetrize(out);
}

}  // namespace detail

inline Matrix CovState::finalize() const {
  if (n_ == 0) throw ContractError("cov_finalize: no observations");
  const std::size_t d = dim();
  const Vector& b = mean_.mean();
  Matrix s = v_;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) s(i, j) += k_ * b[i] * b[j] - h_[i] * b[j] - b[i] * h_[j];
  const double inv_n = 1.0 / static_cast<double>(n_);
  s *= inv_n;
  return detail::clamp_psd(std::move(s), v_.trace() * inv_n);
}

inline void cov_update(CovState& state, const Vector& beta_next) { state.update(beta_next); }
inline Matrix cov_finalize(const CovState& state) { return state.finalize(); }

// Direct evaluation from the stored sequence; the reference for CovState.
inline Matrix offline_nbm(std::span<const Vector> betas, const BlockSchedule& schedule) {
  if (betas.empty()) throw ContractError("offline_nbm: empty sequence");
  const std::size_t n = betas.size(), d = betas.front().dim();
  Vector mean(d);
  for (const Vector& b : betas) {
    if (b.dim() != d) throw DimensionError("offline_nbm: ragged sequence");
    mean += b;
  }
  mean *= 1.0 / static_cast<double>(n);

  Matrix acc(d, d);
  double scale = 0.0;
  for (std::size_t j = 1;; ++j) {
    const std::size_t first = schedule.block_start(j);
    if (first > n) break;
    const std::size_t last = std::min(schedule.block_start(j + 1) - 1, n);
    Vector s(d);
    for (std::size_t k = first; k <= last; ++k) s += betas[k - 1] - mean;
    acc += Matrix::outer(s, s);
  }
  for (const Vector& b : betas) scale += dot(b, b);
  acc *= 1.0 / static_cast<double>(n);
  return detail::clamp_psd(std::move(acc), scale / static_cast<double>(n));
}

}  // namespace dsgd
