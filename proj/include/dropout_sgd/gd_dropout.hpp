#pragma once

// Fixed-design gradient descent with Bernoulli dropout:
//   β_k = β_{k-1} + α D_k X'(y - X D_k β_{k-1}).

#include <cmath>
#include <cstddef>
#include <limits>
#include <ranges>
#include <vector>

#include "dropout_sgd/dropout_moments.hpp"
#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/randgen.hpp"

namespace dsgd {

// Incremental mean of a stream of vectors.
class RunningMean {
 public:
  RunningMean() = default;
  explicit RunningMean(std::size_t d) : mean_(d) {}

  void push(const Vector& v) {
    if (count_ == 0 && mean_.dim() != v.dim()) mean_ = Vector(v.dim());
    if (v.dim() != mean_.dim()) throw DimensionError("RunningMean: dimension mismatch");
    ++count_;
    const double w = 1.0 / static_cast<double>(count_);
    for (std::size_t j = 0; j < v.dim(); ++j) mean_[j] += w * (v[j] - mean_[j]);
  }

  const Vector& mean() const noexcept { return mean_; }
  std::size_t count() const noexcept { return count_; }

 private:
  Vector mean_;
  std::size_t count_ = 0;
};

class GdProblem {
 public:
  GdProblem(Matrix x, Vector y, double p, double alpha)
      : x_(std::move(x)), y_(std::move(y)), p_(p), alpha_(alpha) {
    detail::require_probability(p_, "GdProblem");
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ParameterError("GdProblem: alpha must be positive");
    if (x_.rows() == 0 || x_.cols() == 0) throw DimensionError("GdProblem: empty design");
    if (y_.dim() != x_.rows()) throw DimensionError("GdProblem: y length != rows of X");
    gram_ = symmetrize(x_.transpose() * x_);
    for (std::size_t j = 0; j < gram_.rows(); ++j)
      if (!(gram_(j, j) > 0.0)) throw ContractError("GdProblem: design has a zero column (not in reduced form)");
    gram_p_ = p_rescale(gram_, p_);
    admissible_ = alpha_ * operator_norm(gram_) < 2.0;
    xty_ = x_.transpose() * y_;
    minimizer_ = solve(gram_p_, xty_);
  }

  const Matrix& X() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  const Matrix& gram() const noexcept { return gram_; }
  const Matrix& gram_p() const noexcept { return gram_p_; }
  const Vector& xty() const noexcept { return xty_; }
  double p() const noexcept { return p_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t n() const noexcept { return x_.rows(); }
  std::size_t d() const noexcept { return x_.cols(); }
  bool admissible() const noexcept { return admissible_; }
  const Vector& minimizer() const noexcept { return minimizer_; }

 private:
  Matrix x_;
  Vector y_;
  double p_;
  double alpha_;
  Matrix gram_;
  Matrix gram_p_;
  Vector xty_;
  Vector minimizer_;
  bool admissible_ = false;
};

struct GdState {
  Vector beta;
  std::size_t step = 0;
};

// β̃ = 𝕏_p^{-1} X'y
inline Vector l2_minimizer_gd(const GdProblem& problem) { return problem.minimizer(); }

inline GdState gd_step(const GdProblem& problem, GdState state, const DropoutMask& mask) {
  const std::size_t d = problem.d(), n = problem.n();
  if (mask.dim() != d || state.beta.dim() != d) throw DimensionError("gd_step: dimension mismatch");
  const Matrix& x = problem.X();
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      if (mask.retained[j]) fit += x(i, j) * state.beta[j];
    resid[i] = problem.y()[i] - fit;
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (!mask.retained[j]) continue;
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i) g += x(i, j) * resid[i];
    state.beta[j] += problem.alpha() * g;
  }
  ++state.step;
  return state;
}

// 2 / ‖𝕏‖
inline double lr_bound_gd(const Matrix& gram) {
  detail::require_square(gram, "lr_bound_gd");
  const double norm = operator_norm(gram);
  if (!(norm > 0.0)) throw ParameterError("lr_bound_gd: zero Gram matrix gives an unbounded learning rate");
  return 2.0 / norm;
}

// E[(I - αD𝕏D)^2] = I - 2αp𝕏_p + α²(p𝕏_p𝕏_p + p²(1-p) Diag(X̄𝕏))
inline Matrix expected_contraction_matrix(const Matrix& gram, double p, double alpha) {
  detail::require_square(gram, "exact_contraction_sq");
  detail::require_probability(p, "exact_contraction_sq");
  if (!(alpha > 0.0)) throw ParameterError("exact_contraction_sq: alpha must be positive");
  const Matrix gp = p_rescale(gram, p);
  Matrix m = Matrix::identity(gram.rows());
  m -= (2.0 * alpha * p) * gp;
  m += (alpha * alpha) * (p * (gp * gp) + (p * p * (1.0 - p)) * diag_part(off_diag(gram) * gram));
  return symmetrize(m);
}

inline double exact_contraction_sq(const Matrix& gram, double p, double alpha) {
  return lambda_max(expected_contraction_matrix(gram, p, alpha));
}

// λ_max of N^{-1} Σ A_i'A_i, A_i = I - αD_i𝕏D_i.
inline double empirical_contraction_sq(const Matrix& gram, double p, double alpha, std::size_t draws,
                                       RngStream& rng) {
  detail::require_square(gram, "empirical_contraction_sq");
  if (draws < 1) throw ParameterError("empirical_contraction_sq: need at least one draw");
  const std::size_t d = gram.rows();
  Matrix acc(d, d);
  DropoutMask mask;
  Matrix a(d, d);
  for (std::size_t it = 0; it < draws; ++it) {
    sample_dropout_into(mask, d, p, rng);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        a(i, j) = (i == j ? 1.0 : 0.0) - ((mask.retained[i] && mask.retained[j]) ? alpha * gram(i, j) : 0.0);
    acc += a.transpose() * a;
  }
  acc *= 1.0 / static_cast<double>(draws);
  return lambda_max(symmetrize(acc));
}

struct AsymptoticCov {
  Matrix S;
  Matrix S0;
  Matrix V0;
  Matrix Bp;
  Matrix Xi;
};

inline constexpr std::size_t kMaxLyapunovDim = 64;

namespace detail {
// vec(V) = (I⊗M + M⊗I)^{-1} vec(rhs)
inline Matrix lyapunov_solve(const Matrix& m, const Matrix& rhs) {
  const std::size_t d = m.rows();
  const Matrix eye = Matrix::identity(d);
  Matrix op = kronecker(eye, m);
  op += kronecker(m, eye);
  return unvec(solve(op, vec(rhs)), d, d);
}
}  // namespace detail

// Asymptotic covariance Ξ(α) = V₀ + αB_p of the GD dropout iterates around β̃.
inline AsymptoticCov asymptotic_cov_xi(const Matrix& x, const Vector& beta_star, double p, double alpha) {
  const std::size_t d = x.cols();
  if (d > kMaxLyapunovDim) throw ResourceError("asymptotic_cov_xi: d > 64 (d^2 x d^2 solve)");
  if (beta_star.dim() != d) throw DimensionError("asymptotic_cov_xi: beta_star has wrong dimension");
  detail::require_probability(p, "asymptotic_cov_xi");
  if (!(alpha > 0.0)) throw ParameterError("asymptotic_cov_xi: alpha must be positive");

  const Matrix gram = symmetrize(x.transpose() * x);
  for (std::size_t j = 0; j < d; ++j)
    if (!(gram(j, j) > 0.0)) throw ContractError("asymptotic_cov_xi: design has a zero column");
  const Matrix gp = p_rescale(gram, p);
  const Matrix gp_inv = inverse(gp);

  // S₀ = 𝕏_p^{-1} X'(Xβ*β*'X' + I)X 𝕏_p^{-1} = 𝕏_p^{-1}(𝕏β*β*'𝕏 + 𝕏)𝕏_p^{-1}
  const Vector gb = gram * beta_star;
  const Matrix s0 = symmetrize(gp_inv * (Matrix::outer(gb, gb) + gram) * gp_inv);

  const double q = 1.0 - p;
  const Matrix xb = off_diag(gram);
  const Matrix xbp = p_rescale(xb, p);
  const Matrix s0p = p_rescale(s0, p);
  const Matrix s0bar = off_diag(s0);
  const Matrix xsx = xb * s0 * xb;

  Matrix s = (p * p * p) * p_rescale(xsx, p);
  s -= (2.0 * p) * (p * (xbp * p_rescale(s0 * xb, p)) + (p * p * q) * diag_part(xsx));
  s += p * (xbp * s0p * xbp);
  Matrix tail = diag_part(xb * s0p * xb);
  tail += 2.0 * (xbp * diag_part(s0bar * xb));
  tail += q * hadamard(hadamard(xb, s0bar.transpose()), xb);
  s += (p * p * q) * tail;
  s = symmetrize(s);

  const Matrix m = p * gp;
  const Matrix v0 = symmetrize(detail::lyapunov_solve(m, s));
  const Matrix bp = symmetrize(detail::lyapunov_solve(m, (p * p) * (gp * v0 * gp)));
  Matrix xi = v0 + alpha * bp;
  return {std::move(s), s0, v0, bp, std::move(xi)};
}

// ‖β_k - β'_k‖ for k = 1..steps, both chains driven by the same masks.
inline std::vector<double> coupled_gmc_run(const GdProblem& problem, const Vector& beta0, const Vector& beta0p,
                                           std::size_t steps, RngStream& rng) {
  const std::size_t d = problem.d();
  if (beta0.dim() != d || beta0p.dim() != d) throw DimensionError("coupled_gmc_run: dimension mismatch");
  GdState a{beta0, 0}, b{beta0p, 0};
  std::vector<double> gaps;
  gaps.reserve(steps);
  DropoutMask mask;
  for (std::size_t k = 0; k < steps; ++k) {
    sample_dropout_into(mask, d, problem.p(), rng);
    a = gd_step(problem, std::move(a), mask);
    b = gd_step(problem, std::move(b), mask);
    gaps.push_back(norm2(a.beta - b.beta));
  }
  return gaps;
}

// Averaged GD iterate (1/n) Σ β_k.
template <std::ranges::input_range Range>
Vector agd_average(const Range& iterates) {
  RunningMean acc;
  for (const Vector& v : iterates) acc.push(v);
  if (acc.count() == 0) throw ContractError("agd_average: no iterates");
  return acc.mean();
}

}  // namespace dsgd
