#pragma once

// Exact expectations of products with a Bernoulli(p) dropout matrix D, and a
// brute-force oracle that sums over all 2^d masks.
//
// The closed forms below never call the enumerator; tests compare the two.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/randgen.hpp"

namespace dsgd {

enum class MomentOrder { DAD, DADBD, DADBDCD };

namespace detail {
inline std::size_t same_square(const Matrix& a, const Matrix& b, const char* what) {
  require_square(a, what);
  if (b.rows() != a.rows() || b.cols() != a.cols()) throw DimensionError(std::string(what) + ": shape mismatch");
  return a.rows();
}
}  // namespace detail

// E[DAD] = p A_p
inline Matrix e_dad(const Matrix& a, double p) {
  detail::require_square(a, "e_dad");
  return p * p_rescale(a, p);
}

// E[DADBD] = p A_p B_p + p^2 (1-p) Diag(Ā B)
inline Matrix e_dadbd(const Matrix& a, const Matrix& b, double p) {
  detail::same_square(a, b, "e_dadbd");
  detail::require_probability(p, "e_dadbd");
  Matrix out = p * (p_rescale(a, p) * p_rescale(b, p));
  out += (p * p * (1.0 - p)) * diag_part(off_diag(a) * b);
  return out;
}

// E[DADBDCD] = p A_p B_p C_p
//   + p^2 (1-p) [ Diag(Ā B_p C̄) + A_p Diag(B̄ C) + Diag(A B̄) C_p + (1-p) A ⊙ B̄' ⊙ C ]
inline Matrix e_dadbdcd(const Matrix& a, const Matrix& b, const Matrix& c, double p) {
  detail::same_square(a, b, "e_dadbdcd");
  detail::same_square(a, c, "e_dadbdcd");
  detail::require_probability(p, "e_dadbdcd");
  const Matrix ap = p_rescale(a, p), bp = p_rescale(b, p), cp = p_rescale(c, p);
  const Matrix abar = off_diag(a), bbar = off_diag(b), cbar = off_diag(c);
  Matrix bracket = diag_part(abar * bp * cbar);
  bracket += ap * diag_part(bbar * c);
  bracket += diag_part(a * bbar) * cp;
  bracket += (1.0 - p) * hadamard(hadamard(a, bbar.transpose()), c);
  Matrix out = p * (ap * bp * cp);
  out += (p * p * (1.0 - p)) * bracket;
  return out;
}

inline Matrix dropout_moment(MomentOrder order, const Matrix& a, const Matrix& b, const Matrix& c, double p) {
  switch (order) {
    case MomentOrder::DAD: return e_dad(a, p);
    case MomentOrder::DADBD: return e_dadbd(a, b, p);
    case MomentOrder::DADBDCD: return e_dadbdcd(a, b, c, p);
  }
  throw ParameterError("dropout_moment: unknown order");
}

inline constexpr std::size_t kMaxEnumerationDim = 20;

// Σ over all 2^d masks of f(mask) p^{#ones} (1-p)^{#zeros}.
template <typename F>
Matrix enumerate_expectation(F&& f, std::size_t d, double p) {
  if (d > kMaxEnumerationDim) throw ResourceError("enumerate_expectation: d > 20 (2^d terms)");
  if (d < 1) throw ParameterError("enumerate_expectation: d must be >= 1");
  detail::require_probability(p, "enumerate_expectation");
  Matrix total;
  DropoutMask mask = DropoutMask::all_zeros(d, p);
  const std::uint64_t masks = std::uint64_t{1} << d;
  for (std::uint64_t bits = 0; bits < masks; ++bits) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < d; ++i) {
      mask.retained[i] = (bits >> i) & 1U;
      ones += mask.retained[i];
    }
    const double w = std::pow(p, static_cast<double>(ones)) * std::pow(1.0 - p, static_cast<double>(d - ones));
    if (w == 0.0) continue;
    Matrix term = f(static_cast<const DropoutMask&>(mask));
    term *= w;
    if (total.rows() == 0) total = std::move(term);
    else total += term;
  }
  return total;
}

}  // namespace dsgd
