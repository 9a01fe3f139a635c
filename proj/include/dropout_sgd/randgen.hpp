#pragma once

// Seeded random generation for the dropout experiments.
//
// RngStream is counter based: draw k of stream (seed, stream_id) is a pure
// function of the triple (seed, stream_id, k), so replications can run on
// any thread in any order and still reproduce bit for bit.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/inference.hpp"
#include "dropout_sgd/linalg.hpp"

namespace dsgd {

namespace detail {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_id_(stream_id), counter_(counter),
        key_(detail::mix64(seed ^ detail::mix64(stream_id + detail::kGolden))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal by inversion.
  double normal() { return inv_norm_cdf(uniform()); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
  std::uint64_t key_;
};

// Diagonal 0/1 dropout matrix D stored as its diagonal.
struct DropoutMask {
  std::vector<std::uint8_t> retained;
  double p = 1.0;

  std::size_t dim() const noexcept { return retained.size(); }
  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto r : retained) c += r;
    return c;
  }
  Matrix as_matrix() const {
    Matrix m(dim(), dim());
    for (std::size_t i = 0; i < dim(); ++i) m(i, i) = retained[i];
    return m;
  }
  static DropoutMask all_ones(std::size_t d, double p = 1.0) { return {std::vector<std::uint8_t>(d, 1), p}; }
  static DropoutMask all_zeros(std::size_t d, double p = 1.0) { return {std::vector<std::uint8_t>(d, 0), p}; }
};

// Refills an existing mask in place; same draws as sample_dropout.
inline void sample_dropout_into(DropoutMask& mask, std::size_t d, double p, RngStream& rng) {
  detail::require_probability(p, "sample_dropout");
  mask.p = p;
  mask.retained.resize(d);
  for (std::size_t i = 0; i < d; ++i) mask.retained[i] = rng.bernoulli(p) ? 1 : 0;
}

inline DropoutMask sample_dropout(std::size_t d, double p, RngStream& rng) {
  if (d < 1) throw ParameterError("sample_dropout: d must be >= 1");
  DropoutMask m;
  sample_dropout_into(m, d, p, rng);
  return m;
}

// Fixed design regression y = X β* + ε with standard normal X and ε.
struct FixedDesignData {
  Matrix X;
  Vector y;
  Vector beta_star;
};

inline FixedDesignData gen_fixed_design(std::size_t n, std::size_t d, const Vector& beta_star, RngStream& rng) {
  if (d < 1 || n < d) throw ParameterError("gen_fixed_design: need n >= d >= 1");
  if (beta_star.dim() != d) throw DimensionError("gen_fixed_design: beta_star has wrong dimension");
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
  // A zero column has probability zero; redraw it anyway to keep the design reduced.
  for (std::size_t j = 0; j < d; ++j) {
    auto col_sq = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += x(i, j) * x(i, j);
      return s;
    };
    while (!(col_sq() > 0.0))
      for (std::size_t i = 0; i < n; ++i) x(i, j) = rng.normal();
  }
  Vector y = x * beta_star;
  for (std::size_t i = 0; i < n; ++i) y[i] += rng.normal();
  return {std::move(x), std::move(y), beta_star};
}

// One streaming observation (y_k, x_k) with x_k ~ N(0, I_d), y_k = x_k'β* + ε_k.
struct StreamSample {
  double y = 0.0;
  Vector x;
};

inline void stream_sample_into(StreamSample& out, const Vector& beta_star, RngStream& rng) {
  const std::size_t d = beta_star.dim();
  if (out.x.dim() != d) out.x = Vector(d);
  double mean = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.x[j] = rng.normal();
    mean += out.x[j] * beta_star[j];
  }
  out.y = mean + rng.normal();
}

inline StreamSample stream_sample(const Vector& beta_star, RngStream& rng) {
  StreamSample s;
  stream_sample_into(s, beta_star, rng);
  return s;
}

// β* with coordinates equally spaced on [0, 1] (a single coordinate sits at 0).
inline Vector equispaced_beta(std::size_t d) {
  Vector b(d);
  for (std::size_t j = 0; j < d; ++j) b[j] = d > 1 ? static_cast<double>(j) / static_cast<double>(d - 1) : 0.0;
  return b;
}

}  // namespace dsgd
