#include <gtest/gtest.h>

#include <cmath>

#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/randgen.hpp"

using namespace dsgd;

namespace {

void expect_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << "at " << i << "," << j;
}

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(Construction, RejectsNonFinite) {
  EXPECT_THROW(Matrix(1, 1, {NAN}), ParameterError);
  EXPECT_THROW((Vector{1.0, INFINITY}), ParameterError);
  EXPECT_THROW(Matrix(2, 2, {1.0, 2.0, 3.0}), DimensionError);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), DimensionError);
}

TEST(DiagPart, Examples) {
  expect_near(diag_part(Matrix{{1, 2}, {3, 4}}), Matrix{{1, 0}, {0, 4}}, 0.0);
  expect_near(diag_part(Matrix::identity(3)), Matrix::identity(3), 0.0);
  expect_near(diag_part(Matrix(2, 2)), Matrix(2, 2), 0.0);
  EXPECT_THROW(diag_part(Matrix(2, 3)), DimensionError);
}

TEST(OffDiag, Examples) {
  const Matrix a{{1, 2}, {3, 4}};
  expect_near(off_diag(a), Matrix{{0, 2}, {3, 0}}, 0.0);
  expect_near(off_diag(Matrix::diagonal(Vector{3, 5})), Matrix(2, 2), 0.0);
  expect_near(off_diag(off_diag(a)), off_diag(a), 0.0);
  EXPECT_THROW(off_diag(Matrix(3, 2)), DimensionError);
}

TEST(PRescale, Examples) {
  const Matrix a{{1, 2}, {2, 3}};
  expect_near(p_rescale(a, 0.5), Matrix{{1, 1}, {1, 3}}, 0.0);
  expect_near(p_rescale(a, 1.0), a, 0.0);
  const Matrix dg = Matrix::diagonal(Vector{2, -1});
  for (double p : {0.1, 0.5, 0.9}) expect_near(p_rescale(dg, p), dg, 0.0);
  EXPECT_THROW(p_rescale(a, 0.0), ParameterError);
  EXPECT_THROW(p_rescale(a, 1.5), ParameterError);
}

TEST(PRescale, MatchesDefinition) {
  RngStream rng(1, 0);
  const Matrix a = random_matrix(4, 4, rng);
  const double p = 0.3;
  expect_near(p_rescale(a, p), p * a + (1 - p) * diag_part(a), 1e-15);
}

TEST(Hadamard, Examples) {
  const Matrix a{{1, 2}, {3, 4}};
  expect_near(hadamard(a, Matrix{{2, 0}, {0, 2}}), Matrix{{2, 0}, {0, 8}}, 0.0);
  expect_near(hadamard(a, Matrix{{1, 1}, {1, 1}}), a, 0.0);
  expect_near(hadamard(a, Matrix(2, 2)), Matrix(2, 2), 0.0);
  EXPECT_THROW(hadamard(a, Matrix(2, 3)), DimensionError);
}

TEST(Kronecker, Examples) {
  const Matrix b{{1, 2}, {3, 4}};
  const Matrix k = kronecker(Matrix::identity(2), b);
  expect_near(k, Matrix{{1, 2, 0, 0}, {3, 4, 0, 0}, {0, 0, 1, 2}, {0, 0, 3, 4}}, 0.0);
  expect_near(kronecker(Matrix{{1}}, b), b, 0.0);
  const Matrix big = kronecker(Matrix(2, 3), Matrix(4, 5));
  EXPECT_EQ(big.rows(), 8u);
  EXPECT_EQ(big.cols(), 15u);
}

TEST(Kronecker, VecIdentity) {
  // vec(A U B) = (B' ⊗ A) vec(U)
  RngStream rng(2, 0);
  const Matrix a = random_matrix(3, 2, rng), u = random_matrix(2, 4, rng), b = random_matrix(4, 3, rng);
  const Vector lhs = vec(a * u * b);
  const Vector rhs = kronecker(b.transpose(), a) * vec(u);
  for (std::size_t i = 0; i < lhs.dim(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(Vec, Examples) {
  const Vector v = vec(Matrix{{1, 3}, {2, 4}});
  EXPECT_EQ(v, (Vector{1, 2, 3, 4}));
  EXPECT_EQ(vec(Matrix{{5}, {6}, {7}}), (Vector{5, 6, 7}));
  EXPECT_EQ(vec(Matrix(2, 2)), Vector(4));
  expect_near(unvec(v, 2, 2), Matrix{{1, 3}, {2, 4}}, 0.0);
  EXPECT_THROW(unvec(v, 3, 2), DimensionError);
}

TEST(SymEigen, DiagonalAndKnown) {
  const Vector ev = sym_eigenvalues(Matrix::diagonal(Vector{1, 5, 3}));
  EXPECT_DOUBLE_EQ(ev[0], 5);
  EXPECT_DOUBLE_EQ(ev[1], 3);
  EXPECT_DOUBLE_EQ(ev[2], 1);
  const Vector e2 = sym_eigenvalues(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(e2[0], 3, 1e-14);
  EXPECT_NEAR(e2[1], 1, 1e-14);
  EXPECT_THROW(sym_eigenvalues(Matrix{{1, 2}, {0, 1}}), ContractError);
  EXPECT_THROW(sym_eigenvalues(Matrix(2, 3)), DimensionError);
}

TEST(SymEigen, Reconstructs) {
  RngStream rng(3, 0);
  const Matrix g = random_matrix(6, 6, rng);
  const Matrix s = symmetrize(g + g.transpose());
  const SymEigen e = sym_eigen(s);
  Matrix rec(6, 6);
  for (std::size_t k = 0; k < 6; ++k) rec += e.values[k] * Matrix::outer(e.vectors.column(k), e.vectors.column(k));
  expect_near(rec, s, 1e-12);
  double tr = 0;
  for (double v : e.values) tr += v;
  EXPECT_NEAR(tr, s.trace(), 1e-12);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_GE(e.values[k - 1], e.values[k]);
}

TEST(OperatorNorm, Examples) {
  EXPECT_NEAR(operator_norm(Matrix::diagonal(Vector{-4, 1})), 4.0, 1e-14);
  EXPECT_NEAR(operator_norm(Matrix{{0, 2}, {0, 0}}), 2.0, 1e-14);
  EXPECT_DOUBLE_EQ(operator_norm(Matrix(3, 3)), 0.0);
  // rank one: ‖ab'‖ = ‖a‖‖b‖
  const Vector a{1, 2, 2}, b{3, 4};
  EXPECT_NEAR(operator_norm(Matrix::outer(a, b)), 15.0, 1e-12);
}

TEST(Solve, Examples) {
  const Matrix m{{4, 1}, {2, 3}};
  const Vector x = solve(m, Vector{1, 2});
  EXPECT_NEAR(x[0], 0.1, 1e-15);
  EXPECT_NEAR(x[1], 0.6, 1e-15);
  EXPECT_THROW(solve(Matrix{{1, 2}, {2, 4}}, Vector{1, 1}), SingularMatrixError);
  EXPECT_THROW(solve(m, Vector{1, 2, 3}), DimensionError);
  EXPECT_THROW(solve(Matrix(2, 3), Vector{1, 2}), DimensionError);
}

TEST(Solve, RandomResidual) {
  RngStream rng(4, 0);
  const Matrix m = random_matrix(8, 8, rng);
  Vector b(8);
  for (auto& v : b) v = rng.normal();
  const Vector x = solve(m, b);
  const Vector r = m * x - b;
  EXPECT_LT(norm2(r), 1e-12 * norm2(b) * m.frobenius());
  expect_near(inverse(m) * m, Matrix::identity(8), 1e-12);
}

TEST(Cholesky, Reconstructs) {
  const Matrix s{{4, 2}, {2, 3}};
  const Matrix l = cholesky_lower(s);
  expect_near(l * l.transpose(), s, 1e-14);
  EXPECT_THROW(cholesky_lower(Matrix{{1, 2}, {2, 1}}), SingularMatrixError);
}

TEST(MomentGap, EqualityAtTwoForOrthogonal) {
  const auto g = moment_inequality_gap(Vector{1, 0}, Vector{0, 2}, 2.0);
  // |x+y|^2 - |x|^2 - 2x'y = |y|^2, rhs_i = |y|^2 as well
  EXPECT_NEAR(g.lhs, 4.0, 1e-14);
  EXPECT_NEAR(g.rhs_i, 4.0, 1e-14);
}

TEST(MomentGap, ZeroX) {
  const auto g = moment_inequality_gap(Vector{0, 0}, Vector{3, 4}, 3.0);
  EXPECT_NEAR(g.lhs, 125.0, 1e-12);
  EXPECT_NEAR(g.rhs_i, 125.0, 1e-12);
}

TEST(MomentGap, RandomBound) {
  RngStream rng(5, 0);
  for (int t = 0; t < 2000; ++t) {
    Vector x(4), y(4);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = 3.0 * rng.normal();
    const double q = 2.0 + 2.0 * rng.uniform();
    const auto g = moment_inequality_gap(x, y, q);
    EXPECT_LE(g.lhs, g.rhs_i + 1e-12 * std::pow(norm2(x) + norm2(y), q));
    EXPECT_NEAR(g.rhs_i, g.rhs_ii, 1e-9 * std::pow(norm2(x) + norm2(y), q));
  }
}

TEST(MomentGap, Errors) {
  EXPECT_THROW(moment_inequality_gap(Vector{1}, Vector{1, 2}, 2.0), DimensionError);
  EXPECT_THROW(moment_inequality_gap(Vector{1}, Vector{1}, 1.5), ParameterError);
}
