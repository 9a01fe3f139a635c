#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <vector>

#include "dropout_sgd/inference.hpp"

using namespace dsgd;

TEST(InvNormCdf, Examples) {
  EXPECT_EQ(inv_norm_cdf(0.5), 0.0);
  EXPECT_NEAR(inv_norm_cdf(0.975), 1.959964, 1e-6);
  EXPECT_THROW(inv_norm_cdf(0.0), ParameterError);
  EXPECT_THROW(inv_norm_cdf(1.0), ParameterError);
  EXPECT_THROW(inv_norm_cdf(NAN), ParameterError);
}

TEST(InvNormCdf, AgainstBoost) {
  const boost::math::normal_distribution<double> nd;
  for (double u : {1e-300, 1e-20, 1e-10, 1e-5, 0.001, 0.02, 0.1, 0.3, 0.42, 0.5, 0.6, 0.9, 0.975, 0.999, 1 - 1e-10}) {
    EXPECT_NEAR(inv_norm_cdf(u), boost::math::quantile(nd, u), 1e-9) << u;
  }
}

TEST(InvNormCdf, RoundTrip) {
  for (int i = 1; i < 1000; ++i) {
    const double u = i / 1000.0;
    EXPECT_NEAR(norm_cdf(inv_norm_cdf(u)), u, 1e-9);
  }
}

TEST(Chi2Quantile, Examples) {
  EXPECT_NEAR(chi2_quantile(2, 0.975), -2 * std::log(0.025), 1e-8 * 7.4);
  EXPECT_NEAR(chi2_quantile(2, 0.975), 7.377759, 1e-6);
  const double z = inv_norm_cdf(0.9875);
  EXPECT_NEAR(chi2_quantile(1, 0.975), z * z, 1e-8 * 5.0);
  EXPECT_NEAR(chi2_quantile(1, 0.975), 5.023886, 1e-6);
  EXPECT_NEAR(chi2_quantile(3, 0.975), 9.348404, 1e-6);
  EXPECT_THROW(chi2_quantile(0, 0.5), ParameterError);
  EXPECT_THROW(chi2_quantile(3, 1.0), ParameterError);
}

TEST(Chi2Quantile, AgainstBoost) {
  for (int d : {1, 2, 3, 5, 10, 20, 50, 100}) {
    const boost::math::chi_squared_distribution<double> cd(d);
    for (double u : {0.005, 0.025, 0.1, 0.5, 0.9, 0.95, 0.975, 0.995}) {
      const double ref = boost::math::quantile(cd, u);
      EXPECT_NEAR(chi2_quantile(d, u), ref, 1e-8 * ref) << d << " " << u;
      EXPECT_NEAR(chi2_cdf(d, chi2_quantile(d, u)), u, 1e-10);
    }
  }
}

TEST(CiCoordinate, Examples) {
  const auto ci = ci_coordinate(0.5, 4.0, 400, 0.05);
  const double half = inv_norm_cdf(0.975) * 0.1;
  EXPECT_NEAR(ci.lower, 0.5 - half, 1e-15);
  EXPECT_NEAR(ci.upper, 0.5 + half, 1e-15);
  EXPECT_NEAR(ci.lower, 0.304, 1e-3);
  EXPECT_DOUBLE_EQ(ci.level, 0.95);
  const auto point = ci_coordinate(1.0, 0.0, 10, 0.05);
  EXPECT_EQ(point.lower, point.upper);
  EXPECT_NEAR(ci_coordinate(0, 1, 400, 0.05).length() * 2, ci_coordinate(0, 1, 100, 0.05).length(), 1e-15);
  EXPECT_THROW(ci_coordinate(0, -1, 10, 0.05), ContractError);
  EXPECT_THROW(ci_coordinate(0, 1, 0, 0.05), ContractError);
  EXPECT_THROW(ci_coordinate(0, 1, 10, 1.0), ParameterError);
}

TEST(CiProjection, AxisMatchesCoordinate) {
  const Vector mean{0.2, -0.4, 1.1};
  const Matrix sigma{{2, 0.5, 0.1}, {0.5, 3, 0.2}, {0.1, 0.2, 1}};
  for (std::size_t j = 0; j < 3; ++j) {
    const auto a = ci_projection(mean, sigma, 50, 0.1, Vector::unit(3, j));
    const auto b = ci_coordinate(mean[j], sigma(j, j), 50, 0.1);
    EXPECT_EQ(a.lower, b.lower);
    EXPECT_EQ(a.upper, b.upper);
  }
}

TEST(CiProjection, IsotropicWidth) {
  const Vector mean{1, 2};
  const Vector v{0.6, 0.8};
  const auto ci = ci_projection(mean, Matrix::identity(2), 25, 0.05, v);
  EXPECT_NEAR(ci.length(), 2 * inv_norm_cdf(0.975) / 5, 1e-14);
  EXPECT_NEAR(0.5 * (ci.lower + ci.upper), 0.6 + 1.6, 1e-14);
  EXPECT_THROW(ci_projection(mean, Matrix::identity(2), 25, 0.05, Vector{1, 1}), ParameterError);
  EXPECT_THROW(ci_projection(mean, Matrix::identity(3), 25, 0.05, v), DimensionError);
}

TEST(JointRegion, Examples) {
  const Vector center{1, 2, 3};
  const auto region = make_joint_region(center, Matrix::identity(3), 1, 0.05);
  const auto at_center = joint_region_contains(region, center);
  EXPECT_TRUE(at_center.contained);
  EXPECT_EQ(at_center.statistic, 0.0);
  const auto far = joint_region_contains(region, Vector{-3, 2, 3});
  EXPECT_NEAR(far.statistic, 16.0, 1e-12);
  EXPECT_FALSE(far.contained);
  EXPECT_NEAR(region.threshold, 9.348404, 1e-6);
  const auto conv = make_joint_region(center, Matrix::identity(3), 1, 0.05, JointQuantile::Conventional);
  EXPECT_NEAR(conv.threshold, chi2_quantile(3, 0.95), 1e-12);
}

TEST(JointRegion, MonotoneInOmega) {
  double prev = INFINITY;
  for (double w : {0.01, 0.05, 0.1, 0.2, 0.5}) {
    const auto r = make_joint_region(Vector{0, 0}, Matrix::identity(2), 10, w);
    EXPECT_LT(r.threshold, prev);
    prev = r.threshold;
  }
}

TEST(JointRegion, RotationInvariant) {
  const double c = std::cos(0.7), s = std::sin(0.7);
  const Matrix q{{c, -s}, {s, c}};
  const Matrix sigma{{2, 0.3}, {0.3, 1}};
  const Vector center{0.5, -0.2}, beta{1.0, 0.4};
  const auto a = joint_region_contains(make_joint_region(center, sigma, 40, 0.05), beta);
  const auto b = joint_region_contains(
      make_joint_region(q * center, symmetrize(q * sigma * q.transpose()), 40, 0.05), q * beta);
  EXPECT_NEAR(a.statistic, b.statistic, 1e-12 * a.statistic);
}

TEST(JointRegion, Errors) {
  const auto singular = make_joint_region(Vector{0, 0}, Matrix{{1, 1}, {1, 1}}, 5, 0.05);
  EXPECT_THROW(joint_region_contains(singular, Vector{1, 0}), SingularMatrixError);
  EXPECT_THROW(make_joint_region(Vector{0, 0}, Matrix{{1, 0.5}, {0, 1}}, 5, 0.05), ContractError);
}

TEST(CoverageTally, Examples) {
  const auto all = coverage_tally(std::vector<bool>(10, true));
  EXPECT_EQ(all.rate, 1.0);
  EXPECT_EQ(all.se, 0.0);
  EXPECT_NEAR(coverage_from_rate(0.945, 200).se, 0.0161, 5e-5);
  std::vector<bool> half(100, false);
  for (int i = 0; i < 50; ++i) half[i] = true;
  const auto h = coverage_tally(half);
  EXPECT_EQ(h.rate, 0.5);
  EXPECT_DOUBLE_EQ(h.se, 0.05);
  EXPECT_THROW(coverage_tally(std::vector<bool>{}), ContractError);
}
