#include <tailkde/kernels.hpp>
#include <tailkde/transform.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

TEST(Transform, DefaultOffset)
{
  EXPECT_DOUBLE_EQ(default_offset(DataMatrix::from_column({0, 10}))[0], -0.5);
  EXPECT_NEAR(default_offset(DataMatrix::from_column({-2, 2}))[0], -2.2, 1e-15);
  EXPECT_THROW(default_offset(DataMatrix::from_column({5, 5, 5})), DataError);
  DataMatrix x(3, 2, {0, 1, 10, 1, 5, 3});
  auto u0 = default_offset(x);
  EXPECT_DOUBLE_EQ(u0[0], -0.5);
  EXPECT_DOUBLE_EQ(u0[1], 0.9);
}

TEST(Transform, Forward)
{
  LogTransform t({0.0});
  std::vector<double> one{1.0}, e{std::exp(1.0)};
  EXPECT_DOUBLE_EQ(t.forward(one)[0], 0.0);
  EXPECT_NEAR(t.forward(e)[0], 1.0, 1e-15);
  LogTransform t2({0.0, 0.0});
  std::vector<double> x{1.0, std::exp(2.0)};
  auto y = t2.forward(x);
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 2.0, 1e-15);
  std::vector<double> bad{0.0};
  EXPECT_THROW(t.forward(bad), DataError);
}

TEST(Transform, Jacobian)
{
  LogTransform t({0.0}), t2({0.0, 0.0}), t3({1.0});
  std::vector<double> two{2.0}, x{2.0, 4.0}, three{3.0};
  EXPECT_DOUBLE_EQ(t.jacobian(two), 0.5);
  EXPECT_DOUBLE_EQ(t2.jacobian(x), 0.125);
  EXPECT_DOUBLE_EQ(t3.jacobian(three), 0.5);
}

TEST(Transform, RoundTrip)
{
  RngStream r(5, 0);
  LogTransform t({-3.0, 2.0});
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> x{-3.0 + 1e-6 + std::pow(10.0, 10.0 * r.uniform()),
                          2.0 + 1e-6 + std::pow(10.0, 10.0 * r.uniform())};
    auto back = t.inverse(t.forward(x));
    for (int j = 0; j < 2; ++j)
      EXPECT_NEAR(back[j], x[j], 1e-12 * std::abs(x[j]) + 1e-12);
  }
}

TEST(Transform, RejectsNearOffset)
{
  LogTransform t({0.0}, {10.0});
  std::vector<double> close{1e-12}, ok{1e-9};
  EXPECT_THROW(t.forward(close), DataError);
  EXPECT_NO_THROW(t.forward(ok));
}

TEST(Transform, ChangeOfVariablesConservation)
{
  // g = N((0.3, -0.2), S) on the log scale, pulled back to (u0, inf)^2.
  Eigen::MatrixXd s(2, 2);
  s << 0.25, 0.05, 0.05, 0.16;
  GaussianDensity g(s);
  LogTransform t({1.0, -2.0});
  std::vector<double> lo{1.0 + 1e-9, -2.0 + 1e-9}, hi{1.0 + 40.0, -2.0 + 40.0};
  auto grid = make_grid(lo, hi, 1200);
  grid.fill([&](std::span<const double> x) {
    auto y = t.forward(x);
    double c[2] = {y[0] - 0.3, y[1] + 0.2};
    return g(c) * t.jacobian(x);
  });
  EXPECT_NEAR(grid.integral(), 1.0, 1e-3);
}
