#include <tailkde/core.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

TEST(Grid, TwoPointTrapezoid)
{
  std::vector<double> lo{0.0}, hi{1.0};
  auto g = make_grid(lo, hi, 2);
  ASSERT_EQ(g.axes[0].size(), 2u);
  EXPECT_DOUBLE_EQ(g.axes[0][0], 0.0);
  EXPECT_DOUBLE_EQ(g.axes[0][1], 1.0);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(g.weights[1], 0.5);
}

TEST(Grid, UnitSquareWeightsSumToArea)
{
  std::vector<double> lo{0.0, 0.0}, hi{1.0, 1.0};
  auto g = make_grid(lo, hi, 3);
  EXPECT_EQ(g.size(), 9u);
  double s = 0.0;
  for (double w : g.weights)
    s += w;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Grid, ConstantIntegral)
{
  std::vector<double> lo{0.0}, hi{1.0};
  auto g = make_grid(lo, hi, 101);
  g.fill([](std::span<const double>) { return 2.0; });
  EXPECT_NEAR(g.integral(), 2.0, 1e-12);
}

TEST(Grid, AffineExactness)
{
  std::vector<double> lo{-1.0, 2.0, 0.5}, hi{3.0, 5.0, 1.5};
  auto g = make_grid(lo, hi, 17);
  g.fill([](std::span<const double> x) { return 1.0 + 2.0 * x[0] - 0.5 * x[1] + 3.0 * x[2]; });
  // integral over the box: vol * f(centre)
  const double vol = 4.0 * 3.0 * 1.0;
  const double centre = 1.0 + 2.0 * 1.0 - 0.5 * 3.5 + 3.0 * 1.0;
  EXPECT_NEAR(g.integral(), vol * centre, 1e-10 * vol * centre);
}

TEST(Grid, PointUnflattening)
{
  std::vector<double> lo{0.0, 10.0}, hi{1.0, 12.0};
  auto g = make_grid(lo, hi, 3);
  auto p = g.point(5); // row 1, column 2
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 12.0);
}

TEST(Grid, RejectsBadBounds)
{
  std::vector<double> lo{0.0}, hi{0.0}, inf{std::numeric_limits<double>::infinity()};
  EXPECT_THROW(make_grid(lo, hi, 16), ConfigError);
  EXPECT_THROW(make_grid(lo, inf, 16), ConfigError);
  TailRegion r{{1.0}, {0.0}, std::nullopt};
  std::vector<double> below{0.5};
  EXPECT_THROW(make_grid(r, below, 16), ConfigError);
}

TEST(Grid, ExplicitAxes)
{
  // Nonuniform nodes: the trapezoid rule stays exact for affine integrands.
  auto g = make_grid({{0.0, 0.1, 0.5, 2.0}, {1.0, 3.0}});
  EXPECT_EQ(g.shape(), (std::vector<std::size_t>{4, 2}));
  g.fill([](std::span<const double> x) { return 3.0 - x[0] + 0.5 * x[1]; });
  EXPECT_NEAR(g.integral(), 2.0 * 2.0 * (3.0 - 1.0 + 1.0), 1e-12);
  EXPECT_THROW(make_grid({{0.0, 0.0, 1.0}}), ConfigError);
  EXPECT_THROW(make_grid({{0.0}}), ConfigError);
  EXPECT_THROW(make_grid(std::vector<std::vector<double>>{}), ConfigError);
}

TEST(Quantile, Type7)
{
  auto x = DataMatrix::from_column({5, 1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(empirical_quantile(x, 0.5)[0], 3.0);
  auto y = DataMatrix::from_column({0, 1});
  EXPECT_NEAR(empirical_quantile(y, 0.95)[0], 0.95, 1e-15);
  EXPECT_THROW(empirical_quantile(x, 0.0), DataError);
  EXPECT_THROW(empirical_quantile(x, 1.0), DataError);
}

TEST(Quantile, Monotone)
{
  RngStream rng(7, 0);
  std::vector<double> v(2 * 301);
  for (auto& e : v)
    e = rng.normal();
  DataMatrix x(301, 2, v);
  auto prev = empirical_quantile(x, 0.01);
  for (double p = 0.02; p < 1.0; p += 0.01) {
    auto q = empirical_quantile(x, p);
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_LE(prev[j], q[j]);
    prev = q;
  }
}

TEST(DataMatrixTest, RejectsNonFinite)
{
  EXPECT_THROW(DataMatrix(2, 1, {1.0, std::nan("")}), DataError);
  EXPECT_THROW(DataMatrix(1, 4, {1, 2, 3, 4}), DataError);
  EXPECT_THROW(DataMatrix(2, 2, {1, 2, 3}), DataError);
}

TEST(DataMatrixTest, Exceedances)
{
  DataMatrix x(4, 2, {1, 1, 3, 3, 3, 0, 5, 6});
  std::vector<double> u{2, 2};
  auto e = x.exceedances(u);
  EXPECT_EQ(e.n(), 2u);
  EXPECT_EQ(e(1, 1), 6.0);
  std::vector<double> hi{10, 10};
  EXPECT_THROW(x.exceedances(hi), DataError);
}

TEST(Bandwidth, Validation)
{
  Eigen::MatrixXd a(2, 2);
  a << 1, 0.5, 0.5, 1;
  EXPECT_NO_THROW(BandwidthMatrix{a});
  a(0, 1) = 0.6;
  EXPECT_THROW(BandwidthMatrix{a}, NumericalError);
  a << 1, 2, 2, 1;
  EXPECT_THROW(BandwidthMatrix{a}, NumericalError);
}

TEST(Rng, Reproducible)
{
  RngStream a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int k = 0; k < 1000; ++k) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs = differs || x != c.uniform();
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformMoments)
{
  RngStream r(1, 0);
  const int n = 200000;
  double m = 0.0, m2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    m += u;
    m2 += u * u;
  }
  m /= n;
  m2 /= n;
  EXPECT_NEAR(m, 0.5, 4e-3);
  EXPECT_NEAR(m2 - m * m, 1.0 / 12.0, 2e-3);
}

TEST(Parallel, ThreadCountInvariant)
{
  std::vector<double> a(1000), b(1000);
  parallel_for(1000, 1, [&](std::size_t k) { a[k] = std::sin(static_cast<double>(k)); });
  parallel_for(1000, 4, [&](std::size_t k) { b[k] = std::sin(static_cast<double>(k)); });
  EXPECT_EQ(a, b);
}

TEST(Normal, Helpers)
{
  EXPECT_NEAR(norm_pdf(0.0), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(norm_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(norm_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(norm_sf(10.0), 7.619853024160527e-24, 1e-36);
}
