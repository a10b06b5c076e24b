#include <tailkde/kde.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

namespace {

DataMatrix
normal_sample(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0, double shift = 0.0)
{
  RngStream r(seed, 0);
  std::vector<double> v(n * d);
  for (auto& e : v)
    e = shift + scale * r.normal();
  return DataMatrix(n, d, v);
}

DataMatrix
lognormal_sample(std::size_t n, std::size_t d, std::uint64_t seed)
{
  RngStream r(seed, 0);
  std::vector<double> v(n * d);
  for (auto& e : v)
    e = std::exp(r.normal());
  return DataMatrix(n, d, v);
}

KdeModel
transformation_fit(const DataMatrix& x, double h2)
{
  auto t = default_transform(x);
  auto y = t.apply(x);
  Eigen::MatrixXd h = h2 * Eigen::MatrixXd::Identity(x.d(), x.d());
  return KdeModel::transformation(y, BandwidthMatrix(h), t);
}

} // namespace

TEST(Kde, SinglePointValues)
{
  auto m = KdeModel::standard(DataMatrix::from_column({0.0}), BandwidthMatrix::scalar(1.0));
  std::vector<double> x{0.0};
  EXPECT_NEAR(kde_eval(m, x), 0.3989423, 1e-7);

  LogTransform t({0.0});
  auto y = t.apply(DataMatrix::from_column({1.0}));
  auto mt = KdeModel::transformation(y, BandwidthMatrix::scalar(1.0), t);
  std::vector<double> one{1.0};
  EXPECT_NEAR(kde_eval(mt, one), 0.3989423, 1e-7);
  std::vector<double> below{-1.0};
  EXPECT_EQ(kde_eval(mt, below), 0.0);
}

TEST(Kde, MatchesBruteForce)
{
  auto x = normal_sample(300, 2, 4);
  Eigen::MatrixXd h(2, 2);
  h << 0.09, 0.02, 0.02, 0.05;
  auto m = KdeModel::standard(x, BandwidthMatrix(h));
  GaussianDensity k(h);
  RngStream r(5, 0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p{2.0 * r.normal(), 2.0 * r.normal()};
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) {
      double dlt[2] = {p[0] - x(i, 0), p[1] - x(i, 1)};
      s += k(dlt);
    }
    s /= static_cast<double>(x.n());
    EXPECT_NEAR(m(p), s, 1e-15 + 1e-12 * s);
  }
}

TEST(Kde, PermutationInvariance)
{
  auto x = normal_sample(50, 1, 9);
  auto v = x.values();
  std::reverse(v.begin(), v.end());
  auto xr = DataMatrix::from_column(v);
  auto a = KdeModel::standard(x, BandwidthMatrix::scalar(0.2));
  auto b = KdeModel::standard(xr, BandwidthMatrix::scalar(0.2));
  for (double p : {-1.0, 0.0, 0.3, 2.0}) {
    std::vector<double> q{p};
    EXPECT_DOUBLE_EQ(a(q), b(q));
  }
}

TEST(Kde, LocationEquivariance)
{
  auto x = normal_sample(200, 2, 10);
  auto xs = x.shifted(7.5);
  Eigen::MatrixXd h(2, 2);
  h << 0.1, 0.03, 0.03, 0.2;
  auto a = KdeModel::standard(x, BandwidthMatrix(h));
  auto b = KdeModel::standard(xs, BandwidthMatrix(h));
  std::vector<double> p{0.3, -0.2}, ps{7.8, 7.3};
  EXPECT_NEAR(a(p), b(ps), 1e-12);
}

TEST(Kde, GridEvaluationMatchesPointwise)
{
  auto x = lognormal_sample(400, 2, 11);
  auto m = transformation_fit(x, 0.04);
  std::vector<double> lo{0.5, 0.5}, hi{6.0, 6.0};
  auto g = make_grid(lo, hi, 23);
  m.evaluate(g);
  for (std::size_t k = 0; k < g.size(); k += 7)
    EXPECT_DOUBLE_EQ(g.values[k], m(g.point(k)));
}

TEST(Kde, FullDensityNormalisation)
{
  {
    auto x = normal_sample(500, 1, 12);
    auto m = KdeModel::standard(x, BandwidthMatrix::scalar(0.09));
    std::vector<double> lo{-12}, hi{12};
    auto g = make_grid(lo, hi, 2001);
    m.evaluate(g);
    EXPECT_NEAR(g.integral(), 1.0, 1e-3);
  }
  {
    auto x = lognormal_sample(500, 1, 13);
    auto m = transformation_fit(x, 0.05);
    const double u0 = m.transform()->offset()[0];
    TailRegion r{{u0 + 1e-9}, {u0}, std::nullopt};
    EXPECT_NEAR(survival_estimate(m, r, {20000, {}, 1e-6}), 1.0, 1e-3);
    EXPECT_NEAR(survival_exact_1d(m, u0 + 1e-9), 1.0, 1e-12);
  }
  {
    auto x = lognormal_sample(400, 2, 14);
    auto m = transformation_fit(x, 0.05);
    const auto u0 = m.transform()->offset();
    TailRegion r{{u0[0] + 1e-9, u0[1] + 1e-9}, u0, std::nullopt};
    EXPECT_NEAR(survival_estimate(m, r, {600, {}, 1e-6}), 1.0, 1e-3);
  }
}

TEST(Kde, SurvivalExtremes)
{
  auto x = normal_sample(300, 1, 15);
  auto m = KdeModel::standard(x, BandwidthMatrix::scalar(0.1));
  TailRegion low{{-15.0}, {-16.0}, std::nullopt};
  EXPECT_NEAR(survival_estimate(m, low), 1.0, 2e-3);
  TailRegion high{{15.0}, {14.0}, std::nullopt};
  EXPECT_LT(survival_estimate(m, high), 1e-3);
}

TEST(Kde, SurvivalQuadratureMatchesClosedForm)
{
  auto x = lognormal_sample(1000, 1, 16);
  auto mt = transformation_fit(x, 0.03);
  auto ms = KdeModel::standard(x, BandwidthMatrix::scalar(0.04));
  for (double u : {1.0, 2.0, 4.0}) {
    TailRegion r{{u}, {mt.transform()->offset()[0]}, std::nullopt};
    const double a = survival_estimate(mt, r), ea = survival_exact_1d(mt, u);
    EXPECT_NEAR(a, ea, 1e-3 * ea + 1e-5);
    const double b = survival_estimate(ms, r), eb = survival_exact_1d(ms, u);
    EXPECT_NEAR(b, eb, 1e-3 * eb + 1e-5);
  }
}

TEST(Kde, StandardNormalHalfMass)
{
  // Monte Carlo over replicates: mean estimated F-bar(0) is 1/2.
  double s = 0.0;
  const int reps = 20;
  for (int k = 0; k < reps; ++k) {
    auto x = normal_sample(2000, 1, 100 + k);
    auto m = KdeModel::standard(x, BandwidthMatrix::scalar(0.05));
    TailRegion r{{0.0}, {-1.0}, std::nullopt};
    s += survival_estimate(m, r);
  }
  EXPECT_NEAR(s / reps, 0.5, 0.03);
}

TEST(Kde, TailDensityProperties)
{
  auto x = lognormal_sample(2000, 1, 17);
  auto m = transformation_fit(x, 0.02);
  const double u0 = m.transform()->offset()[0];
  TailRegion r1{{2.0}, {u0}, std::nullopt}, r2{{3.0}, {u0}, std::nullopt};
  auto t1 = tail_density(m, r1);
  auto t2 = tail_density(m, r2);
  EXPECT_NEAR(t1.grid().integral(), 1.0, 1e-3);
  EXPECT_NEAR(t2.grid().integral(), 1.0, 1e-3);
  std::vector<double> below{1.5};
  EXPECT_EQ(t1(below), 0.0);
  const double ratio = t1(std::vector<double>{3.5}) / t2(std::vector<double>{3.5});
  for (double v : {3.1, 4.0, 6.0, 9.0}) {
    std::vector<double> p{v};
    EXPECT_NEAR(t1(p) / t2(p), ratio, 1e-9 * ratio);
    EXPECT_EQ(t1.unnormalised(p), m(p));
  }
  EXPECT_NEAR(t1.normaliser(), survival_exact_1d(m, 2.0), 1e-3 * t1.normaliser());
}

TEST(Kde, TailDensityBivariate)
{
  auto x = lognormal_sample(1500, 2, 18);
  auto m = transformation_fit(x, 0.03);
  TailRegion r{empirical_quantile(x, 0.8), m.transform()->offset(), 0.8};
  auto t = tail_density(m, r);
  EXPECT_NEAR(t.grid().integral(), 1.0, 1e-3);
  EXPECT_GT(t.normaliser(), 0.0);
  EXPECT_LT(t.normaliser(), 0.2);
}

TEST(Kde, VanishingTailMass)
{
  auto x = normal_sample(100, 1, 19);
  auto m = KdeModel::standard(x, BandwidthMatrix::scalar(0.01));
  TailRegion r{{40.0}, {39.0}, std::nullopt};
  EXPECT_THROW(tail_density(m, r), DataError);
}

TEST(TailQuantile, UniformAndExponential)
{
  TailRegion r{{0.0}, {-1.0}, std::nullopt};
  auto uni = TailDensityModel::from_density(r, {1.0}, "uniform",
                                            [](std::span<const double>) { return 1.0; });
  EXPECT_NEAR(tail_quantile(uni, 0.25), 0.25, 1e-3);
  EXPECT_NEAR(tail_quantile(uni, 1e-9), 0.0, 1e-6);
  auto f = [](std::span<const double> x) { return std::exp(-x[0]); };
  TailDensityModel ex(r, {40.0}, 1.0, "exp", f);
  EXPECT_NEAR(tail_quantile(ex, 0.5), std::log(2.0), 1e-3);
  TailDensityModel fine(r, {40.0}, 1.0, "exp", f, {}, 8001);
  EXPECT_NEAR(tail_quantile(fine, 0.99), std::log(100.0), 2e-3);
}

TEST(TailQuantile, RejectsMultivariate)
{
  TailRegion r{{0.0, 0.0}, {-1.0, -1.0}, std::nullopt};
  auto m = TailDensityModel::from_density(r, {1.0, 1.0}, "u", [](std::span<const double>) { return 1.0; },
                                          {}, 16);
  EXPECT_THROW(tail_quantile(m, 0.5), ConfigError);
}

TEST(Kde, ThresholdReuseDoesNotRefit)
{
  auto x = lognormal_sample(500, 1, 20);
  auto m = transformation_fit(x, 0.03);
  const auto before = kde_fit_count();
  TailRegion r1{{2.0}, m.transform()->offset(), std::nullopt};
  TailRegion r2{{2.5}, m.transform()->offset(), std::nullopt};
  tail_density(m, r1);
  tail_density(m, r2);
  EXPECT_EQ(kde_fit_count(), before);
}
