#include <tailkde/parametric.hpp>
#include <tailkde/sampling.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

namespace {

std::vector<Dependence>
dependence_roster()
{
  return {{BivFamily::husler_reiss, {1.0 / 2.4}},
          {BivFamily::husler_reiss, {2.4}},
          {BivFamily::husler_reiss, {0.05}},
          {BivFamily::anl, {1.3, 0.2, 0.7}},
          {BivFamily::anl, {0.4, 0.9, 0.5}},
          {BivFamily::anl, {5.0, 1.0, 1.0}},
          {BivFamily::bilogistic, {0.8, 0.52}},
          {BivFamily::bilogistic, {0.2, 0.9}},
          {BivFamily::bilogistic, {0.5, 0.5}}};
}

// Central second difference with one Richardson step.
template<typename F>
double
mixed_partial(F&& g, double x1, double x2, double h)
{
  auto d = [&](double s) {
    return (g(x1 + s, x2 + s) - g(x1 + s, x2 - s) - g(x1 - s, x2 + s) + g(x1 - s, x2 - s)) / (4.0 * s * s);
  };
  return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

} // namespace

TEST(Gev, DensityIsDerivativeOfCdf)
{
  for (GevParams p : {GevParams{0.0, 1.0, 0.0}, GevParams{1.0, 2.0, 0.3}, GevParams{-1.0, 0.5, -0.4}}) {
    for (double x : {-0.5, 0.2, 1.0, 2.5}) {
      const double h = 1e-5;
      const double fd = (gev_cdf(x + h, p) - gev_cdf(x - h, p)) / (2.0 * h);
      const double f = std::exp(gev_logpdf(x, p));
      EXPECT_NEAR(f, fd, 1e-8 + 1e-6 * f);
    }
  }
}

TEST(Gev, QuantileInvertsCdf)
{
  GevParams p{0.5, 1.5, 0.2};
  for (double q : {0.01, 0.5, 0.95, 0.999})
    EXPECT_NEAR(gev_cdf(gev_quantile(q, p), p), q, 1e-12);
  GevParams g{0.5, 1.5, 0.0};
  EXPECT_NEAR(gev_quantile(0.3, g), 0.5 - 1.5 * std::log(-std::log(0.3)), 1e-12);
}

TEST(Frechet, StudyTargetQuantile)
{
  auto t = univariate_target("fre", Family::frechet, 1.0, 0.5, 0.25);
  const auto& m = std::get<UnivariateEvtFit>(t.model);
  EXPECT_NEAR(m.quantile(0.95), 2.0507, 1e-3);
  EXPECT_NEAR(m.quantile(0.95), 1.0 + 0.5 * std::pow(-std::log(0.95), -0.25), 1e-12);
  // Frechet support: density zero at or below mu.
  EXPECT_EQ(m.pdf(1.0), 0.0);
  EXPECT_EQ(m.cdf(0.5), 0.0);
}

TEST(Gpd, ClosedForms)
{
  EXPECT_NEAR(gpd_sf(2.0, 0.0, 1.0, 0.0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(gpd_sf(2.0, 0.0, 1.0, 0.25), std::pow(1.5, -4.0), 1e-15);
  EXPECT_NEAR(gpd_quantile(0.75, 0.0, 1.0, 0.25), (std::pow(0.25, -0.25) - 1.0) / 0.25, 1e-12);
  EXPECT_EQ(gpd_sf(5.0, 0.0, 1.0, -0.5), 0.0);
  EXPECT_EQ(gpd_logpdf(-0.1, 0.0, 1.0, 0.1), -std::numeric_limits<double>::infinity());
}

TEST(Parametric, DensitiesIntegrateToOne)
{
  std::vector<UnivariateEvtFit> ms{
    {Family::gumbel, 1.5, 3.0, 0.0}, {Family::frechet, 1.0, 0.5, 0.25}, {Family::gev, 0.0, 1.0, -0.3},
    {Family::gpd, 0.0, 1.0, 0.25}, {Family::gpd, 2.0, 0.7, -0.2}};
  for (const auto& m : ms) {
    const double lo = m.family == Family::gpd ? m.mu : m.quantile(1e-12);
    const double hi = std::min(m.quantile(1.0 - 1e-7), m.upper_endpoint());
    const int n = 400000;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      s += m.pdf(lo + (i + 0.5) * (hi - lo) / n) * (hi - lo) / n;
    EXPECT_NEAR(s, 1.0, 5e-3) << to_string(m.family);
  }
}

TEST(FitUnivariate, ExponentialIsGpdWithZeroShape)
{
  RngStream r(11, 0);
  std::vector<double> v(5000);
  for (auto& x : v)
    x = -std::log(r.uniform());
  auto f = fit_univariate(DataMatrix::from_column(v), Family::gpd, 0.0);
  EXPECT_GE(f.xi, -0.06);
  EXPECT_LE(f.xi, 0.06);
  EXPECT_GE(f.sigma, 0.93);
  EXPECT_LE(f.sigma, 1.07);
  EXPECT_EQ(f.mu, 0.0);
  EXPECT_TRUE(f.converged);
}

TEST(FitUnivariate, GumbelRecovery)
{
  auto t = univariate_target("gum", Family::gumbel, 1.5, 3.0);
  RngStream r(12, 0);
  auto x = sample(t, 5000, r);
  auto f = fit_univariate(x, Family::gumbel);
  EXPECT_NEAR(f.mu, 1.5, 0.15);
  EXPECT_NEAR(f.sigma, 3.0, 0.15);
  // The GEV contains the Gumbel, so its maximised likelihood is no smaller.
  auto g = fit_univariate(x, Family::gev);
  EXPECT_GE(g.loglik, f.loglik - 1e-6);
}

TEST(FitUnivariate, FrechetRecovery)
{
  auto t = univariate_target("fre", Family::frechet, 1.0, 0.5, 0.25);
  RngStream r(13, 0);
  auto x = sample(t, 5000, r);
  auto f = fit_univariate(x, Family::frechet);
  EXPECT_NEAR(f.xi, 0.25, 0.05);
  EXPECT_NEAR(f.mu, 1.0, 0.15);
  EXPECT_NEAR(f.sigma, 0.5, 0.1);
  for (std::size_t i = 0; i < x.n(); ++i)
    ASSERT_GT(x(i, 0), f.mu);
}

TEST(FitUnivariate, GpdDefaultsToSampleMinimum)
{
  auto t = univariate_target("gpd", Family::gpd, 0.0, 1.0, 0.25);
  RngStream r(14, 0);
  auto x = sample(t, 3000, r);
  auto f = fit_univariate(x, Family::gpd);
  EXPECT_EQ(f.mu, column_min(x)[0]);
  EXPECT_NEAR(f.xi, 0.25, 0.1);
  auto plus = fit_gpd_exceedances(x, 1.0);
  EXPECT_EQ(plus.mu, 1.0);
  EXPECT_NEAR(plus.xi, 0.25, 0.2);
  // Threshold stability of the GPD: exceedances have scale sigma + xi u.
  EXPECT_NEAR(plus.sigma, 1.25, 0.3);
}

TEST(FitUnivariate, Errors)
{
  EXPECT_THROW(fit_univariate(DataMatrix::from_column(std::vector<double>(20, 3.0)), Family::gumbel),
               DataError);
  EXPECT_THROW(fit_univariate(DataMatrix::from_column({1, 2, 3}), Family::gumbel), DataError);
  EXPECT_THROW(fit_univariate(DataMatrix::from_column({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), Family::gpd, 5.0),
               DataError);
}

TEST(Deviance, NonnegativeAndCalibrated)
{
  auto gum = univariate_target("gum", Family::gumbel, 1.5, 3.0);
  auto fre = univariate_target("fre", Family::frechet, 1.0, 0.5, 0.25);
  int false_pos = 0, true_pos = 0;
  const int reps = 100;
  for (int k = 0; k < reps; ++k) {
    RngStream r(1000, k);
    auto a = deviance_gumbel_vs_frechet(sample(gum, 2000, r));
    EXPECT_GE(a.statistic, 0.0);
    EXPECT_GE(a.pvalue, 0.0);
    EXPECT_LE(a.pvalue, 1.0);
    false_pos += a.use_frechet;
    auto b = deviance_gumbel_vs_frechet(sample(fre, 2000, r));
    EXPECT_GE(b.statistic, 0.0);
    true_pos += b.use_frechet;
  }
  EXPECT_LE(false_pos, 10);
  EXPECT_GE(true_pos, 90);
}

TEST(Deviance, PvalueIsChiSquareOneTail)
{
  // erfc(sqrt(x/2)) is the chi-square(1) survival; 3.841459 is its 95% point.
  EXPECT_NEAR(std::erfc(std::sqrt(0.5 * 3.841459)), 0.05, 1e-6);
}

TEST(ParametricTail, GpdExceedanceDensityIsExact)
{
  UnivariateEvtFit m{Family::gpd, 2.0, 1.3, 0.2};
  TailRegion r{{2.0}, {0.0}, std::nullopt};
  auto t = parametric_tail_density(m, r);
  EXPECT_NEAR(t.normaliser(), 1.0, 1e-12);
  EXPECT_NEAR(t.grid().integral(), 1.0, 1e-3);
  // Analytic: integral of f/S(u) over (u, inf) = S(u)/S(u).
  EXPECT_NEAR(m.sf(2.0) / t.normaliser(), 1.0, 1e-12);
}

TEST(ParametricTail, TailsIntegrateOnTheirGrids)
{
  for (const auto& t : univariate_study_targets()) {
    const auto& m = std::get<UnivariateEvtFit>(t.model);
    for (double p : {0.9, 0.95, 0.99}) {
      TailRegion r{{m.quantile(p)}, {m.quantile(p) - 10.0}, p};
      auto td = parametric_tail_density(m, r);
      EXPECT_NEAR(td.grid().integral(), 1.0, 1e-3) << t.id << " " << p;
      EXPECT_NEAR(td.normaliser(), 1.0 - p, 1e-12);
    }
  }
}

TEST(ParametricTail, HeavyGpdTailIntegrates)
{
  // Near xi = 1 the truncation point lies thousands of scales above u; the
  // grid must still resolve the density at the threshold.
  for (double xi : {0.5, 0.9, 1.2}) {
    UnivariateEvtFit m;
    m.family = Family::gpd;
    m.mu = 0.0;
    m.sigma = 1.0;
    m.xi = xi;
    TailRegion r{{0.0}, {-1.0}, std::nullopt};
    auto td = parametric_tail_density(m, r);
    EXPECT_NEAR(td.grid().integral(), 1.0, 1e-3) << xi;
  }
}

TEST(Pickands, EndpointsBoundsConvexity)
{
  for (const auto& d : dependence_roster()) {
    EXPECT_EQ(pickands(d, 0.0), 1.0);
    EXPECT_EQ(pickands(d, 1.0), 1.0);
    EXPECT_NEAR(pickands(d, 1e-9), 1.0, 1e-6);
    EXPECT_NEAR(pickands(d, 1.0 - 1e-9), 1.0, 1e-6);
    std::vector<double> a(1001);
    for (int k = 0; k <= 1000; ++k) {
      const double w = k / 1000.0;
      a[k] = pickands(d, w);
      EXPECT_GE(a[k], std::max(w, 1.0 - w) - 1e-12);
      EXPECT_LE(a[k], 1.0 + 1e-12);
    }
    for (int k = 1; k < 1000; ++k)
      EXPECT_GE(a[k - 1] - 2.0 * a[k] + a[k + 1], -1e-9);
  }
}

TEST(Pickands, IndependenceLimits)
{
  for (double w : {0.1, 0.5, 0.77}) {
    EXPECT_EQ(pickands({BivFamily::anl, {1.3, 0.0, 0.7}}, w), 1.0);
    EXPECT_EQ(pickands({BivFamily::anl, {1.3, 0.2, 0.0}}, w), 1.0);
  }
  EXPECT_NEAR(pickands({BivFamily::husler_reiss, {40.0}}, 0.5), 1.0, 1e-12);
  // HR at w = 1/2: A = Phi(lambda).
  EXPECT_NEAR(pickands({BivFamily::husler_reiss, {0.7}}, 0.5), norm_cdf(0.7), 1e-14);
  // ANL symmetric closed form at w = 1/2.
  const double r = 1.3, t = 0.6;
  EXPECT_NEAR(pickands({BivFamily::anl, {r, t, t}}, 0.5),
              1.0 - 0.5 * t * std::pow(2.0, -1.0 / r), 1e-14);
  // Bilogistic with alpha = beta reduces to the symmetric logistic.
  const double al = 0.6;
  for (double w : {0.2, 0.5, 0.9})
    EXPECT_NEAR(pickands({BivFamily::bilogistic, {al, al}}, w),
                std::pow(std::pow(1.0 - w, 1.0 / al) + std::pow(w, 1.0 / al), al), 1e-12);
}

TEST(Pickands, RejectsInvalidParameters)
{
  EXPECT_THROW(pickands({BivFamily::husler_reiss, {0.0}}, 0.5), ConfigError);
  EXPECT_THROW(pickands({BivFamily::anl, {-1.0, 0.5, 0.5}}, 0.5), ConfigError);
  EXPECT_THROW(pickands({BivFamily::bilogistic, {1.0, 0.5}}, 0.5), ConfigError);
  EXPECT_THROW(pickands({BivFamily::husler_reiss, {1.0}}, 1.5), ConfigError);
}

TEST(Bivariate, ExponentDerivativesMatchFiniteDifferences)
{
  RngStream r(21, 0);
  for (const auto& d : dependence_roster()) {
    for (int k = 0; k < 20; ++k) {
      const double y1 = std::exp(2.0 * r.normal()), y2 = std::exp(2.0 * r.normal());
      const auto e = exponent(d, y1, y2);
      const double h1 = 1e-5 * y1, h2 = 1e-5 * y2;
      const double v1 = (exponent(d, y1 + h1, y2).v - exponent(d, y1 - h1, y2).v) / (2 * h1);
      const double v2 = (exponent(d, y1, y2 + h2).v - exponent(d, y1, y2 - h2).v) / (2 * h2);
      const double v12 = (exponent(d, y1, y2 + h2).v1 - exponent(d, y1, y2 - h2).v1) / (2 * h2);
      EXPECT_NEAR(e.v1, v1, 1e-6 * (1.0 + std::abs(v1)));
      EXPECT_NEAR(e.v2, v2, 1e-6 * (1.0 + std::abs(v2)));
      // Rounding in the difference of V1 values is about eps |V1| / h2.
      EXPECT_NEAR(e.v12, v12, 1e-5 * std::abs(v12) + 1e-14 / h2);
      // Homogeneity of order one.
      EXPECT_NEAR(exponent(d, 3.0 * y1, 3.0 * y2).v, 3.0 * e.v, 1e-11 * e.v);
    }
  }
}

TEST(Bivariate, DensityMatchesCdfFiniteDifferences)
{
  // Interior points are drawn from each model, so they sit where the
  // density is not negligible relative to the CDF.
  std::vector<GevParams> margins{{0.0, 1.0, 0.0}, {1.0, 1.0, 1.0}, {0.5, 2.0, -0.2}};
  int checked = 0;
  std::uint64_t stream = 0;
  for (const auto& d : dependence_roster()) {
    for (int k = 0; k < 12; ++k) {
      BivariateEvdModel m{d, {margins[k % 3], margins[(k + 1) % 3]}};
      RngStream r(22, stream++);
      auto pt = sample_bivariate(m, 1, r);
      const double x1 = pt(0, 0), x2 = pt(0, 1);
      auto g = [&](double a, double b) {
        std::array<double, 2> x{a, b};
        return m.cdf(x);
      };
      // Step scaled to the local spread of each margin (1/f_j).
      const double h = 1e-3 * std::min(std::exp(-gev_logpdf(x1, m.margins[0])),
                                       std::exp(-gev_logpdf(x2, m.margins[1])));
      const double fd = mixed_partial(g, x1, x2, h);
      std::array<double, 2> x{x1, x2};
      const double f = m.pdf(x);
      EXPECT_NEAR(f, fd, 1e-4 * f + 1e-14 / (h * h)) << to_string(d.family) << " " << x1 << " " << x2;
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(Bivariate, TotalMass)
{
  for (const auto& d : dependence_roster()) {
    BivariateEvdModel m{d, {GevParams{0, 1, 0}, GevParams{0, 1, 0}}};
    auto g = make_grid(std::vector<double>{-4.0, -4.0}, std::vector<double>{14.0, 14.0}, 801);
    g.fill([&](std::span<const double> x) { return m.pdf(x); });
    EXPECT_NEAR(g.integral(), 1.0, 5e-3) << to_string(d.family) << " " << d.par[0];
  }
}

TEST(Bivariate, IndependenceFactorises)
{
  GevParams a{0.0, 1.0, 0.1}, b{1.0, 2.0, -0.1};
  BivariateEvdModel m{{BivFamily::anl, {1.3, 0.0, 0.7}}, {a, b}};
  for (double x1 : {-1.0, 0.5, 3.0})
    for (double x2 : {-1.0, 1.5, 4.0}) {
      std::array<double, 2> x{x1, x2};
      const double prod = std::exp(gev_logpdf(x1, a) + gev_logpdf(x2, b));
      EXPECT_NEAR(m.pdf(x), prod, 1e-10 * prod);
    }
}

TEST(Bivariate, TailDensityIntegrates)
{
  for (auto f : {BivFamily::bilogistic, BivFamily::anl, BivFamily::husler_reiss}) {
    auto t = bivariate_target(f);
    const auto& m = std::get<BivariateEvdModel>(t.model);
    const double q = gev_quantile(0.9, m.margins[0]);
    TailRegion r{{q, q}, {q - 10.0, q - 10.0}, 0.9};
    auto td = target_tail_density(t, r);
    EXPECT_NEAR(td.grid().integral(), 1.0, 1e-3) << t.id;
    EXPECT_GT(td.normaliser(), 0.0);
    EXPECT_LT(td.normaliser(), 0.1);
  }
}

TEST(FitBivariate, AtLeastTrueLikelihoodAndPermutationInvariant)
{
  for (auto f : {BivFamily::husler_reiss, BivFamily::anl, BivFamily::bilogistic}) {
    auto t = bivariate_target(f);
    RngStream r(31, static_cast<std::uint64_t>(f));
    auto x = sample(t, 1500, r);
    auto fit = fit_bivariate(x, f);
    const double truth = bivariate_loglik(std::get<BivariateEvdModel>(t.model), x);
    EXPECT_GE(fit.loglik, truth - 1e-6) << t.id;
    EXPECT_NEAR(fit.loglik, bivariate_loglik(fit.model, x), 1e-8 * std::abs(fit.loglik));

    // Reverse the row order.
    std::vector<double> v(x.values().size());
    for (std::size_t i = 0; i < x.n(); ++i) {
      v[2 * i] = x(x.n() - 1 - i, 0);
      v[2 * i + 1] = x(x.n() - 1 - i, 1);
    }
    auto fr = fit_bivariate(DataMatrix(x.n(), 2, v), f);
    EXPECT_NEAR(fr.loglik, fit.loglik, 1e-6 * std::abs(fit.loglik));
    for (std::size_t k = 0; k < fit.model.dep.par.size(); ++k)
      EXPECT_NEAR(fr.model.dep.par[k], fit.model.dep.par[k], 1e-3);
  }
}

TEST(FitBivariate, HuslerReissRecovery)
{
  // Unit Frechet margins (GEV(1, 1, 1)); dependence 2.4 in the evd convention.
  auto t = bivariate_target(BivFamily::husler_reiss, Convention::evd, {1.0, 1.0, 1.0});
  const double lam = std::get<BivariateEvdModel>(t.model).dep.par[0];
  const int reps = 100;
  std::vector<int> hit(reps, 0);
  parallel_for(reps, thread_count(), [&](std::size_t k) {
    RngStream r(4000, k);
    auto x = sample(t, 4000, r);
    auto fit = fit_bivariate(x, BivFamily::husler_reiss);
    const auto se = bivariate_standard_errors(fit.model, x);
    hit[k] = std::abs(fit.model.dep.par[0] - lam) <= 3.0 * se[6];
  });
  EXPECT_GE(std::accumulate(hit.begin(), hit.end(), 0), 90);
}

TEST(FitBivariate, Errors)
{
  EXPECT_THROW(fit_bivariate(DataMatrix::from_column({1, 2, 3}), BivFamily::anl), DataError);
  std::vector<double> v(2 * 20, 1.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(i);
  EXPECT_THROW(fit_bivariate(DataMatrix(20, 2, v), BivFamily::anl), DataError);
}
