#include <tailkde/bandwidth.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

namespace {

DataMatrix
normal_sample(std::size_t n, std::size_t d, std::uint64_t seed)
{
  RngStream r(seed, 0);
  std::vector<double> v(n * d);
  for (auto& e : v)
    e = r.normal();
  return DataMatrix(n, d, v);
}

DataMatrix
standardised(const DataMatrix& x)
{
  const auto m = column_means(x);
  const auto s = column_sds(x);
  std::vector<double> v(x.values());
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t j = 0; j < x.d(); ++j)
      v[i * x.d() + j] = (v[i * x.d() + j] - m[j]) / s[j];
  return DataMatrix(x.n(), x.d(), v);
}

// Brute-force n^-2 sum over all ordered pairs of D^4 phi_G.
std::vector<double>
psi4_brute(const DataMatrix& y, const BandwidthMatrix& g)
{
  const auto d = y.d();
  std::vector<double> s(d * d * d * d, 0.0);
  for (std::size_t i = 0; i < y.n(); ++i)
    for (std::size_t j = 0; j < y.n(); ++j) {
      std::vector<double> dl(d);
      for (std::size_t c = 0; c < d; ++c)
        dl[c] = y(i, c) - y(j, c);
      auto v = deriv4_vector(g, dl);
      for (std::size_t k = 0; k < s.size(); ++k)
        s[k] += v[k];
    }
  const double n2 = static_cast<double>(y.n() * y.n());
  for (auto& e : s)
    e /= n2;
  return s;
}

double
mixture_draw(RngStream& r)
{
  return r.uniform() < 0.3 ? 2.0 + 0.5 * r.normal() : r.normal();
}

} // namespace

TEST(NormalScale, UnivariateValue)
{
  auto x = standardised(normal_sample(100, 1, 1));
  auto r = ns_bandwidth(x);
  EXPECT_NEAR(r.h(0, 0), std::pow(4.0 / 300.0, 0.4), 1e-12);
  EXPECT_NEAR(r.h(0, 0), 0.177818, 1e-5);
}

TEST(NormalScale, ClosedFormExactness)
{
  for (std::size_t d = 1; d <= 3; ++d) {
    auto x = normal_sample(137, d, 2 + d);
    auto r = ns_bandwidth(x);
    const Eigen::MatrixXd s = sample_covariance(x);
    const double c = std::pow(4.0 / ((d + 2.0) * 137.0), 2.0 / (d + 4.0));
    EXPECT_LT((r.h.matrix() - c * s).cwiseAbs().maxCoeff(), 1e-12 * s.cwiseAbs().maxCoeff());
  }
}

TEST(NormalScale, Scaling)
{
  auto x = normal_sample(80, 2, 3);
  std::vector<double> v(x.values());
  for (auto& e : v)
    e *= 3.0;
  auto r1 = ns_bandwidth(x), r2 = ns_bandwidth(DataMatrix(80, 2, v));
  EXPECT_TRUE(r2.h.matrix().isApprox(9.0 * r1.h.matrix(), 1e-12));
}

TEST(NormalScale, SingularCovariance)
{
  DataMatrix x(4, 2, {1, 2, 2, 4, 3, 6, 4, 8});
  EXPECT_THROW(ns_bandwidth(x), DataError);
}

TEST(Psi4, DegenerateSums)
{
  auto g = BandwidthMatrix::scalar(1.0);
  auto one = DataMatrix::from_column({0.3});
  EXPECT_NEAR(psi4_estimate(one, g)[0], 3.0 * kInvSqrt2Pi, 1e-14);
  auto two = DataMatrix::from_column({0.0, 0.0});
  EXPECT_NEAR(psi4_estimate(two, g)[0], 1.1968268412042980, 1e-12);
}

TEST(Psi4, MatchesBruteForceAndIsPermutationInvariant)
{
  for (std::size_t d = 1; d <= 3; ++d) {
    auto y = normal_sample(60, d, 10 + d);
    Eigen::MatrixXd gm = 0.3 * Eigen::MatrixXd::Identity(d, d);
    if (d > 1)
      gm(0, 1) = gm(1, 0) = 0.1;
    BandwidthMatrix g(gm);
    auto fast = psi4_estimate(y, g);
    auto brute = psi4_brute(y, g);
    for (std::size_t k = 0; k < fast.size(); ++k)
      EXPECT_NEAR(fast[k], brute[k], 1e-12 * (1.0 + std::abs(brute[k])));
    std::vector<double> v;
    for (std::size_t i = y.n(); i-- > 0;)
      v.insert(v.end(), y.row(i).begin(), y.row(i).end());
    auto perm = psi4_estimate(DataMatrix(y.n(), d, v), g);
    for (std::size_t k = 0; k < fast.size(); ++k)
      EXPECT_NEAR(fast[k], perm[k], 1e-13 * (1.0 + std::abs(fast[k])));
  }
}

TEST(PlugIn, NormalReferenceOptimumAtLargeN)
{
  const std::size_t n = 10000;
  auto x = normal_sample(n, 1, 21);
  auto r = pi_select(x);
  EXPECT_EQ(r.selector, Selector::PI);
  ASSERT_TRUE(r.pilot.has_value());
  const double oracle = std::pow(4.0 / (3.0 * n), 0.4);
  EXPECT_NEAR(r.h(0, 0), oracle, 0.15 * oracle);
}

TEST(PlugIn, NoWorseThanStart)
{
  for (std::size_t d = 1; d <= 2; ++d) {
    auto x = normal_sample(300, d, 30 + d);
    auto r = pi_select(x);
    auto ns = ns_bandwidth(x);
    auto psi = psi4_estimate(x, *r.pilot);
    EXPECT_LE(pi_objective(r.h.matrix(), psi, x.n()), pi_objective(ns.h.matrix(), psi, x.n()) + 1e-12);
    EXPECT_NEAR(r.objective_value, pi_objective(r.h.matrix(), psi, x.n()), 1e-15);
  }
}

TEST(PlugIn, DeterminantShrinksWithN)
{
  double small = 0.0, large = 0.0;
  for (int k = 0; k < 50; ++k) {
    small += pi_select(normal_sample(200, 1, 1000 + k)).h.determinant();
    large += pi_select(normal_sample(400, 1, 2000 + k)).h.determinant();
  }
  EXPECT_LT(large, small);
}

TEST(PlugIn, SmallSampleFallsBack)
{
  auto r = pi_select(normal_sample(10, 1, 3));
  EXPECT_EQ(r.selector, Selector::NS);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Ucv, BruteForceTwoPoints)
{
  auto y = DataMatrix::from_column({0.0, 1.0});
  Eigen::MatrixXd h(1, 1);
  h << 1.0;
  auto phi = [](double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2 * kPi * var); };
  // int fhat^2: four ordered pairs of K_{2H}; leave-one-out: two ordered pairs of K_H.
  const double first = (phi(0, 2) + phi(1, 2) + phi(-1, 2) + phi(0, 2)) / 4.0;
  const double second = 2.0 * (phi(1, 1) + phi(-1, 1)) / 2.0;
  EXPECT_NEAR(ucv_objective(y, h), first - second, 1e-15);
}

TEST(Ucv, TranslationInvariance)
{
  auto y = normal_sample(120, 2, 40);
  Eigen::MatrixXd h(2, 2);
  h << 0.2, 0.05, 0.05, 0.3;
  auto a = ucv_objective(detail::sorted_by_first(y), h);
  auto b = ucv_objective(detail::sorted_by_first(y.shifted(100.0)), h);
  EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Scv, PairTerm)
{
  Eigen::MatrixXd h(2, 2), g(2, 2);
  h << 0.3, 0.1, 0.1, 0.2;
  g << 0.1, 0.0, 0.0, 0.15;
  std::vector<double> delta{0.4, -0.3};
  auto phi = [&](const Eigen::MatrixXd& s) {
    Eigen::Vector2d v(delta[0], delta[1]);
    return std::exp(-0.5 * v.dot(s.inverse() * v)) / (2.0 * kPi * std::sqrt(s.determinant()));
  };
  const double expect = phi(2 * h + 2 * g) - 2 * phi(h + 2 * g) + phi(2 * g);
  EXPECT_NEAR(scv_pair_term(h, g, delta), expect, 1e-15);
}

TEST(Scv, ZeroPilotMatchesUcv)
{
  for (std::size_t d = 1; d <= 2; ++d) {
    auto y = normal_sample(150, d, 50 + d);
    auto u = ucv_select(y);
    auto s = scv_select(y, {}, Eigen::MatrixXd::Zero(d, d));
    EXPECT_FALSE(s.pilot.has_value());
    EXPECT_LT((u.h.matrix() - s.h.matrix()).cwiseAbs().maxCoeff(), 1e-6 * u.h.matrix().norm());
    // The criteria differ by a constant independent of H.
    const auto sorted = detail::sorted_by_first(y);
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(d, d);
    const double c1 = scv_objective(sorted, u.h.matrix(), z) - ucv_objective(sorted, u.h.matrix());
    const Eigen::MatrixXd h2 = 1.7 * u.h.matrix();
    const double c2 = scv_objective(sorted, h2, z) - ucv_objective(sorted, h2);
    EXPECT_NEAR(c1, c2, 1e-12);
  }
}

TEST(Scv, DivergesAsBandwidthVanishes)
{
  auto y = normal_sample(100, 1, 60);
  const auto sorted = detail::sorted_by_first(y);
  const auto g = pilot_bandwidth(y).matrix();
  double prev = 0.0;
  for (double h2 : {1e-2, 1e-4, 1e-6, 1e-8}) {
    Eigen::MatrixXd h(1, 1);
    h << h2;
    const double v = scv_objective(sorted, h, g);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_GT(prev, 10.0);
}

TEST(Selectors, PositiveDefiniteOnRandomMixtures)
{
  RngStream r(70, 0);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + t % 3;
    const std::size_t n = 25 + static_cast<std::size_t>(30 * r.uniform());
    std::vector<double> v(n * d);
    for (auto& e : v)
      e = mixture_draw(r);
    DataMatrix x(n, d, v);
    const auto sel = static_cast<Selector>(t % 4);
    auto res = select_bandwidth(sel, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.h.matrix());
    ASSERT_GT(es.eigenvalues().minCoeff(), 0.0) << "trial " << t;
    ASSERT_TRUE(std::isfinite(res.objective_value));
  }
}

TEST(Selectors, RatioEnvelopeOnNormalData)
{
  for (std::size_t d = 1; d <= 2; ++d) {
    auto x = normal_sample(250, d, 80 + d);
    auto ns = ns_bandwidth(x);
    for (auto s : {Selector::PI, Selector::UCV, Selector::SCV}) {
      auto r = select_bandwidth(s, x);
      for (std::size_t j = 0; j < d; ++j) {
        const double ratio = r.h(j, j) / ns.h(j, j);
        EXPECT_GE(ratio, 0.2) << to_string(s);
        EXPECT_LE(ratio, 5.0) << to_string(s);
      }
    }
  }
}

TEST(Selectors, TiesAreCountedAndWarned)
{
  std::vector<double> v;
  for (int k = 0; k < 40; ++k)
    v.push_back(k < 10 ? 1.0 : 0.1 * k * k);
  auto r = ucv_select(DataMatrix::from_column(v));
  EXPECT_EQ(r.tied_points, 9u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Amise, NormalReferenceOptimum)
{
  // Analytic psi4 = 3/(8 sqrt(pi)) for N(0,1); the AMISE minimiser is
  // h = (4/(3n))^{1/5}.
  const std::size_t n = 1000;
  const auto psi = normal_psi4(Eigen::MatrixXd::Identity(1, 1));
  EXPECT_NEAR(psi[0], 3.0 / (8.0 * std::sqrt(kPi)), 1e-15);
  const double hopt = std::pow(4.0 / (3.0 * n), 0.2);
  const double r = 0.5 / std::sqrt(kPi);
  // Stationarity: d/dh [h^4 psi/4 + R/(n h)] = h^3 psi - R/(n h^2).
  const double grad = std::pow(hopt, 3) * psi[0] - r / (n * hopt * hopt);
  EXPECT_NEAR(grad, 0.0, 1e-10 * r / (n * hopt * hopt));
  Eigen::MatrixXd h(1, 1);
  h << hopt * hopt;
  const double a0 = amise(h, psi, n);
  for (double f : {1 - 1e-4, 1 + 1e-4}) {
    Eigen::MatrixXd h2(1, 1);
    h2 << hopt * hopt * f;
    EXPECT_GT(amise(h2, psi, n), a0);
  }
}
