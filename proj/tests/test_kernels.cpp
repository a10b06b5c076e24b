#include <tailkde/kernels.hpp>

#include <gtest/gtest.h>

using namespace tailkde;

namespace {

Eigen::MatrixXd
random_spd(RngStream& r, std::size_t d)
{
  Eigen::MatrixXd a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      a(i, j) = r.uniform() - 0.5;
  Eigen::MatrixXd s = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
  return s;
}

// Fourth mixed partial of the N(0, G) density by central differences on each
// of the four indices (step h).
double
fd_fourth(const GaussianDensity& k, std::vector<double> y, std::array<std::size_t, 4> idx, double h)
{
  double s = 0.0;
  for (int m = 0; m < 16; ++m) {
    auto p = y;
    int sign = 1;
    for (int b = 0; b < 4; ++b) {
      const bool plus = (m >> b) & 1;
      p[idx[b]] += plus ? h : -h;
      if (!plus)
        sign = -sign;
    }
    s += sign * k(p);
  }
  return s / std::pow(2.0 * h, 4);
}

} // namespace

TEST(Kernel, ScaledValues)
{
  std::vector<double> z1{0.0};
  EXPECT_NEAR(eval_scaled(BandwidthMatrix::scalar(1.0), z1), 0.3989422804, 1e-10);
  std::vector<double> z2{0.0, 0.0};
  EXPECT_NEAR(eval_scaled(BandwidthMatrix::identity(2), z2), 1.0 / (2.0 * kPi), 1e-12);
}

TEST(Kernel, Symmetry)
{
  RngStream r(3, 0);
  for (int t = 0; t < 20; ++t) {
    BandwidthMatrix h(random_spd(r, 2));
    std::vector<double> y{r.normal(), r.normal()}, my{-y[0], -y[1]};
    EXPECT_DOUBLE_EQ(eval_scaled(h, y), eval_scaled(h, my));
  }
}

TEST(Kernel, Convolve)
{
  Eigen::MatrixXd i2 = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_TRUE(convolve(i2, i2).isApprox(2.0 * i2));
  EXPECT_TRUE(convolve(i2, Eigen::MatrixXd::Zero(2, 2)).isApprox(i2));
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 0.2, 0.2, 1;
  b << 2, 0.2, 0.2, 2;
  EXPECT_TRUE(convolve(a, i2).isApprox(b));
  EXPECT_THROW(convolve(a, Eigen::MatrixXd::Identity(3, 3)), ConfigError);
}

TEST(Kernel, SquaredIntegral)
{
  // int K_H^2 = |H|^{-1/2} (4 pi)^{-d/2}, by quadrature.
  for (std::size_t d : {1u, 2u}) {
    Eigen::MatrixXd h(d, d);
    if (d == 1)
      h << 0.3;
    else
      h << 0.5, 0.2, 0.2, 0.4;
    GaussianDensity k(h);
    std::vector<double> lo(d, -8.0), hi(d, 8.0);
    auto g = make_grid(lo, hi, d == 1 ? 4001 : 801);
    g.fill([&](std::span<const double> y) {
      const double v = k(y);
      return v * v;
    });
    const double exact = std::pow(4.0 * kPi, -0.5 * d) / std::sqrt(h.determinant());
    EXPECT_NEAR(g.integral(), exact, 1e-6 * exact);
  }
}

TEST(Deriv4, UnivariateValues)
{
  std::vector<double> z{0.0}, one{1.0};
  auto g = BandwidthMatrix::scalar(1.0);
  EXPECT_NEAR(deriv4_vector(g, z)[0], 3.0 * 0.3989422804014327, 1e-12);
  EXPECT_NEAR(deriv4_vector(g, one)[0], -2.0 * 0.24197072451914337, 1e-12);
}

TEST(Deriv4, EvenSymmetry)
{
  RngStream r(11, 0);
  for (std::size_t d = 1; d <= 3; ++d) {
    BandwidthMatrix g(random_spd(r, d));
    std::vector<double> y(d), my(d);
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = r.normal();
      my[j] = -y[j];
    }
    auto a = deriv4_vector(g, y), b = deriv4_vector(g, my);
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_NEAR(a[k], b[k], 1e-14 * (1.0 + std::abs(a[k])));
  }
}

TEST(Deriv4, KroneckerPermutationInvariance)
{
  RngStream r(12, 0);
  const std::size_t d = 3;
  BandwidthMatrix g(random_spd(r, d));
  std::vector<double> y{r.normal(), r.normal(), r.normal()};
  auto v = deriv4_vector(g, y);
  ASSERT_EQ(v.size(), 81u);
  for (std::size_t f = 0; f < 81; ++f) {
    std::array<std::size_t, 4> t{f / 27, (f / 9) % 3, (f / 3) % 3, f % 3};
    std::sort(t.begin(), t.end());
    do {
      const auto f2 = ((t[0] * d + t[1]) * d + t[2]) * d + t[3];
      EXPECT_EQ(v[f], v[f2]);
    } while (std::next_permutation(t.begin(), t.end()));
  }
}

TEST(Deriv4, FiniteDifferenceOracle)
{
  RngStream r(13, 0);
  for (std::size_t d = 1; d <= 3; ++d) {
    for (int rep = 0; rep < 4; ++rep) {
      Eigen::MatrixXd gm = random_spd(r, d);
      BandwidthMatrix g(gm);
      GaussianDensity k(gm);
      std::vector<double> y(d);
      for (auto& e : y)
        e = 0.8 * r.normal();
      const auto v = deriv4_vector(g, y);
      double scale = 0.0;
      for (double e : v)
        scale = std::max(scale, std::abs(e));
      for (std::size_t f = 0; f < v.size(); ++f) {
        std::array<std::size_t, 4> idx{f / (d * d * d), (f / (d * d)) % d, (f / d) % d, f % d};
        // Richardson extrapolation of the O(h^2) central difference.
        const double h = 2e-2;
        const double a = fd_fourth(k, y, idx, h), b = fd_fourth(k, y, idx, h / 2);
        const double fd = (4.0 * b - a) / 3.0;
        EXPECT_NEAR(v[f], fd, 1e-5 * scale) << "d=" << d << " f=" << f;
      }
    }
  }
}
