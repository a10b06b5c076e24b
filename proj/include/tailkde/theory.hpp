#pragma once

#include "bandwidth.hpp"
#include "core.hpp"
#include "histogram.hpp"
#include "kde.hpp"
#include "kernels.hpp"
#include "transform.hpp"

namespace tailkde {

//! A density on (0, inf)^d with closed-form gradient and Hessian, and an
//! exact sampler driven by uniforms (so samples can be stratified).
struct AnalyticTarget
{
  std::string id;
  std::size_t d = 1;
  std::function<double(std::span<const double>)> f;
  std::function<Eigen::VectorXd(std::span<const double>)> grad;
  std::function<Eigen::MatrixXd(std::span<const double>)> hess;
  //! Maps a point of (0,1)^d to a draw, coordinate by coordinate.
  std::function<void(std::span<const double>, std::span<double>)> from_uniform;
  //! Marginal CDF (d = 1 only; used for exact histogram ISE).
  std::function<double(double)> cdf;
  //! Integral of f^2 over the support (d = 1 only).
  double int_f2 = std::numeric_limits<double>::quiet_NaN();
  //! For product-lognormal targets: log-scale location and scale.
  std::optional<std::pair<double, double>> lognormal;
};

namespace detail {

// Product of independent one-dimensional densities given through
// log-derivatives: r = (log f_j)' and dr = r'.
struct Marginal1d
{
  std::function<double(double)> f, r, dr;
};

inline AnalyticTarget
product_target(std::string id, std::size_t d, Marginal1d m)
{
  AnalyticTarget t;
  t.id = std::move(id);
  t.d = d;
  t.f = [m](std::span<const double> x) {
    double p = 1.0;
    for (double v : x)
      p *= v > 0.0 ? m.f(v) : 0.0;
    return p;
  };
  t.grad = [m, f = t.f](std::span<const double> x) {
    const double fx = f(x);
    Eigen::VectorXd g(static_cast<Eigen::Index>(x.size()));
    for (std::size_t a = 0; a < x.size(); ++a)
      g(static_cast<Eigen::Index>(a)) = fx * m.r(x[a]);
    return g;
  };
  t.hess = [m, f = t.f](std::span<const double> x) {
    const double fx = f(x);
    const auto k = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd h(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        h(a, b) = fx * (m.r(x[a]) * m.r(x[b]) + (a == b ? m.dr(x[a]) : 0.0));
    return h;
  };
  return t;
}

} // namespace detail

//! Product of d independent lognormal(mu, s) margins.
inline AnalyticTarget
lognormal_target(std::size_t d = 1, double mu = 0.0, double s = 1.0)
{
  if (d < 1 || d > 3 || !(s > 0.0))
    throw ConfigError("lognormal target needs d in 1..3 and s > 0");
  detail::Marginal1d m;
  m.f = [mu, s](double x) { return norm_pdf((std::log(x) - mu) / s) / (s * x); };
  m.r = [mu, s](double x) { return -((std::log(x) - mu) / (s * s) + 1.0) / x; };
  m.dr = [mu, s](double x) { return ((std::log(x) - mu) / (s * s) + 1.0 - 1.0 / (s * s)) / (x * x); };
  auto t = detail::product_target(detail::concat("lognormal", d), d, m);
  t.from_uniform = [mu, s](std::span<const double> u, std::span<double> x) {
    for (std::size_t j = 0; j < u.size(); ++j)
      x[j] = std::exp(mu + s * norm_quantile(u[j]));
  };
  t.cdf = [mu, s](double x) { return x > 0.0 ? norm_cdf((std::log(x) - mu) / s) : 0.0; };
  // E f(X) = exp(s^2/4 - mu) / (2 s sqrt(pi)).
  t.int_f2 = std::exp(0.25 * s * s - mu) / (2.0 * s * std::sqrt(kPi));
  t.lognormal = std::pair{mu, s};
  return t;
}

//! Product of d unit exponentials; f(0+) = 1, the boundary case.
inline AnalyticTarget
exponential_target(std::size_t d = 1)
{
  if (d < 1 || d > 3)
    throw ConfigError("exponential target needs d in 1..3");
  detail::Marginal1d m;
  m.f = [](double x) { return std::exp(-x); };
  m.r = [](double) { return -1.0; };
  m.dr = [](double) { return 0.0; };
  auto t = detail::product_target(detail::concat("exponential", d), d, m);
  t.from_uniform = [](std::span<const double> u, std::span<double> x) {
    for (std::size_t j = 0; j < u.size(); ++j)
      x[j] = -std::log1p(-u[j]);
  };
  t.cdf = [](double x) { return x > 0.0 ? -std::expm1(-x) : 0.0; };
  t.int_f2 = 0.5;
  return t;
}

// ---------------------------------------------------------------------------
// log-scale density and its Hessian

//! f_Y(y) = pi(x) f_X(x) at x = exp(y).
inline double
log_scale_density(const AnalyticTarget& t, std::span<const double> y)
{
  std::vector<double> x(y.size());
  double pi = 1.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    x[j] = std::exp(y[j]);
    pi *= x[j];
  }
  return pi * t.f(x);
}

//! Hessian of f_Y at y = log x, assembled from f_X, D f_X and D^2 f_X:
//! pi(x) [f 1 1' + 1 (x.Df)' + (x.Df) 1' + Diag(x.Df) + Diag(x) D^2 f Diag(x)],
//! where x.Df is the elementwise product.
inline Eigen::MatrixXd
log_scale_hessian(double f, const Eigen::VectorXd& df, const Eigen::MatrixXd& d2f, std::span<const double> x)
{
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd xv(d);
  double pi = 1.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    xv(j) = x[static_cast<std::size_t>(j)];
    pi *= xv(j);
  }
  const Eigen::VectorXd xdf = xv.cwiseProduct(df);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(d);
  Eigen::MatrixXd m = f * one * one.transpose() + one * xdf.transpose() + xdf * one.transpose();
  m += xdf.asDiagonal();
  m += xv.asDiagonal() * d2f * xv.asDiagonal();
  return pi * m;
}

inline Eigen::MatrixXd
log_scale_hessian(const AnalyticTarget& t, std::span<const double> x)
{
  return log_scale_hessian(t.f(x), t.grad(x), t.hess(x), x);
}

//! The assembly f Diag(x) + x Df' Diag(x) + Diag(x) Df x' + pi Diag(x) Diag(Df)
//! + pi Diag(x) D^2 f Diag(x). It agrees with log_scale_hessian for d = 1
//! only; kept to document the difference for d >= 2.
inline Eigen::MatrixXd
log_scale_hessian_alternative(double f, const Eigen::VectorXd& df, const Eigen::MatrixXd& d2f,
                              std::span<const double> x)
{
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd xv(d);
  double pi = 1.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    xv(j) = x[static_cast<std::size_t>(j)];
    pi *= xv(j);
  }
  Eigen::MatrixXd dx = xv.asDiagonal();
  Eigen::MatrixXd m = f * dx + xv * df.transpose() * dx + dx * df * xv.transpose();
  m += pi * dx * Eigen::MatrixXd(df.asDiagonal());
  m += pi * dx * d2f * dx;
  return m;
}

// ---------------------------------------------------------------------------
// pointwise bias and variance predictions for the log-transformation KDE

//! Leading bias 1/2 m2(K) pi(x)^{-1} tr(H D^2 f_Y(log x)).
inline double
leading_bias_prediction(const AnalyticTarget& t, std::span<const double> x, const BandwidthMatrix& h)
{
  if (x.size() != t.d || h.d() != t.d)
    throw ConfigError("point, bandwidth and target dimensions differ");
  for (double v : x)
    if (!(v > 0.0))
      throw ConfigError("bias prediction needs a point in (0, inf)^d");
  double pi = 1.0;
  for (double v : x)
    pi *= v;
  const Eigen::MatrixXd hy = log_scale_hessian(t, x);
  return 0.5 * GaussianKernel::m2() * (h.matrix() * hy).trace() / pi;
}

//! d = 1 form: 1/2 m2 h^2 [f + 3 x f' + x^2 f''].
inline double
bias_prediction_1d(double f, double f1, double f2, double x, double h2)
{
  return 0.5 * GaussianKernel::m2() * h2 * (f + 3.0 * x * f1 + x * x * f2);
}

//! d = 2 form written out for H = [h1^2, h12; h12, h2^2].
inline double
bias_prediction_2d(double f, const Eigen::Vector2d& df, const Eigen::Matrix2d& d2f, double x1, double x2,
                   const Eigen::Matrix2d& h)
{
  const double h1 = h(0, 0), h2 = h(1, 1), h12 = h(0, 1);
  const double diag = h1 * (f + 3.0 * x1 * df(0) + x1 * x1 * d2f(0, 0)) +
                      h2 * (f + 3.0 * x2 * df(1) + x2 * x2 * d2f(1, 1));
  const double cross = 2.0 * h12 * (f + x1 * df(0) + x2 * df(1) + x1 * x2 * d2f(0, 1));
  return 0.5 * GaussianKernel::m2() * (diag + cross);
}

//! n^{-1} |H|^{-1/2} R(K) pi(x)^{-1} f(x).
inline double
leading_variance_prediction(const AnalyticTarget& t, std::span<const double> x, const BandwidthMatrix& h,
                             std::size_t n)
{
  if (x.size() != t.d || h.d() != t.d)
    throw ConfigError("point, bandwidth and target dimensions differ");
  if (n < 1)
    throw ConfigError("sample size must be positive");
  double pi = 1.0;
  for (double v : x) {
    if (!(v > 0.0))
      throw ConfigError("variance prediction needs a point in (0, inf)^d");
    pi *= v;
  }
  return GaussianKernel{t.d}.roughness() * t.f(x) /
         (static_cast<double>(n) * std::sqrt(h.determinant()) * pi);
}

//! Exact E f-hat_X(x; H) for a product-lognormal target: on the log scale the
//! data are N(mu, s^2 I), so the expected estimate is N(mu, s^2 I + H) / pi(x).
inline double
lognormal_expected_estimate(const AnalyticTarget& t, std::span<const double> x, const BandwidthMatrix& h)
{
  if (!t.lognormal)
    throw ConfigError("exact expectation is only available for lognormal targets");
  const auto [mu, s] = *t.lognormal;
  const auto d = static_cast<Eigen::Index>(t.d);
  GaussianDensity g(s * s * Eigen::MatrixXd::Identity(d, d) + h.matrix());
  std::vector<double> z(t.d);
  double pi = 1.0;
  for (std::size_t j = 0; j < t.d; ++j) {
    z[j] = std::log(x[j]) - mu;
    pi *= x[j];
  }
  return g(z) / pi;
}

// ---------------------------------------------------------------------------
// Monte Carlo

enum class McSampling
{
  iid,
  //! Each replicate's uniforms are stratified per coordinate (Latin
  //! hypercube). Means stay unbiased; their spread drops sharply, so only
  //! the bias is meaningful under this option.
  stratified
};

struct MonteCarloResult
{
  double truth = 0.0;
  double mean = 0.0;
  double bias_hat = 0.0;
  double var_hat = 0.0;
  double se_bias = 0.0;
  double se_var = 0.0;
  std::size_t replicates = 0;
  McSampling sampling = McSampling::iid;
};

namespace detail {

inline DataMatrix
draw_target(const AnalyticTarget& t, std::size_t n, RngStream& rng, McSampling sampling)
{
  std::vector<double> u(n * t.d);
  if (sampling == McSampling::iid) {
    for (auto& v : u)
      v = rng.uniform();
  } else {
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < t.d; ++j) {
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n; i-- > 1;) {
        const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
        std::swap(perm[i], perm[std::min(k, i)]);
      }
      for (std::size_t i = 0; i < n; ++i)
        u[i * t.d + j] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }
  std::vector<double> x(n * t.d);
  for (std::size_t i = 0; i < n; ++i)
    t.from_uniform(std::span<const double>(u.data() + i * t.d, t.d), std::span<double>(x.data() + i * t.d, t.d));
  return DataMatrix(n, t.d, std::move(x));
}

} // namespace detail

//! Log-transformation KDE (offset 0) of a target sample.
inline KdeModel
log_kde(const DataMatrix& x, const BandwidthMatrix& h)
{
  LogTransform t(std::vector<double>(x.d(), 0.0));
  return KdeModel::transformation(t.apply(x), h, t);
}

//! Mean and variance of f-hat_X(x; H) over independent samples of size n.
inline MonteCarloResult
monte_carlo_bias_variance(const AnalyticTarget& t, std::span<const double> x, const BandwidthMatrix& h,
                          std::size_t n, std::size_t replicates, const RngStream& rng,
                          McSampling sampling = McSampling::iid)
{
  if (replicates < 100)
    throw ConfigError("Monte Carlo needs at least 100 replicates");
  if (x.size() != t.d || h.d() != t.d)
    throw ConfigError("point, bandwidth and target dimensions differ");
  std::vector<double> est(replicates);
  const std::vector<double> xp(x.begin(), x.end());
  parallel_for(replicates, thread_count(), [&](std::size_t r) {
    auto sub = rng.split(r);
    const auto data = detail::draw_target(t, n, sub, sampling);
    est[r] = log_kde(data, h)(xp);
  });
  MonteCarloResult m;
  m.replicates = replicates;
  m.sampling = sampling;
  m.truth = t.f(xp);
  const double rr = static_cast<double>(replicates);
  m.mean = pairwise_sum(est) / rr;
  std::vector<double> c2(replicates), c4(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const double e = est[r] - m.mean;
    c2[r] = e * e;
    c4[r] = e * e * e * e;
  }
  const double m2 = pairwise_sum(c2) / rr;
  const double m4 = pairwise_sum(c4) / rr;
  m.var_hat = m2 * rr / (rr - 1.0);
  m.bias_hat = m.mean - m.truth;
  m.se_bias = std::sqrt(m.var_hat / rr);
  m.se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / rr);
  return m;
}

// ---------------------------------------------------------------------------
// MISE rate

enum class RateEstimator
{
  kernel,
  histogram
};

struct RateCheck
{
  std::vector<std::size_t> n;
  std::vector<double> mean_ise;
  std::vector<double> se_ise;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

namespace detail {

// Least-squares line through (log n, log ise).
inline void
fit_log_log(RateCheck& rc)
{
  const double k = static_cast<double>(rc.n.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < rc.n.size(); ++i) {
    const double a = std::log(static_cast<double>(rc.n[i])), b = std::log(rc.mean_ise[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    syy += b * b;
  }
  const double cxx = sxx - sx * sx / k, cxy = sxy - sx * sy / k, cyy = syy - sy * sy / k;
  rc.slope = cxy / cxx;
  rc.intercept = (sy - rc.slope * sx) / k;
  rc.r2 = cyy > 0.0 ? cxy * cxy / (cxx * cyy) : 1.0;
}

// ISE of a log-scale KDE against the target, integrated on the log scale:
// int (fhat_X - f_X)^2 dx = int (fhat_Y - f_Y)^2 e^{-y} dy.
inline double
kernel_ise_1d(const AnalyticTarget& t, const KdeModel& m)
{
  const auto& y = m.data();
  const double s = std::sqrt(m.bandwidth()(0, 0));
  const double lo = std::min(y(0, 0), -8.0) - 8.0 * s;
  const double hi = std::max(y(y.n() - 1, 0), 8.0) + 8.0 * s;
  const std::size_t pts = 8001;
  const double step = (hi - lo) / static_cast<double>(pts - 1);
  std::vector<double> terms(pts);
  for (std::size_t k = 0; k < pts; ++k) {
    const double yy = lo + step * static_cast<double>(k);
    const double fy = m.density_estimation_scale(&yy);
    const double ty = log_scale_density(t, std::span<const double>(&yy, 1));
    const double e = fy - ty;
    terms[k] = (k == 0 || k + 1 == pts ? 0.5 : 1.0) * step * e * e * std::exp(-yy);
  }
  return pairwise_sum(terms);
}

} // namespace detail

//! Average ISE against the analytic target per sample size, and the slope of
//! log ISE on log n. The kernel is the log-transformation KDE with the given
//! selector; the histogram uses the normal-scale binwidth anchored at the
//! sample minimum and its exact ISE.
inline RateCheck
mise_rate_check(const AnalyticTarget& t, const std::vector<std::size_t>& n_grid, Selector selector,
                std::size_t replicates, const RngStream& rng, RateEstimator estimator = RateEstimator::kernel)
{
  if (t.d != 1)
    throw ConfigError("the rate check is implemented for d = 1");
  if (n_grid.size() < 4)
    throw ConfigError("the rate check needs at least four sample sizes");
  for (auto n : n_grid)
    if (n < 500)
      throw ConfigError("the rate check needs sample sizes of at least 500");
  if (replicates < 1)
    throw ConfigError("the rate check needs at least one replicate");
  RateCheck rc;
  rc.n = n_grid;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    std::vector<double> ise(replicates);
    parallel_for(replicates, thread_count(), [&](std::size_t r) {
      auto sub = rng.split(g * 1000003ULL + r);
      const auto x = detail::draw_target(t, n_grid[g], sub, McSampling::iid);
      if (estimator == RateEstimator::kernel) {
        LogTransform tr(std::vector<double>{0.0});
        const auto y = tr.apply(x);
        const auto sel = select_bandwidth(selector, y);
        ise[r] = detail::kernel_ise_1d(t, KdeModel::transformation(y, sel.h, tr));
      } else {
        const auto h = hist_fit_default(x);
        ise[r] = histogram_ise_exact(h, t.cdf, t.int_f2);
      }
    });
    const double rr = static_cast<double>(replicates);
    const double mean = pairwise_sum(ise) / rr;
    double v = 0.0;
    for (double e : ise)
      v += (e - mean) * (e - mean);
    rc.mean_ise.push_back(mean);
    rc.se_ise.push_back(replicates > 1 ? std::sqrt(v / (rr - 1.0) / rr) : 0.0);
  }
  detail::fit_log_log(rc);
  return rc;
}

// ---------------------------------------------------------------------------
// Check suite

//! Maximum relative error of the coded log-scale Hessian against central
//! finite differences of f_Y at `count` random points of (0.4, 2.5)^d.
inline double
hessian_identity_error(const AnalyticTarget& t, std::size_t count, RngStream rng, double step = 1e-4)
{
  double worst = 0.0;
  std::vector<double> x(t.d), y(t.d);
  for (std::size_t rep = 0; rep < count; ++rep) {
    for (std::size_t j = 0; j < t.d; ++j) {
      x[j] = 0.4 + 2.1 * rng.uniform();
      y[j] = std::log(x[j]);
    }
    const auto hy = log_scale_hessian(t, x);
    const double scale = hy.cwiseAbs().maxCoeff();
    for (std::size_t a = 0; a < t.d; ++a)
      for (std::size_t b = 0; b < t.d; ++b) {
        auto f = [&](double da, double db) {
          auto z = y;
          z[a] += da;
          z[b] += db;
          return log_scale_density(t, z);
        };
        const double fd = (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4 * step * step);
        const double h = hy(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        worst = std::max(worst, std::abs(fd - h) / std::max(std::abs(h), 1e-2 * scale));
      }
  }
  return worst;
}

struct TheoryOptions
{
  std::size_t n = 4000;
  std::size_t replicates = 500;
  double h = 0.15;
  double x = 1.0;
  std::uint64_t seed = 1;
  bool rate = true;
  std::vector<std::size_t> rate_n{500, 1000, 2000, 4000, 8000};
  std::size_t rate_replicates = 100;
  Selector rate_selector = Selector::PI;
};

//! One numerical check: what theory predicts, what was measured, and
//! whether the measurement lies in the accepted band.
struct TheoryCheck
{
  std::string name;
  double prediction = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  bool pass = false;
  std::string criterion;
};

//! Lognormal(0, 1) checks of the pointwise bias and variance, the h^2 bias
//! scaling, the log-scale Hessian identity and (optionally) the kernel and
//! histogram ISE rates.
inline std::vector<TheoryCheck>
verify_theory(const TheoryOptions& o)
{
  if (!(o.h > 0.0) || !(o.x > 0.0))
    throw ConfigError("bandwidth and evaluation point must be positive");
  std::vector<TheoryCheck> out;
  const auto t = lognormal_target(1);
  const std::vector<double> x{o.x};
  const auto h = BandwidthMatrix::scalar(o.h * o.h);
  const RngStream root(o.seed, 0);

  {
    double worst = 0.0;
    for (std::size_t d = 1; d <= 3; ++d)
      worst = std::max(worst, hessian_identity_error(lognormal_target(d), 20, root.split(10 + d)));
    out.push_back({"hessian_identity", 0.0, worst, 0.0, worst < 1e-5, "max relative error < 1e-5 (d = 1, 2, 3)"});
  }

  const double pb = leading_bias_prediction(t, x, h);
  const double exact = lognormal_expected_estimate(t, x, h) - t.f(x);
  out.push_back({"bias_exact", pb, exact, 0.0, std::abs(exact - pb) <= 0.4 * std::abs(pb),
                 "exact bias within 40% of the leading term"});

  const auto mc = monte_carlo_bias_variance(t, x, h, o.n, o.replicates, root.split(1));
  out.push_back({"bias_monte_carlo", pb, mc.bias_hat, mc.se_bias,
                 std::abs(mc.bias_hat - pb) <= std::max(3.0 * mc.se_bias, 0.4 * std::abs(pb)),
                 "within max(3 SE, 40%) of the prediction"});
  const double pv = leading_variance_prediction(t, x, h, o.n);
  out.push_back({"variance_monte_carlo", pv, mc.var_hat, mc.se_var, std::abs(mc.var_hat - pv) <= 0.4 * pv,
                 "within 40% of the prediction"});

  const auto hh = BandwidthMatrix::scalar(0.25 * o.h * o.h);
  const auto a = monte_carlo_bias_variance(t, x, h, o.n, o.replicates, root.split(2), McSampling::stratified);
  const auto b = monte_carlo_bias_variance(t, x, hh, o.n, o.replicates, root.split(3), McSampling::stratified);
  const double ratio = a.bias_hat / b.bias_hat;
  const double se_ratio = std::abs(ratio) * std::hypot(a.se_bias / a.bias_hat, b.se_bias / b.bias_hat);
  out.push_back({"bias_scaling_ratio", 4.0, ratio, se_ratio, ratio >= 2.5 && ratio <= 6.0,
                 "bias(h) / bias(h/2) in [2.5, 6] (stratified replicates)"});

  if (o.rate) {
    const auto k = mise_rate_check(t, o.rate_n, o.rate_selector, o.rate_replicates, root.split(4), RateEstimator::kernel);
    const auto g =
      mise_rate_check(t, o.rate_n, o.rate_selector, o.rate_replicates, root.split(5), RateEstimator::histogram);
    out.push_back({"rate_kernel", -0.8, k.slope, 0.0, k.slope >= -1.0 && k.slope <= -0.6 && k.r2 > 0.95,
                   "slope in [-1, -0.6], r2 > 0.95"});
    out.push_back({"rate_histogram", -2.0 / 3.0, g.slope, 0.0,
                   g.slope >= -0.9 && g.slope <= -0.45 && g.r2 > 0.95 && g.slope > k.slope,
                   "slope in [-0.9, -0.45], r2 > 0.95, shallower than the kernel"});
    out.push_back({"rate_kernel_r2", 1.0, k.r2, 0.0, k.r2 > 0.95, "r2 > 0.95"});
    out.push_back({"rate_histogram_r2", 1.0, g.r2, 0.0, g.r2 > 0.95, "r2 > 0.95"});
  }
  return out;
}

} // namespace tailkde
