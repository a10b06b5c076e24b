#pragma once

#include "core.hpp"
#include "kde.hpp"
#include "optimize.hpp"

namespace tailkde {

// ---------------------------------------------------------------------------
// GEV and GPD building blocks

//! GEV(mu, sigma, xi): F(x) = exp(-t(x)), t = (1 + xi z)^{-1/xi}, z = (x-mu)/sigma.
struct GevParams
{
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

namespace detail {

inline constexpr double kXiZero = 1e-12;

// log(1 + xi z) / xi with the xi -> 0 limit; NaN when 1 + xi z <= 0.
inline double
log1p_ratio(double xi, double z)
{
  if (std::abs(xi) < kXiZero)
    return z;
  const double a = xi * z;
  if (!(a > -1.0))
    return std::numeric_limits<double>::quiet_NaN();
  return std::log1p(a) / xi;
}

inline double
softplus(double s)
{
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

} // namespace detail

//! t(x) = -log F(x); +inf below the support, 0 above it.
inline double
gev_t(double x, const GevParams& p)
{
  const double z = (x - p.mu) / p.sigma;
  const double l = detail::log1p_ratio(p.xi, z);
  if (std::isnan(l))
    return p.xi > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::exp(-l);
}

inline double
gev_logpdf(double x, const GevParams& p)
{
  const double z = (x - p.mu) / p.sigma;
  const double l = detail::log1p_ratio(p.xi, z);
  if (std::isnan(l))
    return -std::numeric_limits<double>::infinity();
  // log f = -log sigma - (1 + xi) l - exp(-l)
  return -std::log(p.sigma) - (1.0 + p.xi) * l - std::exp(-l);
}

inline double
gev_cdf(double x, const GevParams& p)
{
  return std::exp(-gev_t(x, p));
}

//! Inverse of t: the x with -log F(x) = t.
inline double
gev_from_t(double t, const GevParams& p)
{
  const double lt = std::log(t);
  if (std::abs(p.xi) < detail::kXiZero)
    return p.mu - p.sigma * lt;
  return p.mu + p.sigma * std::expm1(-p.xi * lt) / p.xi;
}

inline double
gev_quantile(double prob, const GevParams& p)
{
  if (!(prob > 0.0 && prob < 1.0))
    throw ConfigError("quantile level must lie in (0,1)");
  return gev_from_t(-std::log(prob), p);
}

//! GPD(mu, sigma, xi): survival (1 + xi (x-mu)/sigma)^{-1/xi} on x > mu.
inline double
gpd_logpdf(double x, double mu, double sigma, double xi)
{
  const double z = (x - mu) / sigma;
  if (!(z >= 0.0))
    return -std::numeric_limits<double>::infinity();
  const double l = detail::log1p_ratio(xi, z);
  if (std::isnan(l))
    return -std::numeric_limits<double>::infinity();
  return -std::log(sigma) - (1.0 + xi) * l;
}

inline double
gpd_sf(double x, double mu, double sigma, double xi)
{
  const double z = (x - mu) / sigma;
  if (!(z > 0.0))
    return 1.0;
  const double l = detail::log1p_ratio(xi, z);
  if (std::isnan(l))
    return 0.0;
  return std::exp(-l);
}

inline double
gpd_quantile(double prob, double mu, double sigma, double xi)
{
  if (!(prob >= 0.0 && prob < 1.0))
    throw ConfigError("quantile level must lie in [0,1)");
  const double ls = -std::log1p(-prob);
  if (std::abs(xi) < detail::kXiZero)
    return mu + sigma * ls;
  return mu + sigma * std::expm1(xi * ls) / xi;
}

// ---------------------------------------------------------------------------
// univariate fits

enum class Family
{
  gumbel,
  frechet,
  gev,
  gpd
};

inline std::string
to_string(Family f)
{
  switch (f) {
    case Family::gumbel:
      return "gumbel";
    case Family::frechet:
      return "frechet";
    case Family::gev:
      return "gev";
    case Family::gpd:
      return "gpd";
  }
  return "?";
}

//! Fitted univariate extreme-value model. Parameters follow each family's
//! own convention: Frechet F = exp(-((x-mu)/sigma)^{-1/xi}) on x > mu, GPD as
//! in gpd_logpdf, Gumbel with xi = 0.
struct UnivariateEvtFit
{
  Family family = Family::gumbel;
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t n = 0;

  //! Equivalent GEV parameters (not meaningful for the GPD).
  GevParams gev() const
  {
    switch (family) {
      case Family::gumbel:
        return {mu, sigma, 0.0};
      case Family::frechet:
        return {mu + sigma, xi * sigma, xi};
      default:
        return {mu, sigma, xi};
    }
  }

  double logpdf(double x) const
  {
    return family == Family::gpd ? gpd_logpdf(x, mu, sigma, xi) : gev_logpdf(x, gev());
  }

  double pdf(double x) const { return std::exp(logpdf(x)); }

  double sf(double x) const
  {
    if (family == Family::gpd)
      return gpd_sf(x, mu, sigma, xi);
    return -std::expm1(-gev_t(x, gev()));
  }

  double cdf(double x) const { return 1.0 - sf(x); }

  double quantile(double p) const
  {
    return family == Family::gpd ? gpd_quantile(p, mu, sigma, xi) : gev_quantile(p, gev());
  }

  //! Upper support endpoint (inf for xi >= 0).
  double upper_endpoint() const
  {
    if (xi >= 0.0)
      return std::numeric_limits<double>::infinity();
    return family == Family::gpd ? mu - sigma / xi : gev().mu - gev().sigma / xi;
  }
};

namespace detail {

inline void
check_univariate_sample(std::span<const double> x)
{
  if (x.size() < 10)
    throw DataError(concat("parametric fit needs at least 10 observations (got ", x.size(), ")"));
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo))
    throw DataError("parametric fit: all observations are equal");
}

inline double
mean_of(std::span<const double> x)
{
  double s = 0.0;
  for (double v : x)
    s += v;
  return s / static_cast<double>(x.size());
}

inline double
sd_of(std::span<const double> x)
{
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x)
    s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline double
gev_loglik(std::span<const double> x, const GevParams& p)
{
  if (!(p.sigma > 0.0) || !(p.xi > -1.0))
    return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double v : x)
    s += gev_logpdf(v, p);
  return s;
}

inline double
gpd_loglik(std::span<const double> x, double mu, double sigma, double xi)
{
  if (!(sigma > 0.0) || !(xi > -1.0))
    return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double v : x)
    s += gpd_logpdf(v, mu, sigma, xi);
  return s;
}

struct Candidate
{
  std::vector<double> x;
  double f;
  bool converged;
};

// Best of several simplex searches on a negative log-likelihood.
template<typename F>
Candidate
multistart(F&& nll, const std::vector<std::vector<double>>& starts, const std::vector<double>& step,
           NelderMeadOptions opt = {})
{
  Candidate best{{}, std::numeric_limits<double>::infinity(), false};
  for (const auto& s : starts) {
    if (!std::isfinite(nll(s)))
      continue;
    auto r = nelder_mead(nll, s, step, opt);
    if (r.fval < best.f)
      best = {r.x, r.fval, r.converged};
  }
  if (!std::isfinite(best.f))
    throw NumericalError("likelihood is not finite at any starting point");
  return best;
}

inline UnivariateEvtFit
fit_gumbel_values(std::span<const double> x)
{
  const double s = sd_of(x);
  const double sig0 = s * std::sqrt(6.0) / kPi;
  const double mu0 = mean_of(x) - 0.5772156649015329 * sig0;
  auto nll = [&](const std::vector<double>& p) {
    return -gev_loglik(x, {p[0], std::exp(p[1]), 0.0});
  };
  auto c = multistart(nll, {{mu0, std::log(sig0)}}, {0.1 * s, 0.1});
  return {Family::gumbel, c.x[0], std::exp(c.x[1]), 0.0, -c.f, c.converged, x.size()};
}

inline UnivariateEvtFit
fit_gev_values(std::span<const double> x, const UnivariateEvtFit& gum)
{
  const double s = sd_of(x);
  auto nll = [&](const std::vector<double>& p) {
    return -gev_loglik(x, {p[0], std::exp(p[1]), p[2]});
  };
  const double ls = std::log(gum.sigma);
  auto c = multistart(nll, {{gum.mu, ls, 0.0}, {gum.mu, ls, 0.2}, {gum.mu, ls, -0.2}},
                      {0.1 * s, 0.1, 0.05});
  return {Family::gev, c.x[0], std::exp(c.x[1]), c.x[2], -c.f, c.converged, x.size()};
}

// Frechet fitted through its GEV form (m, log s, log xi) with xi > 0.
inline UnivariateEvtFit
fit_frechet_values(std::span<const double> x, const UnivariateEvtFit& gum)
{
  const double s = sd_of(x);
  auto nll = [&](const std::vector<double>& p) {
    return -gev_loglik(x, {p[0], std::exp(p[1]), std::exp(p[2])});
  };
  const double ls = std::log(gum.sigma);
  std::vector<std::vector<double>> starts;
  for (double xi0 : {1e-3, 0.1, 0.3})
    starts.push_back({gum.mu, ls, std::log(xi0)});
  auto c = multistart(nll, starts, {0.1 * s, 0.1, 0.5});
  const double xi = std::exp(c.x[2]);
  const double sg = std::exp(c.x[1]) / xi;
  return {Family::frechet, c.x[0] - sg, sg, xi, -c.f, c.converged, x.size()};
}

inline UnivariateEvtFit
fit_gpd_values(std::span<const double> x, double mu)
{
  for (double v : x)
    if (v < mu)
      throw DataError(concat("GPD fit: observation ", v, " lies below the location ", mu));
  std::vector<double> z(x.begin(), x.end());
  for (auto& v : z)
    v -= mu;
  const double m = mean_of(z);
  const double var = sd_of(z) * sd_of(z);
  if (!(m > 0.0))
    throw DataError("GPD fit: no mass above the location");
  auto nll = [&](const std::vector<double>& p) {
    return -gpd_loglik(z, 0.0, std::exp(p[0]), p[1]);
  };
  // Exponential start and the method-of-moments start.
  std::vector<std::vector<double>> starts{{std::log(m), 0.0}};
  const double r = m * m / var;
  const double xi_mom = 0.5 * (1.0 - r);
  if (xi_mom > -0.9 && xi_mom < 0.45)
    starts.push_back({std::log(0.5 * m * (r + 1.0)), xi_mom});
  auto c = multistart(nll, starts, {0.1, 0.05});
  return {Family::gpd, mu, std::exp(c.x[0]), c.x[1], -c.f, c.converged, x.size()};
}

} // namespace detail

//! Maximum-likelihood fit of a univariate family. For the GPD the location is
//! fixed: at `gpd_location` when given (exceedance fits use the threshold),
//! otherwise at the sample minimum.
inline UnivariateEvtFit
fit_univariate(const DataMatrix& data, Family family, std::optional<double> gpd_location = {})
{
  if (data.d() != 1)
    throw DataError("univariate fit needs one column");
  const auto& x = data.values();
  detail::check_univariate_sample(x);
  switch (family) {
    case Family::gumbel:
      return detail::fit_gumbel_values(x);
    case Family::frechet:
      return detail::fit_frechet_values(x, detail::fit_gumbel_values(x));
    case Family::gev:
      return detail::fit_gev_values(x, detail::fit_gumbel_values(x));
    case Family::gpd:
      return detail::fit_gpd_values(x, gpd_location.value_or(*std::min_element(x.begin(), x.end())));
  }
  throw ConfigError("unknown family");
}

//! GPD fitted to the exceedances above u with the location fixed at u.
inline UnivariateEvtFit
fit_gpd_exceedances(const DataMatrix& data, double u)
{
  const std::array<double, 1> uu{u};
  return fit_univariate(data.exceedances(uu), Family::gpd, u);
}

struct DevianceResult
{
  bool use_frechet = false;
  double statistic = 0.0;
  double pvalue = 1.0;
  UnivariateEvtFit gumbel;
  UnivariateEvtFit frechet;
};

//! Likelihood-ratio test of Gumbel (xi = 0) against Frechet (xi > 0). The
//! Frechet search starts next to the Gumbel fit, so the statistic is
//! nonnegative up to rounding; it is clamped at 0.
inline DevianceResult
deviance_gumbel_vs_frechet(const DataMatrix& data, double level = 0.05)
{
  if (data.d() != 1)
    throw DataError("deviance test needs one column");
  const auto& x = data.values();
  detail::check_univariate_sample(x);
  DevianceResult r;
  r.gumbel = detail::fit_gumbel_values(x);
  r.frechet = detail::fit_frechet_values(x, r.gumbel);
  if (!std::isfinite(r.gumbel.loglik) || !std::isfinite(r.frechet.loglik))
    throw NumericalError("deviance test: a fit failed");
  r.statistic = std::max(0.0, 2.0 * (r.frechet.loglik - r.gumbel.loglik));
  r.pvalue = std::erfc(std::sqrt(0.5 * r.statistic));
  r.use_frechet = r.pvalue < level;
  return r;
}

//! Upper truncation for a univariate parametric tail: the point beyond which
//! a fraction `rel_mass` of the tail mass remains, capped at the endpoint.
inline double
parametric_upper_bound(const UnivariateEvtFit& m, double u, double rel_mass = 1e-4)
{
  const double s = m.sf(u);
  double up = m.quantile(1.0 - rel_mass * s);
  up = std::min(up, m.upper_endpoint());
  return std::max(up, u + 1e-9 * (1.0 + std::abs(u)));
}

//! Tail density f / (1 - F(u)) of a fitted univariate model, with the
//! closed-form survival as normaliser. Unless points are given, the grid is
//! refined until spacing is at most 1/20 of the local scale at u; for very
//! heavy tails the truncation point is lowered to respect a node budget.
inline TailDensityModel
parametric_tail_density(const UnivariateEvtFit& m, const TailRegion& region, std::string id = "",
                        TailOptions opt = {})
{
  if (region.d() != 1)
    throw ConfigError("univariate parametric tail needs a one-dimensional threshold");
  const double u = region.u[0];
  const double s = m.sf(u);
  if (!(s > 0.0))
    throw DataError("fitted model has no mass above the threshold");
  double up = opt.upper.empty() ? parametric_upper_bound(m, u) : opt.upper[0];
  std::size_t points = opt.points;
  if (points == 0) {
    constexpr double cap = 400001.0;
    const double fu = m.pdf(std::nextafter(u, std::numeric_limits<double>::infinity()));
    const double scale = fu > 0.0 ? s / fu : up - u;
    // Very heavy tails: keep the resolution and truncate earlier instead.
    if (opt.upper.empty())
      up = std::min(up, u + scale * (cap - 1.0) / 20.0);
    const double want = std::ceil(20.0 * (up - u) / scale) + 1.0;
    points = static_cast<std::size_t>(std::clamp(want, 512.0, cap));
  }
  if (id.empty())
    id = to_string(m.family);
  auto f = [m](std::span<const double> x) { return m.pdf(x[0]); };
  return TailDensityModel(region, {up}, s, std::move(id), f, {}, points);
}

// ---------------------------------------------------------------------------
// bivariate max-stable families

enum class BivFamily
{
  bilogistic,
  anl,
  husler_reiss
};

inline std::string
to_string(BivFamily f)
{
  switch (f) {
    case BivFamily::bilogistic:
      return "bil";
    case BivFamily::anl:
      return "anl";
    case BivFamily::husler_reiss:
      return "hr";
  }
  return "?";
}

//! Dependence parameters: HR {lambda}, ANL {r, theta1, theta2}, BIL {alpha, beta}.
struct Dependence
{
  BivFamily family = BivFamily::husler_reiss;
  std::vector<double> par{1.0};

  void validate() const
  {
    auto bad = [](const std::string& m) { throw ConfigError(m); };
    switch (family) {
      case BivFamily::husler_reiss:
        if (par.size() != 1 || !(par[0] > 0.0) || !std::isfinite(par[0]))
          bad("Husler-Reiss needs lambda > 0");
        break;
      case BivFamily::anl:
        if (par.size() != 3 || !(par[0] > 0.0) || !std::isfinite(par[0]))
          bad("asymmetric negative logistic needs r > 0");
        if (!(par[1] >= 0.0 && par[1] <= 1.0 && par[2] >= 0.0 && par[2] <= 1.0))
          bad("asymmetric negative logistic needs asymmetry in [0,1]");
        break;
      case BivFamily::bilogistic:
        if (par.size() != 2 || !(par[0] > 0.0 && par[0] < 1.0 && par[1] > 0.0 && par[1] < 1.0))
          bad("bilogistic needs alpha, beta in (0,1)");
        break;
    }
  }
};

//! How the quoted "dependence parameter" of a target maps to the pinned
//! forms. `evd`: HR lambda is the reciprocal of the quoted value (larger
//! quoted value = stronger dependence); `literal`: lambda is the quoted value.
//! ANL r is the quoted value under both.
enum class Convention
{
  evd,
  literal
};

inline Dependence
reference_dependence(BivFamily f, Convention c = Convention::evd)
{
  switch (f) {
    case BivFamily::bilogistic:
      return {f, {0.8, 0.52}};
    case BivFamily::anl:
      return {f, {1.3, 0.2, 0.7}};
    case BivFamily::husler_reiss:
      return {f, {c == Convention::evd ? 1.0 / 2.4 : 2.4}};
  }
  throw ConfigError("unknown family");
}

//! Exponent V(y1, y2) = (y1 + y2) A(y2 / (y1 + y2)) on the unit exponential
//! scale y = -log F, with partial derivatives.
struct Exponent
{
  double v = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double v12 = 0.0;
};

namespace detail {

// Root s = logit(q) of (1-a) y1 (1-q)^b = (1-b) y2 q^a; safeguarded Newton.
inline double
bilogistic_root(double a, double b, double y1, double y2)
{
  const double c = std::log((1.0 - a) * y1) - std::log((1.0 - b) * y2);
  auto h = [&](double s) { return c - b * softplus(s) + a * softplus(-s); };
  auto dh = [&](double s) {
    const double q = 1.0 / (1.0 + std::exp(-s));
    return -b * q - a * (1.0 - q);
  };
  double lo = -1.0, hi = 1.0;
  while (h(lo) < 0.0)
    lo *= 2.0;
  while (h(hi) > 0.0)
    hi *= 2.0;
  double s = std::clamp(c > 0.0 ? c / b : c / a, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double hv = h(s);
    if (hv == 0.0)
      return s;
    if (hv > 0.0)
      lo = s;
    else
      hi = s;
    double next = s - hv / dh(s);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-14 * std::max(1.0, std::abs(s)) || hi - lo <= 1e-14 * std::max(1.0, std::abs(s)))
      return next;
    s = next;
  }
  return s;
}

} // namespace detail

inline Exponent
exponent(const Dependence& dep, double y1, double y2)
{
  if (y1 == 0.0 || y2 == 0.0)
    return {y1 + y2, y2 == 0.0 ? 1.0 : 0.0, y1 == 0.0 ? 1.0 : 0.0, 0.0};
  Exponent e;
  switch (dep.family) {
    case BivFamily::husler_reiss: {
      const double lam = dep.par[0];
      const double l = std::log(y1 / y2) / (2.0 * lam);
      const double a = lam + l, b = lam - l;
      e.v1 = norm_cdf(a);
      e.v2 = norm_cdf(b);
      e.v = y1 * e.v1 + y2 * e.v2;
      e.v12 = -norm_pdf(a) / (2.0 * lam * y2);
      break;
    }
    case BivFamily::anl: {
      const double r = dep.par[0], t1 = dep.par[1], t2 = dep.par[2];
      if (t1 == 0.0 || t2 == 0.0) {
        e = {y1 + y2, 1.0, 1.0, 0.0};
        break;
      }
      const double a1 = -r * std::log(t1 * y1), a2 = -r * std::log(t2 * y2);
      const double mx = std::max(a1, a2);
      const double lt = mx + std::log(std::exp(a1 - mx) + std::exp(a2 - mx));
      e.v = y1 + y2 - std::exp(-lt / r);
      e.v1 = 1.0 - std::exp((-1.0 / r - 1.0) * lt + a1 - std::log(y1));
      e.v2 = 1.0 - std::exp((-1.0 / r - 1.0) * lt + a2 - std::log(y2));
      e.v12 = -(1.0 + r) * std::exp((-1.0 / r - 2.0) * lt + a1 + a2 - std::log(y1) - std::log(y2));
      break;
    }
    case BivFamily::bilogistic: {
      const double a = dep.par[0], b = dep.par[1];
      const double s = detail::bilogistic_root(a, b, y1, y2);
      const double lq = -detail::softplus(-s), l1q = -detail::softplus(s);
      const double q = std::exp(lq), q1 = std::exp(l1q);
      e.v1 = std::exp((1.0 - a) * lq);
      e.v2 = std::exp((1.0 - b) * l1q);
      e.v = y1 * e.v1 + y2 * e.v2;
      // K = (1-a) y1 (1-q)^b = (1-b) y2 q^a at the root.
      const double k = std::exp(std::log((1.0 - a) * y1) + b * l1q);
      e.v12 = -(1.0 - a) * (1.0 - b) * q * q1 / (k * (b * q + a * q1));
      break;
    }
  }
  return e;
}

//! Pickands dependence function A(w), w = y2 / (y1 + y2).
inline double
pickands(const Dependence& dep, double w)
{
  dep.validate();
  if (!(w >= 0.0 && w <= 1.0))
    throw ConfigError("Pickands argument must lie in [0,1]");
  if (w == 0.0 || w == 1.0)
    return 1.0;
  return exponent(dep, 1.0 - w, w).v;
}

//! Bivariate extreme-value model with GEV margins.
struct BivariateEvdModel
{
  Dependence dep;
  std::array<GevParams, 2> margins{};

  double cdf(std::span<const double> x) const
  {
    const double y1 = gev_t(x[0], margins[0]), y2 = gev_t(x[1], margins[1]);
    if (std::isinf(y1) || std::isinf(y2))
      return 0.0;
    return std::exp(-exponent(dep, y1, y2).v);
  }

  double logpdf(std::span<const double> x) const
  {
    const double y1 = gev_t(x[0], margins[0]), y2 = gev_t(x[1], margins[1]);
    const double l1 = gev_logpdf(x[0], margins[0]), l2 = gev_logpdf(x[1], margins[1]);
    if (!std::isfinite(l1) || !std::isfinite(l2) || !(y1 > 0.0) || !(y2 > 0.0))
      return -std::numeric_limits<double>::infinity();
    const auto e = exponent(dep, y1, y2);
    const double c = e.v1 * e.v2 - e.v12;
    if (!(c > 0.0))
      return -std::numeric_limits<double>::infinity();
    // f_j / F_j = exp(log f_j + y_j)
    return -e.v + std::log(c) + l1 + y1 + l2 + y2;
  }

  double pdf(std::span<const double> x) const { return std::exp(logpdf(x)); }

  double marginal_sf(std::size_t j, double x) const
  {
    return -std::expm1(-gev_t(x, margins[j]));
  }

  //! P(X1 > u1, X2 > u2).
  double joint_sf(std::span<const double> u) const
  {
    const double s = marginal_sf(0, u[0]) + marginal_sf(1, u[1]) - 1.0 + cdf(u);
    return std::max(s, 0.0);
  }
};

struct BivariateEvdFit
{
  BivariateEvdModel model;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t n = 0;
};

inline double
bivariate_loglik(const BivariateEvdModel& m, const DataMatrix& x)
{
  double s = 0.0;
  for (std::size_t i = 0; i < x.n(); ++i)
    s += m.logpdf(x.row(i));
  return s;
}

namespace detail {

inline double
logit(double p)
{
  return std::log(p / (1.0 - p));
}

inline double
expit(double s)
{
  return 1.0 / (1.0 + std::exp(-s));
}

inline std::vector<double>
dep_to_free(const Dependence& d)
{
  switch (d.family) {
    case BivFamily::husler_reiss:
      return {std::log(d.par[0])};
    case BivFamily::anl:
      return {std::log(d.par[0]), logit(std::clamp(d.par[1], 1e-6, 1.0 - 1e-6)),
              logit(std::clamp(d.par[2], 1e-6, 1.0 - 1e-6))};
    case BivFamily::bilogistic:
      return {logit(d.par[0]), logit(d.par[1])};
  }
  return {};
}

inline Dependence
dep_from_free(BivFamily f, std::span<const double> p)
{
  switch (f) {
    case BivFamily::husler_reiss:
      return {f, {std::exp(p[0])}};
    case BivFamily::anl:
      return {f, {std::exp(p[0]), expit(p[1]), expit(p[2])}};
    case BivFamily::bilogistic:
      return {f, {expit(p[0]), expit(p[1])}};
  }
  return {};
}

inline std::vector<Dependence>
dependence_starts(BivFamily f)
{
  switch (f) {
    case BivFamily::husler_reiss:
      return {{f, {0.3}}, {f, {0.7}}, {f, {1.5}}};
    case BivFamily::anl:
      return {{f, {0.7, 0.5, 0.5}}, {f, {1.5, 0.3, 0.8}}, {f, {1.5, 0.8, 0.3}}};
    case BivFamily::bilogistic:
      return {{f, {0.5, 0.5}}, {f, {0.3, 0.7}}, {f, {0.7, 0.3}}};
  }
  return {};
}

inline BivariateEvdModel
model_from_free(BivFamily f, std::span<const double> p)
{
  BivariateEvdModel m;
  m.margins[0] = {p[0], std::exp(p[1]), p[2]};
  m.margins[1] = {p[3], std::exp(p[4]), p[5]};
  m.dep = dep_from_free(f, p.subspan(6));
  return m;
}

inline std::vector<double>
model_to_free(const BivariateEvdModel& m)
{
  std::vector<double> p{m.margins[0].mu, std::log(m.margins[0].sigma), m.margins[0].xi,
                        m.margins[1].mu, std::log(m.margins[1].sigma), m.margins[1].xi};
  for (double v : dep_to_free(m.dep))
    p.push_back(v);
  return p;
}

} // namespace detail

struct BivariateFitOptions
{
  std::size_t polish_iterations = 3000;
};

//! Joint MLE of GEV margins and dependence: margins first, then the
//! dependence with margins held fixed (three starts), then a joint polish of
//! all parameters from the best point.
inline BivariateEvdFit
fit_bivariate(const DataMatrix& data, BivFamily family, BivariateFitOptions opt = {})
{
  if (data.d() != 2)
    throw DataError("bivariate fit needs two columns");
  if (data.n() < 50)
    throw DataError(detail::concat("bivariate fit needs at least 50 observations (got ", data.n(), ")"));
  BivariateEvdModel m;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto col = data.column(j);
    detail::check_univariate_sample(col);
    const auto g = detail::fit_gev_values(col, detail::fit_gumbel_values(col));
    m.margins[j] = g.gev();
  }

  // Dependence with margins fixed: precompute y and the marginal terms.
  std::vector<double> y1(data.n()), y2(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    y1[i] = gev_t(data(i, 0), m.margins[0]);
    y2[i] = gev_t(data(i, 1), m.margins[1]);
  }
  auto dep_nll = [&](const std::vector<double>& p) {
    const auto d = detail::dep_from_free(family, p);
    double s = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
      const auto e = exponent(d, y1[i], y2[i]);
      const double c = e.v1 * e.v2 - e.v12;
      if (!(c > 0.0))
        return std::numeric_limits<double>::infinity();
      s += -e.v + std::log(c);
    }
    return -s;
  };
  std::vector<std::vector<double>> starts;
  for (const auto& d : detail::dependence_starts(family))
    starts.push_back(detail::dep_to_free(d));
  auto c = detail::multistart(dep_nll, starts, std::vector<double>(starts[0].size(), 0.3));
  m.dep = detail::dep_from_free(family, c.x);

  auto nll = [&](const std::vector<double>& p) {
    const auto mm = detail::model_from_free(family, p);
    if (!(mm.margins[0].xi > -1.0) || !(mm.margins[1].xi > -1.0))
      return std::numeric_limits<double>::infinity();
    return -bivariate_loglik(mm, data);
  };
  const auto p0 = detail::model_to_free(m);
  const auto sd = column_sds(data);
  std::vector<double> step{0.05 * sd[0], 0.05, 0.03, 0.05 * sd[1], 0.05, 0.03};
  for (std::size_t k = 6; k < p0.size(); ++k)
    step.push_back(0.1);
  NelderMeadOptions no;
  no.max_iter = opt.polish_iterations;
  auto r = nelder_mead(nll, p0, step, no);
  BivariateEvdFit fit;
  fit.model = detail::model_from_free(family, r.x);
  fit.loglik = -r.fval;
  fit.converged = r.converged && c.converged;
  fit.n = data.n();
  return fit;
}

//! Standard errors of the natural parameters (mu1, sigma1, xi1, mu2, sigma2,
//! xi2, dependence...) from a finite-difference observed information.
inline std::vector<double>
bivariate_standard_errors(const BivariateEvdModel& m, const DataMatrix& data)
{
  std::vector<double> p{m.margins[0].mu, m.margins[0].sigma, m.margins[0].xi,
                        m.margins[1].mu, m.margins[1].sigma, m.margins[1].xi};
  p.insert(p.end(), m.dep.par.begin(), m.dep.par.end());
  const auto k = p.size();
  auto ll = [&](const std::vector<double>& q) {
    BivariateEvdModel mm;
    mm.margins[0] = {q[0], q[1], q[2]};
    mm.margins[1] = {q[3], q[4], q[5]};
    mm.dep = {m.dep.family, std::vector<double>(q.begin() + 6, q.end())};
    return bivariate_loglik(mm, data);
  };
  std::vector<double> h(k);
  for (std::size_t a = 0; a < k; ++a)
    h[a] = 1e-4 * std::max(std::abs(p[a]), 0.1);
  Eigen::MatrixXd info(k, k);
  const double f0 = ll(p);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      auto q = p;
      double v;
      if (a == b) {
        q[a] = p[a] + h[a];
        const double fp = ll(q);
        q[a] = p[a] - h[a];
        const double fm = ll(q);
        v = (fp - 2.0 * f0 + fm) / (h[a] * h[a]);
      } else {
        double s = 0.0;
        for (int sa : {1, -1})
          for (int sb : {1, -1}) {
            q = p;
            q[a] += sa * h[a];
            q[b] += sb * h[b];
            s += sa * sb * ll(q);
          }
        v = s / (4.0 * h[a] * h[b]);
      }
      info(a, b) = info(b, a) = -v;
    }
  }
  const Eigen::MatrixXd cov = info.inverse();
  std::vector<double> se(k);
  for (std::size_t a = 0; a < k; ++a)
    se[a] = cov(a, a) > 0.0 ? std::sqrt(cov(a, a)) : std::numeric_limits<double>::quiet_NaN();
  return se;
}

//! Upper truncation for a bivariate tail: per-margin points beyond which the
//! marginal mass is `rel_mass / 2` of the joint tail mass.
inline std::vector<double>
bivariate_upper_bound(const BivariateEvdModel& m, std::span<const double> u, double rel_mass = 1e-4)
{
  const double s = m.joint_sf(u);
  std::vector<double> up(2);
  for (std::size_t j = 0; j < 2; ++j) {
    const double t = -std::log1p(-0.5 * rel_mass * s);
    up[j] = gev_from_t(t, m.margins[j]);
    if (m.margins[j].xi < 0.0)
      up[j] = std::min(up[j], m.margins[j].mu - m.margins[j].sigma / m.margins[j].xi);
    up[j] = std::max(up[j], u[j] + 1e-9 * (1.0 + std::abs(u[j])));
  }
  return up;
}

inline TailDensityModel
bivariate_tail_density(const BivariateEvdModel& m, const TailRegion& region, std::string id = "",
                       TailOptions opt = {})
{
  if (region.d() != 2)
    throw ConfigError("bivariate tail needs a two-dimensional threshold");
  const double s = m.joint_sf(region.u);
  if (!(s > 0.0))
    throw DataError("fitted model has no mass above the threshold");
  auto up = opt.upper.empty() ? bivariate_upper_bound(m, region.u) : opt.upper;
  if (id.empty())
    id = to_string(m.dep.family);
  auto f = [m](std::span<const double> x) { return m.pdf(x); };
  return TailDensityModel(region, std::move(up), s, std::move(id), f, {}, opt.points);
}

} // namespace tailkde
