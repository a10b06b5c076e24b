#pragma once

#include "core.hpp"
#include "parametric.hpp"

#include <variant>

namespace tailkde {

//! A simulation target: a univariate extreme-value family or a bivariate
//! max-stable model with GEV margins.
struct TargetSpec
{
  std::string id;
  std::variant<UnivariateEvtFit, BivariateEvdModel> model;

  std::size_t d() const { return std::holds_alternative<UnivariateEvtFit>(model) ? 1 : 2; }

  void validate() const
  {
    if (const auto* u = std::get_if<UnivariateEvtFit>(&model)) {
      if (!(u->sigma > 0.0) || !std::isfinite(u->mu) || !std::isfinite(u->xi))
        throw ConfigError(detail::concat("invalid parameters for target ", id));
      if (u->family == Family::frechet && !(u->xi > 0.0))
        throw ConfigError("Frechet target needs xi > 0");
    } else {
      const auto& b = std::get<BivariateEvdModel>(model);
      b.dep.validate();
      for (const auto& m : b.margins)
        if (!(m.sigma > 0.0))
          throw ConfigError(detail::concat("invalid margin for target ", id));
    }
  }
};

inline TargetSpec
univariate_target(std::string id, Family f, double mu, double sigma, double xi = 0.0)
{
  UnivariateEvtFit m;
  m.family = f;
  m.mu = mu;
  m.sigma = sigma;
  m.xi = f == Family::gumbel ? 0.0 : xi;
  TargetSpec t{std::move(id), m};
  t.validate();
  return t;
}

//! The three univariate study targets: Frechet(1, 0.5, 0.25), Gumbel(1.5, 3)
//! and Pareto GPD(0, 1, 0.25).
inline std::vector<TargetSpec>
univariate_study_targets()
{
  return {univariate_target("fre", Family::frechet, 1.0, 0.5, 0.25),
          univariate_target("gum", Family::gumbel, 1.5, 3.0),
          univariate_target("gpd", Family::gpd, 0.0, 1.0, 0.25)};
}

inline TargetSpec
bivariate_target(BivFamily f, Convention c = Convention::evd, GevParams margin = {0.0, 1.0, 0.0})
{
  BivariateEvdModel m{reference_dependence(f, c), {margin, margin}};
  TargetSpec t{to_string(f), m};
  t.validate();
  return t;
}

inline DataMatrix
sample_univariate(const UnivariateEvtFit& m, std::size_t n, RngStream& rng)
{
  if (n < 1)
    throw ConfigError("sample size must be positive");
  std::vector<double> v(n);
  for (auto& x : v) {
    const double u = rng.uniform();
    x = m.family == Family::gpd ? gpd_quantile(u, m.mu, m.sigma, m.xi) : gev_from_t(-std::log(u), m.gev());
  }
  return DataMatrix::from_column(std::move(v));
}

namespace detail {

// Solves P(U2 <= u2 | U1 = u1) = p for y2 = -log u2, given y1 = -log u1.
// The conditional CDF is exp(y1 - V) V1, decreasing in y2; bisection runs
// over log y2 until the bracket is below 1e-10 on the copula scale.
inline double
conditional_y2(const Dependence& dep, double y1, double p)
{
  const double lp = std::log(p);
  auto h = [&](double l) {
    const auto e = exponent(dep, y1, std::exp(l));
    const double v = y1 - e.v + std::log(e.v1) - lp;
    // V1 underflows to 0 (or rounds below it) only far out in y2.
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  double lo = std::log(-lp) - 1.0, hi = lo + 2.0;
  for (int k = 0; !(h(lo) > 0.0); ++k) {
    lo -= 2.0;
    if (k > 400)
      throw NumericalError("conditional inversion failed to bracket the root");
  }
  for (int k = 0; !(h(hi) < 0.0); ++k) {
    hi += 2.0;
    if (k > 400)
      throw NumericalError("conditional inversion failed to bracket the root");
  }
  auto u_of = [](double l) { return std::exp(-std::exp(l)); };
  while (u_of(lo) - u_of(hi) > 1e-10 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

} // namespace detail

//! Conditional inversion: X1 from its margin, then X2 | X1 from the
//! conditional distribution of the copula.
inline DataMatrix
sample_bivariate(const BivariateEvdModel& m, std::size_t n, RngStream& rng)
{
  if (n < 1)
    throw ConfigError("sample size must be positive");
  m.dep.validate();
  std::vector<double> v(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y1 = -std::log(rng.uniform());
    const double p = rng.uniform();
    const double y2 = detail::conditional_y2(m.dep, y1, p);
    v[2 * i] = gev_from_t(y1, m.margins[0]);
    v[2 * i + 1] = gev_from_t(y2, m.margins[1]);
  }
  return DataMatrix(n, 2, std::move(v));
}

inline DataMatrix
sample(const TargetSpec& t, std::size_t n, RngStream& rng)
{
  t.validate();
  if (const auto* u = std::get_if<UnivariateEvtFit>(&t.model))
    return sample_univariate(*u, n, rng);
  return sample_bivariate(std::get<BivariateEvdModel>(t.model), n, rng);
}

//! Analytic density of a target.
inline double
target_pdf(const TargetSpec& t, std::span<const double> x)
{
  if (const auto* u = std::get_if<UnivariateEvtFit>(&t.model))
    return u->pdf(x[0]);
  return std::get<BivariateEvdModel>(t.model).pdf(x);
}

//! Exact tail density of a target above the region's threshold.
inline TailDensityModel
target_tail_density(const TargetSpec& t, const TailRegion& region, TailOptions opt = {})
{
  if (const auto* u = std::get_if<UnivariateEvtFit>(&t.model))
    return parametric_tail_density(*u, region, t.id, opt);
  return bivariate_tail_density(std::get<BivariateEvdModel>(t.model), region, t.id, opt);
}

} // namespace tailkde
