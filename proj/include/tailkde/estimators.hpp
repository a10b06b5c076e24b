#pragma once

#include "bandwidth.hpp"
#include "core.hpp"
#include "histogram.hpp"
#include "kde.hpp"
#include "parametric.hpp"
#include "transform.hpp"

namespace tailkde {

enum class EstimatorKind
{
  kernel,
  histogram,
  gpd_plus,
  univariate,
  bivariate
};

//! A parsed estimator token: kns/kpi/kuc/ksc (transformation kernel), the
//! same with a trailing `*` (standard kernel), hist, gpd+, gum, fre, gpd,
//! gev, bil, anl, hr.
struct EstimatorSpec
{
  std::string token;
  EstimatorKind kind = EstimatorKind::kernel;
  Selector selector = Selector::PI;
  bool transformed = true;
  Family family = Family::gumbel;
  BivFamily bivariate = BivFamily::husler_reiss;

  //! Dimensions the estimator supports.
  bool supports(std::size_t d) const
  {
    switch (kind) {
      case EstimatorKind::kernel:
      case EstimatorKind::histogram:
        return d >= 1 && d <= 3;
      case EstimatorKind::gpd_plus:
      case EstimatorKind::univariate:
        return d == 1;
      case EstimatorKind::bivariate:
        return d == 2;
    }
    return false;
  }

  bool nonparametric() const
  {
    return kind == EstimatorKind::kernel || kind == EstimatorKind::histogram;
  }
};

inline const std::vector<std::string>&
estimator_tokens()
{
  static const std::vector<std::string> t{"kns", "kpi", "kuc", "ksc", "kns*", "kpi*", "kuc*", "ksc*", "hist",
                                          "gpd+", "gum", "fre", "gpd", "gev", "bil", "anl", "hr"};
  return t;
}

inline EstimatorSpec
parse_estimator(const std::string& token)
{
  EstimatorSpec s;
  s.token = token;
  std::string base = token;
  if (!base.empty() && base.back() == '*') {
    s.transformed = false;
    base.pop_back();
  }
  static const std::pair<const char*, Selector> kernels[] = {
    {"kns", Selector::NS}, {"kpi", Selector::PI}, {"kuc", Selector::UCV}, {"ksc", Selector::SCV}};
  for (const auto& [name, sel] : kernels)
    if (base == name) {
      s.kind = EstimatorKind::kernel;
      s.selector = sel;
      return s;
    }
  if (!s.transformed)
    throw ConfigError(detail::concat("unknown estimator token '", token, "'"));
  if (base == "hist")
    s.kind = EstimatorKind::histogram;
  else if (base == "gpd+")
    s.kind = EstimatorKind::gpd_plus;
  else if (base == "gum" || base == "fre" || base == "gpd" || base == "gev") {
    s.kind = EstimatorKind::univariate;
    s.family = base == "gum"   ? Family::gumbel
               : base == "fre" ? Family::frechet
               : base == "gpd" ? Family::gpd
                               : Family::gev;
  } else if (base == "bil" || base == "anl" || base == "hr") {
    s.kind = EstimatorKind::bivariate;
    s.bivariate = base == "bil" ? BivFamily::bilogistic : base == "anl" ? BivFamily::anl : BivFamily::husler_reiss;
  } else {
    throw ConfigError(detail::concat("unknown estimator token '", token, "'"));
  }
  return s;
}

struct FitOptions
{
  //! Grid points per axis for the tail grid (0 = estimator default).
  std::size_t points = 0;
  double outside_mass = 1e-5;
  SelectorOptions selector;
  BivariateFitOptions bivariate;
};

//! What was fitted: the bandwidth for kernels, binwidths for the histogram,
//! named parameters for the parametric families.
struct FitReport
{
  std::string estimator;
  std::size_t n = 0;
  std::size_t n_tail = 0;
  std::vector<double> threshold;
  std::vector<double> offset;
  std::optional<BandwidthMatrix> bandwidth;
  std::optional<std::string> selector;
  std::optional<double> selector_objective;
  std::size_t iterations = 0;
  std::optional<std::vector<double>> binwidths;
  std::vector<std::pair<std::string, double>> parameters;
  std::optional<double> loglik;
  double normaliser = 0.0;
  bool converged = true;
  std::vector<std::string> warnings;
};

//! A fitted estimator together with its tail density at the fit threshold.
//! `at` rebuilds the tail at another threshold from the same fit.
struct TailFit
{
  TailDensityModel tail;
  FitReport report;
  std::function<TailDensityModel(const TailRegion&, TailOptions)> rebuild;

  TailDensityModel at(std::vector<double> u, TailOptions opt = {}) const
  {
    TailRegion r{std::move(u), tail.region().u0, std::nullopt};
    for (std::size_t j = 0; j < r.d(); ++j)
      r.u0[j] = std::min(r.u0[j], r.u[j] - 1.0);
    return rebuild(r, opt);
  }
};

//! Per-margin quantile thresholds at level p.
inline std::vector<double>
quantile_threshold(const DataMatrix& x, double p)
{
  return empirical_quantile(x, p);
}

//! Tail region at u with the data's default transform offset. Where u does
//! not clear the default offset (a threshold taken from other data), the
//! offset is lowered to u minus 5% of the column range and `lowered` is set.
inline TailRegion
region_for(const DataMatrix& x, std::vector<double> u, bool* lowered = nullptr)
{
  if (u.size() != x.d())
    throw ConfigError(detail::concat("threshold has ", u.size(), " coordinates, data has ", x.d()));
  TailRegion r{std::move(u), default_offset(x), std::nullopt};
  const auto lo = column_min(x), hi = column_max(x);
  for (std::size_t j = 0; j < r.d(); ++j)
    if (!(r.u0[j] < r.u[j])) {
      r.u0[j] = r.u[j] - 0.05 * (hi[j] - lo[j]);
      if (lowered)
        *lowered = true;
    }
  r.validate();
  return r;
}

namespace detail {

inline std::size_t
count_tail(const DataMatrix& x, const std::vector<double>& u)
{
  std::size_t m = 0;
  for (std::size_t i = 0; i < x.n(); ++i) {
    bool in = true;
    for (std::size_t j = 0; j < x.d(); ++j)
      in = in && x(i, j) > u[j];
    m += in;
  }
  return m;
}

inline TailOptions
tail_options(const FitOptions& o)
{
  TailOptions t;
  t.points = o.points;
  t.outside_mass = o.outside_mass;
  return t;
}

inline std::vector<std::pair<std::string, double>>
univariate_parameters(const UnivariateEvtFit& f)
{
  std::vector<std::pair<std::string, double>> p{{"mu", f.mu}, {"sigma", f.sigma}};
  if (f.family != Family::gumbel)
    p.emplace_back("xi", f.xi);
  return p;
}

inline std::vector<std::pair<std::string, double>>
bivariate_parameters(const BivariateEvdModel& m)
{
  std::vector<std::pair<std::string, double>> p;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto s = std::to_string(j + 1);
    p.emplace_back("mu" + s, m.margins[j].mu);
    p.emplace_back("sigma" + s, m.margins[j].sigma);
    p.emplace_back("xi" + s, m.margins[j].xi);
  }
  static const char* bil[] = {"alpha", "beta"};
  static const char* anl[] = {"r", "theta1", "theta2"};
  for (std::size_t k = 0; k < m.dep.par.size(); ++k) {
    const char* name = m.dep.family == BivFamily::bilogistic ? bil[k]
                       : m.dep.family == BivFamily::anl      ? anl[k]
                                                             : "lambda";
    p.emplace_back(name, m.dep.par[k]);
  }
  return p;
}

} // namespace detail

//! Fits the estimator named by `spec` to `data` and returns its tail density
//! above u.
inline TailFit
fit_tail(const DataMatrix& data, std::vector<double> u, const EstimatorSpec& spec, FitOptions opt = {})
{
  if (!spec.supports(data.d()))
    throw ConfigError(detail::concat("estimator '", spec.token, "' does not support d = ", data.d()));
  const bool transformed = spec.kind == EstimatorKind::kernel && spec.transformed;
  bool lowered = false;
  auto region = region_for(data, std::move(u), &lowered);
  FitReport rep;
  rep.estimator = spec.token;
  rep.n = data.n();
  rep.threshold = region.u;
  rep.n_tail = detail::count_tail(data, region.u);
  if (rep.n_tail == 0)
    throw DataError(detail::concat("no observations above the threshold for estimator '", spec.token, "'"));
  const auto topt = detail::tail_options(opt);
  TailFit out;

  switch (spec.kind) {
    case EstimatorKind::kernel: {
      std::shared_ptr<const KdeModel> kde;
      SelectorResult sel;
      if (transformed) {
        auto t = default_transform(data);
        if (lowered) {
          // u lies at or below the data, so the lowered offset stays below every observation.
          const auto lo = column_min(data), hi = column_max(data);
          std::vector<double> scale(data.d());
          for (std::size_t j = 0; j < data.d(); ++j)
            scale[j] = hi[j] - lo[j];
          t = LogTransform(region.u0, scale);
        }
        const auto y = t.apply(data);
        sel = select_bandwidth(spec.selector, y, opt.selector);
        kde = std::make_shared<const KdeModel>(KdeModel::transformation(y, sel.h, t));
        region.u0 = t.offset();
        rep.offset = t.offset();
      } else {
        sel = select_bandwidth(spec.selector, data, opt.selector);
        kde = std::make_shared<const KdeModel>(KdeModel::standard(data, sel.h));
      }
      rep.bandwidth = sel.h;
      rep.selector = to_string(sel.selector);
      rep.selector_objective = sel.objective_value;
      rep.iterations = sel.iterations;
      rep.converged = sel.converged;
      rep.warnings = sel.warnings;
      if (lowered)
        rep.warnings.push_back("transform offset lowered below the threshold");
      out.rebuild = [kde, id = spec.token](const TailRegion& r, TailOptions o) {
        return tail_density(*kde, r, id, o);
      };
      break;
    }
    case EstimatorKind::histogram: {
      const auto ex = data.exceedances(region.u);
      if (ex.n() < 2)
        throw DataError("histogram binwidth needs at least two observations above the threshold");
      auto b = ns_binwidth(ex);
      auto h = std::make_shared<const HistogramModel>(hist_fit(data, b, region.u));
      rep.binwidths = b;
      out.rebuild = [h, id = spec.token](const TailRegion& r, TailOptions o) {
        return hist_tail_density(*h, r, id, o);
      };
      break;
    }
    case EstimatorKind::gpd_plus: {
      const auto f = fit_gpd_exceedances(data, region.u[0]);
      rep.parameters = detail::univariate_parameters(f);
      rep.loglik = f.loglik;
      rep.converged = f.converged;
      out.rebuild = [f, id = spec.token](const TailRegion& r, TailOptions o) {
        return parametric_tail_density(f, r, id, o);
      };
      break;
    }
    case EstimatorKind::univariate: {
      const auto f = fit_univariate(data, spec.family);
      rep.parameters = detail::univariate_parameters(f);
      rep.loglik = f.loglik;
      rep.converged = f.converged;
      out.rebuild = [f, id = spec.token](const TailRegion& r, TailOptions o) {
        return parametric_tail_density(f, r, id, o);
      };
      break;
    }
    case EstimatorKind::bivariate: {
      const auto f = fit_bivariate(data, spec.bivariate, opt.bivariate);
      rep.parameters = detail::bivariate_parameters(f.model);
      rep.loglik = f.loglik;
      rep.converged = f.converged;
      out.rebuild = [m = f.model, id = spec.token](const TailRegion& r, TailOptions o) {
        return bivariate_tail_density(m, r, id, o);
      };
      break;
    }
  }
  if (rep.offset.empty())
    rep.offset = region.u0;
  out.tail = out.rebuild(region, topt);
  rep.normaliser = out.tail.normaliser();
  if (!rep.converged && rep.warnings.empty())
    rep.warnings.push_back("estimator did not report convergence");
  out.report = std::move(rep);
  return out;
}

inline TailFit
fit_tail(const DataMatrix& data, std::vector<double> u, const std::string& token, FitOptions opt = {})
{
  return fit_tail(data, std::move(u), parse_estimator(token), opt);
}

} // namespace tailkde
