#pragma once

#include "core.hpp"
#include "kernels.hpp"
#include "optimize.hpp"

namespace tailkde {

enum class Selector
{
  NS,
  PI,
  UCV,
  SCV
};

inline std::string
to_string(Selector s)
{
  switch (s) {
    case Selector::NS:
      return "NS";
    case Selector::PI:
      return "PI";
    case Selector::UCV:
      return "UCV";
    case Selector::SCV:
      return "SCV";
  }
  return "?";
}

struct SelectorResult
{
  BandwidthMatrix h;
  Selector selector = Selector::NS;
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  std::optional<BandwidthMatrix> pilot;
  std::size_t tied_points = 0;
  std::vector<std::string> warnings;
};

struct SelectorOptions
{
  bool diagonal_only = false;
  //! Below this sample size PI, UCV and SCV fall back to NS.
  std::size_t min_n = 20;
};

namespace detail {

//! Copy of x with rows sorted by the first coordinate.
inline DataMatrix
sorted_by_first(const DataMatrix& x)
{
  std::vector<std::size_t> idx(x.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x(a, 0) < x(b, 0); });
  std::vector<double> v;
  v.reserve(x.n() * x.d());
  for (auto i : idx) {
    auto r = x.row(i);
    v.insert(v.end(), r.begin(), r.end());
  }
  return DataMatrix(x.n(), x.d(), std::move(v), x.space());
}

//! Sum over pairs i < j of f(Y_i - Y_j) for data sorted by first coordinate,
//! skipping pairs whose first-coordinate gap exceeds half_width. f adds
//! `width` values into its accumulator. Partial sums are kept per i and
//! reduced in index order, so the result does not depend on the thread count.
template<typename F>
std::vector<double>
pair_sum(const DataMatrix& sorted, double half_width, std::size_t width, F&& f)
{
  const auto n = sorted.n();
  const auto d = sorted.d();
  const double* v = sorted.values().data();
  std::vector<double> partial(n * width, 0.0);
  parallel_for(n, thread_count(), [&](std::size_t i) {
    double delta[3];
    double* acc = partial.data() + i * width;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (v[j * d] - v[i * d] > half_width)
        break;
      for (std::size_t c = 0; c < d; ++c)
        delta[c] = v[i * d + c] - v[j * d + c];
      f(delta, acc);
    }
  });
  std::vector<double> total(width, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < width; ++c)
      total[c] += partial[i * width + c];
  return total;
}

inline double
half_width_for(const Eigen::MatrixXd& s)
{
  return std::sqrt(kQformCutoffPairs * s(0, 0));
}

} // namespace detail

//! Number of observations that exactly duplicate an earlier observation.
inline std::size_t
count_tied_points(const DataMatrix& x)
{
  std::vector<std::vector<double>> rows;
  rows.reserve(x.n());
  for (std::size_t i = 0; i < x.n(); ++i)
    rows.emplace_back(x.row(i).begin(), x.row(i).end());
  std::sort(rows.begin(), rows.end());
  std::size_t ties = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    ties += rows[i] == rows[i - 1];
  return ties;
}

// ---------------------------------------------------------------------------
// normal scale

inline double
ns_constant(std::size_t d, std::size_t n)
{
  const double dd = static_cast<double>(d);
  return std::pow(4.0 / ((dd + 2.0) * static_cast<double>(n)), 2.0 / (dd + 4.0));
}

//! ψ4 of the N(mu, S) density: D^4 phi_{2S}(0).
inline std::vector<double>
normal_psi4(const Eigen::MatrixXd& s)
{
  const std::vector<double> zero(static_cast<std::size_t>(s.rows()), 0.0);
  return deriv4_vector(BandwidthMatrix(2.0 * s), zero);
}

//! Asymptotic MISE: 1/4 m2^2 (vecH (x) vecH)^T ψ4 + n^{-1} R(K) |H|^{-1/2}.
inline double
amise(const Eigen::MatrixXd& h, const std::vector<double>& psi4, std::size_t n)
{
  const auto d = static_cast<std::size_t>(h.rows());
  const double r = GaussianKernel{d}.roughness();
  return 0.25 * quartic_contract(h, psi4) + r / (static_cast<double>(n) * std::sqrt(h.determinant()));
}

inline SelectorResult
ns_bandwidth(const DataMatrix& y)
{
  const auto d = y.d();
  if (y.n() < d + 1)
    throw DataError("normal scale bandwidth needs at least d+1 observations");
  const Eigen::MatrixXd s = sample_covariance(y);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || !(s.determinant() > 0.0))
    throw DataError("sample covariance matrix is singular");
  SelectorResult r;
  r.selector = Selector::NS;
  r.h = BandwidthMatrix(ns_constant(d, y.n()) * s);
  r.objective_value = amise(r.h.matrix(), normal_psi4(s), y.n());
  return r;
}

// ---------------------------------------------------------------------------
// plug-in

//! Stage-one normal-scale pilot [2/((d+4)n)]^{2/(d+6)} 2S.
inline BandwidthMatrix
pilot_bandwidth(const DataMatrix& y)
{
  const double dd = static_cast<double>(y.d());
  const double c = std::pow(2.0 / ((dd + 4.0) * static_cast<double>(y.n())), 2.0 / (dd + 6.0));
  return BandwidthMatrix(c * 2.0 * sample_covariance(y));
}

//! n^{-2} sum_{i,j} D^4 L_G(Y_i - Y_j) as a d^4 vector.
inline std::vector<double>
psi4_estimate(const DataMatrix& y, const BandwidthMatrix& g)
{
  if (g.d() != y.d())
    throw ConfigError("pilot dimension does not match the data");
  Deriv4Evaluator ev(g.matrix());
  const auto m = ev.layout().unique_size();
  const auto sorted = detail::sorted_by_first(y);
  auto off = detail::pair_sum(sorted, detail::half_width_for(g.matrix()), m,
                              [&](const double* delta, double* acc) { ev.accumulate(delta, 1.0, acc); });
  const std::vector<double> zero(y.d(), 0.0);
  const auto diag = ev.unique_at(zero);
  const double n = static_cast<double>(y.n());
  std::vector<double> u(m);
  for (std::size_t c = 0; c < m; ++c)
    u[c] = (n * diag[c] + 2.0 * off[c]) / (n * n);
  return ev.layout().expand(u);
}

inline double
pi_objective(const Eigen::MatrixXd& h, const std::vector<double>& psi4, std::size_t n)
{
  return amise(h, psi4, n);
}

inline SelectorResult
pi_select(const DataMatrix& y, SelectorOptions opt = {})
{
  auto ns = ns_bandwidth(y);
  if (y.n() < opt.min_n) {
    ns.warnings.push_back("sample too small for plug-in selection; normal scale bandwidth used");
    return ns;
  }
  SelectorResult r;
  r.selector = Selector::PI;
  r.pilot = pilot_bandwidth(y);
  const auto psi = psi4_estimate(y, *r.pilot);
  const auto n = y.n();
  auto obj = [&](const BandwidthMatrix& h) { return pi_objective(h.matrix(), psi, n); };
  auto o = optimize_pd(obj, ns.h, opt.diagonal_only);
  r.h = o.h;
  r.objective_value = o.value;
  r.iterations = o.iterations;
  r.converged = o.converged;
  if (!(r.h.determinant() < 1e8 * ns.h.determinant())) {
    r.warnings.push_back("plug-in criterion is unbounded below; normal scale bandwidth used");
    r.h = ns.h;
    r.objective_value = obj(ns.h);
    r.converged = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// cross validation

//! UCV(H) = n^{-2} sum_{i,j} K_{2H}(Y_i - Y_j) - 2 [n(n-1)]^{-1} sum_{i != j} K_H(Y_i - Y_j).
inline double
ucv_objective(const DataMatrix& sorted, const Eigen::MatrixXd& h)
{
  const GaussianDensity k2(2.0 * h), k1(h);
  auto s = detail::pair_sum(sorted, detail::half_width_for(2.0 * h), 2,
                            [&](const double* delta, double* acc) {
                              acc[0] += k2(delta);
                              acc[1] += k1(delta);
                            });
  const double n = static_cast<double>(sorted.n());
  return k2.normaliser() / n + 2.0 * s[0] / (n * n) - 4.0 * s[1] / (n * (n - 1.0));
}

//! Summand of the smoothed criterion at a pair difference:
//! phi_{2H+2G} - 2 phi_{H+2G} + phi_{2G}.
inline double
scv_pair_term(const Eigen::MatrixXd& h, const Eigen::MatrixXd& g, std::span<const double> delta)
{
  return GaussianDensity(2.0 * h + 2.0 * g)(delta) - 2.0 * GaussianDensity(h + 2.0 * g)(delta) +
         GaussianDensity(2.0 * g)(delta);
}

//! Smoothed cross validation with pair sums over i != j:
//! n^{-1} R(K)|H|^{-1/2} + n^{-2} sum phi_{2H+2G} - 2[n(n-1)]^{-1} sum phi_{H+2G}
//! + [n(n-1)]^{-1} sum phi_{2G}. A zero pilot reduces this to UCV plus a
//! constant; the last sum is then omitted.
inline double
scv_objective(const DataMatrix& sorted, const Eigen::MatrixXd& h, const Eigen::MatrixXd& g)
{
  const auto d = static_cast<std::size_t>(h.rows());
  const bool zero_pilot = g.cwiseAbs().maxCoeff() == 0.0;
  const GaussianDensity a(2.0 * h + 2.0 * g), b(h + 2.0 * g);
  std::optional<GaussianDensity> c;
  if (!zero_pilot)
    c.emplace(2.0 * g);
  auto s = detail::pair_sum(sorted, detail::half_width_for(2.0 * h + 2.0 * g), 3,
                            [&](const double* delta, double* acc) {
                              acc[0] += a(delta);
                              acc[1] += b(delta);
                              if (c)
                                acc[2] += (*c)(delta);
                            });
  const double n = static_cast<double>(sorted.n());
  const double var = GaussianKernel{d}.roughness() / (n * std::sqrt(h.determinant()));
  return var + 2.0 * s[0] / (n * n) - 4.0 * s[1] / (n * (n - 1.0)) + 2.0 * s[2] / (n * (n - 1.0));
}

namespace detail {

inline void
note_ties(SelectorResult& r, const DataMatrix& y)
{
  r.tied_points = count_tied_points(y);
  if (static_cast<double>(r.tied_points) > 0.1 * static_cast<double>(y.n()))
    r.warnings.push_back(concat(r.tied_points, " of ", y.n(),
                                " observations are exact duplicates; cross validation assumes no "
                                "replications in the data"));
}

} // namespace detail

inline SelectorResult
ucv_select(const DataMatrix& y, SelectorOptions opt = {})
{
  auto ns = ns_bandwidth(y);
  if (y.n() < opt.min_n) {
    ns.warnings.push_back("sample too small for cross validation; normal scale bandwidth used");
    return ns;
  }
  SelectorResult r;
  r.selector = Selector::UCV;
  detail::note_ties(r, y);
  const auto sorted = detail::sorted_by_first(y);
  auto obj = [&](const BandwidthMatrix& h) { return ucv_objective(sorted, h.matrix()); };
  auto o = optimize_pd(obj, ns.h, opt.diagonal_only);
  r.h = o.h;
  r.objective_value = o.value;
  r.iterations = o.iterations;
  r.converged = o.converged;
  return r;
}

//! SCV selection. `pilot` defaults to the normal-scale pilot; pass a zero
//! matrix for the unsmoothed criterion.
inline SelectorResult
scv_select(const DataMatrix& y, SelectorOptions opt = {},
           std::optional<Eigen::MatrixXd> pilot = std::nullopt)
{
  auto ns = ns_bandwidth(y);
  if (y.n() < opt.min_n) {
    ns.warnings.push_back("sample too small for cross validation; normal scale bandwidth used");
    return ns;
  }
  SelectorResult r;
  r.selector = Selector::SCV;
  detail::note_ties(r, y);
  Eigen::MatrixXd g;
  if (pilot) {
    g = *pilot;
    if (g.cwiseAbs().maxCoeff() > 0.0)
      r.pilot = BandwidthMatrix(g);
  } else {
    r.pilot = pilot_bandwidth(y);
    g = r.pilot->matrix();
  }
  const auto sorted = detail::sorted_by_first(y);
  auto obj = [&](const BandwidthMatrix& h) { return scv_objective(sorted, h.matrix(), g); };
  auto o = optimize_pd(obj, ns.h, opt.diagonal_only);
  r.h = o.h;
  r.objective_value = o.value;
  r.iterations = o.iterations;
  r.converged = o.converged;
  return r;
}

inline SelectorResult
select_bandwidth(Selector s, const DataMatrix& y, SelectorOptions opt = {})
{
  switch (s) {
    case Selector::NS:
      return ns_bandwidth(y);
    case Selector::PI:
      return pi_select(y, opt);
    case Selector::UCV:
      return ucv_select(y, opt);
    case Selector::SCV:
      return scv_select(y, opt);
  }
  throw ConfigError("unknown selector");
}

} // namespace tailkde
