#pragma once

#include "core.hpp"

namespace tailkde {

struct NelderMeadOptions
{
  double ftol = 1e-8;
  double xtol = 1e-10;
  //! The objective test only counts once the simplex is this small, so
  //! distinct points with equal values do not stop the search early.
  double xtol_with_ftol = 1e-4;
  std::size_t max_iter = 1000;
  std::size_t restarts = 1;
};

struct NelderMeadResult
{
  std::vector<double> x;
  double fval = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double
finite_or_inf(double v)
{
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace detail

//! Nelder-Mead simplex minimisation. Non-finite objective values are treated
//! as +inf, which lets callers encode constraints by returning NaN or inf.
//! After convergence the search is restarted from the best vertex with a
//! fresh simplex `restarts` times.
template<typename F>
NelderMeadResult
nelder_mead(F&& f, std::vector<double> x0, std::vector<double> step, NelderMeadOptions opt = {})
{
  const std::size_t p = x0.size();
  if (p == 0)
    throw ConfigError("nelder_mead: empty parameter vector");
  if (step.size() != p)
    step.assign(p, step.empty() ? 0.1 : step.front());

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return detail::finite_or_inf(f(x));
  };

  std::vector<double> best = x0;
  double fbest = eval(best);
  if (!std::isfinite(fbest))
    throw NumericalError("objective is not finite at the starting point");

  for (std::size_t round = 0; round <= opt.restarts; ++round) {
    std::vector<std::vector<double>> s(p + 1, best);
    std::vector<double> fs(p + 1);
    fs[0] = fbest;
    for (std::size_t k = 0; k < p; ++k) {
      s[k + 1][k] += step[k];
      fs[k + 1] = eval(s[k + 1]);
      if (!std::isfinite(fs[k + 1])) {
        s[k + 1][k] = best[k] - step[k];
        fs[k + 1] = eval(s[k + 1]);
      }
    }
    std::vector<std::size_t> order(p + 1);
    bool conv = false;
    const double f_round_start = fbest;
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fs[a] < fs[b]; });
      const auto lo = order.front();
      const auto hi = order.back();
      const auto nh = order[p - 1];

      double diam = 0.0;
      for (std::size_t k = 1; k <= p; ++k)
        for (std::size_t c = 0; c < p; ++c)
          diam = std::max(diam, std::abs(s[order[k]][c] - s[lo][c]));
      const double spread = std::abs(fs[hi] - fs[lo]);
      if ((std::isfinite(fs[hi]) &&
           2.0 * spread <= opt.ftol * (std::abs(fs[hi]) + std::abs(fs[lo])) + 1e-300 &&
           diam < opt.xtol_with_ftol) ||
          diam < opt.xtol) {
        conv = true;
        break;
      }
      ++res.iterations;

      std::vector<double> cen(p, 0.0);
      for (std::size_t k = 0; k <= p; ++k)
        if (k != hi)
          for (std::size_t c = 0; c < p; ++c)
            cen[c] += s[k][c] / static_cast<double>(p);

      auto along = [&](double t) {
        std::vector<double> x(p);
        for (std::size_t c = 0; c < p; ++c)
          x[c] = cen[c] + t * (s[hi][c] - cen[c]);
        return x;
      };

      auto xr = along(-1.0);
      const double fr = eval(xr);
      if (fr < fs[lo]) {
        auto xe = along(-2.0);
        const double fe = eval(xe);
        if (fe < fr) {
          s[hi] = std::move(xe);
          fs[hi] = fe;
        } else {
          s[hi] = std::move(xr);
          fs[hi] = fr;
        }
      } else if (fr < fs[nh]) {
        s[hi] = std::move(xr);
        fs[hi] = fr;
      } else {
        const bool outside = fr < fs[hi];
        auto xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fs[hi])) {
          s[hi] = std::move(xc);
          fs[hi] = fc;
        } else {
          for (std::size_t k = 0; k <= p; ++k) {
            if (k == lo)
              continue;
            for (std::size_t c = 0; c < p; ++c)
              s[k][c] = s[lo][c] + 0.5 * (s[k][c] - s[lo][c]);
            fs[k] = eval(s[k]);
          }
        }
      }
    }
    const auto lo = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    if (fs[lo] <= fbest) {
      fbest = fs[lo];
      best = s[lo];
    }
    res.converged = conv;
    if (!conv)
      break;
    // A restart that does not improve the objective confirms the optimum.
    if (round > 0 && !(fbest < f_round_start - opt.ftol * std::abs(f_round_start)))
      break;
    for (auto& v : step)
      v *= 0.5;
  }
  res.x = std::move(best);
  res.fval = fbest;
  return res;
}

// ---------------------------------------------------------------------------
// positive-definite matrices

//! Log-Cholesky parameterisation H = L L^T with log-scaled diagonal of L.
struct LogCholesky
{
  std::size_t d = 1;
  bool diagonal_only = false;

  std::size_t size() const { return diagonal_only ? d : d * (d + 1) / 2; }

  std::vector<double> to_params(const Eigen::MatrixXd& h) const
  {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success)
      throw NumericalError("matrix is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    std::vector<double> p;
    for (std::size_t i = 0; i < d; ++i) {
      p.push_back(std::log(l(i, i)));
      if (!diagonal_only)
        for (std::size_t j = 0; j < i; ++j)
          p.push_back(l(i, j));
    }
    return p;
  }

  Eigen::MatrixXd to_matrix(const std::vector<double>& p) const
  {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) {
      l(i, i) = std::exp(p[k++]);
      if (!diagonal_only)
        for (std::size_t j = 0; j < i; ++j)
          l(i, j) = p[k++];
    }
    Eigen::MatrixXd h = l * l.transpose();
    return 0.5 * (h + h.transpose());
  }

  std::vector<double> steps(const std::vector<double>& p) const
  {
    std::vector<double> s;
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) {
      s.push_back(0.25);
      const double lii = std::exp(p[k++]);
      if (!diagonal_only)
        for (std::size_t j = 0; j < i; ++j, ++k)
          s.push_back(0.25 * lii);
    }
    return s;
  }
};

struct PdOptimizeResult
{
  BandwidthMatrix h;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

//! Minimises objective(H) over symmetric positive-definite H by simplex
//! search in log-Cholesky coordinates, so every iterate is positive definite.
template<typename F>
PdOptimizeResult
optimize_pd(F&& objective, const BandwidthMatrix& start, bool diagonal_only = false,
            double ftol = 1e-8)
{
  const auto d = start.d();
  LogCholesky lc{d, diagonal_only};
  Eigen::MatrixXd h0 = start.matrix();
  if (diagonal_only)
    h0 = Eigen::MatrixXd(h0.diagonal().asDiagonal());
  const auto p0 = lc.to_params(h0);
  NelderMeadOptions opt;
  opt.ftol = ftol;
  opt.max_iter = 500 * (d * (d + 1) / 2);
  auto f = [&](const std::vector<double>& p) {
    const Eigen::MatrixXd h = lc.to_matrix(p);
    for (Eigen::Index k = 0; k < h.rows(); ++k)
      if (!(h(k, k) > 0.0) || !std::isfinite(h(k, k)))
        return std::numeric_limits<double>::infinity();
    try {
      return static_cast<double>(objective(BandwidthMatrix(h)));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const double f0 = f(p0);
  if (!std::isfinite(f0))
    throw NumericalError("bandwidth objective is not finite at the starting matrix");
  auto r = nelder_mead(f, p0, lc.steps(p0), opt);
  PdOptimizeResult out{BandwidthMatrix(lc.to_matrix(r.x)), r.fval, r.iterations, r.evaluations,
                       r.converged};
  if (!(out.value <= f0)) {
    out.h = BandwidthMatrix(h0);
    out.value = f0;
  }
  return out;
}

} // namespace tailkde
