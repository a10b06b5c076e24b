#pragma once

#include "core.hpp"
#include "kde.hpp"

#include <map>

namespace tailkde {

//! Regular histogram with sparse bin counts. Bins are left-closed,
//! right-open: bin k on margin j is [origin_j + k b_j, origin_j + (k+1) b_j).
class HistogramModel
{
public:
  using BinIndex = std::vector<long long>;

  HistogramModel() = default;

  HistogramModel(std::vector<double> origin, std::vector<double> binwidths)
    : origin_(std::move(origin))
    , b_(std::move(binwidths))
  {
    if (origin_.size() != b_.size() || b_.empty() || b_.size() > 3)
      throw ConfigError("histogram origin and binwidths must have matching dimension 1..3");
    for (std::size_t j = 0; j < b_.size(); ++j) {
      if (!std::isfinite(origin_[j]) || !std::isfinite(b_[j]))
        throw ConfigError("histogram origin and binwidths must be finite");
      if (!(b_[j] > 0.0))
        throw ConfigError("histogram binwidths must be positive");
    }
  }

  std::size_t d() const { return b_.size(); }
  std::size_t n() const { return n_; }
  const std::vector<double>& origin() const { return origin_; }
  const std::vector<double>& binwidths() const { return b_; }
  const std::map<BinIndex, std::size_t>& counts() const { return counts_; }

  double cell_volume() const
  {
    double v = 1.0;
    for (double b : b_)
      v *= b;
    return v;
  }

  long long bin_coordinate(std::size_t j, double x) const
  {
    auto k = static_cast<long long>(std::floor((x - origin_[j]) / b_[j]));
    if (edge(j, k + 1) <= x)
      ++k;
    else if (edge(j, k) > x)
      --k;
    return k;
  }

  BinIndex bin_of(std::span<const double> x) const
  {
    BinIndex k(d());
    for (std::size_t j = 0; j < d(); ++j)
      k[j] = bin_coordinate(j, x[j]);
    return k;
  }

  double edge(std::size_t j, long long k) const
  {
    return origin_[j] + static_cast<double>(k) * b_[j];
  }

  void add(std::span<const double> x)
  {
    ++counts_[bin_of(x)];
    ++n_;
  }

  std::size_t count(const BinIndex& k) const
  {
    auto it = counts_.find(k);
    return it == counts_.end() ? 0 : it->second;
  }

  //! count / (n prod b).
  double density(std::span<const double> x) const
  {
    if (n_ == 0)
      return 0.0;
    return static_cast<double>(count(bin_of(x))) / (static_cast<double>(n_) * cell_volume());
  }

  double operator()(std::span<const double> x) const { return density(x); }

private:
  std::vector<double> origin_;
  std::vector<double> b_;
  std::map<BinIndex, std::size_t> counts_;
  std::size_t n_ = 0;
};

//! Normal-scale binwidths 2 3^{1/(d+2)} pi^{d/(d+4)} s_j n^{-1/(d+2)}.
inline std::vector<double>
ns_binwidth(const DataMatrix& x)
{
  if (x.n() < 2)
    throw DataError("binwidth rule needs at least two observations");
  const double d = static_cast<double>(x.d());
  const auto s = column_sds(x);
  const double c = 2.0 * std::pow(3.0, 1.0 / (d + 2.0)) * std::pow(kPi, d / (d + 4.0)) *
                   std::pow(static_cast<double>(x.n()), -1.0 / (d + 2.0));
  std::vector<double> b(x.d());
  for (std::size_t j = 0; j < x.d(); ++j) {
    if (!(s[j] > 0.0))
      throw DataError(detail::concat("column ", j + 1, " is constant"));
    b[j] = c * s[j];
  }
  return b;
}

inline HistogramModel
hist_fit(const DataMatrix& x, std::vector<double> b, std::vector<double> origin)
{
  HistogramModel h(std::move(origin), std::move(b));
  if (h.d() != x.d())
    throw ConfigError("histogram dimension does not match the data");
  for (std::size_t i = 0; i < x.n(); ++i)
    h.add(x.row(i));
  return h;
}

namespace detail {

// Overlaps of [a, b] with the bins of margin j: (bin coordinate, length).
inline std::vector<std::pair<long long, double>>
bin_overlaps(const HistogramModel& h, std::size_t j, double a, double b)
{
  std::vector<std::pair<long long, double>> out;
  if (!(b > a))
    return out;
  for (long long k = h.bin_coordinate(j, a); h.edge(j, k) < b; ++k) {
    const double len = std::min(b, h.edge(j, k + 1)) - std::max(a, h.edge(j, k));
    if (len > 0.0)
      out.emplace_back(k, len);
  }
  return out;
}

} // namespace detail

//! Averages of a histogram-type density over the dual cells of a trapezoid
//! grid, so that sum(values * weights) is the exact integral over the box.
//! `keep` selects the bins that carry mass; `scale` converts counts to density.
template<typename Keep>
void
histogram_cell_averages(const HistogramModel& h, DensityGrid& g, Keep&& keep, double scale)
{
  const auto d = g.d();
  std::vector<std::vector<std::vector<std::pair<long long, double>>>> ov(d);
  std::vector<std::vector<double>> len(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& ax = g.axes[j];
    for (std::size_t k = 0; k < ax.size(); ++k) {
      const double a = k == 0 ? ax[0] : 0.5 * (ax[k - 1] + ax[k]);
      const double b = k + 1 == ax.size() ? ax[k] : 0.5 * (ax[k] + ax[k + 1]);
      ov[j].push_back(detail::bin_overlaps(h, j, a, b));
      len[j].push_back(b - a);
    }
  }
  g.values.assign(g.size(), 0.0);
  std::vector<std::size_t> idx(d);
  HistogramModel::BinIndex bin(d);
  for (std::size_t flat = 0; flat < g.values.size(); ++flat) {
    std::size_t f = flat;
    double vol = 1.0;
    for (std::size_t j = d; j-- > 0;) {
      idx[j] = f % g.axes[j].size();
      f /= g.axes[j].size();
      vol *= len[j][idx[j]];
    }
    double mass = 0.0;
    // Iterate the product of per-axis overlap lists.
    std::vector<std::size_t> pos(d, 0);
    bool empty = false;
    for (std::size_t j = 0; j < d; ++j)
      empty = empty || ov[j][idx[j]].empty();
    while (!empty) {
      double w = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const auto& e = ov[j][idx[j]][pos[j]];
        bin[j] = e.first;
        w *= e.second;
      }
      if (keep(bin))
        mass += w * static_cast<double>(h.count(bin));
      std::size_t j = 0;
      for (; j < d; ++j) {
        if (++pos[j] < ov[j][idx[j]].size())
          break;
        pos[j] = 0;
      }
      if (j == d)
        break;
    }
    g.values[flat] = vol > 0.0 ? scale * mass / vol : scale * static_cast<double>(h.count(h.bin_of(g.point(flat))));
  }
}

//! Full-sample histogram with the normal-scale binwidths anchored at the
//! per-margin data minimum.
inline HistogramModel
hist_fit_default(const DataMatrix& x)
{
  return hist_fit(x, ns_binwidth(x), column_min(x));
}

//! Tail histogram: bins whose lower corner is at or above u, renormalised by
//! their total count. The normaliser is that count over n.
inline TailDensityModel
hist_tail_density(const HistogramModel& h, const TailRegion& region, std::string id = "hist",
                  TailOptions opt = {})
{
  if (region.d() != h.d())
    throw ConfigError("threshold dimension does not match the histogram");
  auto in_tail = [&h, u = region.u](const HistogramModel::BinIndex& k) {
    for (std::size_t j = 0; j < k.size(); ++j)
      if (h.edge(j, k[j]) < u[j])
        return false;
    return true;
  };
  std::size_t m = 0;
  std::vector<double> top(h.d(), -std::numeric_limits<double>::infinity());
  std::vector<double> mean(h.d(), 0.0), sq(h.d(), 0.0);
  for (const auto& [k, c] : h.counts()) {
    if (!in_tail(k))
      continue;
    m += c;
    for (std::size_t j = 0; j < h.d(); ++j) {
      top[j] = std::max(top[j], h.edge(j, k[j] + 1));
      const double mid = h.edge(j, k[j]) + 0.5 * h.binwidths()[j];
      mean[j] += static_cast<double>(c) * mid;
      sq[j] += static_cast<double>(c) * mid * mid;
    }
  }
  if (m == 0)
    throw DataError("no histogram mass above the threshold");
  auto up = opt.upper;
  if (up.empty()) {
    up.resize(h.d());
    for (std::size_t j = 0; j < h.d(); ++j) {
      const double mu = mean[j] / static_cast<double>(m);
      const double var = std::max(0.0, sq[j] / static_cast<double>(m) - mu * mu);
      up[j] = top[j] + 3.0 * std::max(std::sqrt(var), h.binwidths()[j]);
    }
  }
  auto sp = std::make_shared<const HistogramModel>(h);
  const double nrm = static_cast<double>(m) / static_cast<double>(h.n());
  const double to_density = 1.0 / (static_cast<double>(h.n()) * h.cell_volume());
  auto f = [sp, in_tail, to_density](std::span<const double> x) {
    const auto k = sp->bin_of(x);
    return in_tail(k) ? static_cast<double>(sp->count(k)) * to_density : 0.0;
  };
  auto gf = [sp, in_tail, to_density](DensityGrid& g) {
    histogram_cell_averages(*sp, g, in_tail, to_density);
  };
  return TailDensityModel(region, up, nrm, std::move(id), f, gf, opt.points);
}

//! Exact ISE of a univariate histogram against a density with CDF `cdf` and
//! squared-density integral `int_f2`.
template<typename Cdf>
double
histogram_ise_exact(const HistogramModel& h, Cdf&& cdf, double int_f2)
{
  if (h.d() != 1)
    throw ConfigError("histogram_ise_exact requires d = 1");
  const double n = static_cast<double>(h.n());
  const double b = h.binwidths()[0];
  double a = 0.0, c = 0.0;
  for (const auto& [k, cnt] : h.counts()) {
    const double dens = static_cast<double>(cnt) / (n * b);
    a += dens * dens * b;
    c += dens * (cdf(h.edge(0, k[0] + 1)) - cdf(h.edge(0, k[0])));
  }
  return a - 2.0 * c + int_f2;
}

} // namespace tailkde
