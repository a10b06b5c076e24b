#pragma once

#include "core.hpp"
#include "kernels.hpp"
#include "transform.hpp"

#include <atomic>
#include <memory>

namespace tailkde {

enum class KdeKind
{
  standard,
  transformation
};

namespace detail {

// Kernel terms with quadratic form above this are dropped (each is below
// e^{-50} times the kernel peak).
inline constexpr double kQformCutoff = 100.0;

inline std::atomic<std::size_t>&
kde_fit_counter()
{
  static std::atomic<std::size_t> c{0};
  return c;
}

} // namespace detail

//! Number of KdeModel objects constructed so far (instrumentation).
inline std::size_t
kde_fit_count()
{
  return detail::kde_fit_counter().load();
}

//! Kernel density estimate. The standard kind sums K_H(x - X_i) on the
//! original scale; the transformation kind sums K_H(t(x) - Y_i) on the log
//! scale and maps back with the Jacobian.
class KdeModel
{
public:
  static KdeModel standard(const DataMatrix& x, const BandwidthMatrix& h)
  {
    return KdeModel(KdeKind::standard, x, h, std::nullopt);
  }

  //! `y` holds transformed observations t(X_i); `h` is on the transformed scale.
  static KdeModel transformation(const DataMatrix& y, const BandwidthMatrix& h, LogTransform t)
  {
    return KdeModel(KdeKind::transformation, y, h, std::move(t));
  }

  KdeKind kind() const { return kind_; }
  std::size_t d() const { return data_.d(); }
  std::size_t n() const { return data_.n(); }
  const BandwidthMatrix& bandwidth() const { return h_; }
  const std::optional<LogTransform>& transform() const { return t_; }
  //! Observations on the estimation scale, sorted by first coordinate.
  const DataMatrix& data() const { return data_; }

  //! Density of the estimate on its own (estimation) scale.
  double density_estimation_scale(const double* y) const
  {
    std::size_t lo, hi;
    window(y[0], lo, hi);
    return sum_range(y, lo, hi) / static_cast<double>(n());
  }

  double operator()(std::span<const double> x) const
  {
    if (x.size() != d())
      throw ConfigError("kde: point dimension mismatch");
    if (kind_ == KdeKind::standard)
      return density_estimation_scale(x.data());
    if (!t_->in_domain(x))
      return 0.0;
    double y[3];
    t_->forward(x, std::span<double>(y, d()));
    return t_->jacobian(x) * density_estimation_scale(y);
  }

  //! Fills grid.values with the density on the original scale.
  void evaluate(DensityGrid& g) const
  {
    if (g.d() != d())
      throw ConfigError("kde: grid dimension mismatch");
    const auto total = g.size();
    g.values.assign(total, 0.0);
    const auto& a0 = g.axes[0];
    const std::size_t block = total / a0.size();
    parallel_for(a0.size(), thread_count(), [&](std::size_t i0) {
      std::vector<double> x(d());
      double y[3];
      for (std::size_t r = 0; r < block; ++r) {
        const std::size_t flat = i0 * block + r;
        g.point(flat, x);
        double jac = 1.0;
        if (kind_ == KdeKind::transformation) {
          if (!t_->in_domain(x))
            continue;
          t_->forward(x, std::span<double>(y, d()));
          jac = t_->jacobian(x);
        } else {
          for (std::size_t j = 0; j < d(); ++j)
            y[j] = x[j];
        }
        std::size_t lo, hi;
        window(y[0], lo, hi);
        g.values[flat] = jac * sum_range(y, lo, hi) / static_cast<double>(n());
      }
    });
  }

  //! Estimated P(X_j > x) for margin j, in closed form.
  double marginal_exceedance(std::size_t j, double x) const
  {
    const double s = std::sqrt(h_(j, j));
    double z0 = x;
    if (kind_ == KdeKind::transformation) {
      const double off = x - t_->offset()[j];
      if (!(off > 0.0))
        return 1.0;
      z0 = std::log(off);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n(); ++i)
      acc += norm_sf((z0 - data_(i, j)) / s);
    return acc / static_cast<double>(n());
  }

  //! Per-margin minimum and maximum of the observations on the original scale.
  std::vector<double> original_min() const { return original_extreme(false); }
  std::vector<double> original_max() const { return original_extreme(true); }

  //! Marginal standard deviations on the original scale.
  std::vector<double> original_sd() const
  {
    if (n() < 2)
      return std::vector<double>(d(), std::sqrt(h_(0, 0)));
    std::vector<double> sd(d());
    for (std::size_t j = 0; j < d(); ++j) {
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n(); ++i) {
        const double v = original(i, j);
        m += v;
        m2 += v * v;
      }
      m /= static_cast<double>(n());
      sd[j] = std::sqrt(std::max(0.0, (m2 - static_cast<double>(n()) * m * m) /
                                          static_cast<double>(n() - 1)));
    }
    return sd;
  }

private:
  KdeModel(KdeKind kind, const DataMatrix& x, const BandwidthMatrix& h,
           std::optional<LogTransform> t)
    : kind_(kind)
    , h_(h)
    , kern_(h.matrix())
    , t_(std::move(t))
  {
    if (h.d() != x.d())
      throw ConfigError("bandwidth dimension does not match the data");
    if (kind == KdeKind::transformation && t_->d() != x.d())
      throw ConfigError("transform dimension does not match the data");
    std::vector<std::size_t> idx(x.n());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x(a, 0) < x(b, 0); });
    std::vector<double> v;
    v.reserve(x.n() * x.d());
    first_.reserve(x.n());
    for (auto i : idx) {
      auto r = x.row(i);
      v.insert(v.end(), r.begin(), r.end());
      first_.push_back(r[0]);
    }
    data_ = DataMatrix(x.n(), x.d(), std::move(v),
                       kind == KdeKind::transformation ? Space::transformed : Space::original);
    half_width_ = std::sqrt(detail::kQformCutoff * h_(0, 0));
    ++detail::kde_fit_counter();
  }

  void window(double y0, std::size_t& lo, std::size_t& hi) const
  {
    lo = static_cast<std::size_t>(std::lower_bound(first_.begin(), first_.end(), y0 - half_width_) -
                                  first_.begin());
    hi = static_cast<std::size_t>(std::upper_bound(first_.begin(), first_.end(), y0 + half_width_) -
                                  first_.begin());
  }

  double sum_range(const double* y, std::size_t lo, std::size_t hi) const
  {
    const auto dd = d();
    const double* base = data_.values().data();
    double acc = 0.0;
    double diff[3];
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < dd; ++j)
        diff[j] = y[j] - base[i * dd + j];
      const double q = kern_.qform(diff);
      if (q < detail::kQformCutoff)
        acc += std::exp(-0.5 * q);
    }
    return acc * kern_.normaliser();
  }

  double original(std::size_t i, std::size_t j) const
  {
    return kind_ == KdeKind::transformation ? t_->offset()[j] + std::exp(data_(i, j)) : data_(i, j);
  }

  std::vector<double> original_extreme(bool want_max) const
  {
    std::vector<double> e(d());
    for (std::size_t j = 0; j < d(); ++j) {
      double v = original(0, j);
      for (std::size_t i = 1; i < n(); ++i)
        v = want_max ? std::max(v, original(i, j)) : std::min(v, original(i, j));
      e[j] = v;
    }
    return e;
  }

  KdeKind kind_;
  DataMatrix data_;
  BandwidthMatrix h_;
  GaussianDensity kern_;
  std::optional<LogTransform> t_;
  std::vector<double> first_;
  double half_width_ = 0.0;
};

inline double
kde_eval(const KdeModel& m, std::span<const double> x)
{
  return m(x);
}

// ---------------------------------------------------------------------------
// tail densities

//! A density supported on (u, inf) truncated at `upper` for quadrature. The
//! stored function is unnormalised; evaluation divides by the normaliser
//! (the estimated survival mass at u) and returns 0 outside (u, inf).
class TailDensityModel
{
public:
  using PointFn = std::function<double(std::span<const double>)>;
  using GridFn = std::function<void(DensityGrid&)>;

  TailDensityModel() = default;

  TailDensityModel(TailRegion region, std::vector<double> upper, double normaliser,
                   std::string estimator_id, PointFn f, GridFn grid_fn = {},
                   std::size_t points = 0)
    : region_(std::move(region))
    , upper_(std::move(upper))
    , normaliser_(normaliser)
    , id_(std::move(estimator_id))
    , f_(std::move(f))
    , grid_fn_(std::move(grid_fn))
  {
    if (!(normaliser_ > 0.0) || !std::isfinite(normaliser_))
      throw NumericalError(detail::concat("tail normaliser must be positive (", id_, ")"));
    if (points == 0)
      points = default_grid_points(region_.d());
    grid_ = make_grid(std::span<const double>(region_.u), std::span<const double>(upper_), points);
    unnormalised(grid_);
    for (auto& v : grid_.values)
      v /= normaliser_;
  }

  //! Builds a tail model from a density on (u, inf), normalising it by its
  //! quadrature mass over [u, upper].
  static TailDensityModel from_density(TailRegion region, std::vector<double> upper,
                                       std::string estimator_id, PointFn f, GridFn grid_fn = {},
                                       std::size_t points = 0)
  {
    if (points == 0)
      points = default_grid_points(region.d());
    auto g = make_grid(std::span<const double>(region.u), std::span<const double>(upper), points);
    if (grid_fn)
      grid_fn(g);
    else
      g.fill(f);
    const double mass = g.integral();
    if (!(mass > 1e-6))
      throw DataError(detail::concat("vanishing tail mass above the threshold (", mass, ")"));
    return TailDensityModel(std::move(region), std::move(upper), mass, std::move(estimator_id),
                            std::move(f), std::move(grid_fn), points);
  }

  const TailRegion& region() const { return region_; }
  const std::vector<double>& upper() const { return upper_; }
  double normaliser() const { return normaliser_; }
  const std::string& id() const { return id_; }
  std::size_t d() const { return region_.d(); }

  //! Normalised values on the model's own grid.
  const DensityGrid& grid() const { return grid_; }

  double operator()(std::span<const double> x) const
  {
    if (!region_.contains(x))
      return 0.0;
    return f_(x) / normaliser_;
  }

  double unnormalised(std::span<const double> x) const { return f_(x); }

  //! Normalised values on an arbitrary grid layout. Nodes below u are zero;
  //! nodes exactly on the threshold keep the right limit, matching grid().
  DensityGrid evaluate_on(const DensityGrid& layout) const
  {
    DensityGrid g = layout;
    unnormalised(g);
    std::vector<double> x(g.d());
    for (std::size_t k = 0; k < g.values.size(); ++k) {
      g.point(k, x);
      bool below = false;
      for (std::size_t j = 0; j < x.size(); ++j)
        below = below || x[j] < region_.u[j];
      g.values[k] = below ? 0.0 : g.values[k] / normaliser_;
    }
    return g;
  }

private:
  void unnormalised(DensityGrid& g) const
  {
    if (grid_fn_) {
      grid_fn_(g);
    } else {
      g.fill(f_);
    }
  }

  TailRegion region_;
  std::vector<double> upper_;
  double normaliser_ = 1.0;
  std::string id_;
  PointFn f_;
  GridFn grid_fn_;
  DensityGrid grid_;
};

struct TailOptions
{
  std::size_t points = 0;
  //! Explicit truncation point; derived from the data when empty.
  std::vector<double> upper;
  //! Bound on the estimated mass outside the truncated box.
  double outside_mass = 1e-5;
};

//! Default truncation: max + 3 sd per margin, extended until the closed-form
//! marginal exceedance beyond the box is below `outside_mass`.
inline std::vector<double>
kde_upper_bound(const KdeModel& m, const TailRegion& region, double outside_mass)
{
  const auto mx = m.original_max();
  const auto sd = m.original_sd();
  std::vector<double> up(m.d());
  for (std::size_t j = 0; j < m.d(); ++j) {
    double gap = 3.0 * (sd[j] > 0.0 ? sd[j] : 1.0);
    up[j] = std::max(mx[j], region.u[j]) + gap;
    const double tol = outside_mass / static_cast<double>(m.d());
    for (int it = 0; it < 200 && m.marginal_exceedance(j, up[j]) > tol; ++it) {
      gap *= 1.5;
      up[j] = std::max(mx[j], region.u[j]) + gap;
    }
  }
  return up;
}

inline double
outside_mass_bound(const KdeModel& m, const std::vector<double>& upper)
{
  double s = 0.0;
  for (std::size_t j = 0; j < m.d(); ++j)
    s += m.marginal_exceedance(j, upper[j]);
  return s;
}

//! F-bar(u): the estimate's mass above u, by quadrature over [u, upper].
inline double
survival_estimate(const KdeModel& m, const TailRegion& region, TailOptions opt = {})
{
  region.validate();
  if (region.d() != m.d())
    throw ConfigError("threshold dimension does not match the model");
  if (m.kind() == KdeKind::transformation)
    for (std::size_t j = 0; j < m.d(); ++j)
      if (region.u[j] < m.transform()->offset()[j])
        throw ConfigError("threshold lies below the transform offset");
  auto up = opt.upper.empty() ? kde_upper_bound(m, region, opt.outside_mass) : opt.upper;
  auto g = make_grid(std::span<const double>(region.u), std::span<const double>(up),
                     opt.points ? opt.points : default_grid_points(m.d()));
  m.evaluate(g);
  return g.integral();
}

//! Closed-form F-bar(u) for d = 1 (quadrature-free oracle).
inline double
survival_exact_1d(const KdeModel& m, double u)
{
  if (m.d() != 1)
    throw ConfigError("survival_exact_1d requires d = 1");
  return m.marginal_exceedance(0, u);
}

//! Tail density f-hat / F-bar(u) on (u, inf).
inline TailDensityModel
tail_density(const KdeModel& m, const TailRegion& region, std::string id = "kde",
             TailOptions opt = {})
{
  region.validate();
  if (region.d() != m.d())
    throw ConfigError("threshold dimension does not match the model");
  auto sp = std::make_shared<const KdeModel>(m);
  auto up = opt.upper.empty() ? kde_upper_bound(m, region, opt.outside_mass) : opt.upper;
  auto f = [sp](std::span<const double> x) { return (*sp)(x); };
  auto gf = [sp](DensityGrid& g) { sp->evaluate(g); };
  auto tm = TailDensityModel::from_density(region, up, std::move(id), f, gf, opt.points);
  if (opt.upper.empty()) {
    // Keep the truncated mass a small fraction of the tail mass.
    int guard = 0;
    while (outside_mass_bound(m, up) > 1e-3 * tm.normaliser() && guard++ < 50) {
      TailOptions o2 = opt;
      o2.outside_mass = 0.5e-3 * tm.normaliser();
      up = kde_upper_bound(m, region, o2.outside_mass);
      tm = TailDensityModel::from_density(region, up, tm.id(), f, gf, opt.points);
    }
  }
  return tm;
}

//! Quantile of a univariate tail density: cumulative trapezoid on the model
//! grid, inverted by linear interpolation.
inline double
tail_quantile(const TailDensityModel& m, double p)
{
  if (m.d() != 1)
    throw ConfigError("tail_quantile is only defined for d = 1");
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("quantile level must lie in (0,1)");
  const auto& g = m.grid();
  const auto& x = g.axes[0];
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double step = 0.5 * (g.values[k] + g.values[k + 1]) * (x[k + 1] - x[k]);
    if (cum + step >= p && step > 0.0)
      return x[k] + (p - cum) / step * (x[k + 1] - x[k]);
    cum += step;
  }
  return x.back();
}

} // namespace tailkde
