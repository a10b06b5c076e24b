#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <array>
#include <exception>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace tailkde {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kSqrt2 = 1.414213562373095048801688724209698079;
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;

//! Base class of all library errors.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Bad or degenerate input data (CLI exit code 2).
class DataError : public Error
{
public:
  using Error::Error;
};

//! Invalid configuration or arguments (CLI exit code 4).
class ConfigError : public Error
{
public:
  using Error::Error;
};

//! A numerical routine failed in a way that cannot be reported as a flag.
class NumericalError : public Error
{
public:
  using Error::Error;
};

namespace detail {

template<typename... Args>
std::string
concat(Args&&... args)
{
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

} // namespace detail

// ---------------------------------------------------------------------------
// scalar normal helpers

inline double
norm_pdf(double x)
{
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double
norm_cdf(double x)
{
  return 0.5 * std::erfc(-x / kSqrt2);
}

//! Upper tail probability, accurate far into the right tail.
inline double
norm_sf(double x)
{
  return 0.5 * std::erfc(x / kSqrt2);
}

inline double
norm_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("norm_quantile: p must lie in (0,1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------
// DataMatrix

enum class Space
{
  original,
  transformed
};

//! n x d sample; rows are observations, columns are margins (d in {1,2,3}).
//! Values are stored row-major so that one observation is contiguous.
class DataMatrix
{
public:
  DataMatrix() = default;

  DataMatrix(std::size_t n, std::size_t d, std::vector<double> values,
             Space space = Space::original)
    : n_(n)
    , d_(d)
    , values_(std::move(values))
    , space_(space)
  {
    if (d_ < 1 || d_ > 3)
      throw DataError(detail::concat("DataMatrix: dimension must be 1, 2 or 3 (got ", d_, ")"));
    if (n_ < 1)
      throw DataError("DataMatrix: empty sample");
    if (values_.size() != n_ * d_)
      throw DataError("DataMatrix: value count does not match n*d");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k]))
        throw DataError(detail::concat("DataMatrix: non-finite value at row ", k / d_ + 1,
                                       ", column ", k % d_ + 1));
    }
  }

  static DataMatrix from_column(std::vector<double> x, Space space = Space::original)
  {
    const auto n = x.size();
    return DataMatrix(n, 1, std::move(x), space);
  }

  static DataMatrix from_rows(const std::vector<std::vector<double>>& rows,
                              Space space = Space::original)
  {
    if (rows.empty())
      throw DataError("DataMatrix: empty sample");
    const std::size_t d = rows.front().size();
    std::vector<double> v;
    v.reserve(rows.size() * d);
    for (const auto& r : rows) {
      if (r.size() != d)
        throw DataError("DataMatrix: ragged rows");
      v.insert(v.end(), r.begin(), r.end());
    }
    return DataMatrix(rows.size(), d, std::move(v), space);
  }

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  Space space() const { return space_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * d_ + j]; }

  std::span<const double> row(std::size_t i) const
  {
    return {values_.data() + i * d_, d_};
  }

  std::vector<double> column(std::size_t j) const
  {
    std::vector<double> c(n_);
    for (std::size_t i = 0; i < n_; ++i)
      c[i] = values_[i * d_ + j];
    return c;
  }

  const std::vector<double>& values() const { return values_; }

  //! Rows whose every coordinate strictly exceeds u.
  DataMatrix exceedances(std::span<const double> u) const
  {
    std::vector<double> v;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      bool above = true;
      for (std::size_t j = 0; j < d_; ++j)
        above = above && values_[i * d_ + j] > u[j];
      if (above) {
        v.insert(v.end(), values_.begin() + i * d_, values_.begin() + (i + 1) * d_);
        ++m;
      }
    }
    if (m == 0)
      throw DataError("no observations above the threshold");
    return DataMatrix(m, d_, std::move(v), space_);
  }

  //! Map every row through f, producing a matrix in `space`.
  template<typename F>
  DataMatrix map_rows(F&& f, Space space) const
  {
    std::vector<double> v(values_.size());
    for (std::size_t i = 0; i < n_; ++i)
      f(row(i), std::span<double>(v.data() + i * d_, d_));
    return DataMatrix(n_, d_, std::move(v), space);
  }

  DataMatrix shifted(double c) const
  {
    auto v = values_;
    for (auto& x : v)
      x += c;
    return DataMatrix(n_, d_, std::move(v), space_);
  }

private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> values_;
  Space space_ = Space::original;
};

// column summaries ----------------------------------------------------------

inline std::vector<double>
column_means(const DataMatrix& x)
{
  std::vector<double> m(x.d(), 0.0);
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t j = 0; j < x.d(); ++j)
      m[j] += x(i, j);
  for (auto& v : m)
    v /= static_cast<double>(x.n());
  return m;
}

//! Unbiased sample covariance.
inline Eigen::MatrixXd
sample_covariance(const DataMatrix& x)
{
  if (x.n() < 2)
    throw DataError("sample covariance needs at least two observations");
  const auto d = x.d();
  const auto m = column_means(x);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b)
        s(a, b) += (x(i, a) - m[a]) * (x(i, b) - m[b]);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      s(a, b) /= static_cast<double>(x.n() - 1);
      s(b, a) = s(a, b);
    }
  return s;
}

inline std::vector<double>
column_sds(const DataMatrix& x)
{
  const auto s = sample_covariance(x);
  std::vector<double> sd(x.d());
  for (std::size_t j = 0; j < x.d(); ++j)
    sd[j] = std::sqrt(s(j, j));
  return sd;
}

inline std::vector<double>
column_min(const DataMatrix& x)
{
  std::vector<double> m(x.d(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t j = 0; j < x.d(); ++j)
      m[j] = std::min(m[j], x(i, j));
  return m;
}

inline std::vector<double>
column_max(const DataMatrix& x)
{
  std::vector<double> m(x.d(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t j = 0; j < x.d(); ++j)
      m[j] = std::max(m[j], x(i, j));
  return m;
}

//! Per-column type-7 quantile (linear interpolation of order statistics).
inline std::vector<double>
empirical_quantile(const DataMatrix& x, double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw DataError(detail::concat("quantile level must lie in (0,1), got ", p));
  std::vector<double> q(x.d());
  for (std::size_t j = 0; j < x.d(); ++j) {
    auto c = x.column(j);
    std::sort(c.begin(), c.end());
    const double h = (static_cast<double>(c.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, c.size() - 1);
    q[j] = c[lo] + (h - static_cast<double>(lo)) * (c[hi] - c[lo]);
  }
  return q;
}

// ---------------------------------------------------------------------------
// BandwidthMatrix

//! Symmetric positive-definite d x d smoothing matrix (squared data units).
class BandwidthMatrix
{
public:
  BandwidthMatrix() = default;

  explicit BandwidthMatrix(Eigen::MatrixXd h)
    : h_(std::move(h))
  {
    if (h_.rows() != h_.cols() || h_.rows() < 1 || h_.rows() > 3)
      throw ConfigError("bandwidth matrix must be square with dimension 1..3");
    if (!h_.allFinite())
      throw NumericalError("bandwidth matrix has non-finite entries");
    const double scale = std::max(h_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((h_ - h_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw NumericalError("bandwidth matrix is not symmetric");
    h_ = 0.5 * (h_ + h_.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(h_);
    if (llt.info() != Eigen::Success)
      throw NumericalError("bandwidth matrix is not positive definite");
    for (Eigen::Index k = 0; k < h_.rows(); ++k)
      if (!(llt.matrixL()(k, k) > 0.0))
        throw NumericalError("bandwidth matrix is not positive definite");
  }

  static BandwidthMatrix scalar(double h2)
  {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = h2;
    return BandwidthMatrix(m);
  }

  static BandwidthMatrix identity(std::size_t d, double c = 1.0)
  {
    return BandwidthMatrix(c * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                         static_cast<Eigen::Index>(d)));
  }

  std::size_t d() const { return static_cast<std::size_t>(h_.rows()); }
  const Eigen::MatrixXd& matrix() const { return h_; }
  double operator()(std::size_t a, std::size_t b) const
  {
    return h_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  double determinant() const { return h_.determinant(); }

private:
  Eigen::MatrixXd h_;
};

// ---------------------------------------------------------------------------
// TailRegion

struct TailRegion
{
  std::vector<double> u;
  std::vector<double> u0;
  std::optional<double> quantile_level;

  std::size_t d() const { return u.size(); }

  void validate() const
  {
    if (u.empty() || u.size() > 3)
      throw ConfigError("threshold must have 1..3 coordinates");
    if (u0.size() != u.size())
      throw ConfigError("threshold and transform offset dimensions differ");
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (!std::isfinite(u[j]) || !std::isfinite(u0[j]))
        throw ConfigError("non-finite threshold");
      if (!(u0[j] < u[j]))
        throw ConfigError(detail::concat("transform offset must lie below the threshold (margin ",
                                         j + 1, ")"));
    }
  }

  bool contains(std::span<const double> x) const
  {
    for (std::size_t j = 0; j < u.size(); ++j)
      if (!(x[j] > u[j]))
        return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// DensityGrid

//! Tensor-product grid with trapezoidal weights. Values and weights are
//! stored row-major with the last axis varying fastest.
struct DensityGrid
{
  std::vector<std::vector<double>> axes;
  std::vector<double> values;
  std::vector<double> weights;

  std::size_t d() const { return axes.size(); }

  std::size_t size() const
  {
    std::size_t s = 1;
    for (const auto& a : axes)
      s *= a.size();
    return s;
  }

  std::vector<std::size_t> shape() const
  {
    std::vector<std::size_t> s;
    for (const auto& a : axes)
      s.push_back(a.size());
    return s;
  }

  void point(std::size_t flat, std::span<double> out) const
  {
    for (std::size_t j = d(); j-- > 0;) {
      const auto m = axes[j].size();
      out[j] = axes[j][flat % m];
      flat /= m;
    }
  }

  std::vector<double> point(std::size_t flat) const
  {
    std::vector<double> p(d());
    point(flat, p);
    return p;
  }

  double integral() const
  {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
      s += values[k] * weights[k];
    return s;
  }

  //! Copy of the grid layout with values replaced.
  DensityGrid with_values(std::vector<double> v) const
  {
    DensityGrid g{axes, std::move(v), weights};
    return g;
  }

  //! Fill values from a pointwise function of the grid coordinates.
  template<typename F>
  void fill(F&& f)
  {
    values.assign(size(), 0.0);
    std::vector<double> p(d());
    for (std::size_t k = 0; k < values.size(); ++k) {
      point(k, p);
      values[k] = f(std::span<const double>(p));
    }
  }
};

namespace detail {

inline std::vector<double>
trapezoid_weights(const std::vector<double>& axis)
{
  const auto m = axis.size();
  std::vector<double> w(m, 0.0);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double h = axis[k + 1] - axis[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

} // namespace detail

//! Grid on the given axes (each strictly increasing, at least two nodes)
//! with trapezoidal tensor weights.
inline DensityGrid
make_grid(std::vector<std::vector<double>> axes)
{
  if (axes.empty() || axes.size() > 3)
    throw ConfigError("grid must have dimension 1..3");
  DensityGrid g;
  std::vector<std::vector<double>> w1;
  for (std::size_t j = 0; j < axes.size(); ++j) {
    const auto& a = axes[j];
    if (a.size() < 2)
      throw ConfigError("grid needs at least two points per axis");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!std::isfinite(a[k]))
        throw ConfigError("grid nodes must be finite");
      if (k > 0 && !(a[k] > a[k - 1]))
        throw ConfigError(detail::concat("grid nodes must increase along axis ", j + 1));
    }
    w1.push_back(detail::trapezoid_weights(a));
  }
  g.axes = std::move(axes);
  const auto total = g.size();
  g.weights.assign(total, 1.0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t flat = k;
    double w = 1.0;
    for (std::size_t j = g.d(); j-- > 0;) {
      const auto m = g.axes[j].size();
      w *= w1[j][flat % m];
      flat /= m;
    }
    g.weights[k] = w;
  }
  g.values.assign(total, 0.0);
  return g;
}

//! Grid over the box [lower, upper] with equally spaced nodes.
inline DensityGrid
make_grid(std::span<const double> lower, std::span<const double> upper, std::size_t points_per_axis)
{
  if (lower.size() != upper.size() || lower.empty() || lower.size() > 3)
    throw ConfigError("grid bounds must have matching dimension 1..3");
  if (points_per_axis < 2)
    throw ConfigError("grid needs at least two points per axis");
  std::vector<std::vector<double>> axes;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]))
      throw ConfigError("grid bounds must be finite");
    if (!(upper[j] > lower[j]))
      throw ConfigError(detail::concat("grid upper bound must exceed lower bound on axis ", j + 1));
    std::vector<double> a(points_per_axis);
    const double step = (upper[j] - lower[j]) / static_cast<double>(points_per_axis - 1);
    for (std::size_t k = 0; k < points_per_axis; ++k)
      a[k] = lower[j] + step * static_cast<double>(k);
    a.back() = upper[j];
    axes.push_back(std::move(a));
  }
  return make_grid(std::move(axes));
}

//! Grid over [u, upper] for a tail region.
inline DensityGrid
make_grid(const TailRegion& region, std::span<const double> upper, std::size_t points_per_axis)
{
  return make_grid(std::span<const double>(region.u), upper, points_per_axis);
}

//! Default points per axis by dimension (512, 200, 64).
inline std::size_t
default_grid_points(std::size_t d)
{
  switch (d) {
    case 1:
      return 512;
    case 2:
      return 200;
    default:
      return 64;
  }
}

// ---------------------------------------------------------------------------
// RngStream

namespace detail {

inline std::uint64_t
splitmix64(std::uint64_t& x)
{
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

//! Reproducible random stream identified by (seed, stream_id). The engine is
//! std::mt19937_64, whose output sequence is fixed by the standard; all
//! variates are produced by inversion of 53-bit uniforms, so sequences do not
//! depend on the standard library's distribution implementations.
class RngStream
{
public:
  explicit RngStream(std::uint64_t seed = 1, std::uint64_t stream_id = 0)
    : seed_(seed)
    , stream_id_(stream_id)
  {
    std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream_id + 1));
    std::array<std::uint32_t, 8> words{};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = detail::splitmix64(s);
      words[2 * k] = static_cast<std::uint32_t>(v);
      words[2 * k + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  //! Uniform on the open interval (0,1).
  double uniform()
  {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0)
        return u;
    }
  }

  double normal() { return norm_quantile(uniform()); }

  //! Independent child stream, e.g. one per replicate.
  RngStream split(std::uint64_t child) const
  {
    std::uint64_t s = seed_ ^ (stream_id_ * 0x2545f4914f6cdd1dULL);
    return RngStream(detail::splitmix64(s), child);
  }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// concurrency

inline std::size_t
default_thread_count()
{
  const auto hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

namespace detail {
inline std::size_t&
thread_setting()
{
  static std::size_t t = default_thread_count();
  return t;
}

//! Set inside parallel_for workers so nested loops run serially.
inline bool&
in_worker()
{
  thread_local bool w = false;
  return w;
}
} // namespace detail

//! Worker count used by pair sums and grid evaluation. Results never depend
//! on it. Inside a parallel_for worker it is 1.
inline std::size_t
thread_count()
{
  return detail::in_worker() ? 1 : detail::thread_setting();
}

inline void
set_thread_count(std::size_t t)
{
  detail::thread_setting() = std::max<std::size_t>(1, t);
}

//! Run f(k) for k in [0, count) on up to `threads` workers. Each index is
//! processed exactly once; callers write results into per-index slots so the
//! output does not depend on the thread count.
template<typename F>
void
parallel_for(std::size_t count, std::size_t threads, F&& f)
{
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k)
      f(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      detail::in_worker() = true;
      try {
        for (std::size_t k = t; k < count; k += threads)
          f(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool)
    th.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

//! Pairwise (cascade) summation in fixed order.
inline double
pairwise_sum(std::span<const double> v)
{
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v)
      s += x;
    return s;
  }
  const auto h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

} // namespace tailkde
