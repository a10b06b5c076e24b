#pragma once

#include "core.hpp"

namespace tailkde {

//! Per-margin logarithmic transformation t_j(x) = log(x_j - u0_j).
class LogTransform
{
public:
  LogTransform() = default;

  explicit LogTransform(std::vector<double> u0, std::vector<double> scale = {})
    : u0_(std::move(u0))
    , tol_(u0_.size(), 0.0)
  {
    if (u0_.empty() || u0_.size() > 3)
      throw ConfigError("transform offset must have 1..3 coordinates");
    for (std::size_t j = 0; j < u0_.size(); ++j) {
      if (!std::isfinite(u0_[j]))
        throw ConfigError("transform offset must be finite");
      const double s = j < scale.size() ? scale[j] : 0.0;
      tol_[j] = 1e-12 * s;
    }
  }

  std::size_t d() const { return u0_.size(); }
  const std::vector<double>& offset() const { return u0_; }

  bool in_domain(std::span<const double> x) const
  {
    for (std::size_t j = 0; j < u0_.size(); ++j)
      if (!(x[j] - u0_[j] > tol_[j]))
        return false;
    return true;
  }

  void forward(std::span<const double> x, std::span<double> y) const
  {
    check(x);
    for (std::size_t j = 0; j < u0_.size(); ++j)
      y[j] = std::log(x[j] - u0_[j]);
  }

  std::vector<double> forward(std::span<const double> x) const
  {
    std::vector<double> y(x.size());
    forward(x, y);
    return y;
  }

  void inverse(std::span<const double> y, std::span<double> x) const
  {
    for (std::size_t j = 0; j < u0_.size(); ++j)
      x[j] = u0_[j] + std::exp(y[j]);
  }

  std::vector<double> inverse(std::span<const double> y) const
  {
    std::vector<double> x(y.size());
    inverse(y, x);
    return x;
  }

  //! |J_t(x)| = prod_j 1 / (x_j - u0_j).
  double jacobian(std::span<const double> x) const
  {
    check(x);
    double j = 1.0;
    for (std::size_t k = 0; k < u0_.size(); ++k)
      j /= x[k] - u0_[k];
    return j;
  }

  DataMatrix apply(const DataMatrix& x) const
  {
    if (x.d() != d())
      throw DataError("transform dimension does not match the data");
    return x.map_rows([this](std::span<const double> in, std::span<double> out) { forward(in, out); },
                      Space::transformed);
  }

private:
  void check(std::span<const double> x) const
  {
    if (x.size() != u0_.size())
      throw ConfigError("transform: dimension mismatch");
    for (std::size_t j = 0; j < u0_.size(); ++j)
      if (!(x[j] - u0_[j] > tol_[j]))
        throw DataError(detail::concat("value ", x[j], " on margin ", j + 1,
                                       " is not above the transform offset ", u0_[j]));
  }

  std::vector<double> u0_;
  std::vector<double> tol_;
};

//! Per-column min minus 5% of the column range.
inline std::vector<double>
default_offset(const DataMatrix& x)
{
  if (x.n() < 2)
    throw DataError("transform offset needs at least two observations");
  const auto lo = column_min(x);
  const auto hi = column_max(x);
  std::vector<double> u0(x.d());
  for (std::size_t j = 0; j < x.d(); ++j) {
    const double r = hi[j] - lo[j];
    if (!(r > 0.0))
      throw DataError(detail::concat("column ", j + 1, " has zero range"));
    u0[j] = lo[j] - 0.05 * r;
  }
  return u0;
}

//! Transform with the default offset and the data range as rejection scale.
inline LogTransform
default_transform(const DataMatrix& x)
{
  const auto lo = column_min(x);
  const auto hi = column_max(x);
  std::vector<double> scale(x.d());
  for (std::size_t j = 0; j < x.d(); ++j)
    scale[j] = hi[j] - lo[j];
  return LogTransform(default_offset(x), scale);
}

} // namespace tailkde
