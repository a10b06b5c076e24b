#pragma once

#include "core.hpp"

namespace tailkde {

namespace detail {
// Pair terms whose first-coordinate gap alone forces a quadratic form above
// this are skipped in O(n^2) sums.
inline constexpr double kQformCutoffPairs = 100.0;
} // namespace detail

//! Standard Gaussian kernel on R^d: m2(K) = 1, R(K) = (4 pi)^{-d/2}.
struct GaussianKernel
{
  std::size_t d = 1;

  static constexpr double m2() { return 1.0; }
  double roughness() const { return std::pow(4.0 * kPi, -0.5 * static_cast<double>(d)); }
};

//! N(0, S) density with the inverse and normalising constant cached.
class GaussianDensity
{
public:
  GaussianDensity() = default;

  explicit GaussianDensity(const Eigen::MatrixXd& s)
    : d_(static_cast<std::size_t>(s.rows()))
  {
    if (s.rows() != s.cols() || s.rows() < 1 || s.rows() > 3)
      throw ConfigError("covariance must be square with dimension 1..3");
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw NumericalError("covariance matrix is not positive definite (Cholesky failed)");
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < s.rows(); ++k) {
      const double l = llt.matrixL()(k, k);
      if (!(l > 0.0))
        throw NumericalError("covariance matrix is singular");
      logdet += 2.0 * std::log(l);
    }
    inv_ = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
    inv_ = 0.5 * (inv_ + inv_.transpose());
    log_norm_ = -0.5 * (static_cast<double>(d_) * std::log(2.0 * kPi) + logdet);
    norm_ = std::exp(log_norm_);
    s11_ = s(0, 0);
  }

  std::size_t d() const { return d_; }
  const Eigen::MatrixXd& inverse() const { return inv_; }
  double normaliser() const { return norm_; }
  double log_normaliser() const { return log_norm_; }
  //! Variance of the first coordinate; bounds the quadratic form from below.
  double first_variance() const { return s11_; }

  double qform(const double* y) const
  {
    double q = 0.0;
    for (std::size_t a = 0; a < d_; ++a) {
      q += inv_(a, a) * y[a] * y[a];
      for (std::size_t b = 0; b < a; ++b)
        q += 2.0 * inv_(a, b) * y[a] * y[b];
    }
    return q;
  }

  double operator()(const double* y) const { return norm_ * std::exp(-0.5 * qform(y)); }
  double operator()(std::span<const double> y) const { return (*this)(y.data()); }

private:
  std::size_t d_ = 0;
  Eigen::MatrixXd inv_;
  double log_norm_ = 0.0;
  double norm_ = 0.0;
  double s11_ = 0.0;
};

//! K_H(y): the N(0, H) density at y.
inline double
eval_scaled(const GaussianKernel& k, const BandwidthMatrix& h, std::span<const double> y)
{
  if (h.d() != k.d || y.size() != k.d)
    throw ConfigError("kernel, bandwidth and point dimensions differ");
  return GaussianDensity(h.matrix())(y);
}

inline double
eval_scaled(const BandwidthMatrix& h, std::span<const double> y)
{
  return eval_scaled(GaussianKernel{h.d()}, h, y);
}

//! Covariance of the convolution of two centred Gaussians. Either argument may
//! be the zero matrix.
inline Eigen::MatrixXd
convolve(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2)
{
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols())
    throw ConfigError("convolve: dimension mismatch");
  return h1 + h2;
}

inline BandwidthMatrix
convolve(const BandwidthMatrix& h1, const BandwidthMatrix& h2)
{
  return BandwidthMatrix(convolve(h1.matrix(), h2.matrix()));
}

// ---------------------------------------------------------------------------
// fourth derivatives

//! Sorted index tuples (i <= j <= k <= l) with their multiplicity in the
//! full d^4 Kronecker layout.
struct Deriv4Layout
{
  std::size_t d = 1;
  std::vector<std::array<std::size_t, 4>> tuples;
  std::vector<double> multiplicity;
  std::vector<std::size_t> full_to_unique;

  explicit Deriv4Layout(std::size_t dim)
    : d(dim)
  {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j)
        for (std::size_t k = j; k < d; ++k)
          for (std::size_t l = k; l < d; ++l)
            tuples.push_back({i, j, k, l});
    multiplicity.assign(tuples.size(), 0.0);
    full_to_unique.resize(d * d * d * d);
    for (std::size_t f = 0; f < full_to_unique.size(); ++f) {
      std::array<std::size_t, 4> t{f / (d * d * d), (f / (d * d)) % d, (f / d) % d, f % d};
      std::sort(t.begin(), t.end());
      const auto it = std::find(tuples.begin(), tuples.end(), t);
      const auto u = static_cast<std::size_t>(it - tuples.begin());
      full_to_unique[f] = u;
      multiplicity[u] += 1.0;
    }
  }

  std::size_t unique_size() const { return tuples.size(); }

  std::vector<double> expand(const std::vector<double>& unique) const
  {
    std::vector<double> full(full_to_unique.size());
    for (std::size_t f = 0; f < full.size(); ++f)
      full[f] = unique[full_to_unique[f]];
    return full;
  }
};

//! Evaluates the distinct fourth-order partials of the N(0, G) density. With
//! z = G^{-1} y and A = G^{-1}, each partial is phi_G(y) times
//! z_i z_j z_k z_l - sum_6 A_ij z_k z_l + (A_ij A_kl + A_ik A_jl + A_il A_jk).
class Deriv4Evaluator
{
public:
  explicit Deriv4Evaluator(const Eigen::MatrixXd& g)
    : dens_(g)
    , layout_(static_cast<std::size_t>(g.rows()))
  {
    const auto& a = dens_.inverse();
    for (const auto& t : layout_.tuples) {
      const auto [i, j, k, l] = t;
      constants_.push_back(a(i, j) * a(k, l) + a(i, k) * a(j, l) + a(i, l) * a(j, k));
    }
  }

  const GaussianDensity& density() const { return dens_; }
  const Deriv4Layout& layout() const { return layout_; }

  //! Adds scale * D^4 phi_G(y) over unique tuples into out.
  void accumulate(const double* y, double scale, double* out) const
  {
    const auto d = layout_.d;
    const auto& a = dens_.inverse();
    double z[3];
    for (std::size_t p = 0; p < d; ++p) {
      z[p] = 0.0;
      for (std::size_t q = 0; q < d; ++q)
        z[p] += a(p, q) * y[q];
    }
    double q = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      q += y[p] * z[p];
    const double phi = scale * dens_.normaliser() * std::exp(-0.5 * q);
    for (std::size_t u = 0; u < layout_.tuples.size(); ++u) {
      const auto [i, j, k, l] = layout_.tuples[u];
      const double poly = z[i] * z[j] * z[k] * z[l] -
                          (a(i, j) * z[k] * z[l] + a(i, k) * z[j] * z[l] + a(i, l) * z[j] * z[k] +
                           a(j, k) * z[i] * z[l] + a(j, l) * z[i] * z[k] + a(k, l) * z[i] * z[j]) +
                          constants_[u];
      out[u] += phi * poly;
    }
  }

  std::vector<double> unique_at(std::span<const double> y) const
  {
    std::vector<double> out(layout_.unique_size(), 0.0);
    accumulate(y.data(), 1.0, out.data());
    return out;
  }

private:
  GaussianDensity dens_;
  Deriv4Layout layout_;
  std::vector<double> constants_;
};

//! All d^4 fourth-order partial derivatives of the N(0, G) density at y, in
//! Kronecker order: index ((i*d + j)*d + k)*d + l.
inline std::vector<double>
deriv4_vector(const BandwidthMatrix& g, std::span<const double> y)
{
  if (y.size() != g.d())
    throw ConfigError("deriv4_vector: dimension mismatch");
  Deriv4Evaluator ev(g.matrix());
  return ev.layout().expand(ev.unique_at(y));
}

//! vec(H)^T (x) vec(H)^T applied to a d^4 vector: sum_ijkl H_ij H_kl v_ijkl.
inline double
quartic_contract(const Eigen::MatrixXd& h, const std::vector<double>& v)
{
  const auto d = static_cast<std::size_t>(h.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l)
          s += h(i, j) * h(k, l) * v[((i * d + j) * d + k) * d + l];
  return s;
}

} // namespace tailkde
