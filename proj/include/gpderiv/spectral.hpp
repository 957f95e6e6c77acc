#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include "gpderiv/kernels.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

namespace detail {

/// Fourier system psi_1 = 1, psi_{2i} = sqrt(2) cos(2 pi i x),
/// psi_{2i+1} = sqrt(2) sin(2 pi i x), with analytic derivatives via phase
/// shifts.
inline double fourier_basis(int index, int deriv, double x) {
  if (index == 1) return deriv == 0 ? 1.0 : 0.0;
  const int freq = index / 2;  // even -> cos branch, odd -> sin branch
  const double w = 2.0 * M_PI * freq;
  const double arg = w * x + deriv * M_PI / 2.0;
  const double amp = std::sqrt(2.0) * std::pow(w, deriv);
  return (index % 2 == 0) ? amp * std::cos(arg) : amp * std::sin(arg);
}

}  // namespace detail

/// Truncated Mercer kernel K(x,x') = sum_i mu_i psi_i(x) psi_i(x') over the
/// Fourier basis, with prescribed nonincreasing eigenvalues.
class SpectralKernel final : public Kernel {
 public:
  enum class Decay { Generic, Exponential, Polynomial };

  explicit SpectralKernel(Vector mu, Decay decay = Decay::Generic, double param = 0.0, int deriv_cap = 8)
      : mu_(std::move(mu)), decay_(decay), param_(param), cap_(deriv_cap) {
    if (mu_.size() < 1) throw std::invalid_argument("SpectralKernel: need at least one eigenvalue");
    for (Eigen::Index i = 0; i < mu_.size(); ++i) {
      if (!(mu_[i] > 0.0)) throw std::invalid_argument("SpectralKernel: eigenvalues must be positive");
      if (i > 0 && mu_[i] > mu_[i - 1] * (1.0 + 1e-12))
        throw std::invalid_argument("SpectralKernel: eigenvalues must be nonincreasing");
    }
  }

  int truncation() const { return static_cast<int>(mu_.size()); }
  const Vector& eigenvalues() const { return mu_; }
  Decay decay() const { return decay_; }
  double decay_param() const { return param_; }

  int max_deriv_order() const override { return cap_; }

  double eval_deriv(int k1, int k2, double x, double x2) const override {
    require_order(k1);
    require_order(k2);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu_.size(); ++i)
      acc += mu_[i] * detail::fourier_basis(static_cast<int>(i) + 1, k1, x) *
             detail::fourier_basis(static_cast<int>(i) + 1, k2, x2);
    maybe_warn_truncation(k1 + k2, acc);
    return acc;
  }

  /// psi_i^(m)(pts) feature matrix; Gram products reduce to GEMMs.
  Matrix features(const Vector& pts, int m) const {
    Matrix F(pts.size(), mu_.size());
    for (Eigen::Index r = 0; r < pts.size(); ++r)
      for (Eigen::Index i = 0; i < mu_.size(); ++i)
        F(r, i) = detail::fourier_basis(static_cast<int>(i) + 1, m, pts[r]);
    return F;
  }

  Matrix gram(const Vector& X) const override {
    Matrix F = features(X, 0);
    Matrix G = F * mu_.asDiagonal() * F.transpose();
    return ((G + G.transpose()) / 2.0).eval();
  }

  Matrix cross_gram(int k, const Vector& grid, const Vector& X) const override {
    require_order(k);
    return features(grid, k) * mu_.asDiagonal() * features(X, 0).transpose();
  }

  Matrix deriv_gram(int k, const Vector& pts) const override {
    require_order(k);
    Matrix F = features(pts, k);
    Matrix G = F * mu_.asDiagonal() * F.transpose();
    return ((G + G.transpose()) / 2.0).eval();
  }

 private:
  void maybe_warn_truncation(int m, double partial) const {
    if (decay_ == Decay::Generic || warned_.load(std::memory_order_relaxed)) return;
    const double M = static_cast<double>(mu_.size());
    // |psi_i^(m)| <= sqrt(2) (pi (i+1))^m, so bound the dropped tail termwise.
    double tail = 0.0;
    if (decay_ == Decay::Exponential) {
      const double q = std::exp(-2.0 * param_);
      tail = 2.0 * std::pow(M_PI * (M + 2.0), m) * std::pow(q, M + 1.0) / (1.0 - q);
    } else {
      const double expo = 2.0 * param_ - m;  // decay exponent of bound terms
      if (expo > 1.0)
        tail = 2.0 * std::pow(M_PI, m) * std::pow(M + 1.0, m - 2.0 * param_ + 1.0) / (expo - 1.0);
      else
        tail = std::numeric_limits<double>::infinity();
    }
    if (tail > 1e-8 * std::abs(partial)) {
      if (!warned_.exchange(true, std::memory_order_relaxed))
        std::fprintf(stderr, "gpderiv: spectral kernel truncation tail %.3g may exceed 1e-8 of the series\n",
                     tail);
    }
  }

  Vector mu_;
  Decay decay_;
  double param_;
  int cap_;
  mutable std::atomic<bool> warned_{false};
};

/// Eigenvalues mu_i = exp(-2 gamma i), i = 1..M.
inline SpectralKernel make_exp_kernel(double gamma, int M = 5000) {
  if (!(gamma > 0.0)) throw std::invalid_argument("make_exp_kernel: gamma must be positive");
  Vector mu(M);
  for (int i = 1; i <= M; ++i) mu[i - 1] = std::exp(-2.0 * gamma * i);
  return SpectralKernel(std::move(mu), SpectralKernel::Decay::Exponential, gamma);
}

/// Eigenvalues mu_i = i^{-2 alpha}, i = 1..M. Derivative cap follows the
/// convergence requirement m < alpha - 1/2.
inline SpectralKernel make_poly_kernel(double alpha, int M = 100000) {
  if (!(alpha > 0.5)) throw std::invalid_argument("make_poly_kernel: alpha must exceed 1/2");
  Vector mu(M);
  for (int i = 1; i <= M; ++i) mu[i - 1] = std::pow(static_cast<double>(i), -2.0 * alpha);
  const int cap = std::max(0, static_cast<int>(std::ceil(alpha - 0.5)) - 1);
  return SpectralKernel(std::move(mu), SpectralKernel::Decay::Polynomial, alpha, cap);
}

/// Same eigenfunctions, eigenvalues nu_i = mu_i / (lambda + mu_i).
inline SpectralKernel equivalent_kernel(const SpectralKernel& sk, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("equivalent_kernel: lambda must be positive");
  Vector nu = sk.eigenvalues().array() / (lambda + sk.eigenvalues().array());
  return SpectralKernel(std::move(nu), SpectralKernel::Decay::Generic, 0.0, sk.max_deriv_order());
}

namespace detail {

/// Tail of sum_{i>M} i^{2m} / (1 + lambda i^{2 alpha}) as an integral from
/// M + 1/2, expanded in powers of 1/(lambda x^{2 alpha}). Valid when the tail
/// converges (2 alpha - 2m > 1) and lambda (M+1/2)^{2 alpha} is large.
inline double poly_kappa_hat_tail(double alpha, int m, double lambda, double M) {
  if (2.0 * alpha - 2.0 * m <= 1.0) return 0.0;
  const double c = M + 0.5;
  const double big = lambda * std::pow(c, 2.0 * alpha);
  if (!(big > 2.0)) return 0.0;
  double total = 0.0;
  double sign = 1.0;
  for (int q = 1; q <= 60; ++q) {
    const double denom = 2.0 * q * alpha - 2.0 * m - 1.0;
    const double term = std::pow(lambda, -q) * std::pow(c, 2.0 * m + 1.0 - 2.0 * q * alpha) / denom;
    total += sign * term;
    if (term < 1e-16 * std::abs(total)) break;
    sign = -sign;
  }
  return total;
}

}  // namespace detail

/// kappa_hat_m^2 = sum_i i^{2m} mu_i / (lambda + mu_i), with an analytic tail
/// correction for polynomial-decay kernels when the tail converges.
inline double kappa_hat_sq(const SpectralKernel& sk, double lambda, int m) {
  const Vector& mu = sk.eigenvalues();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    acc += std::pow(static_cast<double>(i + 1), 2.0 * m) * mu[i] / (lambda + mu[i]);
  if (sk.decay() == SpectralKernel::Decay::Polynomial)
    acc += detail::poly_kappa_hat_tail(sk.decay_param(), m, lambda, static_cast<double>(mu.size()));
  return acc;
}

/// kappa_tilde_m^2 = sup_x sum_i mu_i/(lambda+mu_i) psi_i^(m)(x)^2, the sup
/// taken over a fixed 2001-point grid.
inline double kappa_tilde_sq(const SpectralKernel& sk, double lambda, int m, int grid_points = 2001) {
  const Vector& mu = sk.eigenvalues();
  Vector nu = mu.array() / (lambda + mu.array());
  double best = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double x = static_cast<double>(g) / (grid_points - 1);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double b = detail::fourier_basis(static_cast<int>(i) + 1, m, x);
      acc += nu[i] * b * b;
    }
    best = std::max(best, acc);
  }
  return best;
}

struct EffectiveDims {
  double kappa_tilde_sq = 0.0;
  double kappa_hat_sq = 0.0;
};

inline EffectiveDims effective_dimension(const SpectralKernel& sk, double lambda, int m) {
  return {kappa_tilde_sq(sk, lambda, m), kappa_hat_sq(sk, lambda, m)};
}

namespace detail {

inline double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

/// Empirical scaling-law check. For exponential decay the regression is
/// log kappa_hat_m^2 on log(-log lambda), expected slope 2m+1; for polynomial
/// decay it is log kappa_hat_m^2 on -log lambda, expected slope (2m+1)/(2 alpha).
inline double rate_check_effective_dim(SpectralKernel::Decay family, double param, int m,
                                       const std::vector<double>& lambdas, int truncation = 0) {
  if (lambdas.size() < 2) throw std::invalid_argument("rate_check_effective_dim: need >= 2 lambdas");
  SpectralKernel kernel = [&] {
    if (family == SpectralKernel::Decay::Exponential)
      return make_exp_kernel(param, truncation > 0 ? truncation : 5000);
    if (family == SpectralKernel::Decay::Polynomial) {
      // At the convergence boundary no tail correction exists; lean on a longer
      // truncation instead.
      const bool boundary = 2.0 * param - 2.0 * m <= 1.0;
      return make_poly_kernel(param, truncation > 0 ? truncation : (boundary ? 2000000 : 100000));
    }
    throw std::invalid_argument("rate_check_effective_dim: family must be Exponential or Polynomial");
  }();

  std::vector<double> xs, ys;
  for (double lambda : lambdas) {
    if (!(lambda > 0.0 && lambda < 1.0))
      throw std::invalid_argument("rate_check_effective_dim: lambdas must lie in (0,1)");
    const double k = kappa_hat_sq(kernel, lambda, m);
    xs.push_back(family == SpectralKernel::Decay::Exponential ? std::log(-std::log(lambda))
                                                              : -std::log(lambda));
    ys.push_back(std::log(k));
  }
  return detail::lsq_slope(xs, ys);
}

}  // namespace gpderiv
