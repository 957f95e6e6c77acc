#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <utility>
#include <vector>

#include "gpderiv/types.hpp"

namespace gpderiv {

enum class KernelFamily { Matern, SquaredExponential, Sobolev2 };

inline const char* kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Matern: return "matern";
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Sobolev2: return "sobolev";
  }
  return "?";
}

/// Default derivative-order cap for the squared exponential kernel, which is
/// smooth to all orders.
inline constexpr int kSeDerivCap = 10;

struct KernelConfig {
  KernelFamily family = KernelFamily::SquaredExponential;
  double nu = 0.0;  // Matern smoothness, unused otherwise
  int max_deriv_order = kSeDerivCap;

  static KernelConfig matern(double nu) {
    KernelConfig cfg;
    cfg.family = KernelFamily::Matern;
    cfg.nu = nu;
    cfg.max_deriv_order = static_cast<int>(std::ceil(nu)) - 1;
    return cfg;
  }
  static KernelConfig squared_exponential(int max_order = kSeDerivCap) {
    KernelConfig cfg;
    cfg.family = KernelFamily::SquaredExponential;
    cfg.max_deriv_order = max_order;
    return cfg;
  }
  static KernelConfig sobolev2() {
    KernelConfig cfg;
    cfg.family = KernelFamily::Sobolev2;
    cfg.max_deriv_order = 1;
    return cfg;
  }

  void validate() const {
    switch (family) {
      case KernelFamily::Matern:
        if (!(nu > 0.5)) throw std::invalid_argument("Matern kernel requires nu > 1/2");
        if (max_deriv_order > static_cast<int>(std::ceil(nu)) - 1)
          throw std::invalid_argument("Matern kernel of smoothness nu supports orders k <= ceil(nu)-1");
        break;
      case KernelFamily::Sobolev2:
        if (max_deriv_order > 1)
          throw std::invalid_argument("second-order Sobolev kernel supports derivative orders k <= 1");
        break;
      case KernelFamily::SquaredExponential:
        break;
    }
    if (max_deriv_order < 0) throw std::invalid_argument("max_deriv_order must be nonnegative");
  }
};

/// Covariance kernel with exact mixed partial derivatives
/// d^k1/dx^k1 d^k2/dx2^k2 K(x, x2) up to the supported order.
class Kernel {
 public:
  virtual ~Kernel() = default;

  virtual int max_deriv_order() const = 0;
  virtual double eval_deriv(int k1, int k2, double x, double x2) const = 0;

  double eval(double x, double x2) const { return eval_deriv(0, 0, x, x2); }

  /// K(X, X), symmetric.
  virtual Matrix gram(const Vector& X) const {
    const Eigen::Index n = X.size();
    Matrix G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        G(i, j) = eval_deriv(0, 0, X[i], X[j]);
        G(j, i) = G(i, j);
      }
    }
    return G;
  }

  /// K_{k0}(grid, X), rows indexed by grid points.
  virtual Matrix cross_gram(int k, const Vector& grid, const Vector& X) const {
    require_order(k);
    Matrix C(grid.size(), X.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      for (Eigen::Index j = 0; j < X.size(); ++j) C(i, j) = eval_deriv(k, 0, grid[i], X[j]);
    return C;
  }

  /// K_{kk}(pts, pts), symmetric by transposition symmetry of mixed partials.
  virtual Matrix deriv_gram(int k, const Vector& pts) const {
    require_order(k);
    const Eigen::Index m = pts.size();
    Matrix G(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        G(i, j) = eval_deriv(k, k, pts[i], pts[j]);
        G(j, i) = G(i, j);
      }
    }
    return G;
  }

 protected:
  void require_order(int k) const {
    if (k < 0) throw order_error("derivative order must be nonnegative");
    if (k > max_deriv_order()) {
      std::ostringstream os;
      os << "derivative order " << k << " exceeds kernel cap " << max_deriv_order();
      throw order_error(os.str());
    }
  }
};

namespace detail {

// Physicists' Hermite polynomial H_m(u).
inline double hermite(int m, double u) {
  if (m == 0) return 1.0;
  double hm1 = 1.0, h = 2.0 * u;
  for (int n = 1; n < m; ++n) {
    double next = 2.0 * u * h - 2.0 * n * hm1;
    hm1 = h;
    h = next;
  }
  return h;
}

}  // namespace detail

/// K(x,x') = exp(-(x-x')^2); all mixed partials via Hermite polynomials.
class SquaredExponentialKernel final : public Kernel {
 public:
  explicit SquaredExponentialKernel(int max_order = kSeDerivCap) : cap_(max_order) {}

  int max_deriv_order() const override { return cap_; }

  double eval_deriv(int k1, int k2, double x, double x2) const override {
    require_order(k1);
    require_order(k2);
    const double u = x - x2;
    const int m = k1 + k2;
    const double sign = (k1 % 2 == 0) ? 1.0 : -1.0;
    return sign * detail::hermite(m, u) * std::exp(-u * u);
  }

 private:
  int cap_;
};

/// K(x,x') = 1 + x x' + min^2 (3 max - min) / 6, supporting first derivatives.
class Sobolev2Kernel final : public Kernel {
 public:
  int max_deriv_order() const override { return 1; }

  double eval_deriv(int k1, int k2, double x, double x2) const override {
    require_order(k1);
    require_order(k2);
    if (k1 == 0 && k2 == 0) {
      const double lo = std::min(x, x2), hi = std::max(x, x2);
      return 1.0 + x * x2 + lo * lo * (3.0 * hi - lo) / 6.0;
    }
    if (k1 == 1 && k2 == 1) return 1.0 + std::min(x, x2);
    if (k1 == 0 && k2 == 1) return d_first(x2, x);
    return d_first(x, x2);  // (1, 0)
  }

 private:
  // d/dx K(x, x2); continuous across the diagonal.
  static double d_first(double x, double x2) {
    if (x <= x2) return x2 + x * x2 - 0.5 * x * x;
    return x2 + 0.5 * x2 * x2;
  }
};

namespace detail {

// Coefficients of the degree-p polynomial P with K_matern(r) = P(r) exp(-c r)
// for half-integer nu = p + 1/2, c = sqrt(2 nu).
inline std::vector<double> matern_poly_base(int p, double c) {
  std::vector<double> coeff(p + 1, 0.0);
  for (int t = 0; t <= p; ++t) {
    double lg = std::lgamma(p + 1.0) - std::lgamma(2.0 * p + 1.0) + std::lgamma(2.0 * p - t + 1.0) -
                std::lgamma(p - t + 1.0) - std::lgamma(t + 1.0);
    coeff[t] = std::exp(lg + t * std::log(2.0 * c));
  }
  return coeff;
}

// Q_{m+1} = Q_m' - c Q_m, the polynomial factor of the m-th radial derivative.
inline std::vector<double> matern_poly_step(const std::vector<double>& q, double c) {
  std::vector<double> next(q.size(), 0.0);
  for (std::size_t t = 0; t + 1 < q.size(); ++t) next[t] = (t + 1.0) * q[t + 1];
  for (std::size_t t = 0; t < q.size(); ++t) next[t] -= c * q[t];
  return next;
}

inline double poly_eval(const std::vector<double>& coeff, double r) {
  double v = 0.0;
  for (std::size_t t = coeff.size(); t-- > 0;) v = v * r + coeff[t];
  return v;
}

}  // namespace detail

/// Matern kernel K(x,x') = 2^{1-nu}/Gamma(nu) (sqrt(2 nu) r)^nu B_nu(sqrt(2 nu) r),
/// r = |x - x'|, with B_nu the modified Bessel function of the second kind.
///
/// Half-integer nu reduces to polynomial-times-exponential form, which is
/// differentiated symbolically. Other nu differentiate the Bessel form through
/// the recurrence B_nu'(z) = -(B_{nu-1}(z) + B_{nu+1}(z))/2; near the diagonal
/// that representation cancels catastrophically, so small radii switch to the
/// even Taylor expansion whose coefficients are spectral moments
///   g^(2t)(0) = (-1)^t (2 nu)^t Gamma(t+1/2) Gamma(nu-t) / (Gamma(1/2) Gamma(nu)).
class MaternKernel final : public Kernel {
 public:
  explicit MaternKernel(double nu) : nu_(nu), c_(std::sqrt(2.0 * nu)) {
    if (!(nu > 0.5)) throw std::invalid_argument("Matern kernel requires nu > 1/2");
    cap_ = static_cast<int>(std::ceil(nu)) - 1;
    const int max_m = 2 * cap_;

    const double two_nu = 2.0 * nu_;
    half_integer_ = std::abs(two_nu - std::round(two_nu)) < 1e-12 &&
                    std::abs(nu_ - std::round(nu_)) > 1e-12;

    // Even-order derivatives at r = 0 (finite for 2t < 2 nu).
    const bool integer_nu = std::abs(nu_ - std::round(nu_)) < 1e-12;
    t_max_ = integer_nu ? static_cast<int>(std::round(nu_)) - 1 : static_cast<int>(std::floor(nu_));
    moments_.resize(t_max_ + 1);
    for (int t = 0; t <= t_max_; ++t) {
      double lg = t * std::log(2.0 * nu_) + std::lgamma(t + 0.5) + std::lgamma(nu_ - t) -
                  std::lgamma(0.5) - std::lgamma(nu_);
      moments_[t] = ((t % 2 == 0) ? 1.0 : -1.0) * std::exp(lg);
    }

    if (half_integer_) {
      const int p = static_cast<int>(std::round(nu_ - 0.5));
      polys_.reserve(max_m + 1);
      polys_.push_back(detail::matern_poly_base(p, c_));
      for (int m = 0; m < max_m; ++m) polys_.push_back(detail::matern_poly_step(polys_.back(), c_));
    } else {
      // Terms coeff * z^{nu-d} * B_{nu+j}(z) for the m-th z-derivative of z^nu B_nu(z).
      bessel_terms_.resize(max_m + 1);
      std::map<std::pair<int, int>, long double> cur;
      cur[{0, 0}] = 1.0L;
      auto snapshot = [&](int m) {
        auto& out = bessel_terms_[m];
        for (const auto& [key, a] : cur)
          if (a != 0.0L) out.push_back({a, key.first, key.second});
      };
      snapshot(0);
      for (int m = 1; m <= max_m; ++m) {
        std::map<std::pair<int, int>, long double> next;
        for (const auto& [key, a] : cur) {
          const auto [d, j] = key;
          next[{d + 1, j}] += a * static_cast<long double>(nu_ - d);
          next[{d, j - 1}] -= a / 2.0L;
          next[{d, j + 1}] -= a / 2.0L;
        }
        cur = std::move(next);
        snapshot(m);
      }
      norm_ = std::exp((1.0 - nu_) * std::log(2.0) - std::lgamma(nu_));
      taylor_switch_.resize(max_m + 1);
      for (int m = 0; m <= max_m; ++m)
        taylor_switch_[m] = std::pow(2.2e-16, 1.0 / (2.0 * nu_ + m));
    }
  }

  double nu() const { return nu_; }
  int max_deriv_order() const override { return cap_; }

  double eval_deriv(int k1, int k2, double x, double x2) const override {
    require_order(k1);
    require_order(k2);
    const double u = x - x2;
    const double g = radial_deriv(k1 + k2, u);
    return (k2 % 2 == 0) ? g : -g;
  }

 private:
  struct BesselTerm {
    long double coeff;
    int d;  // power is nu - d
    int j;  // order is nu + j
  };

  // m-th derivative of g(u) = K(|u|) as a function of the signed gap u.
  double radial_deriv(int m, double u) const {
    const double r = std::abs(u);
    if (half_integer_) {
      if (r == 0.0) return (m % 2 == 0) ? polys_[m][0] : 0.0;
      const double v = detail::poly_eval(polys_[m], r) * std::exp(-c_ * r);
      return (u < 0.0 && m % 2 == 1) ? -v : v;
    }
    const double z = c_ * r;
    if (z < taylor_switch_[m]) return taylor_deriv(m, u);
    long double acc = 0.0L;
    for (const auto& term : bessel_terms_[m])
      acc += term.coeff * std::pow(static_cast<long double>(z), static_cast<long double>(nu_ - term.d)) *
             std::cyl_bessel_kl(std::abs(static_cast<long double>(nu_ + term.j)),  // B_{-a} = B_a
                                static_cast<long double>(z));
    double v = static_cast<double>(acc) * norm_ * std::pow(c_, m);
    return (u < 0.0 && m % 2 == 1) ? -v : v;
  }

  // Even Taylor expansion around u = 0 from the spectral moments.
  double taylor_deriv(int m, double u) const {
    double acc = 0.0;
    for (int t = (m + 1) / 2; t <= t_max_; ++t) {
      double term = moments_[t];
      for (int q = 0; q < 2 * t - m; ++q) term *= u / (q + 1.0);
      acc += term;
    }
    return acc;
  }

  double nu_, c_, norm_ = 1.0;
  int cap_ = 0, t_max_ = 0;
  bool half_integer_ = false;
  std::vector<std::vector<double>> polys_;
  std::vector<std::vector<BesselTerm>> bessel_terms_;
  std::vector<double> taylor_switch_;
  std::vector<double> moments_;
};

inline std::shared_ptr<const Kernel> make_kernel(const KernelConfig& cfg) {
  cfg.validate();
  switch (cfg.family) {
    case KernelFamily::Matern: return std::make_shared<MaternKernel>(cfg.nu);
    case KernelFamily::SquaredExponential:
      return std::make_shared<SquaredExponentialKernel>(cfg.max_deriv_order);
    case KernelFamily::Sobolev2: return std::make_shared<Sobolev2Kernel>();
  }
  throw std::invalid_argument("unknown kernel family");
}

inline double eval(const KernelConfig& cfg, double x, double x2) {
  return make_kernel(cfg)->eval(x, x2);
}

inline double eval_deriv(const KernelConfig& cfg, int k1, int k2, double x, double x2) {
  return make_kernel(cfg)->eval_deriv(k1, k2, x, x2);
}

inline Matrix gram(const KernelConfig& cfg, const Vector& X) { return make_kernel(cfg)->gram(X); }

inline Matrix cross_gram(const KernelConfig& cfg, int k, const Vector& grid, const Vector& X) {
  return make_kernel(cfg)->cross_gram(k, grid, X);
}

}  // namespace gpderiv
