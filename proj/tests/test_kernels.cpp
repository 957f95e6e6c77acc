#include <catch2/catch_amalgamated.hpp>

#include "gpderiv/kernels.hpp"
#include "gpderiv/rng.hpp"
#include "oracles.hpp"

using namespace gpderiv;

namespace {

std::vector<KernelConfig> all_families() {
  return {KernelConfig::matern(2.5), KernelConfig::matern(3.0), KernelConfig::matern(4.5),
          KernelConfig::matern(7.0), KernelConfig::squared_exponential(4), KernelConfig::sobolev2()};
}

}  // namespace

TEST_CASE("kernel point values") {
  CHECK(eval(KernelConfig::squared_exponential(), 0.0, 0.0) == 1.0);
  CHECK(eval(KernelConfig::sobolev2(), 0.0, 0.0) == 1.0);
  CHECK(eval(KernelConfig::sobolev2(), 1.0, 1.0) == Catch::Approx(7.0 / 3.0).epsilon(1e-14));
  for (double x : {0.0, 0.31, 0.77, 1.0}) {
    CHECK(eval(KernelConfig::matern(2.5), x, x) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(eval(KernelConfig::matern(3.0), x, x) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("squared exponential derivative identities") {
  const auto cfg = KernelConfig::squared_exponential();
  for (double x : {0.0, 0.4, 0.9}) {
    CHECK(eval_deriv(cfg, 1, 0, x, x) == 0.0);
    CHECK(eval_deriv(cfg, 1, 1, x, x) == Catch::Approx(2.0).epsilon(1e-14));
  }
  CHECK(eval_deriv(cfg, 0, 0, 0.3, 0.7) == eval(cfg, 0.3, 0.7));
}

TEST_CASE("matern diagonal derivative values") {
  // Frozen from the spectral-moment formula (2 nu)^t Gamma(t+1/2) Gamma(nu-t)
  // / (Gamma(1/2) Gamma(nu)); nu=2.5 reproduces the classic 5/3.
  CHECK(eval_deriv(KernelConfig::matern(2.5), 1, 1, 0.4, 0.4) == Catch::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(eval_deriv(KernelConfig::matern(3.0), 1, 1, 0.4, 0.4) == Catch::Approx(1.5).epsilon(1e-12));
  CHECK(eval_deriv(KernelConfig::matern(2.5), 1, 0, 0.4, 0.4) == 0.0);
}

TEST_CASE("gram basics") {
  Vector one(1);
  one << 0.0;
  CHECK(gram(KernelConfig::squared_exponential(), one)(0, 0) == 1.0);
  CHECK(cross_gram(KernelConfig::squared_exponential(), 0, one, one)(0, 0) == 1.0);

  Rng rng(11);
  Vector x(5);
  for (int i = 0; i < 5; ++i) x[i] = rng.uniform();
  for (const auto& cfg : all_families()) {
    Matrix G = gram(cfg, x);
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("gram psd over 50 points") {
  Rng rng(17);
  Vector x(50);
  for (int i = 0; i < 50; ++i) x[i] = rng.uniform();
  for (const auto& cfg : all_families()) {
    Matrix G = gram(cfg, x);
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * G.trace() / 50.0);
  }
}

TEST_CASE("symmetry is exact") {
  Rng rng(23);
  for (const auto& cfg : all_families()) {
    auto kernel = make_kernel(cfg);
    for (int rep = 0; rep < 50; ++rep) {
      const double x = rng.uniform(), x2 = rng.uniform();
      CHECK(kernel->eval(x, x2) == kernel->eval(x2, x));
      for (int k1 = 0; k1 <= std::min(kernel->max_deriv_order(), 3); ++k1)
        for (int k2 = 0; k2 <= std::min(kernel->max_deriv_order(), 3); ++k2)
          CHECK(kernel->eval_deriv(k1, k2, x, x2) == kernel->eval_deriv(k2, k1, x2, x));
    }
  }
}

namespace {

// Chained finite-difference consistency: each order is checked against a
// first-order central difference of the order below, which keeps the oracle
// numerically meaningful at high derivative orders.
void check_fd_chain(const Kernel& kernel, double min_gap, double tol) {
  Rng rng(101);
  const int cap = std::min(kernel.max_deriv_order(), 5);
  int checked = 0;
  while (checked < 100) {
    double x = rng.uniform(), x2 = rng.uniform();
    if (std::abs(x - x2) < min_gap) continue;
    ++checked;
    for (int k1 = 1; k1 <= cap; ++k1) {
      for (int k2 = 0; k2 <= cap; ++k2) {
        const double exact = kernel.eval_deriv(k1, k2, x, x2);
        const double fd = oracle::central_diff(
            [&](double t) { return kernel.eval_deriv(k1 - 1, k2, t, x2); }, x);
        CHECK(std::abs(fd - exact) <= tol * std::max({std::abs(exact), std::abs(fd), 1.0}));
      }
    }
  }
}

}  // namespace

TEST_CASE("finite-difference consistency, all supported orders") {
  check_fd_chain(SquaredExponentialKernel(5), 0.0, 1e-4);
  check_fd_chain(Sobolev2Kernel(), 1e-3, 1e-4);
  check_fd_chain(MaternKernel(2.5), 0.05, 1e-4);
  check_fd_chain(MaternKernel(3.5), 0.05, 1e-4);
  check_fd_chain(MaternKernel(3.0), 0.2, 1e-4);   // integer order: Bessel recurrences
  check_fd_chain(MaternKernel(5.0), 0.2, 1e-4);
  check_fd_chain(MaternKernel(2.3), 0.2, 1e-4);   // off-grid smoothness
}

TEST_CASE("direct high-order finite differences of eval") {
  // Mixed second differences of the kernel itself, meaningful up to k1+k2 <= 3.
  Rng rng(7);
  for (const auto& cfg : all_families()) {
    auto kernel = make_kernel(cfg);
    const int cap = std::min(kernel->max_deriv_order(), 1);
    for (int rep = 0; rep < 20; ++rep) {
      double x = rng.uniform(), x2 = rng.uniform();
      if (cfg.family == KernelFamily::Matern && std::abs(x - x2) < 0.1) continue;
      if (cfg.family == KernelFamily::Sobolev2 && std::abs(x - x2) < 1e-3) continue;
      for (int k1 = 0; k1 <= cap; ++k1) {
        for (int k2 = 0; k2 <= cap; ++k2) {
          std::function<double(double, double)> f = [&](double a, double b) { return kernel->eval(a, b); };
          double fd;
          if (k1 == 0 && k2 == 0) {
            fd = f(x, x2);
          } else if (k1 == 1 && k2 == 0) {
            fd = oracle::central_diff([&](double t) { return f(t, x2); }, x);
          } else if (k1 == 0 && k2 == 1) {
            fd = oracle::central_diff([&](double t) { return f(x, t); }, x2);
          } else {
            fd = oracle::central_diff(
                [&](double t) { return oracle::central_diff([&](double s) { return f(s, t); }, x); }, x2);
          }
          const double exact = kernel->eval_deriv(k1, k2, x, x2);
          CHECK(std::abs(fd - exact) <= 2e-4 * std::max(std::abs(exact), 1.0));
        }
      }
    }
  }
}

TEST_CASE("matern small-gap evaluation stays close to the polynomial route") {
  // Half-integer nu has an exact representation at every radius; integer nu
  // must hand off smoothly between the Bessel and Taylor branches.
  MaternKernel exact_side(2.5);
  MaternKernel bessel_side(3.0);
  for (double gap : {1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05}) {
    const double v = bessel_side.eval_deriv(1, 1, 0.5, 0.5 + gap);
    const double fd = oracle::central_diff(
        [&](double t) { return bessel_side.eval_deriv(0, 1, t, 0.5 + gap); }, 0.5, 1e-5);
    CHECK(std::abs(v - fd) <= 1e-3 * std::max(1.0, std::abs(v)));
    (void)exact_side;
  }
}

TEST_CASE("order errors") {
  CHECK_THROWS_AS(eval_deriv(KernelConfig::sobolev2(), 2, 0, 0.2, 0.4), order_error);
  CHECK_THROWS_AS(eval_deriv(KernelConfig::matern(2.5), 3, 0, 0.2, 0.4), order_error);
  CHECK_THROWS_AS(eval_deriv(KernelConfig::squared_exponential(2), 0, 3, 0.2, 0.4), order_error);
  CHECK_THROWS_AS(cross_gram(KernelConfig::sobolev2(), 2, Vector::Zero(1), Vector::Zero(1)), order_error);
  CHECK_THROWS_AS(KernelConfig::matern(0.4).validate(), std::invalid_argument);
}

TEST_CASE("matern derivative cap follows smoothness") {
  CHECK(KernelConfig::matern(2.0).max_deriv_order == 1);
  CHECK(KernelConfig::matern(2.5).max_deriv_order == 2);
  CHECK(KernelConfig::matern(10.0).max_deriv_order == 9);
  for (double nu = 2.0; nu <= 10.0; nu += 0.5) CHECK_NOTHROW(make_kernel(KernelConfig::matern(nu)));
}
