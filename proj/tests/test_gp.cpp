#include <catch2/catch_amalgamated.hpp>

#include "gpderiv/gp.hpp"
#include "gpderiv/rng.hpp"
#include "oracles.hpp"

using namespace gpderiv;

namespace {

Dataset one_point() {
  Dataset d;
  d.x = Vector::Zero(1);
  d.y = Vector::Ones(1);
  return d;
}

}  // namespace

TEST_CASE("one-point system solves by hand") {
  // (K(0,0) + n lambda) alpha = y -> (1 + 1) alpha = 1
  auto model = fit(one_point(), KernelConfig::squared_exponential(), 1.0, 1.0);
  CHECK(model.alpha[0] == Catch::Approx(0.5).epsilon(1e-15));
  Vector grid(1);
  grid << 0.0;
  CHECK(posterior_mean_deriv(model, 0, grid)[0] == Catch::Approx(0.5).epsilon(1e-15));

  // cov = sigma2 (n lambda)^{-1} (1 - 1 * 1/2 * 1) = sigma2 / 2
  const double sigma2 = 0.37;
  auto model2 = fit(one_point(), KernelConfig::squared_exponential(), 1.0, sigma2);
  CHECK(posterior_cov_deriv(model2, 0, grid)(0, 0) == Catch::Approx(sigma2 / 2.0).epsilon(1e-14));
}

TEST_CASE("zero responses give the zero posterior") {
  Dataset d = oracle::random_dataset(8, 3);
  d.y.setZero();
  auto model = fit(d, KernelConfig::matern(2.5), 0.01, 1.0);
  CHECK(model.alpha.cwiseAbs().maxCoeff() == 0.0);
  Vector grid = Vector::LinSpaced(20, 0.0, 1.0);
  CHECK(posterior_mean_deriv(model, 0, grid).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("alpha matches a dense solve") {
  Dataset d = oracle::random_dataset(5, 5);
  const double lambda = 0.05;
  auto model = fit(d, KernelConfig::squared_exponential(), lambda, 1.0);
  Matrix K = gram(KernelConfig::squared_exponential(), d.x);
  Matrix A = K + 5.0 * lambda * Matrix::Identity(5, 5);
  Vector alpha = A.inverse() * d.y;
  CHECK((model.alpha - alpha).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("posterior equations match the textbook oracle") {
  for (auto cfg : {KernelConfig::squared_exponential(), KernelConfig::sobolev2(), KernelConfig::matern(3.5)}) {
    Dataset d = oracle::random_dataset(20, 7);
    const double lambda = 0.02, sigma2 = 0.3;
    auto model = fit(d, cfg, lambda, sigma2);
    Vector grid = Vector::LinSpaced(15, 0.05, 0.95);
    for (int k = 0; k <= std::min(cfg.max_deriv_order, 1); ++k) {
      auto ref = oracle::dense_posterior(d, *make_kernel(cfg), k, grid, lambda, sigma2);
      CHECK((posterior_mean_deriv(model, k, grid) - ref.mean).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((posterior_cov_deriv(model, k, grid) - ref.cov).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("interpolation limit") {
  Dataset d;
  d.x = Vector::LinSpaced(12, 0.0, 1.0);
  d.y = (3.0 * d.x.array()).sin();
  auto model = fit(d, KernelConfig::matern(4.5), 1e-8, 1.0);
  Vector mean = posterior_mean_deriv(model, 0, d.x);
  CHECK((mean - d.y).cwiseAbs().maxCoeff() <= 1e-4);

  const double sigma2 = 0.8;
  auto model2 = fit(d, KernelConfig::matern(4.5), 1e-8, sigma2);
  Matrix cov = posterior_cov_deriv(model2, 0, d.x);
  CHECK(cov.diagonal().maxCoeff() <= 1e-4 * sigma2);
}

TEST_CASE("covariance is symmetric as computed") {
  Dataset d = oracle::random_dataset(9, 13);
  auto model = fit(d, KernelConfig::squared_exponential(), 0.03, 0.5);
  Vector grid = Vector::LinSpaced(8, 0.0, 1.0);
  Matrix cov = posterior_cov_deriv(model, 1, grid);
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("derivative of the posterior mean chains across orders") {
  Dataset d = oracle::random_dataset(25, 17);
  auto model = fit(d, KernelConfig::squared_exponential(), 0.01, 0.2);
  Vector grid = Vector::LinSpaced(30, 0.1, 0.9);
  for (int k = 1; k <= 2; ++k) {
    Vector hi = posterior_mean_deriv(model, k, grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double h = 1e-4;
      const double plus = posterior_mean_deriv(model, k - 1, Vector::Constant(1, grid[i] + h))[0];
      const double minus = posterior_mean_deriv(model, k - 1, Vector::Constant(1, grid[i] - h))[0];
      const double fd = (plus - minus) / (2.0 * h);
      CHECK(std::abs(fd - hi[i]) <= 1e-3 * std::max(1.0, std::abs(hi[i])));
    }
  }
}

TEST_CASE("variance stays effectively nonnegative") {
  Dataset d = oracle::random_dataset(40, 19);
  auto model = fit(d, KernelConfig::matern(2.5), 1e-4, 0.1);
  Vector grid = Vector::LinSpaced(60, 0.0, 1.0);
  auto kernel = make_kernel(*model.config);
  for (int k = 0; k <= 2; ++k) {
    Matrix cov = posterior_cov_deriv(model, k, grid);
    const double prior_scale = model.sigma2 / (40.0 * model.lambda) * kernel->eval_deriv(k, k, 0.5, 0.5);
    CHECK(cov.diagonal().minCoeff() >= -1e-8 * prior_scale);
    // Schur-complement bound: posterior variance never exceeds the prior variance.
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double prior =
          model.sigma2 / (40.0 * model.lambda) * kernel->eval_deriv(k, k, grid[i], grid[i]);
      CHECK(cov(i, i) <= prior + 1e-10);
    }
  }
}

TEST_CASE("scaling responses by a power of two scales predictions exactly") {
  Dataset d = oracle::random_dataset(15, 23);
  Dataset d4 = d;
  d4.y *= 4.0;
  auto m1 = fit(d, KernelConfig::sobolev2(), 0.01, 1.0);
  auto m4 = fit(d4, KernelConfig::sobolev2(), 0.01, 1.0);
  Vector grid = Vector::LinSpaced(10, 0.0, 1.0);
  Vector a = posterior_mean_deriv(m1, 1, grid), b = posterior_mean_deriv(m4, 1, grid);
  CHECK((4.0 * a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heteroscedastic model") {
  Dataset d = oracle::random_dataset(12, 29);

  SECTION("requires obs_sd") {
    CHECK_THROWS_AS(fit(d, KernelConfig::sobolev2(), 0.01, 0.5, NoiseModel::Heteroscedastic),
                    std::invalid_argument);
  }

  SECTION("zero observational error reduces to the homoscedastic fit") {
    Dataset dz = d;
    dz.obs_sd = Vector::Zero(12);
    auto hom = fit(d, KernelConfig::sobolev2(), 0.01, 0.5);
    auto het = fit(dz, KernelConfig::sobolev2(), 0.01, 0.5, NoiseModel::Heteroscedastic);
    Vector grid = Vector::LinSpaced(10, 0.0, 1.0);
    CHECK((posterior_mean_deriv(hom, 1, grid) - posterior_mean_deriv(het, 1, grid)).cwiseAbs().maxCoeff() <=
          1e-10);
    CHECK((posterior_cov_deriv(hom, 1, grid) - posterior_cov_deriv(het, 1, grid)).cwiseAbs().maxCoeff() <=
          1e-10);
  }

  SECTION("matches a dense solve of the weighted system") {
    Dataset dw = d;
    Rng rng(31);
    Vector sd(12);
    for (int i = 0; i < 12; ++i) sd[i] = 0.1 + 0.4 * rng.uniform();
    dw.obs_sd = sd;
    const double lambda = 0.03, sigma2 = 0.2;
    auto het = fit(dw, KernelConfig::sobolev2(), lambda, sigma2, NoiseModel::Heteroscedastic);
    Matrix K = gram(KernelConfig::sobolev2(), dw.x);
    Matrix A = K;
    A.diagonal() += 12.0 * lambda / sigma2 * (sd.array().square() + sigma2).matrix();
    Vector alpha = A.inverse() * dw.y;
    CHECK((het.alpha - alpha).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("factorization failure surfaces the jitter ladder") {
  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  try {
    detail::robust_llt(bad);
    FAIL("expected factorization_error");
  } catch (const factorization_error& e) {
    CHECK(e.jitters_tried.size() == 5);
  }
}

TEST_CASE("fit input validation") {
  CHECK_THROWS_AS(fit(one_point(), KernelConfig::squared_exponential(), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit(one_point(), KernelConfig::squared_exponential(), 1.0, 0.0), std::invalid_argument);
  Dataset bad;
  bad.x = Vector::Zero(2);
  bad.y = Vector::Zero(3);
  CHECK_THROWS_AS(fit(bad, KernelConfig::squared_exponential(), 1.0, 1.0), std::invalid_argument);
}
