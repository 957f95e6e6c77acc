#pragma once

#include <memory>
#include <optional>
#include <sstream>
#include <utility>

#include "gpderiv/kernels.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

/// Gaussian posterior of the k-th derivative on an evaluation grid.
struct DerivPosterior {
  int k = 0;
  Vector grid;
  Vector mean;
  Matrix cov;
};

namespace detail {

/// Cholesky with jitter escalation: start at 1e-10 * mean(diag), multiply by 10
/// up to 1e-6 * mean(diag), then give up.
inline std::pair<Eigen::LLT<Matrix>, double> robust_llt(Matrix A) {
  const double mean_diag = A.diagonal().cwiseAbs().mean();
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) return {std::move(llt), 0.0};
  std::vector<double> tried;
  for (int level = 0; level < 5; ++level) {
    const double jitter = 1e-10 * scale * std::pow(10.0, level);
    tried.push_back(jitter);
    Matrix Aj = A + jitter * Matrix::Identity(A.rows(), A.cols());
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
  }
  std::ostringstream os;
  os << "Cholesky factorization failed after jitter escalation (tried " << tried.size() << " levels up to "
     << (tried.empty() ? 0.0 : tried.back()) << ")";
  throw factorization_error(os.str(), tried);
}

}  // namespace detail

/// Fitted plug-in GP: prior f ~ GP(0, sigma2 (n lambda)^{-1} K), posterior mean
/// weights alpha solved against the regularized Gram system.
struct FittedGP {
  Dataset data;
  std::shared_ptr<const Kernel> kernel;
  std::optional<KernelConfig> config;  // present when built from a parametric family
  double lambda = 0.0;
  double sigma2 = 0.0;
  NoiseModel noise_model = NoiseModel::Homoscedastic;
  Eigen::LLT<Matrix> factor;
  Vector alpha;
  double jitter = 0.0;  // applied to the system matrix, if any
};

/// Homoscedastic: factors K(X,X) + n lambda I.
/// Heteroscedastic: factors K(X,X) + n lambda sigma^{-2} D with
/// D = diag(obs_sd_i^2 + sigma2); reduces to the homoscedastic system when all
/// obs_sd are zero.
inline FittedGP fit(const Dataset& data, std::shared_ptr<const Kernel> kernel, double lambda, double sigma2,
                    NoiseModel noise_model = NoiseModel::Homoscedastic) {
  data.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("fit: lambda must be positive");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("fit: sigma2 must be positive");
  if (noise_model == NoiseModel::Heteroscedastic && !data.obs_sd)
    throw std::invalid_argument("fit: heteroscedastic noise model requires obs_sd");

  const auto n = data.size();
  Matrix A = kernel->gram(data.x);
  const double nl = static_cast<double>(n) * lambda;
  if (noise_model == NoiseModel::Homoscedastic) {
    A.diagonal().array() += nl;
  } else {
    A.diagonal().array() += nl / sigma2 * (data.obs_sd->array().square() + sigma2);
  }

  FittedGP result;
  result.data = data;
  result.kernel = std::move(kernel);
  result.lambda = lambda;
  result.sigma2 = sigma2;
  result.noise_model = noise_model;
  auto [llt, jitter] = detail::robust_llt(std::move(A));
  result.factor = std::move(llt);
  result.jitter = jitter;
  result.alpha = result.factor.solve(data.y);
  return result;
}

inline FittedGP fit(const Dataset& data, const KernelConfig& config, double lambda, double sigma2,
                    NoiseModel noise_model = NoiseModel::Homoscedastic) {
  FittedGP result = fit(data, make_kernel(config), lambda, sigma2, noise_model);
  result.config = config;
  return result;
}

/// Posterior mean of f^(k) on the grid: K_{k0}(grid, X) alpha.
inline Vector posterior_mean_deriv(const FittedGP& fit, int k, const Vector& grid) {
  return fit.kernel->cross_gram(k, grid, fit.data.x) * fit.alpha;
}

/// Posterior covariance of f^(k) on the grid:
/// sigma2 (n lambda)^{-1} { K_kk(grid,grid) - K_k0(grid,X) A^{-1} K_0k(X,grid) }.
inline Matrix posterior_cov_deriv(const FittedGP& fit, int k, const Vector& grid) {
  const double nl = static_cast<double>(fit.data.size()) * fit.lambda;
  Matrix C = fit.kernel->cross_gram(k, grid, fit.data.x);
  Matrix cov = fit.kernel->deriv_gram(k, grid) - C * fit.factor.solve(C.transpose());
  cov *= fit.sigma2 / nl;
  cov = ((cov + cov.transpose()) / 2.0).eval();
  return cov;
}

inline DerivPosterior deriv_posterior(const FittedGP& fit, int k, const Vector& grid) {
  DerivPosterior post;
  post.k = k;
  post.grid = grid;
  post.mean = posterior_mean_deriv(fit, k, grid);
  post.cov = posterior_cov_deriv(fit, k, grid);
  return post;
}

}  // namespace gpderiv
