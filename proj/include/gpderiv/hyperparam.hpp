#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gpderiv/gp.hpp"
#include "gpderiv/kernels.hpp"
#include "gpderiv/rng.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

/// 40 logarithmically spaced regularization candidates on [1e-8, 1].
inline std::vector<double> default_lambda_grid(int points = 40, double lo = 1e-8, double hi = 1.0) {
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / (points - 1);
  for (int i = 0; i < points; ++i) grid[i] = std::exp(std::log(lo) + i * step);
  return grid;
}

namespace detail {

/// One eigendecomposition of K(X,X) serves every (lambda, sigma2) query:
/// marginal likelihood, MMLE, and leave-one-out residuals are all spectral
/// functions of the Gram matrix.
struct GramEigen {
  Vector evals;  // eigenvalues of K(X,X), ascending
  Matrix vecs;
  Vector yt;  // rotated responses
  Eigen::Index n;

  GramEigen(const Matrix& gram, const Vector& y) : n(gram.rows()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
      throw factorization_error("eigendecomposition of the Gram matrix failed", {});
    evals = es.eigenvalues();
    vecs = es.eigenvectors();
    yt = vecs.transpose() * y;
  }

  bool feasible(double lambda) const { return evals[0] + n * lambda > 0.0; }

  double mmle_sigma2(double lambda) const {
    const double nl = n * lambda;
    double quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) quad += yt[i] * yt[i] / (evals[i] + nl);
    return lambda * quad;
  }

  double log_marginal(double lambda, double sigma2) const {
    const double nl = n * lambda;
    double logdet = 0.0, quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = evals[i] / nl + 1.0;
      logdet += std::log(c);
      quad += yt[i] * yt[i] / c;
    }
    return -0.5 * (n * std::log(2.0 * M_PI * sigma2) + logdet + quad / sigma2);
  }

  /// Leave-one-out residuals via the smoother identity: r_i = alpha_i / (A^{-1})_{ii}
  /// with A = K + n lambda I, equivalent to (y_i - yhat_i) / (1 - H_ii).
  Vector loo_residuals(double lambda) const {
    const double nl = n * lambda;
    Vector alpha = vecs * ((yt.array() / (evals.array() + nl)).matrix());
    Vector residuals(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double aii = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) aii += vecs(i, j) * vecs(i, j) / (evals[j] + nl);
      // H_ii = 1 - n lambda (A^{-1})_{ii}
      if (nl * aii <= 1e-12) throw std::runtime_error("leave-one-out smoother has leverage H_ii >= 1 - 1e-12");
      residuals[i] = alpha[i] / aii;
    }
    return residuals;
  }
};

}  // namespace detail

/// MMLE of the noise variance at fixed lambda: lambda Y^T [K + n lambda I]^{-1} Y.
inline double mmle_sigma2(const Dataset& data, std::shared_ptr<const Kernel> kernel, double lambda) {
  data.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("mmle_sigma2: lambda must be positive");
  Matrix A = kernel->gram(data.x);
  A.diagonal().array() += static_cast<double>(data.size()) * lambda;
  auto [llt, jitter] = detail::robust_llt(std::move(A));
  (void)jitter;
  return lambda * data.y.dot(llt.solve(data.y));
}

inline double mmle_sigma2(const Dataset& data, const KernelConfig& config, double lambda) {
  return mmle_sigma2(data, make_kernel(config), lambda);
}

/// Log density of Y under the evidence model Y|X ~ N(0, sigma2 (n lambda)^{-1} K + sigma2 I),
/// computed through one factorization of (n lambda)^{-1} K + I.
inline double log_marginal(const Dataset& data, std::shared_ptr<const Kernel> kernel, double lambda,
                           double sigma2) {
  data.validate();
  if (!(lambda > 0.0 && sigma2 > 0.0))
    throw std::invalid_argument("log_marginal: hyperparameters must be positive");
  const auto n = data.size();
  Matrix C = kernel->gram(data.x) / (static_cast<double>(n) * lambda);
  C.diagonal().array() += 1.0;
  auto [llt, jitter] = detail::robust_llt(std::move(C));
  (void)jitter;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = data.y.dot(llt.solve(data.y));
  return -0.5 * (n * std::log(2.0 * M_PI * sigma2) + logdet + quad / sigma2);
}

inline double log_marginal(const Dataset& data, const KernelConfig& config, double lambda, double sigma2) {
  return log_marginal(data, make_kernel(config), lambda, sigma2);
}

/// Heteroscedastic evidence: Y|X ~ N(0, sigma2 (n lambda)^{-1} K + D) with
/// D = diag(obs_sd_i^2 + sigma2).
inline double log_marginal_hetero(const Dataset& data, std::shared_ptr<const Kernel> kernel, double lambda,
                                  double sigma2) {
  data.validate();
  if (!data.obs_sd) throw std::invalid_argument("log_marginal_hetero: obs_sd required");
  if (!(lambda > 0.0 && sigma2 > 0.0))
    throw std::invalid_argument("log_marginal_hetero: hyperparameters must be positive");
  const auto n = data.size();
  Matrix C = kernel->gram(data.x) * (sigma2 / (static_cast<double>(n) * lambda));
  C.diagonal() += (data.obs_sd->array().square() + sigma2).matrix();
  auto [llt, jitter] = detail::robust_llt(std::move(C));
  (void)jitter;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = data.y.dot(llt.solve(data.y));
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + quad);
}

struct EvidenceResult {
  double lambda = 0.0;
  double sigma2 = 0.0;
  double log_marginal = -std::numeric_limits<double>::infinity();
};

/// Profile the noise variance by MMLE at each grid lambda and keep the evidence
/// maximizer; ties break toward the larger (more regularized) lambda.
inline EvidenceResult optimize_evidence(const Dataset& data, std::shared_ptr<const Kernel> kernel,
                                        std::vector<double> lambda_grid) {
  data.validate();
  if (lambda_grid.empty()) throw std::invalid_argument("optimize_evidence: empty lambda grid");
  std::sort(lambda_grid.begin(), lambda_grid.end());
  detail::GramEigen spectrum(kernel->gram(data.x), data.y);

  EvidenceResult best;
  bool any = false;
  for (double lambda : lambda_grid) {
    if (!(lambda > 0.0) || !spectrum.feasible(lambda)) continue;
    double s2 = std::max(spectrum.mmle_sigma2(lambda), 1e-300);
    double lm = spectrum.log_marginal(lambda, s2);
    if (!std::isfinite(lm)) continue;
    if (!any || lm >= best.log_marginal) {
      best = {lambda, s2, lm};
      any = true;
    }
  }
  if (!any)
    throw factorization_error("optimize_evidence: every grid point failed", {});
  return best;
}

inline EvidenceResult optimize_evidence(const Dataset& data, const KernelConfig& config,
                                        std::vector<double> lambda_grid = default_lambda_grid()) {
  return optimize_evidence(data, make_kernel(config), std::move(lambda_grid));
}

/// Joint grid search for the heteroscedastic model, where no closed-form
/// profile of sigma2 exists.
inline EvidenceResult optimize_evidence_hetero(const Dataset& data, std::shared_ptr<const Kernel> kernel,
                                               const std::vector<double>& lambda_grid,
                                               const std::vector<double>& sigma2_grid) {
  EvidenceResult best;
  bool any = false;
  std::vector<double> lambdas = lambda_grid, sigmas = sigma2_grid;
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(sigmas.begin(), sigmas.end());
  for (double lambda : lambdas) {
    for (double s2 : sigmas) {
      double lm;
      try {
        lm = log_marginal_hetero(data, kernel, lambda, s2);
      } catch (const factorization_error&) {
        continue;
      }
      if (!std::isfinite(lm)) continue;
      if (!any || lm >= best.log_marginal) {
        best = {lambda, s2, lm};
        any = true;
      }
    }
  }
  if (!any) throw factorization_error("optimize_evidence_hetero: every grid point failed", {});
  return best;
}

/// Inverse-gamma prior on sigma2 and gamma prior on lambda, both in
/// shape/rate parameterization.
struct HyperPriors {
  double sigma2_shape = 20.0;
  double sigma2_rate = 1.0;
  double lambda_shape = 1.0;
  double lambda_rate = 1000.0;
};

struct HyperSample {
  double sigma2 = 0.0;
  double lambda = 0.0;
};

/// Random-walk Metropolis-Hastings on (log sigma2, log lambda) targeting
/// evidence times priors (change-of-variable Jacobian included). Returns the
/// post-burn-in chain, exactly reproducible for a fixed seed.
inline std::vector<HyperSample> sample_posterior_hyper(const Dataset& data,
                                                       std::shared_ptr<const Kernel> kernel,
                                                       const HyperPriors& priors, int n_samples, int burn_in,
                                                       std::uint64_t seed, double prop_sd = 0.2) {
  data.validate();
  if (n_samples < 1) throw std::invalid_argument("sample_posterior_hyper: n_samples must be >= 1");
  detail::GramEigen spectrum(kernel->gram(data.x), data.y);

  auto log_target = [&](double ls2, double ll) {
    const double s2 = std::exp(ls2), lambda = std::exp(ll);
    if (!(s2 > 0.0 && lambda > 0.0) || !spectrum.feasible(lambda))
      return -std::numeric_limits<double>::infinity();
    double v = spectrum.log_marginal(lambda, s2);
    // Inverse-Gamma(shape, rate) on sigma2 and Gamma(shape, rate) on lambda.
    v += -(priors.sigma2_shape + 1.0) * ls2 - priors.sigma2_rate / s2;
    v += (priors.lambda_shape - 1.0) * ll - priors.lambda_rate * lambda;
    v += ls2 + ll;  // Jacobian of the log transform
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  EvidenceResult init = optimize_evidence(data, kernel, default_lambda_grid());
  double ls2 = std::log(std::max(init.sigma2, 1e-12));
  double ll = std::log(init.lambda);
  double cur = log_target(ls2, ll);

  Rng rng(seed);
  std::vector<HyperSample> chain;
  chain.reserve(n_samples);
  const int total = burn_in + n_samples;
  for (int it = 0; it < total; ++it) {
    const double p1 = ls2 + prop_sd * rng.normal();
    const double p2 = ll + prop_sd * rng.normal();
    const double cand = log_target(p1, p2);
    const double logu = std::log(1.0 - rng.uniform());
    if (cand - cur > logu) {
      ls2 = p1;
      ll = p2;
      cur = cand;
    }
    if (it >= burn_in) chain.push_back({std::exp(ls2), std::exp(ll)});
  }
  return chain;
}

inline std::vector<HyperSample> sample_posterior_hyper(const Dataset& data, const KernelConfig& config,
                                                       const HyperPriors& priors, int n_samples, int burn_in,
                                                       std::uint64_t seed, double prop_sd = 0.2) {
  return sample_posterior_hyper(data, make_kernel(config), priors, n_samples, burn_in, seed, prop_sd);
}

}  // namespace gpderiv
