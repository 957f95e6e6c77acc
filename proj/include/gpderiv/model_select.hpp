#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "gpderiv/bspline.hpp"
#include "gpderiv/hyperparam.hpp"
#include "gpderiv/kernels.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

struct GpModel {
  KernelConfig kernel;
  double lambda = 1e-3;
  double sigma2 = 1.0;
};

struct BsplineConfig {
  int J = 4;
};

/// Mean squared leave-one-out prediction error of the k=0 posterior-mean
/// smoother, via the hat-matrix identity r_i = (y_i - yhat_i) / (1 - H_ii).
inline double loocv_score(const Dataset& data, std::shared_ptr<const Kernel> kernel, double lambda) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("loocv_score: need n >= 2");
  detail::GramEigen spectrum(kernel->gram(data.x), data.y);
  return spectrum.loo_residuals(lambda).squaredNorm() / static_cast<double>(data.size());
}

inline double loocv_score(const Dataset& data, const GpModel& model) {
  return loocv_score(data, make_kernel(model.kernel), model.lambda);
}

inline double loocv_score(const Dataset& data, const BsplineConfig& config) {
  return loocv_score_bspline(data, config.J);
}

struct KernelSelection {
  KernelConfig kernel;
  double lambda = 0.0;
  double sigma2 = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

/// Matern smoothness selection: tune (lambda, sigma2) by evidence per
/// candidate, score by leave-one-out CV, keep the minimizer (ties toward the
/// smaller nu).
inline KernelSelection select_nu(const Dataset& data, std::vector<double> nu_grid,
                                 const std::vector<double>& lambda_grid = default_lambda_grid()) {
  if (nu_grid.empty()) throw std::invalid_argument("select_nu: empty nu grid");
  std::sort(nu_grid.begin(), nu_grid.end());
  KernelSelection best;
  bool any = false;
  for (double nu : nu_grid) {
    const KernelConfig cfg = KernelConfig::matern(nu);
    auto kernel = make_kernel(cfg);
    detail::GramEigen spectrum(kernel->gram(data.x), data.y);

    EvidenceResult ev;
    bool ev_ok = false;
    for (double lambda : lambda_grid) {
      if (!(lambda > 0.0) || !spectrum.feasible(lambda)) continue;
      const double s2 = std::max(spectrum.mmle_sigma2(lambda), 1e-300);
      const double lm = spectrum.log_marginal(lambda, s2);
      if (!std::isfinite(lm)) continue;
      if (!ev_ok || lm >= ev.log_marginal) {
        ev = {lambda, s2, lm};
        ev_ok = true;
      }
    }
    if (!ev_ok) continue;
    const double score = spectrum.loo_residuals(ev.lambda).squaredNorm() / static_cast<double>(data.size());
    if (!any || score < best.score) {
      best = {cfg, ev.lambda, ev.sigma2, score};
      any = true;
    }
  }
  if (!any) throw factorization_error("select_nu: every candidate failed", {});
  return best;
}

inline std::vector<double> default_nu_grid() {
  std::vector<double> grid;
  for (double nu = 2.0; nu <= 10.0 + 1e-12; nu += 0.5) grid.push_back(nu);
  return grid;
}

/// Kernel family selection by leave-one-out CV with evidence-tuned
/// hyperparameters; ties keep the earlier candidate.
inline KernelSelection select_kernel(const Dataset& data, const std::vector<KernelConfig>& candidates,
                                     const std::vector<double>& lambda_grid = default_lambda_grid()) {
  if (candidates.empty()) throw std::invalid_argument("select_kernel: no candidates");
  KernelSelection best;
  bool any = false;
  for (const KernelConfig& cfg : candidates) {
    auto kernel = make_kernel(cfg);
    EvidenceResult ev;
    double score;
    try {
      ev = optimize_evidence(data, kernel, lambda_grid);
      score = loocv_score(data, kernel, ev.lambda);
    } catch (const factorization_error&) {
      continue;
    }
    if (!any || score < best.score) {
      best = {cfg, ev.lambda, ev.sigma2, score};
      any = true;
    }
  }
  if (!any) throw factorization_error("select_kernel: every candidate failed", {});
  return best;
}

}  // namespace gpderiv
