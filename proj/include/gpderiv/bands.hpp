#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gpderiv/gp.hpp"
#include "gpderiv/rng.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

enum class BandKind { Pointwise, Simultaneous };

/// Credible band around a posterior mean curve. For a simultaneous band the
/// radius is a single sup-norm quantile (stored constant across the grid); for
/// a pointwise band it varies per point.
struct CredibleBand {
  int k = 0;
  Vector grid;
  Vector center;
  Vector radius;
  double level = 0.0;
  BandKind kind = BandKind::Pointwise;

  Vector lower() const { return center - radius; }
  Vector upper() const { return center + radius; }
  /// Constant radius of a simultaneous band.
  double sup_radius() const { return radius.size() > 0 ? radius[0] : 0.0; }
};

/// Draw sample paths mean + L z with L L^T = cov + jitter I. Rows are draws.
inline Matrix sample_paths(const DerivPosterior& post, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("sample_paths: n_samples must be >= 1");
  const Eigen::Index m = post.grid.size();
  const double max_diag = m > 0 ? post.cov.diagonal().maxCoeff() : 0.0;

  Matrix L = Matrix::Zero(m, m);
  if (max_diag > 0.0) {
    bool ok = false;
    std::vector<double> tried;
    for (double jitter = 1e-10 * max_diag; jitter <= 1e-6 * max_diag * (1.0 + 1e-12); jitter *= 10.0) {
      tried.push_back(jitter);
      Matrix C = post.cov + jitter * Matrix::Identity(m, m);
      Eigen::LLT<Matrix> llt(C);
      if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
        ok = true;
        break;
      }
    }
    if (!ok) throw factorization_error("sample_paths: posterior covariance not factorizable", tried);
  }

  Rng rng(seed);
  Matrix paths(n_samples, m);
  Vector z(m);
  for (int s = 0; s < n_samples; ++s) {
    for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
    paths.row(s) = (post.mean + L * z).transpose();
  }
  return paths;
}

/// Radius is the level-quantile (order statistic at ceil(level * S), inclusive)
/// of the sampled sup-norm deviations from the posterior mean.
inline CredibleBand simultaneous_band(const DerivPosterior& post, double level, int n_samples,
                                      std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("simultaneous_band: level must be in (0,1)");
  Matrix paths = sample_paths(post, n_samples, seed);
  std::vector<double> sup(paths.rows());
  for (Eigen::Index s = 0; s < paths.rows(); ++s)
    sup[s] = (paths.row(s).transpose() - post.mean).cwiseAbs().maxCoeff();
  std::sort(sup.begin(), sup.end());
  const auto rank = static_cast<std::size_t>(std::ceil(level * n_samples));
  const double radius = sup[std::min(sup.size() - 1, std::max<std::size_t>(rank, 1) - 1)];

  CredibleBand band;
  band.k = post.k;
  band.grid = post.grid;
  band.center = post.mean;
  band.radius = Vector::Constant(post.grid.size(), radius);
  band.level = level;
  band.kind = BandKind::Simultaneous;
  return band;
}

/// Analytic per-point radius z_{(1+level)/2} * posterior sd.
inline CredibleBand pointwise_band(const DerivPosterior& post, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("pointwise_band: level must be in (0,1)");
  const Eigen::Index m = post.grid.size();
  const double max_diag = m > 0 ? std::max(post.cov.diagonal().maxCoeff(), 0.0) : 0.0;
  const double z = normal_quantile(0.5 * (1.0 + level));

  CredibleBand band;
  band.k = post.k;
  band.grid = post.grid;
  band.center = post.mean;
  band.radius.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double v = post.cov(i, i);
    if (v < -1e-8 * std::max(max_diag, 1e-300))
      throw std::runtime_error("pointwise_band: posterior variance negative beyond tolerance");
    band.radius[i] = z * std::sqrt(std::max(v, 0.0));
  }
  band.level = level;
  band.kind = BandKind::Pointwise;
  return band;
}

}  // namespace gpderiv
