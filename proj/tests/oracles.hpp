// Independent reference implementations used by the test suite. These
// deliberately avoid the library's solve paths: posteriors go through dense
// inverses, cross-validation through literal refits.
#pragma once

#include <cmath>
#include <functional>

#include "gpderiv/bspline.hpp"
#include "gpderiv/kernels.hpp"
#include "gpderiv/rng.hpp"
#include "gpderiv/types.hpp"

namespace oracle {

using gpderiv::Dataset;
using gpderiv::Matrix;
using gpderiv::Vector;

// Textbook plug-in posterior via explicit dense inverse.
struct DensePosterior {
  Vector mean;
  Matrix cov;
};

inline DensePosterior dense_posterior(const Dataset& data, const gpderiv::Kernel& kernel, int k,
                                      const Vector& grid, double lambda, double sigma2) {
  const auto n = data.size();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kernel.eval(data.x[i], data.x[j]);
  Matrix A = K + static_cast<double>(n) * lambda * Matrix::Identity(n, n);
  Matrix Ainv = A.inverse();

  Matrix Kk0(grid.size(), n), Kkk(grid.size(), grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) Kk0(i, j) = kernel.eval_deriv(k, 0, grid[i], data.x[j]);
    for (Eigen::Index j = 0; j < grid.size(); ++j) Kkk(i, j) = kernel.eval_deriv(k, k, grid[i], grid[j]);
  }
  DensePosterior post;
  post.mean = Kk0 * (Ainv * data.y);
  post.cov = sigma2 / (static_cast<double>(n) * lambda) * (Kkk - Kk0 * Ainv * Kk0.transpose());
  return post;
}

// Central difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Brute-force leave-one-out score for the GP smoother. The ridge constant
// n*lambda of the full fit is kept when a point is dropped, matching the
// penalized least-squares objective the smoother identity assumes.
inline double loo_refit_gp(const Dataset& data, const gpderiv::Kernel& kernel, double lambda) {
  const auto n = data.size();
  const double ridge = static_cast<double>(n) * lambda;
  double score = 0.0;
  for (Eigen::Index drop = 0; drop < n; ++drop) {
    Vector xs(n - 1), ys(n - 1);
    Eigen::Index w = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == drop) continue;
      xs[w] = data.x[i];
      ys[w] = data.y[i];
      ++w;
    }
    Matrix K(n - 1, n - 1);
    for (Eigen::Index i = 0; i < n - 1; ++i)
      for (Eigen::Index j = 0; j < n - 1; ++j) K(i, j) = kernel.eval(xs[i], xs[j]);
    Matrix A = K + ridge * Matrix::Identity(n - 1, n - 1);
    Vector alpha = A.inverse() * ys;
    double pred = 0.0;
    for (Eigen::Index i = 0; i < n - 1; ++i) pred += kernel.eval(data.x[drop], xs[i]) * alpha[i];
    const double r = data.y[drop] - pred;
    score += r * r;
  }
  return score / static_cast<double>(n);
}

// Brute-force leave-one-out score for the B-spline ridge smoother; the
// identity penalty matrix is unchanged when a row is dropped.
inline double loo_refit_bspline(const Dataset& data, int J) {
  const auto n = data.size();
  double score = 0.0;
  for (Eigen::Index drop = 0; drop < n; ++drop) {
    Matrix B(n - 1, J);
    Vector ys(n - 1);
    Eigen::Index w = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == drop) continue;
      B.row(w) = gpderiv::bspline_basis(J, data.x[i]).transpose();
      ys[w] = data.y[i];
      ++w;
    }
    Matrix M = B.transpose() * B + Matrix::Identity(J, J);
    Vector beta = M.inverse() * (B.transpose() * ys);
    const double pred = gpderiv::bspline_basis(J, data.x[drop]).dot(beta);
    const double r = data.y[drop] - pred;
    score += r * r;
  }
  return score / static_cast<double>(n);
}

inline Dataset random_dataset(int n, std::uint64_t seed, double x_lo = 0.0, double x_hi = 1.0) {
  gpderiv::Rng rng(seed);
  Dataset data;
  data.x.resize(n);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.x[i] = x_lo + (x_hi - x_lo) * rng.uniform();
    data.y[i] = std::sin(3.0 * data.x[i]) + 0.3 * rng.normal();
  }
  return data;
}

}  // namespace oracle
