#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gpderiv/bands.hpp"
#include "gpderiv/gp.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

/// Random-series prior on [0,1]: f = b_{J,4}^T beta with cubic B-splines on
/// uniform knots, beta entries iid N(0, sigma2), noise variance sigma2.
struct BsplineModel {
  int J = 0;  // degrees of freedom; interior knot count is J - 4
  Vector beta_mean;
  double sigma2 = 0.0;
  Eigen::LLT<Matrix> coef_factor;  // of B^T B + I_J

  int interior_knots() const { return J - 4; }
};

/// Clamped knot vector: boundary knots 0 and 1 with multiplicity 4, J - 4
/// uniform interior knots.
inline std::vector<double> bspline_knots(int J) {
  if (J < 4) throw std::invalid_argument("bspline_knots: order-4 splines need J >= 4");
  const int N = J - 4;
  std::vector<double> t(J + 4);
  for (int i = 0; i < 4; ++i) t[i] = 0.0;
  for (int i = 1; i <= N; ++i) t[3 + i] = static_cast<double>(i) / (N + 1);
  for (int i = J; i < J + 4; ++i) t[i] = 1.0;
  return t;
}

namespace detail {

// Cox-de Boor triangle up to the requested order; the last span is closed at
// x = 1 so the basis is right-continuous on the full interval.
inline std::vector<std::vector<double>> bspline_triangle(const std::vector<double>& t, double x,
                                                         int max_order) {
  std::vector<std::vector<double>> vals(max_order + 1);
  const int n_knots = static_cast<int>(t.size());
  vals[1].assign(n_knots - 1, 0.0);
  for (int j = 0; j + 1 < n_knots; ++j) {
    const bool inside = (t[j] <= x && x < t[j + 1]);
    const bool at_end = (x == t.back() && t[j + 1] == t.back() && t[j] < t[j + 1]);
    vals[1][j] = (inside || at_end) ? 1.0 : 0.0;
  }
  for (int ord = 2; ord <= max_order; ++ord) {
    vals[ord].assign(n_knots - ord, 0.0);
    for (int j = 0; j + ord < n_knots; ++j) {
      double v = 0.0;
      const double dl = t[j + ord - 1] - t[j];
      if (dl > 0.0) v += (x - t[j]) / dl * vals[ord - 1][j];
      const double dr = t[j + ord] - t[j + 1];
      if (dr > 0.0) v += (t[j + ord] - x) / dr * vals[ord - 1][j + 1];
      vals[ord][j] = v;
    }
  }
  return vals;
}

}  // namespace detail

/// All J order-4 basis values (or exact derivatives, deriv <= 2) at x in [0,1].
inline Vector bspline_basis(int J, double x, int deriv = 0) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("bspline_basis: x outside [0,1]");
  if (deriv < 0 || deriv > 2) throw order_error("bspline_basis: derivatives supported up to order 2");
  const auto t = bspline_knots(J);
  const auto vals = detail::bspline_triangle(t, x, 4 - deriv);

  auto raise = [&](const std::vector<double>& lower, int ord) {
    // d/dx B_{j,ord} = (ord-1) [ B_{j,ord-1}/(t_{j+ord-1}-t_j) - B_{j+1,ord-1}/(t_{j+ord}-t_{j+1}) ]
    std::vector<double> out(lower.size() - 1, 0.0);
    for (std::size_t j = 0; j + 1 < lower.size(); ++j) {
      double v = 0.0;
      const double dl = t[j + ord - 1] - t[j];
      if (dl > 0.0) v += lower[j] / dl;
      const double dr = t[j + ord] - t[j + 1];
      if (dr > 0.0) v -= lower[j + 1] / dr;
      out[j] = (ord - 1) * v;
    }
    return out;
  };

  std::vector<double> b = vals[4 - deriv];
  for (int d = deriv; d >= 1; --d) b = raise(b, 4 - d + 1);

  Vector result(J);
  for (int j = 0; j < J; ++j) result[j] = b[j];
  return result;
}

/// Design matrix of basis values (rows: observations).
inline Matrix bspline_design(int J, const Vector& x, int deriv = 0) {
  Matrix B(x.size(), J);
  for (Eigen::Index i = 0; i < x.size(); ++i) B.row(i) = bspline_basis(J, x[i], deriv).transpose();
  return B;
}

/// MMLE variance sigma2 = n^{-1} Y^T (B B^T + I_n)^{-1} Y and posterior mean
/// coefficients (B^T B + I_J)^{-1} B^T Y.
inline BsplineModel fit_bspline(const Dataset& data, int J) {
  data.validate();
  const auto n = data.size();
  Matrix B = bspline_design(J, data.x);

  Matrix S = B * B.transpose();
  S.diagonal().array() += 1.0;
  auto [llt_n, j1] = detail::robust_llt(std::move(S));
  (void)j1;

  BsplineModel model;
  model.J = J;
  model.sigma2 = data.y.dot(llt_n.solve(data.y)) / static_cast<double>(n);

  Matrix M = B.transpose() * B;
  M.diagonal().array() += 1.0;
  auto [llt_j, j2] = detail::robust_llt(std::move(M));
  (void)j2;
  model.coef_factor = std::move(llt_j);
  model.beta_mean = model.coef_factor.solve(B.transpose() * data.y);
  return model;
}

inline Vector bspline_deriv_mean(const BsplineModel& model, int k, const Vector& grid) {
  if (k < 0 || k > 2) throw order_error("bspline_deriv_mean: derivatives supported up to order 2");
  return bspline_design(model.J, grid, k) * model.beta_mean;
}

/// Posterior of f^(k) on the grid under beta | data ~ N(beta_mean, sigma2 (B^T B + I)^{-1}).
inline DerivPosterior bspline_deriv_posterior(const BsplineModel& model, int k, const Vector& grid) {
  DerivPosterior post;
  post.k = k;
  post.grid = grid;
  Matrix Phi = bspline_design(model.J, grid, k);
  post.mean = Phi * model.beta_mean;
  Matrix cov = model.sigma2 * (Phi * model.coef_factor.solve(Phi.transpose()));
  post.cov = ((cov + cov.transpose()) / 2.0).eval();
  return post;
}

/// Leave-one-out score of the spline smoother H = B (B^T B + I_J)^{-1} B^T via
/// the hat-matrix identity.
inline double loocv_score_bspline(const Dataset& data, int J) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("loocv_score: need n >= 2");
  Matrix B = bspline_design(J, data.x);
  Matrix M = B.transpose() * B;
  M.diagonal().array() += 1.0;
  auto [llt, jit] = detail::robust_llt(std::move(M));
  (void)jit;
  Vector beta = llt.solve(B.transpose() * data.y);
  Vector fitted = B * beta;
  double score = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double hii = B.row(i).dot(llt.solve(B.row(i).transpose()));
    if (hii >= 1.0 - 1e-12) throw std::runtime_error("loocv_score: smoother leverage H_ii >= 1 - 1e-12");
    const double r = (data.y[i] - fitted[i]) / (1.0 - hii);
    score += r * r;
  }
  return score / static_cast<double>(data.size());
}

/// Interior knot count selected from the candidate set by leave-one-out cross
/// validation; ties break toward fewer knots.
inline BsplineModel select_knots(const Dataset& data, std::vector<int> knot_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9,
                                                                                    10}) {
  if (knot_grid.empty()) throw std::invalid_argument("select_knots: empty candidate set");
  std::sort(knot_grid.begin(), knot_grid.end());
  int best_n = knot_grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (int N : knot_grid) {
    const double score = loocv_score_bspline(data, N + 4);
    if (score < best_score) {
      best_score = score;
      best_n = N;
    }
  }
  return fit_bspline(data, best_n + 4);
}

/// Simultaneous band for the spline posterior with the comparator's radius
/// inflation by (1 + rho).
inline CredibleBand bspline_simultaneous_band(const BsplineModel& model, int k, const Vector& grid,
                                              double level, int n_samples, std::uint64_t seed,
                                              double rho = 0.5) {
  CredibleBand band = simultaneous_band(bspline_deriv_posterior(model, k, grid), level, n_samples, seed);
  band.radius *= (1.0 + rho);
  return band;
}

}  // namespace gpderiv
