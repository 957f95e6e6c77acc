#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "gpderiv/bspline.hpp"
#include "gpderiv/gp.hpp"
#include "gpderiv/hyperparam.hpp"
#include "gpderiv/io.hpp"
#include "gpderiv/model_select.hpp"
#include "gpderiv/rng.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

enum class Design { HolderSeries, XSinX };
enum class Method { Matern, SE, Sobolev, CV, Bspline };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Matern: return "matern";
    case Method::SE: return "se";
    case Method::Sobolev: return "sobolev";
    case Method::CV: return "cv";
    case Method::Bspline: return "bspline";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "matern") return Method::Matern;
  if (name == "se") return Method::SE;
  if (name == "sobolev") return Method::Sobolev;
  if (name == "cv") return Method::CV;
  if (name == "bspline") return Method::Bspline;
  return std::nullopt;
}

inline std::vector<Method> all_methods() {
  return {Method::Matern, Method::SE, Method::Sobolev, Method::CV, Method::Bspline};
}

struct ExperimentConfig {
  Design design = Design::HolderSeries;
  int n = 100;
  double noise_sd = 0.1;  // XSinX only; the Holder design fixes noise variance 0.1
  int n_reps = 1;
  std::vector<Method> methods = all_methods();
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> hardware concurrency
};

/// Truth with Holder smoothness 3: sqrt(2) sum_i i^{-4} sin(i) cos((i-1/2) pi x),
/// truncated at 1000 terms (the i^{-4} tail is below 1e-9).
inline double truth_holder(double x, int k) {
  constexpr int kTerms = 1000;
  double acc = 0.0;
  for (int i = 1; i <= kTerms; ++i) {
    const double w = (i - 0.5) * M_PI;
    const double a = std::sin(static_cast<double>(i)) / (static_cast<double>(i) * i * i * i);
    acc += (k == 0) ? a * std::cos(w * x) : -a * w * std::sin(w * x);
  }
  return std::sqrt(2.0) * acc;
}

inline double truth_xsinx(double x, int k) {
  return (k == 0) ? x * std::sin(x) / 10.0 : (std::sin(x) + x * std::cos(x)) / 10.0;
}

inline double design_truth(Design d, double x, int k) {
  return d == Design::HolderSeries ? truth_holder(x, k) : truth_xsinx(x, k);
}

inline std::pair<double, double> design_domain(Design d) {
  return d == Design::HolderSeries ? std::pair{0.0, 1.0} : std::pair{0.0, 10.0};
}

/// The evaluation grid of the RMSE protocol: 100 equally spaced points across
/// the design domain.
inline Vector standard_grid(Design d) {
  const auto [a, b] = design_domain(d);
  Vector g(100);
  for (int t = 0; t < 100; ++t) g[t] = a + (b - a) * t / 99.0;
  return g;
}

/// Deterministic in (seed, rep_index). Holder: iid Unif[0,1] covariates and
/// noise variance 0.1; XSinX: regular grid on [0,10], noise sd from config.
inline Dataset gen_data(const ExperimentConfig& cfg, int rep_index) {
  Rng rng(cfg.seed, static_cast<std::uint64_t>(rep_index));
  Dataset data;
  data.x.resize(cfg.n);
  data.y.resize(cfg.n);
  double sd;
  if (cfg.design == Design::HolderSeries) {
    for (int i = 0; i < cfg.n; ++i) data.x[i] = rng.uniform();
    sd = std::sqrt(0.1);
  } else {
    for (int i = 0; i < cfg.n; ++i) data.x[i] = 10.0 * i / (cfg.n - 1.0);
    sd = cfg.noise_sd;
  }
  for (int i = 0; i < cfg.n; ++i)
    data.y[i] = design_truth(cfg.design, data.x[i], 0) + sd * rng.normal();
  return data;
}

inline double rmse(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

struct RepRecord {
  int rep = 0;
  Method method = Method::SE;
  int target_k = 0;
  double rmse = 0.0;
  bool failed = false;
  std::string error;
};

struct AggregateRow {
  Method method = Method::SE;
  int target_k = 0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RepRecord> per_rep;
  std::vector<AggregateRow> table;
};

namespace detail {

struct MethodPredictions {
  Vector f;        // k = 0 on the standard grid
  Vector f_prime;  // k = 1
};

/// Evidence-tuned GP fit for a fixed kernel family, predictions for k = 0, 1.
inline MethodPredictions run_gp_method(const Dataset& data, const KernelConfig& cfg, double lambda,
                                       double sigma2, const Vector& grid) {
  FittedGP model = fit(data, cfg, lambda, std::max(sigma2, 1e-300));
  return {posterior_mean_deriv(model, 0, grid), posterior_mean_deriv(model, 1, grid)};
}

inline MethodPredictions run_bspline_method(const Dataset& data, Design design, const Vector& grid) {
  const auto [a, b] = design_domain(design);
  const double scale = b - a;
  Dataset rescaled = data;
  rescaled.x = (data.x.array() - a) / scale;
  BsplineModel model = select_knots(rescaled);
  Vector unit_grid = (grid.array() - a) / scale;
  MethodPredictions out;
  out.f = bspline_deriv_mean(model, 0, unit_grid);
  out.f_prime = bspline_deriv_mean(model, 1, unit_grid) / scale;  // chain rule
  return out;
}

inline std::vector<RepRecord> run_one_rep(const ExperimentConfig& cfg, int rep) {
  const Dataset data = gen_data(cfg, rep);
  const Vector grid = standard_grid(cfg.design);
  Vector truth0(grid.size()), truth1(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    truth0[i] = design_truth(cfg.design, grid[i], 0);
    truth1[i] = design_truth(cfg.design, grid[i], 1);
  }

  std::optional<KernelSelection> matern_sel;  // shared by Matern and CV
  auto matern_selection = [&]() -> const KernelSelection& {
    if (!matern_sel) matern_sel = select_nu(data, default_nu_grid());
    return *matern_sel;
  };

  std::vector<RepRecord> records;
  for (Method method : cfg.methods) {
    try {
      MethodPredictions pred;
      switch (method) {
        case Method::SE: {
          const auto ev = optimize_evidence(data, KernelConfig::squared_exponential());
          pred = run_gp_method(data, KernelConfig::squared_exponential(), ev.lambda, ev.sigma2, grid);
          break;
        }
        case Method::Sobolev: {
          const auto ev = optimize_evidence(data, KernelConfig::sobolev2());
          pred = run_gp_method(data, KernelConfig::sobolev2(), ev.lambda, ev.sigma2, grid);
          break;
        }
        case Method::Matern: {
          const auto& sel = matern_selection();
          pred = run_gp_method(data, sel.kernel, sel.lambda, sel.sigma2, grid);
          break;
        }
        case Method::CV: {
          const auto& matern = matern_selection();
          const auto sel = select_kernel(
              data, {matern.kernel, KernelConfig::squared_exponential(), KernelConfig::sobolev2()});
          pred = run_gp_method(data, sel.kernel, sel.lambda, sel.sigma2, grid);
          break;
        }
        case Method::Bspline: {
          pred = run_bspline_method(data, cfg.design, grid);
          break;
        }
      }
      records.push_back({rep, method, 0, rmse(pred.f, truth0), false, {}});
      records.push_back({rep, method, 1, rmse(pred.f_prime, truth1), false, {}});
    } catch (const std::exception& e) {
      records.push_back({rep, method, 0, 0.0, true, e.what()});
      records.push_back({rep, method, 1, 0.0, true, e.what()});
    }
  }
  return records;
}

}  // namespace detail

/// Full protocol: generate -> tune -> fit -> evaluate k = 0,1 on the standard
/// grid -> RMSE, aggregated across repetitions. Repetitions run in parallel;
/// each derives its RNG stream from (seed, rep), so threading does not change
/// the output.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.n < 10) throw std::invalid_argument("run_experiment: n must be at least 10");
  if (cfg.n_reps < 1) throw std::invalid_argument("run_experiment: n_reps must be at least 1");
  if (cfg.methods.empty()) throw std::invalid_argument("run_experiment: no methods requested");

  std::vector<std::vector<RepRecord>> slots(cfg.n_reps);
  unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.n_reps));

  auto worker = [&](unsigned tid) {
    for (int rep = static_cast<int>(tid); rep < cfg.n_reps; rep += static_cast<int>(n_threads))
      slots[rep] = detail::run_one_rep(cfg, rep);
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  result.config = cfg;
  for (auto& rep_records : slots)
    result.per_rep.insert(result.per_rep.end(), rep_records.begin(), rep_records.end());

  for (Method method : cfg.methods) {
    for (int k = 0; k <= 1; ++k) {
      std::vector<double> vals;
      int failed = 0;
      for (const auto& r : result.per_rep) {
        if (r.method != method || r.target_k != k) continue;
        if (r.failed)
          ++failed;
        else
          vals.push_back(r.rmse);
      }
      AggregateRow row;
      row.method = method;
      row.target_k = k;
      row.n_ok = static_cast<int>(vals.size());
      row.n_failed = failed;
      if (!vals.empty()) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        row.mean = mean;
        row.sd = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1.0)) : 0.0;
        std::sort(vals.begin(), vals.end());
        const std::size_t h = vals.size() / 2;
        row.median = vals.size() % 2 == 1 ? vals[h] : 0.5 * (vals[h - 1] + vals[h]);
      }
      result.table.push_back(row);
    }
  }
  return result;
}

inline void write_per_rep_csv(const ExperimentResult& result, std::ostream& out) {
  out << "rep,method,target,rmse\n";
  for (const auto& r : result.per_rep) {
    if (r.failed) continue;
    out << r.rep << ',' << method_name(r.method) << ',' << (r.target_k == 0 ? "f" : "f_prime") << ','
        << format_double(r.rmse) << '\n';
  }
}

inline void write_aggregate_csv(const ExperimentResult& result, std::ostream& out) {
  out << "method,target,mean_rmse,sd_rmse,median_rmse,n_ok,n_failed\n";
  for (const auto& row : result.table) {
    out << method_name(row.method) << ',' << (row.target_k == 0 ? "f" : "f_prime") << ','
        << format_double(row.mean) << ',' << format_double(row.sd) << ',' << format_double(row.median) << ','
        << row.n_ok << ',' << row.n_failed << '\n';
  }
}

}  // namespace gpderiv
