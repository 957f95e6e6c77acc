// Command-line front end: fit models from CSV, predict curves and derivatives
// with credible bands, and run the simulation harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gpderiv/bands.hpp"
#include "gpderiv/gp.hpp"
#include "gpderiv/hyperparam.hpp"
#include "gpderiv/io.hpp"
#include "gpderiv/model_json.hpp"
#include "gpderiv/model_select.hpp"
#include "gpderiv/simulate.hpp"

namespace {

using namespace gpderiv;

struct GridSpec {
  double a = 0.0, b = 1.0;
  int m = 100;
};

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> g.a >> c1 >> g.b >> c2 >> g.m) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
    throw CLI::ValidationError("--grid", "expected a:b:m with m grid points from a to b");
  if (g.m < 1) throw CLI::ValidationError("--grid", "m must be at least 1");
  return g;
}

Vector make_grid(const GridSpec& g) {
  Vector v(g.m);
  if (g.m == 1) {
    v[0] = g.a;
    return v;
  }
  for (int i = 0; i < g.m; ++i) v[i] = g.a + (g.b - g.a) * i / (g.m - 1.0);
  return v;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
  return read_dataset_csv(in);
}

int cmd_fit(const std::string& input, const std::string& kernel_name, const std::string& nu_arg,
            const std::string& lambda_arg, const std::string& sigma2_arg, bool hetero,
            const std::string& out_path) {
  Dataset data = read_csv_file(input);
  if (hetero && !data.obs_sd)
    throw std::runtime_error("--hetero requires a sigma_y column in the input CSV");

  KernelConfig cfg;
  if (kernel_name == "se") {
    cfg = KernelConfig::squared_exponential();
  } else if (kernel_name == "sobolev") {
    cfg = KernelConfig::sobolev2();
  } else if (kernel_name == "matern") {
    if (nu_arg == "cv") {
      cfg = select_nu(data, default_nu_grid()).kernel;
    } else {
      cfg = KernelConfig::matern(std::stod(nu_arg));
    }
  } else if (kernel_name == "cv") {
    const auto matern = select_nu(data, default_nu_grid());
    cfg = select_kernel(data, {matern.kernel, KernelConfig::squared_exponential(), KernelConfig::sobolev2()})
              .kernel;
  } else {
    throw CLI::ValidationError("--kernel", "expected one of matern, se, sobolev, cv");
  }

  double lambda = 0.0, sigma2 = 0.0;
  const bool lambda_auto = lambda_arg == "auto";
  const bool sigma2_auto = sigma2_arg == "auto";
  if (!lambda_auto) lambda = std::stod(lambda_arg);
  if (!sigma2_auto) sigma2 = std::stod(sigma2_arg);

  if (!hetero) {
    if (lambda_auto) {
      const auto ev = optimize_evidence(data, cfg);
      lambda = ev.lambda;
      if (sigma2_auto) sigma2 = std::max(ev.sigma2, 1e-300);
    } else if (sigma2_auto) {
      sigma2 = std::max(mmle_sigma2(data, cfg, lambda), 1e-300);
    }
  } else {
    if (lambda_auto || sigma2_auto) {
      // No closed-form profile under per-point noise: joint grid search.
      const double vy = (data.y.array() - data.y.mean()).square().mean();
      std::vector<double> s2_grid;
      for (int i = 0; i < 25; ++i) s2_grid.push_back(vy * std::pow(10.0, -6.0 + 0.25 * i));
      const auto ev = optimize_evidence_hetero(
          data, make_kernel(cfg), lambda_auto ? default_lambda_grid() : std::vector<double>{lambda},
          sigma2_auto ? s2_grid : std::vector<double>{sigma2});
      lambda = ev.lambda;
      sigma2 = ev.sigma2;
    }
  }

  FittedGP model = fit(data, cfg, lambda, sigma2,
                       hetero ? NoiseModel::Heteroscedastic : NoiseModel::Homoscedastic);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write model file '" + out_path + "'");
  save_model(model, out);
  std::cout << "fitted " << kernel_family_name(cfg.family);
  if (cfg.family == KernelFamily::Matern) std::cout << " (nu=" << cfg.nu << ")";
  std::cout << "  lambda=" << format_double(lambda) << "  sigma2=" << format_double(sigma2) << "  n="
            << data.size() << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, int k, const std::string& grid_arg,
                const std::string& band_kind, double level, int n_samples, std::uint64_t seed,
                const std::string& out_path) {
  std::ifstream in(model_path);
  if (!in) throw std::runtime_error("cannot open model file '" + model_path + "'");
  FittedGP model = load_model(in);

  GridSpec spec = parse_grid(grid_arg);
  Vector grid = make_grid(spec);

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write output file '" + out_path + "'");

  if (band_kind == "none") {
    Vector mean = posterior_mean_deriv(model, k, grid);
    out << "x,mean\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      out << format_double(grid[i]) << ',' << format_double(mean[i]) << '\n';
    return 0;
  }

  DerivPosterior post = deriv_posterior(model, k, grid);
  CredibleBand band = band_kind == "simultaneous" ? simultaneous_band(post, level, n_samples, seed)
                                                  : pointwise_band(post, level);
  out << "x,mean,lower,upper\n";
  const Vector lo = band.lower(), hi = band.upper();
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    out << format_double(grid[i]) << ',' << format_double(post.mean[i]) << ',' << format_double(lo[i])
        << ',' << format_double(hi[i]) << '\n';
  return 0;
}

int cmd_simulate(const std::string& design_name, int n, double sigma, int reps, std::uint64_t seed,
                 const std::string& methods_arg, const std::string& out_dir, int threads) {
  ExperimentConfig cfg;
  cfg.design = design_name == "holder" ? Design::HolderSeries : Design::XSinX;
  cfg.n = n;
  cfg.noise_sd = sigma;
  cfg.n_reps = reps;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.methods.clear();
  std::istringstream ms(methods_arg);
  std::string token;
  while (std::getline(ms, token, ',')) {
    const auto method = parse_method(token);
    if (!method)
      throw CLI::ValidationError("--methods", "unknown method '" + token +
                                                  "'; valid: matern, se, sobolev, cv, bspline");
    cfg.methods.push_back(*method);
  }
  if (cfg.methods.empty())
    throw CLI::ValidationError("--methods", "no methods given; valid: matern, se, sobolev, cv, bspline");

  ExperimentResult result = run_experiment(cfg);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream per_rep(out_dir + "/per_rep.csv");
    write_per_rep_csv(result, per_rep);
  }
  {
    std::ofstream agg(out_dir + "/aggregate.csv");
    write_aggregate_csv(result, agg);
  }
  write_aggregate_csv(result, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-in Gaussian process regression with derivative estimation"};
  app.require_subcommand(1);

  // fit
  std::string fit_input, fit_kernel = "cv", fit_nu = "cv", fit_lambda = "auto", fit_sigma2 = "auto";
  std::string fit_out = "model.json";
  bool fit_hetero = false;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a GP model to x,y[,sigma_y] CSV data");
  fit_cmd->add_option("input", fit_input, "input CSV with a header row")->required();
  fit_cmd->add_option("--kernel", fit_kernel, "matern | se | sobolev | cv (default cv)");
  fit_cmd->add_option("--nu", fit_nu, "Matern smoothness: a number or 'cv' (default cv)");
  fit_cmd->add_option("--lambda", fit_lambda, "regularization: a number or 'auto' (evidence)");
  fit_cmd->add_option("--sigma2", fit_sigma2, "noise variance: a number or 'auto' (MMLE)");
  fit_cmd->add_flag("--hetero", fit_hetero, "use per-observation noise sd from the sigma_y column");
  fit_cmd->add_option("--out", fit_out, "output model file (JSON)");

  // predict
  std::string pred_model, pred_grid = "0:1:100", pred_band = "none", pred_out = "prediction.csv";
  int pred_k = 0, pred_samples = 2000;
  double pred_level = 0.95;
  std::uint64_t pred_seed = 0;
  auto* pred_cmd = app.add_subcommand("predict", "Evaluate a fitted model on a grid");
  pred_cmd->add_option("model", pred_model, "model JSON produced by fit")->required();
  pred_cmd->add_option("--k", pred_k, "derivative order (default 0)");
  pred_cmd->add_option("--grid", pred_grid, "evaluation grid a:b:m (inclusive ends)");
  pred_cmd->add_option("--band", pred_band, "simultaneous | pointwise | none");
  pred_cmd->add_option("--level", pred_level, "credible level (default 0.95)");
  pred_cmd->add_option("--samples", pred_samples, "posterior draws for simultaneous bands");
  pred_cmd->add_option("--seed", pred_seed, "RNG seed for band sampling");
  pred_cmd->add_option("--out", pred_out, "output CSV");

  // simulate
  std::string sim_design = "holder", sim_methods = "matern,se,sobolev,cv,bspline", sim_out = "sim_out";
  int sim_n = 100, sim_reps = 10, sim_threads = 0;
  double sim_sigma = 0.1;
  std::uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the benchmark protocol and emit RMSE tables");
  sim_cmd->add_option("--design", sim_design, "holder | xsinx")
      ->check(CLI::IsMember({"holder", "xsinx"}));
  sim_cmd->add_option("--n", sim_n, "sample size per repetition");
  sim_cmd->add_option("--sigma", sim_sigma, "noise sd (xsinx design)");
  sim_cmd->add_option("--reps", sim_reps, "number of repetitions");
  sim_cmd->add_option("--seed", sim_seed, "base RNG seed");
  sim_cmd->add_option("--methods", sim_methods, "comma-separated: matern,se,sobolev,cv,bspline");
  sim_cmd->add_option("--out", sim_out, "output directory for per_rep.csv and aggregate.csv");
  sim_cmd->add_option("--threads", sim_threads, "worker threads (default: hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  try {
    if (fit_cmd->parsed())
      return cmd_fit(fit_input, fit_kernel, fit_nu, fit_lambda, fit_sigma2, fit_hetero, fit_out);
    if (pred_cmd->parsed()) {
      if (pred_band != "none" && pred_band != "simultaneous" && pred_band != "pointwise") {
        std::cerr << "error: --band must be simultaneous, pointwise, or none\n";
        return 2;
      }
      return cmd_predict(pred_model, pred_k, pred_grid, pred_band, pred_level, pred_samples, pred_seed,
                         pred_out);
    }
    if (sim_cmd->parsed())
      return cmd_simulate(sim_design, sim_n, sim_sigma, sim_reps, sim_seed, sim_methods, sim_out,
                          sim_threads);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
