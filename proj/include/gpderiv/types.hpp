#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpderiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Regression sample: covariates, responses, and (optionally) per-observation
/// noise standard deviations in the units of y.
struct Dataset {
  Vector x;
  Vector y;
  std::optional<Vector> obs_sd;

  Eigen::Index size() const { return x.size(); }

  void validate() const {
    if (x.size() != y.size())
      throw std::invalid_argument("Dataset: x and y must have equal length");
    if (x.size() < 1) throw std::invalid_argument("Dataset: need at least one observation");
    if (obs_sd) {
      if (obs_sd->size() != x.size())
        throw std::invalid_argument("Dataset: obs_sd length must match x");
      if ((obs_sd->array() < 0.0).any())
        throw std::invalid_argument("Dataset: obs_sd entries must be nonnegative");
    }
  }
};

enum class NoiseModel { Homoscedastic, Heteroscedastic };

/// Requested derivative order exceeds what the kernel supports.
class order_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky failure that survived the jitter escalation ladder.
class factorization_error : public std::runtime_error {
 public:
  factorization_error(const std::string& what, std::vector<double> jitters)
      : std::runtime_error(what), jitters_tried(std::move(jitters)) {}
  std::vector<double> jitters_tried;
};

}  // namespace gpderiv
