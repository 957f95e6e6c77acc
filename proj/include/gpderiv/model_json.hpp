#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "gpderiv/gp.hpp"
#include "gpderiv/kernels.hpp"
#include "gpderiv/types.hpp"

namespace gpderiv {

namespace detail {

inline std::uint64_t fnv1a_accumulate(std::uint64_t h, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    const double d = v[i];
    std::memcpy(&bits, &d, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace detail

inline std::string dataset_digest(const Dataset& data) {
  std::uint64_t h = 14695981039346656037ULL;
  h = detail::fnv1a_accumulate(h, data.x);
  h = detail::fnv1a_accumulate(h, data.y);
  if (data.obs_sd) h = detail::fnv1a_accumulate(h, *data.obs_sd);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vector vector_from_json(const nlohmann::json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace detail

inline void save_model(const FittedGP& model, std::ostream& out) {
  if (!model.config) throw std::invalid_argument("save_model: only parametric-kernel fits are persistable");
  nlohmann::json j;
  j["format"] = "gpderiv-model-v1";
  j["kernel"]["family"] = kernel_family_name(model.config->family);
  if (model.config->family == KernelFamily::Matern) j["kernel"]["nu"] = model.config->nu;
  j["kernel"]["max_deriv_order"] = model.config->max_deriv_order;
  j["lambda"] = model.lambda;
  j["sigma2"] = model.sigma2;
  j["noise_model"] = model.noise_model == NoiseModel::Heteroscedastic ? "heteroscedastic" : "homoscedastic";
  j["data"]["x"] = detail::vector_to_json(model.data.x);
  j["data"]["y"] = detail::vector_to_json(model.data.y);
  if (model.data.obs_sd) j["data"]["sigma_y"] = detail::vector_to_json(*model.data.obs_sd);
  j["alpha"] = detail::vector_to_json(model.alpha);
  j["data_digest"] = dataset_digest(model.data);
  out << j.dump(2) << '\n';
}

/// Rebuilds the fitted model from its descriptor: the stored data and
/// hyperparameters are refit (deterministic), and the digest guards against a
/// tampered or truncated file.
inline FittedGP load_model(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "gpderiv-model-v1")
    throw std::runtime_error("load_model: unrecognized model format");

  Dataset data;
  data.x = detail::vector_from_json(j.at("data").at("x"));
  data.y = detail::vector_from_json(j.at("data").at("y"));
  if (j.at("data").contains("sigma_y")) data.obs_sd = detail::vector_from_json(j.at("data").at("sigma_y"));
  if (j.at("data_digest").get<std::string>() != dataset_digest(data))
    throw std::runtime_error("load_model: data digest mismatch");

  const std::string family = j.at("kernel").at("family").get<std::string>();
  KernelConfig cfg;
  if (family == "matern") {
    cfg = KernelConfig::matern(j.at("kernel").at("nu").get<double>());
  } else if (family == "se") {
    cfg = KernelConfig::squared_exponential();
  } else if (family == "sobolev") {
    cfg = KernelConfig::sobolev2();
  } else {
    throw std::runtime_error("load_model: unknown kernel family '" + family + "'");
  }
  if (j.at("kernel").contains("max_deriv_order"))
    cfg.max_deriv_order = j.at("kernel").at("max_deriv_order").get<int>();

  const auto noise = j.value("noise_model", "homoscedastic") == "heteroscedastic"
                         ? NoiseModel::Heteroscedastic
                         : NoiseModel::Homoscedastic;
  return fit(data, cfg, j.at("lambda").get<double>(), j.at("sigma2").get<double>(), noise);
}

}  // namespace gpderiv
