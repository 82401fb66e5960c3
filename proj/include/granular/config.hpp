#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "granular/fuzzy.hpp"
#include "granular/inference.hpp"
#include "granular/model.hpp"

namespace granular {

struct SimulationSettings {
  std::size_t n = 200;
  std::size_t k = 500;
  std::vector<double> beta{1.0, 0.5};  // first entry is the intercept
  double kappa = 2.0;
  double alpha_h = 4.0;
  double beta_h = 0.1;
  double lambda = 1.0;
  double covariate_sd = 1.0;
  ModelKind model = ModelKind::Cnar;
};

/// Every tunable of a run. Stored as JSON; unknown keys are rejected.
struct RunConfig {
  ModelKind model = ModelKind::Cnar;
  std::uint64_t seed = 1;
  int workers = 1;
  bool intercept = true;
  Priors priors;
  HmcConfig hmc;
  LikelihoodOptions likelihood{false, 1e-12};
  FitOptions fit;
  std::size_t ppc_reps = 200;
  std::size_t ppc_grid = 101;
  double car_tolerance = 1e-9;
  SimulationSettings simulate;

  void validate() const;
};

RunConfig default_config();
std::string config_to_json(const RunConfig& cfg);
/// Starts from defaults and applies the given JSON document on top.
RunConfig config_from_json(const std::string& text);
/// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to a string.
RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace granular
