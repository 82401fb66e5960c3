#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace granular {

class LogPosterior;

/// Log density with gradient: returns log p(q) and writes d log p / dq.
using GradientField = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct HmcConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_draws = 1000;
  double target_accept = 0.8;
  int max_leapfrog = 512;
  std::uint64_t seed = 1;
  double init_jitter = 0.5;
  /// Integration time per transition before jitter; scaled by U(0, 1] each iteration.
  double path_length = 4.0;
  /// Threads used to run chains; 0 means one per chain.
  int n_workers = 1;

  void validate() const;
};

struct LeapfrogState {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  Eigen::VectorXd gradient;
  double log_density = 0.0;
  bool divergent = false;
};

/// n_steps leapfrog steps of size step for H = -log p(q) + p' M^-1 p / 2.
/// inv_mass is the diagonal of M^-1 (empty means identity). A non-finite
/// trajectory sets divergent and stops early; it never throws.
LeapfrogState leapfrog(const GradientField& field, const Eigen::VectorXd& position,
                       const Eigen::VectorXd& momentum, double step, int n_steps,
                       const Eigen::VectorXd& inv_mass = {});

struct ChainSummary {
  double accept_rate = 0.0;
  double step_size = 0.0;
  int divergences = 0;
  int warmup_divergences = 0;
  Eigen::VectorXd inv_mass;
};

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0, sd = 0.0, q05 = 0.0, q50 = 0.0, q95 = 0.0;
  double rhat = 0.0;      // NaN when undefined
  double ess_bulk = 0.0;  // NaN when undefined
  bool rhat_flag = false; // rhat > 1.01 or undefined
};

struct DiagnosticsTable {
  std::vector<ParameterDiagnostics> parameters;
  std::vector<std::string> warnings;
  double max_rhat() const;
  double min_ess() const;
  const ParameterDiagnostics& at(const std::string& name) const;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_draws = 0;
  /// (n_chains * n_draws) x dim, chain-major, constrained scale.
  Eigen::MatrixXd draws;
  std::vector<int> chain;
  std::vector<int> iteration;
  std::vector<double> energy;
  std::vector<char> divergent;
  std::vector<ChainSummary> chains;
  DiagnosticsTable diagnostics;

  int total_divergences() const;
  /// Column j of chain c.
  std::vector<double> chain_values(int c, std::size_t j) const;
  std::size_t column(const std::string& name) const;
};

struct SamplingTarget {
  GradientField field;
  std::size_t dim = 0;
  Eigen::VectorXd init_center;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> to_constrained;  // identity when empty
  std::vector<std::string> names;
};

/// Multi-chain HMC with jittered path length, dual-averaging step size and a
/// diagonal metric estimated in the second half of warmup. Reproducible for a
/// given seed and config regardless of the worker count.
PosteriorDraws sample(const SamplingTarget& target, const HmcConfig& config);
PosteriorDraws sample(const LogPosterior& posterior, const HmcConfig& config);

/// Split R-hat on rank-normalized draws (NaN for degenerate or single-chain input).
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Bulk effective sample size on rank-normalized split chains.
double ess_bulk(const std::vector<std::vector<double>>& chains);

DiagnosticsTable diagnostics(const PosteriorDraws& draws);

}  // namespace granular
