#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "granular/kernel.hpp"

namespace granular {

/// Which observation model a likelihood, gradient or simulator refers to.
///
/// Cnar marginalizes the latent NegBin count under the Beta reporting law.
/// Car1 and Car2 are the ignorable baselines that condition the Beta location
/// on the scaled mean directly (Car2 adds a global precision multiplier
/// lambda). Proxy is a plain NegBin regression on defuzzified scalars.
enum class ModelKind { Cnar, Car1, Car2, Proxy };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct RegressionSpec {
  Eigen::MatrixXd covariates;         // n x p, rows z_i
  Eigen::VectorXd offsets;            // u_i > 0
  std::vector<std::size_t> k_max;     // K_i >= 1
  std::vector<std::string> covariate_names;

  std::size_t n() const { return static_cast<std::size_t>(covariates.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(covariates.cols()); }
  void validate() const;
};

struct ModelParams {
  Eigen::VectorXd beta;
  double kappa = 1.0;
  double alpha_h = 1.0;
  double beta_h = 1.0;
  double lambda = 1.0;  // Car2 only
};

/// Paired statistics (c_i, h_i) of one fuzzy count, with its truncation level.
struct FuzzyObservation {
  double c = 0.0;
  double h = 1.0;
  std::size_t k = 1;
};

/// Independent Normal priors on the unconstrained scale.
struct Priors {
  double beta_mean = 0.0, beta_sd = 5.0;
  double log_kappa_mean = 0.0, log_kappa_sd = 1.5;
  double log_alpha_h_mean = 0.0, log_alpha_h_sd = 1.5;
  double log_beta_h_mean = 0.0, log_beta_h_sd = 1.5;
  double log_lambda_mean = 0.0, log_lambda_sd = 1.0;
};

struct LikelihoodOptions {
  /// When false, the latent sum stops once the NegBin mass reaches 1 - tail_mass.
  bool exact_truncation = false;
  double tail_mass = 1e-12;
};

/// mu_i = u_i exp(z_i beta).
double mean_response(const RegressionSpec& spec, const ModelParams& params, std::size_t i);

/// NegBin log pmf, mean mu and dispersion kappa (Var = mu + mu^2 / kappa).
/// Accepts non-integer y through the Gamma-function extension.
double negbin_log_pmf(double y, double mu, double kappa);

/// NegBin restricted to {0..k} and renormalized.
LatentCountModel truncated_count_pmf(double mu, double kappa, std::size_t k);

/// Beta(h * y_bar, h * (1 - y_bar)) log density at c_bar.
double cond_location_log_density(double c_bar, double h, double y_bar);

/// (y + 0.5) / (K + 1): keeps both Beta shapes positive at y = 0 and y = K.
double continuity_corrected(double y, std::size_t k);
/// Clamps c / K into [1/(2K+2), 1 - 1/(2K+2)].
double clamp_location(double c, std::size_t k);

/// Log-likelihood of an observed location c on the {0..K} scale under
/// Beta(a, b) for c / K. Inside the clamp bounds this is the Beta log density;
/// a location at or beyond a bound is read as censored there and contributes
/// the Beta tail mass beyond that bound.
double location_log_likelihood(double c, std::size_t k, double a, double b);

struct LoglikParts {
  double precision_term = 0.0;  // sum of Gamma(h_i; alpha_h, beta_h) log densities
  double location_term = 0.0;   // everything that involves c_i
  double total() const { return precision_term + location_term; }
};

LoglikParts cnar_observed_loglik_parts(const RegressionSpec& spec, const ModelParams& params,
                                       const std::vector<FuzzyObservation>& data,
                                       const LikelihoodOptions& options = {});
double cnar_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data,
                            const LikelihoodOptions& options = {});
double car1_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data);
double car2_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data);
double proxy_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                             const std::vector<double>& responses);

/// Log posterior over the unconstrained parameter vector.
///
/// Layout: beta (p), then per model log kappa (Cnar, Proxy), log alpha_h and
/// log beta_h (all fuzzy models), log lambda (Car2). Priors live on this
/// scale, so no Jacobian correction is needed. Observation-only quantities
/// are precomputed at construction; evaluation is const and may run
/// concurrently.
class LogPosterior {
 public:
  static LogPosterior fuzzy(ModelKind kind, RegressionSpec spec, std::vector<FuzzyObservation> data,
                            Priors priors = {}, LikelihoodOptions options = {});
  static LogPosterior scalar_proxy(RegressionSpec spec, std::vector<double> responses,
                                   Priors priors = {});

  ModelKind kind() const { return kind_; }
  std::size_t dim() const;
  std::vector<std::string> parameter_names() const;

  double log_density(const Eigen::VectorXd& theta) const;
  /// Returns the log density and writes its gradient into grad.
  double log_density_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

  ModelParams to_params(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd to_unconstrained(const ModelParams& params) const;
  /// Constrained-scale values in parameter_names() order.
  Eigen::VectorXd constrained(const Eigen::VectorXd& theta) const;
  /// Prior means on the unconstrained scale.
  Eigen::VectorXd prior_mean() const;

  const RegressionSpec& spec() const { return spec_; }
  const Priors& priors() const { return priors_; }

 private:
  friend LoglikParts cnar_observed_loglik_parts(const RegressionSpec&, const ModelParams&,
                                                const std::vector<FuzzyObservation>&,
                                                const LikelihoodOptions&);
  LogPosterior() = default;
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;
  double cnar_location(const Eigen::VectorXd& log_mu, double kappa, Eigen::VectorXd* d_log_mu,
                       double* d_log_kappa) const;

  ModelKind kind_ = ModelKind::Cnar;
  RegressionSpec spec_;
  Priors priors_;
  LikelihoodOptions options_;
  std::vector<FuzzyObservation> data_;
  std::vector<double> responses_;
  // Cnar: per-sample Beta log densities over the latent grid.
  std::vector<std::vector<double>> location_logdens_;
  std::size_t max_k_ = 0;
  double sum_log_h_ = 0.0, sum_h_ = 0.0;
};

/// Gradient of the log posterior at params (converted to the unconstrained scale).
Eigen::VectorXd grad_log_posterior(const RegressionSpec& spec, const ModelParams& params,
                                   const std::vector<FuzzyObservation>& data, const Priors& priors,
                                   ModelKind kind);

struct SimulatedData {
  std::vector<FuzzyObservation> observations;
  std::vector<std::size_t> latent;  // Cnar only
};

/// Draws a synthetic dataset from the generative stack of the chosen model.
/// Deterministic given the seed.
SimulatedData simulate(const RegressionSpec& spec, const ModelParams& params, std::uint64_t seed,
                       ModelKind kind);

}  // namespace granular

namespace granular {

/// Rebuilds model parameters from one constrained-scale posterior draw laid
/// out in LogPosterior::parameter_names() order.
ModelParams params_from_constrained(ModelKind kind, std::size_t p, const Eigen::VectorXd& row);

}  // namespace granular
