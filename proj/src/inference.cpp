#include "granular/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "granular/errors.hpp"
#include "granular/model.hpp"
#include "granular/rng.hpp"

namespace granular {

void HmcConfig::validate() const {
  if (n_chains < 1) throw ValidationError("n_chains must be >= 1");
  if (n_warmup < 0 || n_draws < 1) throw ValidationError("n_warmup must be >= 0 and n_draws >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ValidationError("target_accept must lie in (0, 1)");
  if (max_leapfrog < 1) throw ValidationError("max_leapfrog must be >= 1");
  if (!(init_jitter >= 0.0)) throw ValidationError("init_jitter must be >= 0");
  if (!(path_length > 0.0)) throw ValidationError("path_length must be positive");
  if (n_workers < 0) throw ValidationError("n_workers must be >= 0");
}

namespace {

constexpr double kDivergenceThreshold = 1000.0;

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_mass) {
  return 0.5 * p.dot(inv_mass.cwiseProduct(p));
}

// Leapfrog starting from a state whose gradient is already known.
LeapfrogState integrate(const GradientField& field, LeapfrogState s, double step, int n_steps,
                        const Eigen::VectorXd& inv_mass) {
  for (int i = 0; i < n_steps; ++i) {
    s.momentum += 0.5 * step * s.gradient;
    s.position += step * inv_mass.cwiseProduct(s.momentum);
    s.log_density = field(s.position, s.gradient);
    if (!std::isfinite(s.log_density) || !s.gradient.allFinite()) {
      s.divergent = true;
      return s;
    }
    s.momentum += 0.5 * step * s.gradient;
  }
  return s;
}

}  // namespace

LeapfrogState leapfrog(const GradientField& field, const Eigen::VectorXd& position,
                       const Eigen::VectorXd& momentum, double step, int n_steps,
                       const Eigen::VectorXd& inv_mass) {
  if (!(step > 0.0)) throw ValidationError("leapfrog step must be positive");
  if (position.size() != momentum.size()) throw ValidationError("position and momentum differ in size");
  const Eigen::VectorXd m = inv_mass.size() == 0 ? Eigen::VectorXd::Ones(position.size()) : inv_mass;
  LeapfrogState s;
  s.position = position;
  s.momentum = momentum;
  s.gradient = Eigen::VectorXd::Zero(position.size());
  s.log_density = field(s.position, s.gradient);
  if (!std::isfinite(s.log_density) || !s.gradient.allFinite() || !position.allFinite() ||
      !momentum.allFinite()) {
    s.divergent = true;
    return s;
  }
  return integrate(field, std::move(s), step, n_steps, m);
}

namespace {

struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps = 0.0, log_eps_bar = 0.0;
  int count = 0;
  double target = 0.8;
  static constexpr double gamma = 0.15, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = 0.0;
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    count = 0;
  }
  double update(double accept) {
    ++count;
    const double m = static_cast<double>(count);
    h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target - accept) / (m + t0);
    log_eps = mu - std::sqrt(m) / gamma * h_bar;
    const double w = std::pow(m, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_step() const { return std::exp(log_eps_bar); }
};

struct ChainResult {
  Eigen::MatrixXd draws;
  std::vector<double> energy;
  std::vector<char> divergent;
  ChainSummary summary;
  std::string error;
};

class ChainRunner {
 public:
  ChainRunner(const SamplingTarget& target, const HmcConfig& config, int chain)
      : target_(target), config_(config), rng_(make_stream(config.seed, static_cast<std::uint64_t>(chain))) {}

  ChainResult run() {
    ChainResult out;
    const auto dim = static_cast<Eigen::Index>(target_.dim);
    inv_mass_ = Eigen::VectorXd::Ones(dim);
    initialize();

    double step = reasonable_step(1.0);
    DualAveraging da;
    da.target = config_.target_accept;
    da.restart(step);

    const int warmup = config_.n_warmup;
    const bool adapt_metric = warmup >= 20;
    const int metric_begin = warmup / 2;
    const int metric_end = static_cast<int>(0.7 * warmup);
    Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(dim), w_m2 = Eigen::VectorXd::Zero(dim);
    int w_n = 0;

    out.draws.resize(config_.n_draws, dim);
    int accepted_sum_n = 0;
    double accept_sum = 0.0;
    for (int it = 0; it < warmup + config_.n_draws; ++it) {
      const bool in_warmup = it < warmup;
      double accept = 0.0;
      bool divergent = false;
      transition(step, accept, divergent);
      if (in_warmup) {
        if (divergent) ++out.summary.warmup_divergences;
        step = da.update(divergent ? 0.0 : accept);
        if (adapt_metric && it >= metric_begin && it < metric_end) {
          ++w_n;
          const Eigen::VectorXd delta = state_.position - w_mean;
          w_mean += delta / static_cast<double>(w_n);
          w_m2 += delta.cwiseProduct(state_.position - w_mean);
        }
        if (adapt_metric && it == metric_end - 1 && w_n > 2) {
          const double n = static_cast<double>(w_n);
          const Eigen::VectorXd var = w_m2 / (n - 1.0);
          inv_mass_ = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
          step = reasonable_step(step);
          da.restart(step);
        }
        if (it == warmup - 1) {
          if (out.summary.warmup_divergences == warmup) {
            throw NumericalError("every warmup transition diverged; re-parametrize or rescale the model");
          }
          step = da.final_step();
        }
      } else {
        const int d = it - warmup;
        out.draws.row(d) = constrained(state_.position).transpose();
        out.energy.push_back(-state_.log_density + kinetic(last_momentum_, inv_mass_));
        out.divergent.push_back(divergent ? 1 : 0);
        if (divergent) ++out.summary.divergences;
        accept_sum += accept;
        ++accepted_sum_n;
      }
    }
    out.summary.accept_rate = accepted_sum_n ? accept_sum / accepted_sum_n : 0.0;
    out.summary.step_size = step;
    out.summary.inv_mass = inv_mass_;
    return out;
  }

 private:
  Eigen::VectorXd constrained(const Eigen::VectorXd& q) const {
    return target_.to_constrained ? target_.to_constrained(q) : q;
  }

  Eigen::VectorXd draw_momentum() {
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd p(inv_mass_.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) p[j] = normal(rng_) / std::sqrt(inv_mass_[j]);
    return p;
  }

  void initialize() {
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(target_.dim);
    Eigen::VectorXd center = target_.init_center.size() == dim ? target_.init_center : Eigen::VectorXd::Zero(dim);
    for (int attempt = 0; attempt < 100; ++attempt) {
      state_.position = center;
      for (Eigen::Index j = 0; j < dim; ++j) state_.position[j] += config_.init_jitter * normal(rng_);
      state_.gradient = Eigen::VectorXd::Zero(dim);
      state_.log_density = target_.field(state_.position, state_.gradient);
      if (std::isfinite(state_.log_density) && state_.gradient.allFinite()) return;
    }
    throw NumericalError("log density is not finite at any initial point");
  }

  // Doubles or halves the step until one-step acceptance crosses 1/2.
  double reasonable_step(double step) {
    const Eigen::VectorXd p = draw_momentum();
    const double h0 = -state_.log_density + kinetic(p, inv_mass_);
    auto accept_log = [&](double eps) {
      LeapfrogState s = state_;
      s.momentum = p;
      s = integrate(target_.field, std::move(s), eps, 1, inv_mass_);
      if (s.divergent) return -std::numeric_limits<double>::infinity();
      return h0 - (-s.log_density + kinetic(s.momentum, inv_mass_));
    };
    double a = accept_log(step);
    const double dir = a > std::log(0.5) ? 1.0 : -1.0;
    for (int i = 0; i < 100; ++i) {
      if (dir > 0 ? !(a > std::log(0.5)) : !(a < std::log(0.5))) break;
      step *= std::pow(2.0, dir);
      if (step > 1e6 || step < 1e-12) break;
      a = accept_log(step);
    }
    return step;
  }

  void transition(double step, double& accept, bool& divergent) {
    boost::random::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::VectorXd p = draw_momentum();
    const double jitter = 1.0 - unif(rng_);  // (0, 1]
    const int n_steps = std::clamp(static_cast<int>(std::ceil(jitter * config_.path_length / step)), 1,
                                   config_.max_leapfrog);
    LeapfrogState start = state_;
    start.momentum = p;
    const double h0 = -state_.log_density + kinetic(p, inv_mass_);
    LeapfrogState end = integrate(target_.field, start, step, n_steps, inv_mass_);
    const double h1 = end.divergent ? std::numeric_limits<double>::infinity()
                                    : -end.log_density + kinetic(end.momentum, inv_mass_);
    divergent = end.divergent || !std::isfinite(h1) || (h1 - h0) > kDivergenceThreshold;
    accept = divergent ? 0.0 : std::min(1.0, std::exp(h0 - h1));
    if (!divergent && unif(rng_) < accept) {
      state_ = std::move(end);
      last_momentum_ = state_.momentum;
    } else {
      last_momentum_ = p;
    }
  }

  const SamplingTarget& target_;
  const HmcConfig& config_;
  Rng rng_;
  LeapfrogState state_;
  Eigen::VectorXd inv_mass_;
  Eigen::VectorXd last_momentum_;
};

}  // namespace

PosteriorDraws sample(const SamplingTarget& target, const HmcConfig& config) {
  config.validate();
  if (target.dim < 1) throw ValidationError("sampling target must have dimension >= 1");
  std::vector<ChainResult> results(static_cast<std::size_t>(config.n_chains));

  auto run_chain = [&](int c) {
    try {
      ChainRunner runner(target, config, c);
      results[static_cast<std::size_t>(c)] = runner.run();
    } catch (const std::exception& e) {
      results[static_cast<std::size_t>(c)].error = e.what();
    }
  };
  const int workers = config.n_workers == 0 ? config.n_chains : std::min(config.n_workers, config.n_chains);
  if (workers <= 1) {
    for (int c = 0; c < config.n_chains; ++c) run_chain(c);
  } else {
    for (int start = 0; start < config.n_chains; start += workers) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(start + workers, config.n_chains); ++c) pool.emplace_back(run_chain, c);
      for (auto& t : pool) t.join();
    }
  }
  for (std::size_t c = 0; c < results.size(); ++c) {
    if (!results[c].error.empty()) throw NumericalError("chain " + std::to_string(c) + ": " + results[c].error);
  }

  PosteriorDraws out;
  out.n_chains = config.n_chains;
  out.n_draws = config.n_draws;
  out.names = target.names;
  const auto dim = results.front().draws.cols();
  if (out.names.empty()) {
    for (Eigen::Index j = 0; j < dim; ++j) out.names.push_back("theta[" + std::to_string(j) + "]");
  }
  out.draws.resize(static_cast<Eigen::Index>(config.n_chains) * config.n_draws, dim);
  for (int c = 0; c < config.n_chains; ++c) {
    auto& r = results[static_cast<std::size_t>(c)];
    out.draws.middleRows(static_cast<Eigen::Index>(c) * config.n_draws, config.n_draws) = r.draws;
    for (int d = 0; d < config.n_draws; ++d) {
      out.chain.push_back(c);
      out.iteration.push_back(d);
    }
    out.energy.insert(out.energy.end(), r.energy.begin(), r.energy.end());
    out.divergent.insert(out.divergent.end(), r.divergent.begin(), r.divergent.end());
    out.chains.push_back(r.summary);
  }
  out.diagnostics = diagnostics(out);
  return out;
}

PosteriorDraws sample(const LogPosterior& posterior, const HmcConfig& config) {
  SamplingTarget target;
  target.dim = posterior.dim();
  target.field = [&posterior](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    return posterior.log_density_and_gradient(q, g);
  };
  target.init_center = posterior.prior_mean();
  target.to_constrained = [&posterior](const Eigen::VectorXd& q) { return posterior.constrained(q); };
  target.names = posterior.parameter_names();
  return sample(target, config);
}

int PosteriorDraws::total_divergences() const {
  int n = 0;
  for (const auto& c : chains) n += c.divergences;
  return n;
}

std::vector<double> PosteriorDraws::chain_values(int c, std::size_t j) const {
  std::vector<double> v(static_cast<std::size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d) {
    v[static_cast<std::size_t>(d)] = draws(static_cast<Eigen::Index>(c) * n_draws + d, static_cast<Eigen::Index>(j));
  }
  return v;
}

std::size_t PosteriorDraws::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("no parameter named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace granular
