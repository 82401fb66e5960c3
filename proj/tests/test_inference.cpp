#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "granular/errors.hpp"
#include "granular/inference.hpp"
#include "granular/model.hpp"
#include "hmc_fixtures.hpp"
#include "oracles.hpp"

using namespace granular;

namespace {

std::vector<double> column(const PosteriorDraws& d, Eigen::Index j) {
  return {d.draws.col(j).data(), d.draws.col(j).data() + d.draws.rows()};
}

struct CnarProblem {
  RegressionSpec spec;
  std::vector<FuzzyObservation> data;
  ModelParams truth;
};

CnarProblem cnar_problem(std::size_t n, std::size_t k, std::uint64_t seed) {
  CnarProblem pr;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  pr.spec.covariates.resize(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < pr.spec.covariates.rows(); ++i) pr.spec.covariates.row(i) << 1.0, z(rng);
  pr.spec.offsets = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  pr.spec.k_max.assign(n, k);
  pr.truth.beta = Eigen::Vector2d(1.0, 0.5);
  pr.truth.kappa = 2.0;
  pr.truth.alpha_h = 4.0;
  pr.truth.beta_h = 0.1;
  pr.data = simulate(pr.spec, pr.truth, seed, ModelKind::Cnar).observations;
  return pr;
}

}  // namespace

TEST_CASE("leapfrog closed forms") {
  const GradientField flat = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g.setZero();
    return 0.0;
  };
  const Eigen::VectorXd q = Eigen::Vector2d(0.3, -1.2);
  CHECK(leapfrog(flat, q, Eigen::Vector2d::Zero(), 0.1, 10).position == q);

  const auto gauss = fixtures::gaussian_target(Eigen::Matrix2d::Identity());
  const double eps = 0.37;
  const Eigen::VectorXd p = Eigen::Vector2d(0.8, 0.1);
  const auto one = leapfrog(gauss.field, q, p, eps, 1);
  const Eigen::VectorXd want = q + eps * (p - eps / 2 * q);
  CHECK((one.position - want).norm() <= 1e-15);
  CHECK_THROWS_AS(leapfrog(gauss.field, q, p, 0.0, 1), ValidationError);

  const GradientField broken = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x;
    return x.norm() > 1.0 ? std::nan("") : 0.0;
  };
  const auto s = leapfrog(broken, Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(5.0, 0.0), 0.5, 10);
  CHECK(s.divergent);
}

TEST_CASE("leapfrog reversibility and energy error order") {
  const auto pr = cnar_problem(40, 80, 3);
  const auto post = LogPosterior::fuzzy(ModelKind::Cnar, pr.spec, pr.data);
  const GradientField field = [&](const Eigen::VectorXd& q, Eigen::VectorXd& g) { return post.log_density_and_gradient(q, g); };
  const Eigen::VectorXd q0 = post.to_unconstrained(pr.truth);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  Eigen::VectorXd p0(q0.size());
  for (auto& v : p0) v = z(rng);
  const auto fwd = leapfrog(field, q0, p0, 0.01, 25);
  REQUIRE_FALSE(fwd.divergent);
  const auto back = leapfrog(field, fwd.position, -fwd.momentum, 0.01, 25);
  CHECK((back.position - q0).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((back.momentum + p0).cwiseAbs().maxCoeff() <= 1e-8);

  const auto gauss = fixtures::gaussian_target(Eigen::Vector2d(1.0, 4.0).asDiagonal());
  const double e1 = fixtures::mean_energy_error(gauss.field, Eigen::Vector2d::Zero(), 0.2, 2.0, 400, 5);
  const double e2 = fixtures::mean_energy_error(gauss.field, Eigen::Vector2d::Zero(), 0.1, 2.0, 400, 5);
  CHECK(e1 / e2 >= 3.0);
  CHECK(e1 / e2 <= 5.0);
}

TEST_CASE("Gaussian targets") {
  HmcConfig cfg;
  cfg.n_draws = 2500;
  cfg.seed = 12;
  const auto d1 = sample(fixtures::gaussian_target(Eigen::MatrixXd::Identity(1, 1)), cfg);
  const auto x = column(d1, 0);
  CHECK(std::abs(oracle::mean(x)) < 0.05);
  CHECK(std::abs(oracle::var(x) - 1.0) < 0.1);
  // Single chains wander by a few points on a target this small, so the check pools them.
  double pooled = 0.0;
  for (const auto& c : d1.chains) pooled += c.accept_rate / d1.chains.size();
  CHECK(std::abs(pooled - cfg.target_accept) <= 0.05);
  CHECK(d1.total_divergences() == 0);

  Eigen::Matrix2d cov;
  cov << 1.0, 0.8, 0.8, 1.0;
  const auto d2 = sample(fixtures::gaussian_target(cov.inverse()), cfg);
  const auto a = column(d2, 0), b = column(d2, 1);
  const double ma = oracle::mean(a), mb = oracle::mean(b);
  double sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sab += (a[i] - ma) * (b[i] - mb);
  const double corr = sab / (a.size() - 1) / std::sqrt(oracle::var(a) * oracle::var(b));
  CHECK(std::abs(corr - 0.8) <= 0.05);
}

TEST_CASE("deterministic replay, worker independence and config checks") {
  HmcConfig cfg;
  cfg.n_warmup = 200;
  cfg.n_draws = 100;
  cfg.seed = 99;
  const auto target = fixtures::gaussian_target(Eigen::Matrix2d::Identity());
  const auto a = sample(target, cfg);
  cfg.n_workers = 4;
  const auto b = sample(target, cfg);
  CHECK(a.draws == b.draws);
  CHECK(a.energy == b.energy);
  cfg.seed = 100;
  CHECK(sample(target, cfg).draws != a.draws);
  CHECK(a.chain.size() == 400);
  CHECK(a.iteration.back() == 99);

  cfg.n_chains = 0;
  CHECK_THROWS_AS(sample(target, cfg), ValidationError);
  cfg.n_chains = 2;
  cfg.target_accept = 1.0;
  CHECK_THROWS_AS(sample(target, cfg), ValidationError);
}

TEST_CASE("all-divergent warmup is a hard error") {
  SamplingTarget t;
  t.dim = 1;
  t.field = [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -q;
    return std::abs(q[0]) < 1e-300 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  HmcConfig cfg;
  cfg.n_warmup = 30;
  cfg.n_draws = 10;
  cfg.init_jitter = 0.0;
  CHECK_THROWS_AS(sample(t, cfg), NumericalError);
}

TEST_CASE("diagnostics") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> iid(4, std::vector<double>(1000));
  for (auto& c : iid) {
    for (auto& v : c) v = z(rng);
  }
  const double r = split_rhat(iid);
  CHECK(r >= 0.99);
  CHECK(r <= 1.01);
  CHECK(ess_bulk(iid) >= 0.5 * 4000);

  auto shifted = iid;
  for (auto& v : shifted[2]) v += 5.0;
  CHECK(split_rhat(shifted) > 1.2);

  std::vector<std::vector<double>> constant(4, std::vector<double>(100, 3.0));
  CHECK(std::isnan(split_rhat(constant)));
  CHECK(std::isnan(split_rhat({iid[0]})));

  // An AR(1) chain has fewer effective draws than iid ones.
  std::vector<std::vector<double>> ar(4, std::vector<double>(1000));
  for (auto& c : ar) {
    double x = 0.0;
    for (auto& v : c) v = x = 0.9 * x + z(rng);
  }
  const double ess = ess_bulk(ar);
  CHECK(ess < 600.0);
  CHECK(ess > 100.0);

  PosteriorDraws d;
  d.names = {"a"};
  d.n_chains = 1;
  d.n_draws = 50;
  d.draws = Eigen::MatrixXd::Random(50, 1);
  const auto t = diagnostics(d);
  REQUIRE_FALSE(t.warnings.empty());
  CHECK(t.warnings.front().find("single chain") != std::string::npos);
  CHECK(std::isnan(t.parameters[0].rhat));

  d.n_chains = 2;
  d.n_draws = 25;
  d.draws.setConstant(1.0);
  const auto flat = diagnostics(d);
  CHECK(std::isnan(flat.parameters[0].rhat));
  CHECK(flat.parameters[0].rhat_flag);
}

TEST_CASE("Cnar posterior smoke run at the default configuration") {
  auto pr = cnar_problem(200, 500, 21);
  const auto post = LogPosterior::fuzzy(ModelKind::Cnar, pr.spec, pr.data, {}, {false, 1e-12});
  HmcConfig cfg;
  cfg.seed = 21;
  const auto draws = sample(post, cfg);
  CHECK(draws.diagnostics.max_rhat() <= 1.01);
  CHECK(draws.total_divergences() == 0);
  for (Eigen::Index j = 2; j < draws.draws.cols(); ++j) CHECK(draws.draws.col(j).minCoeff() > 0.0);
  const auto& b1 = draws.diagnostics.at("beta[1]");
  CHECK(std::abs(b1.mean - 0.5) <= 3 * b1.sd);
  const auto& kappa = draws.diagnostics.at("kappa");
  CHECK(std::abs(kappa.mean - 2.0) <= 3 * kappa.sd);
}
