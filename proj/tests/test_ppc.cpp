#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "granular/errors.hpp"
#include "granular/ppc.hpp"
#include "oracles.hpp"

using namespace granular;

namespace {

std::vector<FuzzyObservation> scaled_grid(std::size_t k) {
  std::vector<FuzzyObservation> out;
  for (int i = 1; i <= 10; ++i) out.push_back({0.1 * i * static_cast<double>(k), 30.0, k});
  return out;
}

// Membership and RMS distance summed directly from the KL definition.
double oracle_distance(double m1, double h1, double m2, double h2, int grid) {
  long double s = 0.0L;
  for (int j = 0; j < grid; ++j) {
    const double t = static_cast<double>(j) / (grid - 1);
    const long double a = std::exp(-static_cast<long double>(h1) * oracle::bernoulli_kl(m1, t));
    const long double b = std::exp(-static_cast<long double>(h2) * oracle::bernoulli_kl(m2, t));
    s += (a - b) * (a - b);
  }
  return static_cast<double>(std::sqrt(s / grid));
}

std::vector<BetaFuzzy> random_fuzzy(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::uniform_real_distribution<double> loc(0.02, 0.98), logh(std::log(2.0), std::log(200.0));
  std::vector<BetaFuzzy> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(loc(rng) * k, std::exp(logh(rng)), k);
  return out;
}

RegressionSpec small_spec(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  RegressionSpec s;
  s.covariates.resize(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < s.covariates.rows(); ++i) s.covariates.row(i) << 1.0, z(rng);
  s.offsets = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  s.k_max.assign(n, k);
  return s;
}

// A posterior that has collapsed onto one parameter vector.
PosteriorDraws point_mass(const Eigen::VectorXd& row, int rows) {
  PosteriorDraws d;
  d.n_chains = 1;
  d.n_draws = rows;
  d.draws = row.transpose().replicate(rows, 1);
  return d;
}

}  // namespace

TEST_CASE("scalar summaries") {
  const auto s = scalar_summaries(scaled_grid(20));
  CHECK(s.scaled_mean == doctest::Approx(0.55).epsilon(1e-14));
  CHECK(s.iqr80 == doctest::Approx(0.72).epsilon(1e-13));

  const auto big = scalar_summaries(scaled_grid(200));
  CHECK(big.scaled_mean == doctest::Approx(s.scaled_mean).epsilon(1e-14));
  CHECK(big.iqr80 == doctest::Approx(s.iqr80).epsilon(1e-13));

  std::vector<FuzzyObservation> flat(7, FuzzyObservation{3.0, 10.0, 12});
  CHECK(scalar_summaries(flat).iqr80 == 0.0);
  CHECK_THROWS_AS(scalar_summaries({}), ValidationError);
}

TEST_CASE("distance fixture against direct summation") {
  const BetaFuzzy a(0.3 * 50, 20.0, 50), b(0.7 * 50, 20.0, 50);
  const double d = fuzzy_distance(a, b, 101);
  CHECK(d > 0.0);
  CHECK(d == doctest::Approx(oracle_distance(0.3, 20.0, 0.7, 20.0, 101)).epsilon(1e-12));
  CHECK(d == doctest::Approx(0.5824980316).epsilon(1e-9));
  CHECK(fuzzy_distance(a, a) == 0.0);
  CHECK_THROWS_AS(fuzzy_distance(a, b, 1), ValidationError);
}

TEST_CASE("metric axioms on random triples") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = random_fuzzy(rng, 3, 1 + rng() % 300);
    const double ab = fuzzy_distance(f[0], f[1]), ba = fuzzy_distance(f[1], f[0]);
    const double bc = fuzzy_distance(f[1], f[2]), ac = fuzzy_distance(f[0], f[2]);
    CHECK(fuzzy_distance(f[0], f[0]) == 0.0);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("energy components") {
  std::mt19937_64 rng(8);
  const auto obs = random_fuzzy(rng, 25, 80);

  SUBCASE("same multiset") {
    auto shuffled = obs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto e = energy_components(obs, shuffled);
    CHECK(std::abs(e.u_rep - e.u_obs) <= 1e-12 * e.u_obs);
    const double n = static_cast<double>(obs.size());
    CHECK(e.u_cross == doctest::Approx((n - 1.0) / n * e.u_obs).epsilon(1e-12));
  }

  SUBCASE("ordering does not move u_obs") {
    auto shuffled = obs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto e1 = energy_components(obs, obs);
    const auto e2 = energy_components(shuffled, obs);
    CHECK(e1.u_obs == doctest::Approx(e2.u_obs).epsilon(1e-12));
    CHECK(e1.u_cross == doctest::Approx(e2.u_cross).epsilon(1e-12));
  }

  SUBCASE("identical outcomes") {
    std::vector<BetaFuzzy> same(6, BetaFuzzy(4.0, 15.0, 10));
    const auto e = energy_components(same, same);
    CHECK(e.u_obs == 0.0);
    CHECK(e.u_rep == 0.0);
    CHECK(e.u_cross == 0.0);
  }

  SUBCASE("singletons") {
    const auto e = energy_components(std::vector<BetaFuzzy>{obs[0]}, obs);
    CHECK(std::isnan(e.u_obs));
    CHECK(std::isfinite(e.u_rep));
    CHECK(std::isfinite(e.u_cross));
    CHECK_THROWS_AS(energy_components(std::vector<BetaFuzzy>{}, obs), ValidationError);
  }

  SUBCASE("all components non-negative") {
    const auto other = random_fuzzy(rng, 10, 80);
    const auto e = energy_components(obs, other);
    CHECK(e.u_obs >= 0.0);
    CHECK(e.u_rep >= 0.0);
    CHECK(e.u_cross >= 0.0);
  }
}

TEST_CASE("raw membership profiles") {
  MembershipVector mv;
  mv.k_max = 4;
  mv.xi = {0.0, 0.5, 1.0, 0.25, 0.0};
  const auto prof = membership_profile(mv, 9);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0, 0.625, 0.25, 0.125, 0.0};
  for (std::size_t j = 0; j < expect.size(); ++j) CHECK(prof[j] == doctest::Approx(expect[j]).epsilon(1e-14));
}

TEST_CASE("replicate mechanics") {
  const auto spec = small_spec(30, 100, 3);
  Eigen::VectorXd truth(5);
  truth << 1.0, 0.5, 2.0, 4.0, 0.1;
  const auto draws = point_mass(truth, 50);

  const auto one = replicate(draws, spec, ModelKind::Cnar, 1, 9);
  REQUIRE(one.size() == 1);
  CHECK(one[0].observations.size() == spec.n());

  const auto r1 = replicate(draws, spec, ModelKind::Cnar, 20, 9);
  const auto r2 = replicate(draws, spec, ModelKind::Cnar, 20, 9);
  for (std::size_t r = 0; r < r1.size(); ++r) {
    for (std::size_t i = 0; i < spec.n(); ++i) {
      CHECK(r1[r].observations[i].c == r2[r].observations[i].c);
      CHECK(r1[r].observations[i].h == r2[r].observations[i].h);
    }
  }
  // A collapsed posterior still gives different datasets: the variability is generative.
  CHECK(r1[0].observations[0].c != r1[1].observations[0].c);

  CHECK_THROWS_AS(replicate(draws, spec, ModelKind::Cnar, 51, 9), ValidationError);
  CHECK_THROWS_AS(replicate(draws, spec, ModelKind::Cnar, 0, 9), ValidationError);
  CHECK_THROWS_AS(replicate(PosteriorDraws{}, spec, ModelKind::Cnar, 1, 9), ValidationError);
}

TEST_CASE("predictive check at the true parameters is calibrated") {
  Eigen::VectorXd truth(5);
  truth << 1.0, 0.5, 2.0, 4.0, 0.1;
  const auto draws = point_mass(truth, 200);
  int bracketed = 0, central = 0;
  // At the truth the tail probability is uniform, so 90% is the expected rate, not a floor.
  // The check allows 2.5 binomial standard errors below it.
  const int seeds = 100;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto spec = small_spec(40, 100, 100 + seed);
    const auto params = params_from_constrained(ModelKind::Cnar, 2, truth);
    const auto data = simulate(spec, params, 500 + seed, ModelKind::Cnar).observations;
    PpcOptions opt;
    opt.n_reps = 200;
    opt.seed = seed;
    opt.grid = 21;
    const auto s = posterior_predictive_check(draws, spec, ModelKind::Cnar, data, opt);
    REQUIRE(s.replicates.size() == 200);
    double lo = 1.0, hi = 0.0;
    for (const auto& r : s.replicates) {
      lo = std::min(lo, r.summary.scaled_mean);
      hi = std::max(hi, r.summary.scaled_mean);
      CHECK(r.u_cross >= 0.0);
    }
    bracketed += lo <= s.observed.scaled_mean && s.observed.scaled_mean <= hi;
    central += s.tail_scaled_mean >= 0.05 && s.tail_scaled_mean <= 0.95;
    CHECK(s.tail_scaled_mean >= 0.0);
    CHECK(s.tail_iqr80 <= 1.0);
  }
  CHECK(bracketed >= 90);
  CHECK(central >= 85);
}

TEST_CASE("predictive check input validation") {
  const auto spec = small_spec(10, 50, 1);
  Eigen::VectorXd truth(5);
  truth << 1.0, 0.5, 2.0, 4.0, 0.1;
  const auto data = simulate(spec, params_from_constrained(ModelKind::Cnar, 2, truth), 2, ModelKind::Cnar).observations;
  const auto draws = point_mass(truth, 5);
  PpcOptions opt;
  opt.n_reps = 1;
  const auto s = posterior_predictive_check(draws, spec, ModelKind::Cnar, data, opt);
  CHECK(s.replicates.size() == 1);

  auto short_data = data;
  short_data.pop_back();
  CHECK_THROWS_AS(posterior_predictive_check(draws, spec, ModelKind::Cnar, short_data, opt), ValidationError);
  auto wrong_k = data;
  wrong_k[0].k = 49;
  CHECK_THROWS_AS(posterior_predictive_check(draws, spec, ModelKind::Cnar, wrong_k, opt), ValidationError);
  opt.n_reps = 6;
  CHECK_THROWS_AS(posterior_predictive_check(draws, spec, ModelKind::Cnar, data, opt), ValidationError);
}
