#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "granular/errors.hpp"
#include "granular/kernel.hpp"
#include "kernel_fixtures.hpp"

using namespace granular;

namespace {

ReportingKernel worked_example() {
  return ReportingKernel({MembershipVector({1.0, 0.5, 0.5, 0.25}), MembershipVector({0.25, 0.5, 1.0, 1.0})});
}

constexpr std::size_t kFirst[] = {0};

}  // namespace

TEST_CASE("worked two-outcome example") {
  const auto kern = worked_example();
  CHECK(normalizer(kern, 0) == doctest::Approx(5.0 / 8.0).epsilon(1e-15));
  CHECK(std::abs(kernel_prob(kern, 0, kFirst) - 0.8) <= 1e-12);
  CHECK(std::abs(kernel_prob(kern, 3, kFirst) - 0.2) <= 1e-12);
  const auto v = is_car(kern, 0);
  CHECK_FALSE(v.car);
  REQUIRE(v.witness.has_value());
  CHECK(*v.witness == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(v.ratio_max == doctest::Approx(1.6));
  CHECK(v.ratio_min == doctest::Approx(0.4));

  const LatentCountModel uniform{{0.25, 0.25, 0.25, 0.25}};
  const double hand = 0.25 * (4.0 / 5.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0);
  CHECK(marginal_outcome_prob(kern, uniform, 0) == doctest::Approx(hand).epsilon(1e-14));
  CHECK(marginal_outcome_prob(kern, uniform, 0) == doctest::Approx(0.4583333).epsilon(1e-6));
}

TEST_CASE("normalizer edge cases") {
  CHECK(normalizer(ReportingKernel({MembershipVector({0.5, 1.0})}), 0) == 0.5);
  CHECK(normalizer(ReportingKernel({MembershipVector({1, 1}), MembershipVector({1, 1}), MembershipVector({1, 1})}), 1) ==
        doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(ReportingKernel({MembershipVector({1.0, 0.0})}), doctest::Contains("y = 1"), ValidationError);
  CHECK_THROWS_AS(ReportingKernel({MembershipVector({1.0}), MembershipVector({1.0, 1.0})}), ValidationError);
  CHECK_THROWS_AS(ReportingKernel({MembershipVector({1.0, 1.0})}, {0.7}), ValidationError);
}

TEST_CASE("kernel_prob on subsets") {
  const auto kern = worked_example();
  const std::size_t all[] = {0, 1}, dup[] = {0, 0};
  for (std::size_t y = 0; y <= 3; ++y) {
    CHECK(kernel_prob(kern, y, all) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(kernel_prob(kern, y, std::span<const std::size_t>{}) == 0.0);
    CHECK(kernel_prob(kern, y, dup) == kernel_prob(kern, y, kFirst));
  }
  const std::size_t bad[] = {5};
  CHECK_THROWS_AS(kernel_prob(kern, 0, bad), ValidationError);
}

TEST_CASE("zadeh probability") {
  CHECK(zadeh_probability(MembershipVector({1, 0.5, 0.25, 0}), {{0.4, 0.3, 0.2, 0.1}}) == doctest::Approx(0.6));
  CHECK(zadeh_probability(MembershipVector({1, 1, 1}), {{0.2, 0.3, 0.5}}) == doctest::Approx(1.0));
  CHECK(zadeh_probability(MembershipVector({0, 1, 0}), {{0.2, 0.3, 0.5}}) == 0.3);
  CHECK_THROWS_AS(zadeh_probability(MembershipVector({0, 1}), {{0.2, 0.3, 0.5}}), ValidationError);
}

TEST_CASE("CAR special cases") {
  CHECK(is_car(ReportingKernel({MembershipVector({0.2, 0.7, 1.0})}), 0).car);
  const auto disjoint = ReportingKernel({MembershipVector({1, 1, 0, 0}), MembershipVector({0, 0, 1, 1})});
  for (std::size_t j : {0, 1}) {
    const auto v = is_car(disjoint, j);
    CHECK(v.car);
    CHECK(v.ratio_min == doctest::Approx(2.0));
    CHECK_FALSE(v.witness.has_value());
  }
  const auto zero_nu = ReportingKernel({MembershipVector({1, 1}), MembershipVector({1, 1})}, {1.0, 0.0});
  CHECK_THROWS_AS(is_car(zero_nu, 1), ValidationError);
  const auto empty = ReportingKernel({MembershipVector({1, 1}), MembershipVector({0, 0})});
  CHECK_THROWS_AS(is_car(empty, 1), ValidationError);
}

TEST_CASE("randomized kernel properties") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> m_dist(1, 6), k_dist(1, 25);
  for (int trial = 0; trial < 300; ++trial) {
    const auto kern = fixtures::random_sparse_kernel(rng, m_dist(rng) + 1, k_dist(rng));
    LatentCountModel latent{fixtures::random_simplex(rng, kern.k_max() + 1)};
    double total = 0.0;
    for (std::size_t j = 0; j < kern.size(); ++j) total += marginal_outcome_prob(kern, latent, j);
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (std::size_t y = 0; y <= kern.k_max(); ++y) {
      double row = 0.0;
      for (std::size_t j = 0; j < kern.size(); ++j) {
        const std::size_t one[] = {j};
        const double p = kernel_prob(kern, y, one);
        row += p;
        if (kern.outcomes()[j].xi[y] == 0.0) CHECK(p == 0.0);
      }
      CHECK(std::abs(row - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("CAR detector on constructed kernels") {
  std::mt19937_64 rng(99);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto c = fixtures::constructed_car_case(rng, trial % 2 == 1);
    agree += is_car(c.kernel, 0).car == c.car;
    ++total;
  }
  CHECK(agree == total);
}

TEST_CASE("json round trip and strictness") {
  const auto kern = worked_example();
  const auto back = kernel_from_json(kernel_to_json(kern));
  CHECK(back.nu() == kern.nu());
  CHECK(back.outcomes()[1].xi == kern.outcomes()[1].xi);
  CHECK_THROWS_AS(kernel_from_json(R"({"outcomes": [[1, 1]], "weights": [1]})"), ValidationError);
  CHECK_THROWS_AS(kernel_from_json("{"), ValidationError);
  CHECK_THROWS_AS(kernel_from_json(R"({"outcomes": [[1, 2]]})"), ValidationError);
}
