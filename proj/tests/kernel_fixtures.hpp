// Random kernel generators shared by the kernel unit tests and the acceptance suite.
#pragma once

#include <random>
#include <vector>

#include "granular/kernel.hpp"

namespace fixtures {

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(m);
  double s = 0.0;
  for (auto& v : w) s += (v = e(rng) + 1e-3);
  for (auto& v : w) v /= s;
  return w;
}

/// Kernel with strictly positive memberships everywhere.
inline granular::ReportingKernel random_kernel(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<granular::MembershipVector> out;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> xi(k + 1);
    for (auto& v : xi) v = u(rng);
    out.emplace_back(xi);
  }
  return granular::ReportingKernel(out, random_simplex(rng, m));
}

/// Same, but outcome 0 has zeros on a random part of the grid.
inline granular::ReportingKernel random_sparse_kernel(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  auto base = random_kernel(rng, m, k);
  auto outcomes = base.outcomes();
  std::bernoulli_distribution drop(0.4);
  for (auto& v : outcomes[0].xi) {
    if (drop(rng)) v = 0.0;
  }
  return granular::ReportingKernel(outcomes, base.nu());
}

struct CarCase {
  granular::ReportingKernel kernel;
  bool car;  // ground truth by construction
};

/// Outcome 0 is built with xi_0(y) proportional to c(y) on a random support,
/// which makes xi_0 / c constant there. When perturb is set, one support entry
/// is then moved by a relative amount far above the detector tolerance.
inline CarCase constructed_car_case(std::mt19937_64& rng, bool perturb) {
  std::uniform_int_distribution<std::size_t> m_dist(2, 5), k_dist(1, 30);
  const std::size_t m = m_dist(rng), k = k_dist(rng);
  auto others = random_kernel(rng, m - 1, k);  // positive everywhere, so c(y) > 0
  const auto nu = random_simplex(rng, m);

  std::vector<double> rest(k + 1, 0.0);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    for (std::size_t y = 0; y <= k; ++y) rest[y] += nu[j + 1] * others.outcomes()[j].xi[y];
  }
  std::bernoulli_distribution in_support(0.7);
  std::vector<char> support(k + 1);
  std::size_t n_support = 0;
  for (auto& s : support) n_support += (s = in_support(rng));
  if (n_support == 0) {
    support[0] = 1;
    n_support = 1;
  }
  double rest_max = 0.0;
  for (std::size_t y = 0; y <= k; ++y) {
    if (support[y]) rest_max = std::max(rest_max, rest[y]);
  }
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const double a = u(rng) / rest_max;  // xi_0 = a * rest keeps xi_0 <= 1
  std::vector<double> xi0(k + 1, 0.0);
  for (std::size_t y = 0; y <= k; ++y) {
    if (support[y]) xi0[y] = a * rest[y];
  }
  bool car = true;
  if (perturb && n_support >= 2) {
    std::vector<std::size_t> idx;
    for (std::size_t y = 0; y <= k; ++y) {
      if (support[y]) idx.push_back(y);
    }
    const std::size_t y = idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
    std::uniform_real_distribution<double> rel(1e-6, 0.5);
    const double f = 1.0 + (xi0[y] < 0.5 ? rel(rng) : -rel(rng));
    xi0[y] *= f;
    car = false;
  }
  std::vector<granular::MembershipVector> outcomes{granular::MembershipVector(xi0)};
  for (const auto& o : others.outcomes()) outcomes.push_back(o);
  return {granular::ReportingKernel(outcomes, nu), car};
}

}  // namespace fixtures
