// Gaussian targets and energy bookkeeping shared by the inference tests and the acceptance suite.
#pragma once

#include <random>

#include "granular/inference.hpp"

namespace fixtures {

/// Zero-mean Gaussian with the given precision matrix.
inline granular::SamplingTarget gaussian_target(const Eigen::MatrixXd& precision) {
  granular::SamplingTarget t;
  t.dim = static_cast<std::size_t>(precision.rows());
  t.field = [precision](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = -precision * q;
    return -0.5 * q.dot(precision * q);
  };
  return t;
}

inline double hamiltonian(const granular::LeapfrogState& s) { return -s.log_density + 0.5 * s.momentum.squaredNorm(); }

/// Mean |Delta H| over random starts for a fixed integration time.
inline double mean_energy_error(const granular::GradientField& field, const Eigen::VectorXd& center, double step,
                                double time, int n_starts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const int n_steps = static_cast<int>(std::lround(time / step));
  double total = 0.0;
  for (int i = 0; i < n_starts; ++i) {
    Eigen::VectorXd q = center, p(center.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      q[j] += 0.3 * z(rng);
      p[j] = z(rng);
    }
    const auto start = granular::leapfrog(field, q, p, step, 0);
    const auto end = granular::leapfrog(field, q, p, step, n_steps);
    total += std::abs(hamiltonian(end) - hamiltonian(start));
  }
  return total / n_starts;
}

}  // namespace fixtures
