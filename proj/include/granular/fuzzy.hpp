#pragma once

#include <cstddef>
#include <optional>

#include "granular/possibility.hpp"

namespace granular {

/// Beta-type fuzzy count with location c in [0, K] and precision h > 0.
///
/// Membership is exp(-h * KL(Bernoulli(c/K) || Bernoulli(y/K))), the
/// mode-normalized Beta kernel with shapes 1 + h*c/K and 1 + h*(1 - c/K).
/// Large h concentrates the set on c; small h spreads it over [0, K].
struct BetaFuzzy {
  double c = 0.0;
  double h = 1.0;
  std::size_t k_max = 1;

  BetaFuzzy() = default;
  BetaFuzzy(double c, double h, std::size_t k_max);
};

/// Bernoulli Kullback-Leibler divergence KL(m || t), with 0 ln 0 = 0.
/// Returns +inf when t sits on a boundary that m does not.
double bernoulli_kl(double m, double t);

/// Membership on the unit scale: exp(-h * KL(m || t)), zero when KL is infinite.
double beta_membership_unit(double m, double h, double t);

double beta_membership(const BetaFuzzy& fz, std::size_t y);

/// Evaluates the family on the grid {0..K}.
MembershipVector to_membership(const BetaFuzzy& fz);

struct IntegerInterval {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool contains(std::size_t y) const { return lo <= y && y <= hi; }
  friend bool operator==(const IntegerInterval&, const IntegerInterval&) = default;
};

/// {y : membership(y) >= alpha} as a closed interval; empty when no grid
/// point reaches alpha (possible for alpha = 1 and fractional c).
std::optional<IntegerInterval> alpha_cut(const BetaFuzzy& fz, double alpha);

struct FitOptions {
  double tolerance = 1e-8;
  int max_iterations = 500;
  double crisp_ceiling = 1e6;
};

struct FitResult {
  BetaFuzzy params;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Support of size one: exact point fit with h pinned to the ceiling.
  bool crisp = false;
};

/// Least-squares fit of (c, h) to a raw membership vector.
///
/// Starts from the argmax (mean of ties) and the half-height crossing, then
/// alternates golden-section refinements on c and log h until the combined
/// parameter change drops below the tolerance.
FitResult fit_beta(const MembershipVector& mv, const FitOptions& options = {});

/// Centroid defuzzifier sum(y * xi) / sum(xi).
double defuzzify(const MembershipVector& mv);

}  // namespace granular
