#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granular/possibility.hpp"

namespace granular {

/// Distribution of the latent count Y on {0..K}.
struct LatentCountModel {
  std::vector<double> pmf;
};

/// Fuzzy-reporting kernel over a finite outcome set M with reference mass nu.
///
/// Given Y = y, outcome xi is reported with probability xi(y) nu(xi) / c(y),
/// where c(y) = sum over M of xi(y) nu(xi). Construction requires c(y) > 0 for
/// every y, so the kernel is a proper conditional law on M.
class ReportingKernel {
 public:
  ReportingKernel(std::vector<MembershipVector> outcomes, std::vector<double> nu);
  /// Uniform reference mass.
  explicit ReportingKernel(std::vector<MembershipVector> outcomes);

  std::size_t k_max() const { return k_max_; }
  std::size_t size() const { return outcomes_.size(); }
  const std::vector<MembershipVector>& outcomes() const { return outcomes_; }
  const std::vector<double>& nu() const { return nu_; }

 private:
  friend double normalizer(const ReportingKernel&, std::size_t);
  std::vector<MembershipVector> outcomes_;
  std::vector<double> nu_;
  std::size_t k_max_ = 0;
};

/// c(y). Throws ValidationError naming y when the construction is violated.
double normalizer(const ReportingKernel& kern, std::size_t y);

/// phi(y, A) for a subset A of outcome indices (duplicates ignored).
double kernel_prob(const ReportingKernel& kern, std::size_t y, std::span<const std::size_t> subset);

/// Zadeh probability sum_y xi(y) P[Y = y].
double zadeh_probability(const MembershipVector& mv, const LatentCountModel& latent);

/// P[Xi = xi] = nu(xi) sum_y xi(y) P[Y = y] / c(y).
double marginal_outcome_prob(const ReportingKernel& kern, const LatentCountModel& latent,
                             std::size_t xi_index);

struct CarVerdict {
  bool car = false;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  /// On failure: the counts (ascending) attaining the extreme ratios xi(y)/c(y).
  std::optional<std::pair<std::size_t, std::size_t>> witness;
};

inline constexpr double kDefaultCarTolerance = 1e-9;

/// Outcome-wise coarsening-at-random check: phi(y, {xi}) is constant over the
/// compatibility set iff xi(y)/c(y) is, compared with relative tolerance tol.
CarVerdict is_car(const ReportingKernel& kern, std::size_t xi_index,
                  double tol = kDefaultCarTolerance);

/// JSON form: {"outcomes": [[...], ...], "nu": [...]}; "nu" optional (uniform).
ReportingKernel kernel_from_json(const std::string& text);
std::string kernel_to_json(const ReportingKernel& kern);

}  // namespace granular
