#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "granular/fuzzy.hpp"
#include "granular/inference.hpp"
#include "granular/model.hpp"

namespace granular {

inline constexpr std::size_t kDefaultEnergyGrid = 101;

/// Mean pairwise fuzzy distances: within observed (u_obs), within replicated
/// (u_rep) and across the two samples (u_cross). Within-sample values are NaN
/// for singleton samples.
struct EnergyStats {
  double u_obs = 0.0;
  double u_rep = 0.0;
  double u_cross = 0.0;
};

struct ScalarSummary {
  double scaled_mean = 0.0;
  double iqr80 = 0.0;  // q0.9 - q0.1 of c_i / K_i
};

ScalarSummary scalar_summaries(const std::vector<FuzzyObservation>& data);

/// Membership sampled at t_j = j / (grid - 1) on the unit-scaled support.
std::vector<double> membership_profile(const BetaFuzzy& fz, std::size_t grid = kDefaultEnergyGrid);
/// Raw granular count on the same unit grid, linearly interpolated between counts.
std::vector<double> membership_profile(const MembershipVector& mv, std::size_t grid = kDefaultEnergyGrid);

/// Root-mean-square membership difference on the common unit grid.
double fuzzy_distance(const BetaFuzzy& a, const BetaFuzzy& b, std::size_t grid = kDefaultEnergyGrid);
double profile_distance(const std::vector<double>& a, const std::vector<double>& b);

EnergyStats energy_components(const std::vector<std::vector<double>>& observed,
                              const std::vector<std::vector<double>>& replicated);
EnergyStats energy_components(const std::vector<BetaFuzzy>& observed, const std::vector<BetaFuzzy>& replicated,
                              std::size_t grid = kDefaultEnergyGrid);

std::vector<BetaFuzzy> as_fuzzy(const std::vector<FuzzyObservation>& data);

/// One synthetic dataset per systematically thinned posterior draw.
std::vector<SimulatedData> replicate(const PosteriorDraws& draws, const RegressionSpec& spec, ModelKind kind,
                                     std::size_t n_reps, std::uint64_t seed);

struct ReplicateRecord {
  std::size_t rep_id = 0;
  double u_rep = 0.0;
  double u_cross = 0.0;
  ScalarSummary summary;
};

struct PpcSummary {
  ModelKind kind = ModelKind::Cnar;
  ScalarSummary observed;
  double u_obs = 0.0;
  std::vector<ReplicateRecord> replicates;
  /// Fraction of replicates whose statistic is >= the observed one.
  double tail_scaled_mean = 0.0;
  double tail_iqr80 = 0.0;
  double mean_u_rep = 0.0;
  double mean_u_cross = 0.0;
  /// Mean over replicates of |u_cross - u_obs|.
  double mean_cross_gap = 0.0;
  double mean_iqr80 = 0.0;
};

struct PpcOptions {
  std::size_t n_reps = 200;
  std::uint64_t seed = 1;
  std::size_t grid = kDefaultEnergyGrid;
};

PpcSummary posterior_predictive_check(const PosteriorDraws& draws, const RegressionSpec& spec, ModelKind kind,
                                      const std::vector<FuzzyObservation>& observed, const PpcOptions& options = {});

}  // namespace granular
