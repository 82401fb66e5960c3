#include "granular/ppc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "granular/errors.hpp"
#include "granular/rng.hpp"
#include "granular/stats.hpp"

namespace granular {

ScalarSummary scalar_summaries(const std::vector<FuzzyObservation>& data) {
  if (data.empty()) throw ValidationError("scalar summaries need a non-empty dataset");
  std::vector<double> scaled;
  scaled.reserve(data.size());
  for (const auto& d : data) scaled.push_back(d.c / static_cast<double>(d.k));
  return {mean(scaled), quantile_type7(scaled, 0.9) - quantile_type7(scaled, 0.1)};
}

std::vector<double> membership_profile(const BetaFuzzy& fz, std::size_t grid) {
  if (grid < 2) throw ValidationError("energy grid needs at least two points");
  const double m = fz.c / static_cast<double>(fz.k_max);
  std::vector<double> out(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    out[j] = beta_membership_unit(m, fz.h, static_cast<double>(j) / static_cast<double>(grid - 1));
  }
  return out;
}

std::vector<double> membership_profile(const MembershipVector& mv, std::size_t grid) {
  if (grid < 2) throw ValidationError("energy grid needs at least two points");
  if (mv.xi.empty()) throw ValidationError("empty membership vector");
  std::vector<double> out(grid);
  const double k = static_cast<double>(mv.k_max);
  for (std::size_t j = 0; j < grid; ++j) {
    const double x = k * static_cast<double>(j) / static_cast<double>(grid - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(x)), mv.k_max);
    const std::size_t hi = std::min(lo + 1, mv.k_max);
    const double f = x - static_cast<double>(lo);
    out[j] = (1.0 - f) * mv.xi[lo] + f * mv.xi[hi];
  }
  return out;
}

double profile_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("profiles must share a non-empty grid");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double fuzzy_distance(const BetaFuzzy& a, const BetaFuzzy& b, std::size_t grid) {
  return profile_distance(membership_profile(a, grid), membership_profile(b, grid));
}

namespace {

double within_mean(const std::vector<std::vector<double>>& s) {
  if (s.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) total += profile_distance(s[i], s[j]);
  }
  return total / (0.5 * static_cast<double>(s.size()) * static_cast<double>(s.size() - 1));
}

double cross_mean(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double total = 0.0;
  for (const auto& x : a) {
    for (const auto& y : b) total += profile_distance(x, y);
  }
  return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace

EnergyStats energy_components(const std::vector<std::vector<double>>& observed,
                              const std::vector<std::vector<double>>& replicated) {
  if (observed.empty() || replicated.empty()) throw ValidationError("energy components need non-empty samples");
  return {within_mean(observed), within_mean(replicated), cross_mean(observed, replicated)};
}

EnergyStats energy_components(const std::vector<BetaFuzzy>& observed, const std::vector<BetaFuzzy>& replicated,
                              std::size_t grid) {
  std::vector<std::vector<double>> a, b;
  for (const auto& f : observed) a.push_back(membership_profile(f, grid));
  for (const auto& f : replicated) b.push_back(membership_profile(f, grid));
  return energy_components(a, b);
}

std::vector<BetaFuzzy> as_fuzzy(const std::vector<FuzzyObservation>& data) {
  std::vector<BetaFuzzy> out;
  out.reserve(data.size());
  for (const auto& d : data) out.emplace_back(d.c, d.h, d.k);
  return out;
}

std::vector<SimulatedData> replicate(const PosteriorDraws& draws, const RegressionSpec& spec, ModelKind kind,
                                     std::size_t n_reps, std::uint64_t seed) {
  const auto available = static_cast<std::size_t>(draws.draws.rows());
  if (available == 0) throw ValidationError("no posterior draws to replicate from");
  if (n_reps == 0 || n_reps > available) {
    throw ValidationError("requested " + std::to_string(n_reps) + " replicates from " +
                          std::to_string(available) + " draws");
  }
  std::vector<SimulatedData> out;
  out.reserve(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    const std::size_t row = r * available / n_reps;
    const auto params = params_from_constrained(kind, spec.p(), draws.draws.row(static_cast<Eigen::Index>(row)).transpose());
    out.push_back(simulate(spec, params, mix64(seed) ^ mix64(r + 1), kind));
  }
  return out;
}

PpcSummary posterior_predictive_check(const PosteriorDraws& draws, const RegressionSpec& spec, ModelKind kind,
                                      const std::vector<FuzzyObservation>& observed, const PpcOptions& options) {
  if (observed.size() != spec.n()) throw ValidationError("observed data does not match the regression spec");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i].k != spec.k_max[i]) throw ValidationError("K mismatch at sample " + std::to_string(i));
  }
  PpcSummary s;
  s.kind = kind;
  s.observed = scalar_summaries(observed);
  std::vector<std::vector<double>> obs_profiles;
  for (const auto& f : as_fuzzy(observed)) obs_profiles.push_back(membership_profile(f, options.grid));

  s.u_obs = within_mean(obs_profiles);
  const auto reps = replicate(draws, spec, kind, options.n_reps, options.seed);
  double above_mean = 0.0, above_iqr = 0.0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    std::vector<std::vector<double>> rep_profiles;
    for (const auto& f : as_fuzzy(reps[r].observations)) rep_profiles.push_back(membership_profile(f, options.grid));
    ReplicateRecord rec{r, within_mean(rep_profiles), cross_mean(obs_profiles, rep_profiles),
                        scalar_summaries(reps[r].observations)};
    if (rec.summary.scaled_mean >= s.observed.scaled_mean) above_mean += 1.0;
    if (rec.summary.iqr80 >= s.observed.iqr80) above_iqr += 1.0;
    s.mean_u_rep += rec.u_rep;
    s.mean_u_cross += rec.u_cross;
    s.mean_cross_gap += std::abs(rec.u_cross - s.u_obs);
    s.mean_iqr80 += rec.summary.iqr80;
    s.replicates.push_back(rec);
  }
  const double n = static_cast<double>(reps.size());
  s.tail_scaled_mean = above_mean / n;
  s.tail_iqr80 = above_iqr / n;
  s.mean_u_rep /= n;
  s.mean_u_cross /= n;
  s.mean_cross_gap /= n;
  s.mean_iqr80 /= n;
  return s;
}

}  // namespace granular
