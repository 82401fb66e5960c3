#include "granular/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "granular/errors.hpp"

namespace granular {

ReportingKernel::ReportingKernel(std::vector<MembershipVector> outcomes, std::vector<double> nu)
    : outcomes_(std::move(outcomes)), nu_(std::move(nu)) {
  if (outcomes_.empty()) throw ValidationError("reporting kernel needs at least one outcome");
  if (nu_.size() != outcomes_.size()) {
    throw ValidationError("reference mass has " + std::to_string(nu_.size()) + " entries for " +
                          std::to_string(outcomes_.size()) + " outcomes");
  }
  k_max_ = outcomes_.front().k_max;
  for (const auto& o : outcomes_) {
    if (o.k_max != k_max_ || o.xi.size() != k_max_ + 1) {
      throw ValidationError("all outcomes must share the same truncation level K");
    }
  }
  double total = 0.0;
  for (double w : nu_) {
    if (!(w >= 0.0)) throw ValidationError("reference mass entries must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("reference mass sums to " + std::to_string(total) + ", not 1");
  }
  for (std::size_t y = 0; y <= k_max_; ++y) normalizer(*this, y);
}

namespace {
std::vector<double> uniform_mass(std::size_t n) {
  return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}
}  // namespace

ReportingKernel::ReportingKernel(std::vector<MembershipVector> outcomes)
    : ReportingKernel(outcomes, uniform_mass(outcomes.size())) {}

double normalizer(const ReportingKernel& kern, std::size_t y) {
  if (y > kern.k_max_) {
    throw ValidationError("count " + std::to_string(y) + " outside {0.." + std::to_string(kern.k_max_) + "}");
  }
  double c = 0.0;
  for (std::size_t j = 0; j < kern.outcomes_.size(); ++j) c += kern.outcomes_[j].xi[y] * kern.nu_[j];
  if (!(c > 0.0)) {
    throw ValidationError("construction violated at y = " + std::to_string(y) + ": c(y) = 0");
  }
  return c;
}

double kernel_prob(const ReportingKernel& kern, std::size_t y, std::span<const std::size_t> subset) {
  const double c = normalizer(kern, y);
  std::set<std::size_t> unique(subset.begin(), subset.end());
  double mass = 0.0;
  for (std::size_t j : unique) {
    if (j >= kern.size()) throw ValidationError("outcome index " + std::to_string(j) + " out of range");
    mass += kern.outcomes()[j].xi[y] * kern.nu()[j];
  }
  return mass / c;
}

double zadeh_probability(const MembershipVector& mv, const LatentCountModel& latent) {
  if (mv.xi.size() != latent.pmf.size()) {
    throw ValidationError("membership vector length " + std::to_string(mv.xi.size()) +
                          " does not match pmf length " + std::to_string(latent.pmf.size()));
  }
  return std::inner_product(mv.xi.begin(), mv.xi.end(), latent.pmf.begin(), 0.0);
}

double marginal_outcome_prob(const ReportingKernel& kern, const LatentCountModel& latent,
                             std::size_t xi_index) {
  if (xi_index >= kern.size()) throw ValidationError("outcome index out of range");
  if (latent.pmf.size() != kern.k_max() + 1) {
    throw ValidationError("latent pmf length does not match kernel truncation level");
  }
  const auto& xi = kern.outcomes()[xi_index].xi;
  double s = 0.0;
  for (std::size_t y = 0; y <= kern.k_max(); ++y) s += xi[y] * latent.pmf[y] / normalizer(kern, y);
  return kern.nu()[xi_index] * s;
}

CarVerdict is_car(const ReportingKernel& kern, std::size_t xi_index, double tol) {
  if (xi_index >= kern.size()) throw ValidationError("outcome index out of range");
  if (!(kern.nu()[xi_index] > 0.0)) {
    throw ValidationError("CAR check requires nu(xi) > 0 for outcome " + std::to_string(xi_index));
  }
  const auto& xi = kern.outcomes()[xi_index].xi;
  CarVerdict v;
  std::size_t y_min = 0, y_max = 0, n = 0;
  double sum = 0.0;
  for (std::size_t y = 0; y <= kern.k_max(); ++y) {
    if (xi[y] <= 0.0) continue;
    const double r = xi[y] / normalizer(kern, y);
    if (n == 0 || r < v.ratio_min) {
      v.ratio_min = r;
      y_min = y;
    }
    if (n == 0 || r > v.ratio_max) {
      v.ratio_max = r;
      y_max = y;
    }
    sum += r;
    ++n;
  }
  if (n == 0) throw ValidationError("empty compatibility set for outcome " + std::to_string(xi_index));
  const double mean = sum / static_cast<double>(n);
  v.car = (v.ratio_max - v.ratio_min) <= tol * (1.0 + std::abs(mean));
  if (!v.car) v.witness = std::minmax(y_min, y_max);
  return v;
}

ReportingKernel kernel_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("kernel JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("outcomes")) {
    throw ValidationError("kernel JSON must be an object with an \"outcomes\" array");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "outcomes" && key != "nu") throw ValidationError("kernel JSON: unknown key \"" + key + "\"");
  }
  std::vector<MembershipVector> outcomes;
  try {
    for (const auto& row : j.at("outcomes")) outcomes.emplace_back(row.get<std::vector<double>>());
    if (j.contains("nu")) return ReportingKernel(std::move(outcomes), j.at("nu").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("kernel JSON: ") + e.what());
  }
  return ReportingKernel(std::move(outcomes));
}

std::string kernel_to_json(const ReportingKernel& kern) {
  nlohmann::json j;
  j["outcomes"] = nlohmann::json::array();
  for (const auto& o : kern.outcomes()) j["outcomes"].push_back(o.xi);
  j["nu"] = kern.nu();
  return j.dump(2);
}

}  // namespace granular
