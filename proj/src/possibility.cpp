#include "granular/possibility.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>

#include "granular/errors.hpp"

namespace granular {

MembershipVector::MembershipVector(std::vector<double> values) : xi(std::move(values)) {
  if (xi.empty()) throw ValidationError("membership vector must have at least one entry");
  for (double v : xi) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("membership degree outside [0,1]: " + std::to_string(v));
    }
  }
  k_max = xi.size() - 1;
}

double MembershipVector::max() const {
  return xi.empty() ? 0.0 : *std::max_element(xi.begin(), xi.end());
}

bool MembershipVector::has_support() const { return support_size() > 0; }

std::size_t MembershipVector::support_size() const {
  return static_cast<std::size_t>(std::count_if(xi.begin(), xi.end(), [](double v) { return v > 0.0; }));
}

PossibilityAssignment::PossibilityAssignment(std::size_t n_obs, std::size_t n_ref,
                                             std::vector<double> degrees,
                                             std::vector<std::string> referent_names)
    : n_obs_(n_obs), n_ref_(n_ref), degrees_(std::move(degrees)), names_(std::move(referent_names)) {
  if (n_ref_ == 0) throw ValidationError("possibility assignment needs at least one referent");
  if (degrees_.size() != n_obs_ * n_ref_) {
    throw ValidationError("possibility matrix has " + std::to_string(degrees_.size()) +
                          " cells, expected " + std::to_string(n_obs_ * n_ref_));
  }
  for (std::size_t i = 0; i < degrees_.size(); ++i) {
    double v = degrees_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("degree at observation " + std::to_string(i / n_ref_) + ", referent " +
                            std::to_string(i % n_ref_) + " outside [0,1]");
    }
  }
  if (names_.empty()) {
    for (std::size_t r = 0; r < n_ref_; ++r) names_.push_back("r" + std::to_string(r));
  } else if (names_.size() != n_ref_) {
    throw ValidationError("referent name count does not match matrix width");
  }
}

bool PossibilityAssignment::normalized_per_observation() const {
  for (std::size_t o = 0; o < n_obs_; ++o) {
    auto r = row(o);
    if (*std::max_element(r.begin(), r.end()) != 1.0) return false;
  }
  return true;
}

namespace {

void check_referent(const PossibilityAssignment& assign, std::size_t referent) {
  if (referent >= assign.n_ref()) {
    throw ValidationError("referent index " + std::to_string(referent) + " out of range (n_ref = " +
                          std::to_string(assign.n_ref()) + ")");
  }
}

std::vector<double> target_degrees(const PossibilityAssignment& assign, std::size_t referent) {
  std::vector<double> p(assign.n_obs());
  for (std::size_t o = 0; o < assign.n_obs(); ++o) p[o] = assign.degree(o, referent);
  return p;
}

}  // namespace

std::vector<double> complement_degrees(const PossibilityAssignment& assign, std::size_t referent) {
  check_referent(assign, referent);
  std::vector<double> q(assign.n_obs(), 0.0);
  for (std::size_t o = 0; o < assign.n_obs(); ++o) {
    for (std::size_t r = 0; r < assign.n_ref(); ++r) {
      if (r != referent) q[o] = std::max(q[o], assign.degree(o, r));
    }
  }
  return q;
}

MembershipVector granular_count_bruteforce(const PossibilityAssignment& assign,
                                           std::size_t referent) {
  check_referent(assign, referent);
  const std::size_t n = assign.n_obs();
  if (n > kBruteForceMaxObs) {
    throw ValidationError("instance too large for oracle: n_obs = " + std::to_string(n) +
                          " exceeds " + std::to_string(kBruteForceMaxObs));
  }
  const auto p = target_degrees(assign, referent);
  const auto q = complement_degrees(assign, referent);

  MembershipVector out;
  out.k_max = n;
  out.xi.assign(n + 1, 0.0);
  const std::uint32_t subsets = std::uint32_t{1} << n;
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    double in = 1.0;   // min over O_y, min of empty set is 1
    double out_ = 1.0; // min over the complement of O_y
    for (std::size_t o = 0; o < n; ++o) {
      if (mask & (std::uint32_t{1} << o)) {
        in = std::min(in, p[o]);
      } else {
        out_ = std::min(out_, q[o]);
      }
    }
    const auto y = static_cast<std::size_t>(std::popcount(mask));
    out.xi[y] = std::max(out.xi[y], std::min(in, out_));
  }
  return out;
}

// xi(y) >= alpha iff some y-subset has every member with p >= alpha and every
// non-member with q >= alpha. Observations with q < alpha are forced into the
// subset, so the level set is the interval [#{q < alpha}, #{p >= alpha}],
// provided no observation has both p and q below alpha. Lowering alpha only
// widens that interval, so sweeping candidates downward fills xi exactly.
MembershipVector granular_count_fast(const PossibilityAssignment& assign, std::size_t referent) {
  check_referent(assign, referent);
  const std::size_t n = assign.n_obs();
  auto p = target_degrees(assign, referent);
  auto q = complement_degrees(assign, referent);

  std::vector<double> both(n);
  for (std::size_t o = 0; o < n; ++o) both[o] = std::max(p[o], q[o]);

  std::vector<double> candidates;
  candidates.reserve(2 * n + 1);
  candidates.insert(candidates.end(), p.begin(), p.end());
  candidates.insert(candidates.end(), q.begin(), q.end());
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  std::sort(both.begin(), both.end());
  auto count_below = [](const std::vector<double>& v, double a) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), a) - v.begin());
  };

  MembershipVector out;
  out.k_max = n;
  out.xi.assign(n + 1, 0.0);

  bool filled = false;
  std::size_t lo = 0, hi = 0;  // inclusive range already assigned
  for (double alpha : candidates) {
    if (alpha <= 0.0) break;
    if (count_below(both, alpha) > 0) continue;
    const std::size_t forced = count_below(q, alpha);
    const std::size_t eligible = n - count_below(p, alpha);
    if (forced > eligible) continue;
    if (!filled) {
      for (std::size_t y = forced; y <= eligible; ++y) out.xi[y] = alpha;
      lo = forced;
      hi = eligible;
      filled = true;
    } else {
      for (std::size_t y = forced; y < lo; ++y) out.xi[y] = alpha;
      for (std::size_t y = hi + 1; y <= eligible; ++y) out.xi[y] = alpha;
      lo = std::min(lo, forced);
      hi = std::max(hi, eligible);
    }
    if (lo == 0 && hi == n) break;
  }
  return out;
}

}  // namespace granular
