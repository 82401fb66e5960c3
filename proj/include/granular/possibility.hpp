#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace granular {

/// Possibility distribution over the truncated count space {0..k_max}.
///
/// xi[y] is the degree to which exactly y observations belong to the
/// referent. Entries past k_max are implicitly zero.
struct MembershipVector {
  std::size_t k_max = 0;
  std::vector<double> xi;

  MembershipVector() = default;
  explicit MembershipVector(std::vector<double> values);

  double operator[](std::size_t y) const { return y < xi.size() ? xi[y] : 0.0; }
  double max() const;
  bool has_support() const;
  std::size_t support_size() const;
};

/// Dense observations x referents matrix of possibility degrees in [0, 1].
class PossibilityAssignment {
 public:
  PossibilityAssignment(std::size_t n_obs, std::size_t n_ref, std::vector<double> degrees,
                        std::vector<std::string> referent_names = {});

  std::size_t n_obs() const { return n_obs_; }
  std::size_t n_ref() const { return n_ref_; }
  double degree(std::size_t obs, std::size_t ref) const { return degrees_[obs * n_ref_ + ref]; }
  std::span<const double> row(std::size_t obs) const {
    return {degrees_.data() + obs * n_ref_, n_ref_};
  }
  const std::vector<std::string>& referent_names() const { return names_; }

  /// True iff every observation has some referent with degree exactly 1.
  bool normalized_per_observation() const;

 private:
  std::size_t n_obs_;
  std::size_t n_ref_;
  std::vector<double> degrees_;
  std::vector<std::string> names_;
};

/// Upper bound on n_obs accepted by the subset-enumeration oracle.
inline constexpr std::size_t kBruteForceMaxObs = 20;

/// q[o] = max over r' != referent of pi_o(r'); zero when there is no alternative.
std::vector<double> complement_degrees(const PossibilityAssignment& assign, std::size_t referent);

/// Granular count by exhaustive enumeration of all observation subsets.
/// Exponential; guarded to n_obs <= kBruteForceMaxObs.
MembershipVector granular_count_bruteforce(const PossibilityAssignment& assign,
                                           std::size_t referent);

/// Granular count via the alpha-threshold characterization, O(K log K).
MembershipVector granular_count_fast(const PossibilityAssignment& assign, std::size_t referent);

}  // namespace granular
