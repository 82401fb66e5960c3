#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "granular/errors.hpp"
#include "granular/inference.hpp"
#include "granular/stats.hpp"

namespace granular {

double quantile_type7(std::span<const double> values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::vector<double>> split(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of pooled fractional ranks (ties averaged).
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  std::vector<std::size_t> offsets;
  for (const auto& c : chains) {
    offsets.push_back(pooled.size());
    for (double v : c) pooled.emplace_back(v, pooled.size());
  }
  std::sort(pooled.begin(), pooled.end());
  const double s = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  const boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    const double score = boost::math::quantile(normal, (rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k < j; ++k) z[pooled[k].second] = score;
    i = j;
  }
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(offsets[c]),
                     z.begin() + static_cast<std::ptrdiff_t>(offsets[c] + chains[c].size()));
  }
  return out;
}

struct BetweenWithin {
  double within = 0.0, between = 0.0, var_plus = 0.0;
  std::size_t n = 0;
};

BetweenWithin between_within(const std::vector<std::vector<double>>& chains) {
  BetweenWithin bw;
  bw.n = chains.front().size();
  std::vector<double> means;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    bw.within += variance(c);
  }
  bw.within /= static_cast<double>(chains.size());
  const double n = static_cast<double>(bw.n);
  bw.between = n * variance(means);
  bw.var_plus = (n - 1.0) / n * bw.within + bw.between / n;
  return bw;
}

bool usable(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) return false;
  for (const auto& c : chains) {
    if (c.size() < 4 || c.size() != chains.front().size()) return false;
    for (double v : c) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (!usable(chains)) return kNaN;
  const auto z = rank_normalize(split(chains));
  const auto bw = between_within(z);
  if (!(bw.within > 0.0)) return kNaN;
  return std::sqrt(bw.var_plus / bw.within);
}

double ess_bulk(const std::vector<std::vector<double>>& raw) {
  if (raw.empty() || raw.front().size() < 4) return kNaN;
  const auto chains = rank_normalize(split(raw));
  const auto bw = between_within(chains);
  if (!(bw.var_plus > 0.0) || !(bw.within > 0.0)) return kNaN;
  const std::size_t n = bw.n;
  const std::size_t m = chains.size();

  std::vector<double> chain_means;
  for (const auto& c : chains) chain_means.push_back(mean(c));
  auto mean_autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) {
        s += (chains[c][t] - chain_means[c]) * (chains[c][t + lag] - chain_means[c]);
      }
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (bw.within - mean_autocov(lag)) / bw.var_plus; };

  // Geyer's initial monotone positive sequence.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  const double total = static_cast<double>(n * m);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

DiagnosticsTable diagnostics(const PosteriorDraws& draws) {
  DiagnosticsTable table;
  if (draws.n_chains < 2) table.warnings.emplace_back("single chain: R-hat omitted");
  for (std::size_t j = 0; j < draws.names.size(); ++j) {
    ParameterDiagnostics d;
    d.name = draws.names[j];
    std::vector<std::vector<double>> chains;
    std::vector<double> all;
    for (int c = 0; c < draws.n_chains; ++c) {
      chains.push_back(draws.chain_values(c, j));
      all.insert(all.end(), chains.back().begin(), chains.back().end());
    }
    d.mean = mean(all);
    d.sd = std::sqrt(variance(all));
    d.q05 = quantile_type7(all, 0.05);
    d.q50 = quantile_type7(all, 0.50);
    d.q95 = quantile_type7(all, 0.95);
    d.rhat = draws.n_chains >= 2 ? split_rhat(chains) : kNaN;
    d.ess_bulk = ess_bulk(chains);
    d.rhat_flag = draws.n_chains >= 2 && !(d.rhat <= 1.01);
    if (d.rhat_flag) {
      table.warnings.push_back(d.name + ": R-hat " +
                               (std::isnan(d.rhat) ? std::string("undefined") : std::to_string(d.rhat)) +
                               " exceeds 1.01");
    }
    table.parameters.push_back(std::move(d));
  }
  return table;
}

double DiagnosticsTable::max_rhat() const {
  double m = 0.0;
  for (const auto& p : parameters) {
    if (std::isnan(p.rhat)) return kNaN;
    m = std::max(m, p.rhat);
  }
  return m;
}

double DiagnosticsTable::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : parameters) m = std::min(m, p.ess_bulk);
  return m;
}

const ParameterDiagnostics& DiagnosticsTable::at(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw ValidationError("no diagnostics for parameter " + name);
}

}  // namespace granular
