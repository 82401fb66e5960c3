#include "granular/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "granular/errors.hpp"

namespace granular {

BetaFuzzy::BetaFuzzy(double c_, double h_, std::size_t k) : c(c_), h(h_), k_max(k) {
  if (k_max < 1) throw ValidationError("Beta-type fuzzy count needs K >= 1");
  if (!(c >= 0.0 && c <= static_cast<double>(k_max))) {
    throw ValidationError("location c = " + std::to_string(c) + " outside [0, K]");
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ValidationError("precision h must be finite and positive, got " + std::to_string(h));
  }
}

namespace {

double xlogx_ratio(double a, double b) {
  if (a == 0.0) return 0.0;
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  return a * std::log(a / b);
}

}  // namespace

double bernoulli_kl(double m, double t) {
  return xlogx_ratio(m, t) + xlogx_ratio(1.0 - m, 1.0 - t);
}

double beta_membership_unit(double m, double h, double t) {
  if (t == m) return 1.0;
  const double d = bernoulli_kl(m, t);
  if (!std::isfinite(d)) return 0.0;
  return std::exp(-h * d);
}

double beta_membership(const BetaFuzzy& fz, std::size_t y) {
  if (y > fz.k_max) {
    throw ValidationError("count " + std::to_string(y) + " outside {0.." + std::to_string(fz.k_max) + "}");
  }
  const double k = static_cast<double>(fz.k_max);
  return beta_membership_unit(fz.c / k, fz.h, static_cast<double>(y) / k);
}

MembershipVector to_membership(const BetaFuzzy& fz) {
  MembershipVector mv;
  mv.k_max = fz.k_max;
  mv.xi.resize(fz.k_max + 1);
  for (std::size_t y = 0; y <= fz.k_max; ++y) mv.xi[y] = beta_membership(fz, y);
  return mv;
}

std::optional<IntegerInterval> alpha_cut(const BetaFuzzy& fz, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  std::optional<IntegerInterval> cut;
  for (std::size_t y = 0; y <= fz.k_max; ++y) {
    if (beta_membership(fz, y) >= alpha) {
      if (!cut) cut = IntegerInterval{y, y};
      cut->hi = y;
    }
  }
  return cut;
}

namespace {

template <class F>
double golden_section(F&& f, double a, double b, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  // The bracket may sit on a domain edge where the minimum is attained.
  const double mid = 0.5 * (a + b);
  double best = mid, fbest = f(mid);
  for (double x : {a, b}) {
    const double fx = f(x);
    if (fx < fbest) {
      best = x;
      fbest = fx;
    }
  }
  return best;
}

double sse_at(const MembershipVector& mv, double m, double h) {
  const double k = static_cast<double>(mv.k_max);
  double s = 0.0;
  for (std::size_t y = 0; y <= mv.k_max; ++y) {
    const double r = mv.xi[y] - beta_membership_unit(m, h, static_cast<double>(y) / k);
    s += r * r;
  }
  return s;
}

// d SSE / d m at fixed h, using d xi / d m = -h xi (log(m/t) - log((1-m)/(1-t))).
double sse_slope_m(const MembershipVector& mv, double m, double h) {
  const double k = static_cast<double>(mv.k_max);
  double g = 0.0;
  for (std::size_t y = 0; y <= mv.k_max; ++y) {
    const double t = static_cast<double>(y) / k;
    const double xi = beta_membership_unit(m, h, t);
    if (xi == 0.0) continue;
    const double dkl = std::log(m / t) - std::log((1.0 - m) / (1.0 - t));
    g += 2.0 * (mv.xi[y] - xi) * h * xi * dkl;
  }
  return g;
}

double half_height_location(const MembershipVector& mv, double c0) {
  // Nearest crossing of the 0.5 level on either side of c0, linearly interpolated.
  const auto n = static_cast<long>(mv.xi.size());
  const long start = std::clamp(static_cast<long>(std::lround(c0)), 0L, n - 1);
  if (mv.xi[start] <= 0.5) return static_cast<double>(start);
  double best = std::numeric_limits<double>::quiet_NaN();
  for (long step : {-1L, 1L}) {
    long prev = start;
    for (long y = start + step; y >= 0 && y < n; y += step) {
      if (mv.xi[y] <= 0.5) {
        const double above = mv.xi[prev], below = mv.xi[y];
        const double frac = std::clamp((above - 0.5) / (above - below), 0.0, 1.0);
        const double pos = static_cast<double>(prev) + frac * static_cast<double>(step);
        if (std::isnan(best) || std::abs(pos - c0) < std::abs(best - c0)) best = pos;
        break;
      }
      prev = y;
    }
  }
  return best;
}

}  // namespace

FitResult fit_beta(const MembershipVector& mv, const FitOptions& options) {
  if (mv.k_max < 1 || mv.xi.size() != mv.k_max + 1) {
    throw ValidationError("membership vector must cover {0..K} with K >= 1");
  }
  if (!mv.has_support()) throw ValidationError("empty fuzzy set: no positive membership");
  const double top = mv.max();
  if (top != 1.0) {
    throw ValidationError("membership vector is not normalized (max = " + std::to_string(top) + ")");
  }

  const double k = static_cast<double>(mv.k_max);
  double argmax_sum = 0.0;
  int argmax_n = 0;
  for (std::size_t y = 0; y <= mv.k_max; ++y) {
    if (mv.xi[y] == top) {
      argmax_sum += static_cast<double>(y);
      ++argmax_n;
    }
  }
  double c = argmax_sum / argmax_n;

  FitResult res;
  if (mv.support_size() == 1) {
    res.params = BetaFuzzy(c, options.crisp_ceiling, mv.k_max);
    res.sse = sse_at(mv, c / k, options.crisp_ceiling);
    res.converged = true;
    res.crisp = true;
    return res;
  }

  const double log_ceiling = std::log(options.crisp_ceiling);
  double h = 1.0;
  const double t_half = half_height_location(mv, c);
  if (!std::isnan(t_half)) {
    const double d = bernoulli_kl(c / k, t_half / k);
    if (d > 0.0 && std::isfinite(d)) h = std::numbers::ln2 / d;
  }
  h = std::clamp(h, 1e-3, options.crisp_ceiling);
  double log_h = std::log(h);

  constexpr double kLineTol = 1e-13;
  double sse_prev = sse_at(mv, c / k, h);
  for (res.iterations = 1; res.iterations <= options.max_iterations; ++res.iterations) {
    const double hh = std::exp(log_h);
    const double c_new = golden_section([&](double x) { return sse_at(mv, x / k, hh); },
                                        std::max(0.0, c - 1.0), std::min(k, c + 1.0), kLineTol);
    const double log_h_new = golden_section(
        [&](double x) { return sse_at(mv, c_new / k, std::exp(x)); }, log_h - 2.0,
        std::min(log_ceiling, log_h + 2.0), kLineTol);
    double c_next = c_new, log_h_next = log_h_new;
    // Coordinate sweeps zig-zag along the c/h ridge; extrapolate along the sweep direction.
    const double dc = c_new - c, dl = log_h_new - log_h;
    if (std::abs(dc) + std::abs(dl) > 1e-12) {
      auto at = [&](double s) {
        return std::pair{std::clamp(c_new + s * dc, 0.0, k), std::min(log_ceiling, log_h_new + s * dl)};
      };
      const double s = golden_section(
          [&](double s) {
            const auto [cc, ll] = at(s);
            return sse_at(mv, cc / k, std::exp(ll));
          },
          0.0, 8.0, kLineTol);
      const auto [cc, ll] = at(s);
      if (sse_at(mv, cc / k, std::exp(ll)) < sse_at(mv, c_new / k, std::exp(log_h_new))) {
        c_next = cc;
        log_h_next = ll;
      }
    }
    const double change = std::abs(c_next - c) + std::abs(std::exp(log_h_next) - hh) / hh;
    const double sse_next = sse_at(mv, c_next / k, std::exp(log_h_next));
    // Line searches resolve the minimizer only to about sqrt(eps) relative, so a
    // loss that no longer moves at machine precision also counts as converged.
    const bool stalled = sse_prev - sse_next <= 1e-14 * (1.0 + sse_next);
    c = c_next;
    log_h = log_h_next;
    sse_prev = sse_next;
    if (change < options.tolerance || (stalled && res.iterations > 1)) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, options.max_iterations);

  // Golden section pins c only to about sqrt(eps); a few Newton steps on the
  // analytic slope finish the location.
  if (c > 0.0 && c < k) {
    const double hh = std::exp(log_h);
    for (int it = 0; it < 5; ++it) {
      const double m = c / k;
      const double g = sse_slope_m(mv, m, hh);
      const double dm = 1e-6 * std::min(m, 1.0 - m);
      const double curv = (sse_slope_m(mv, m + dm, hh) - sse_slope_m(mv, m - dm, hh)) / (2.0 * dm);
      if (!(curv > 0.0) || !std::isfinite(g)) break;
      const double m_new = m - g / curv;
      if (!(m_new > 0.0 && m_new < 1.0) || std::abs(m_new - m) > 1e-6) break;
      if (std::abs(sse_slope_m(mv, m_new, hh)) >= std::abs(g)) break;
      c = m_new * k;
      if (m_new == m) break;
    }
  }
  res.params = BetaFuzzy(c, std::exp(log_h), mv.k_max);
  res.sse = sse_at(mv, c / k, res.params.h);
  return res;
}

double defuzzify(const MembershipVector& mv) {
  double num = 0.0, den = 0.0;
  for (std::size_t y = 0; y < mv.xi.size(); ++y) {
    num += static_cast<double>(y) * mv.xi[y];
    den += mv.xi[y];
  }
  if (!(den > 0.0)) throw ValidationError("empty fuzzy set: cannot defuzzify");
  return num / den;
}

}  // namespace granular
