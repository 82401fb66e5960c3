#include "granular/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "granular/errors.hpp"
#include "granular/rng.hpp"

namespace granular {

namespace {

constexpr double kMaxLinearPredictor = 700.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using QuietPolicy = boost::math::policies::policy<boost::math::policies::pole_error<boost::math::policies::ignore_error>,
                                                   boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
                                                   boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

// Extreme trajectories can push shapes to zero; report NaN and let the caller reject the point.
double digamma(double x) { return x > 0.0 ? boost::math::digamma(x, QuietPolicy()) : std::nan(""); }

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_beta_density(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

// Value with partials in the two Beta shapes.
struct ShapeDual {
  double v, a, b;
};

ShapeDual operator+(ShapeDual x, ShapeDual y) { return {x.v + y.v, x.a + y.a, x.b + y.b}; }
ShapeDual operator*(ShapeDual x, ShapeDual y) { return {x.v * y.v, x.a * y.v + x.v * y.a, x.b * y.v + x.v * y.b}; }
ShapeDual operator/(ShapeDual x, ShapeDual y) {
  const double q = x.v / y.v;
  return {q, (x.a - q * y.a) / y.v, (x.b - q * y.b) / y.v};
}
ShapeDual operator+(double s, ShapeDual x) { return {s + x.v, x.a, x.b}; }
ShapeDual operator*(double s, ShapeDual x) { return {s * x.v, s * x.a, s * x.b}; }

void clamp_tiny(ShapeDual& z) {
  constexpr double tiny = 1e-300;
  if (std::abs(z.v) < tiny) z = {tiny, 0.0, 0.0};
}

// log I_x(a, b) with its shape partials, from the Lentz continued fraction
// and the prefactor x^a (1-x)^b / (a B(a, b)). Converges for x < (a+1)/(a+b+2).
ShapeDual log_beta_fraction(double x, double a, double b) {
  const ShapeDual A{a, 1.0, 0.0}, AB{a + b, 1.0, 1.0};
  ShapeDual c{1.0, 0.0, 0.0};
  ShapeDual d = 1.0 + (-x) * (AB / (1.0 + A));
  clamp_tiny(d);
  d = ShapeDual{1.0, 0.0, 0.0} / d;
  ShapeDual h = d;
  auto step = [&](const ShapeDual& aa) {
    d = 1.0 + aa * d;
    clamp_tiny(d);
    c = 1.0 + aa / c;
    clamp_tiny(c);
    d = ShapeDual{1.0, 0.0, 0.0} / d;
    const ShapeDual del = d * c;
    h = h * del;
    return del;
  };
  for (int m = 1; m <= 100000; ++m) {
    const double m2 = 2.0 * m;
    step((m * x) * (ShapeDual{b - m, 0.0, 1.0} / ((A + ShapeDual{m2 - 1.0, 0.0, 0.0}) * (A + ShapeDual{m2, 0.0, 0.0}))));
    const ShapeDual del = step(-x * ((A + ShapeDual{double(m), 0.0, 0.0}) * (AB + ShapeDual{double(m), 0.0, 0.0}) /
                                     ((A + ShapeDual{m2, 0.0, 0.0}) * (A + ShapeDual{m2 + 1.0, 0.0, 0.0}))));
    const double tol = 1e-15 * (1.0 + std::abs(h.a / h.v) + std::abs(h.b / h.v));
    if (std::abs(del.v - 1.0) < 1e-15 && std::abs(del.a) < tol && std::abs(del.b) < tol) break;
  }
  const double psi_ab = digamma(a + b), lx = std::log(x), l1x = std::log1p(-x);
  return {a * lx + b * l1x - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) + std::log(h.v) - std::log(a),
          lx + psi_ab - digamma(a) + h.a / h.v - 1.0 / a, l1x + psi_ab - digamma(b) + h.b / h.v};
}

// log P(X <= x) for X ~ Beta(a, b) with its shape partials.
ShapeDual log_beta_lower_tail(double x, double a, double b) {
  // Shapes can underflow to zero when a trajectory wanders far out in log lambda or log h.
  if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b))) return {kNegInf, 0.0, 0.0};
  if (x < (a + 1.0) / (a + b + 2.0)) return log_beta_fraction(x, a, b);
  // Past the mode the fraction converges on the other tail: I = 1 - J.
  const ShapeDual lj = log_beta_fraction(1.0 - x, b, a);
  const double j = std::exp(lj.v);
  const double w = -j / (1.0 - j);
  return {std::log1p(-j), w * lj.b, w * lj.a};
}

// -1 when c / K sits at or below the lower clamp bound, +1 at or above the upper one.
int censored_side(double c, std::size_t k) {
  const double eps = 1.0 / (2.0 * static_cast<double>(k) + 2.0);
  const double cb = c / static_cast<double>(k);
  if (cb <= eps) return -1;
  if (cb >= 1.0 - eps) return 1;
  return 0;
}

// Location log-likelihood and its partials in the Beta shapes.
double location_term(double c, std::size_t k, double a, double b, double* da, double* db) {
  const double eps = 1.0 / (2.0 * static_cast<double>(k) + 2.0);
  switch (censored_side(c, k)) {
    case -1: {
      const ShapeDual t = log_beta_lower_tail(eps, a, b);
      if (da) *da = t.a, *db = t.b;
      return t.v;
    }
    case 1: {
      const ShapeDual t = log_beta_lower_tail(eps, b, a);
      if (da) *da = t.b, *db = t.a;
      return t.v;
    }
    default: {
      const double x = c / static_cast<double>(k);
      if (da) {
        const double psi_s = digamma(a + b);
        *da = psi_s - digamma(a) + std::log(x);
        *db = psi_s - digamma(b) + std::log1p(-x);
      }
      return log_beta_density(x, a, b);
    }
  }
}

// log(kappa + mu) without overflowing when mu is huge.
double log_sum(double log_a, double log_b) {
  const double hi = std::max(log_a, log_b), lo = std::min(log_a, log_b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnar: return "cnar";
    case ModelKind::Car1: return "car1";
    case ModelKind::Car2: return "car2";
    case ModelKind::Proxy: return "proxy";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "cnar") return ModelKind::Cnar;
  if (name == "car1") return ModelKind::Car1;
  if (name == "car2") return ModelKind::Car2;
  if (name == "proxy") return ModelKind::Proxy;
  throw ValidationError("unknown model \"" + std::string(name) + "\" (expected cnar, car1, car2 or proxy)");
}

void RegressionSpec::validate() const {
  if (static_cast<std::size_t>(offsets.size()) != n() || k_max.size() != n()) {
    throw ValidationError("regression spec: covariates, offsets and K must have one entry per sample");
  }
  for (std::size_t i = 0; i < n(); ++i) {
    if (!(offsets[static_cast<Eigen::Index>(i)] > 0.0)) {
      throw ValidationError("offset of sample " + std::to_string(i) + " must be positive");
    }
    if (k_max[i] < 1) throw ValidationError("K of sample " + std::to_string(i) + " must be >= 1");
  }
  if (!covariates.allFinite()) throw ValidationError("covariates contain non-finite values");
  if (!covariate_names.empty() && covariate_names.size() != p()) {
    throw ValidationError("covariate name count does not match covariate columns");
  }
}

double mean_response(const RegressionSpec& spec, const ModelParams& params, std::size_t i) {
  if (i >= spec.n()) throw ValidationError("sample index out of range");
  if (static_cast<std::size_t>(params.beta.size()) != spec.p()) {
    throw ValidationError("coefficient vector length does not match covariates");
  }
  const auto row = static_cast<Eigen::Index>(i);
  const double eta = std::log(spec.offsets[row]) + spec.covariates.row(row).dot(params.beta);
  if (!(eta < kMaxLinearPredictor)) {
    throw NumericalError("linear predictor overflow at sample " + std::to_string(i) +
                         ": log mu = " + std::to_string(eta));
  }
  return std::exp(eta);
}

double negbin_log_pmf(double y, double mu, double kappa) {
  if (!(mu > 0.0) || !(kappa > 0.0) || !(y >= 0.0)) {
    throw ValidationError("negbin_log_pmf requires y >= 0, mu > 0, kappa > 0");
  }
  return std::lgamma(y + kappa) - std::lgamma(kappa) - std::lgamma(y + 1.0) -
         kappa * std::log1p(mu / kappa) + y * (std::log(mu) - std::log(kappa + mu));
}

LatentCountModel truncated_count_pmf(double mu, double kappa, std::size_t k) {
  LatentCountModel out;
  out.pmf.resize(k + 1);
  double top = kNegInf;
  for (std::size_t y = 0; y <= k; ++y) {
    out.pmf[y] = negbin_log_pmf(static_cast<double>(y), mu, kappa);
    top = std::max(top, out.pmf[y]);
  }
  double total = 0.0;
  for (double& v : out.pmf) {
    v = std::exp(v - top);
    total += v;
  }
  if (top + std::log(total) < std::log(1e-300)) {
    throw NumericalError("truncation incompatible with mean: NegBin(mu = " + std::to_string(mu) +
                         ") puts no mass on {0.." + std::to_string(k) + "}");
  }
  for (double& v : out.pmf) v /= total;
  return out;
}

double cond_location_log_density(double c_bar, double h, double y_bar) {
  const double a = h * y_bar, b = h * (1.0 - y_bar);
  const double v = log_beta_density(c_bar, a, b);
  if (!std::isfinite(v)) {
    throw NumericalError("non-finite Beta log density with shapes (" + std::to_string(a) + ", " +
                         std::to_string(b) + ") at " + std::to_string(c_bar));
  }
  return v;
}

double continuity_corrected(double y, std::size_t k) {
  return (y + 0.5) / (static_cast<double>(k) + 1.0);
}

double location_log_likelihood(double c, std::size_t k, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ValidationError("Beta shapes must be positive");
  return location_term(c, k, a, b, nullptr, nullptr);
}

double clamp_location(double c, std::size_t k) {
  const double eps = 1.0 / (2.0 * static_cast<double>(k) + 2.0);
  return std::clamp(c / static_cast<double>(k), eps, 1.0 - eps);
}

namespace {

void check_data(const RegressionSpec& spec, const std::vector<FuzzyObservation>& data) {
  spec.validate();
  if (data.size() != spec.n()) {
    throw ValidationError("data has " + std::to_string(data.size()) + " rows, spec has " +
                          std::to_string(spec.n()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& d = data[i];
    if (d.k != spec.k_max[i]) throw ValidationError("K mismatch at sample " + std::to_string(i));
    if (!(d.c >= 0.0 && d.c <= static_cast<double>(d.k))) {
      throw ValidationError("location c outside [0, K] at sample " + std::to_string(i));
    }
    if (!(d.h > 0.0) || !std::isfinite(d.h)) {
      throw ValidationError("precision h must be finite and positive at sample " + std::to_string(i));
    }
  }
}

// Scaled mean used by the ignorable baselines, on the same continuity-corrected
// scale as the latent grid so that a point-mass latent law reproduces Cnar.
double car_location_mean(double mu, std::size_t k, double* d_dlogmu) {
  const double kk = static_cast<double>(k);
  if (mu >= kk) {
    if (d_dlogmu) *d_dlogmu = 0.0;
    return continuity_corrected(kk, k);
  }
  if (d_dlogmu) *d_dlogmu = mu / (kk + 1.0);
  return continuity_corrected(mu, k);
}

}  // namespace

LogPosterior LogPosterior::fuzzy(ModelKind kind, RegressionSpec spec, std::vector<FuzzyObservation> data,
                                 Priors priors, LikelihoodOptions options) {
  if (kind == ModelKind::Proxy) throw ValidationError("proxy model takes scalar responses");
  check_data(spec, data);
  LogPosterior lp;
  lp.kind_ = kind;
  lp.spec_ = std::move(spec);
  lp.priors_ = priors;
  lp.options_ = options;
  lp.data_ = std::move(data);
  for (const auto& d : lp.data_) {
    lp.sum_log_h_ += std::log(d.h);
    lp.sum_h_ += d.h;
    lp.max_k_ = std::max(lp.max_k_, d.k);
  }
  if (kind == ModelKind::Cnar) {
    lp.location_logdens_.reserve(lp.data_.size());
    for (std::size_t i = 0; i < lp.data_.size(); ++i) {
      const auto& d = lp.data_[i];
      std::vector<double> row(d.k + 1);
      for (std::size_t y = 0; y <= d.k; ++y) {
        const double yb = continuity_corrected(static_cast<double>(y), d.k);
        row[y] = location_term(d.c, d.k, d.h * yb, d.h * (1.0 - yb), nullptr, nullptr);
      }
      lp.location_logdens_.push_back(std::move(row));
    }
  }
  return lp;
}

LogPosterior LogPosterior::scalar_proxy(RegressionSpec spec, std::vector<double> responses, Priors priors) {
  spec.validate();
  if (responses.size() != spec.n()) throw ValidationError("one response per sample required");
  for (double y : responses) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw ValidationError("proxy responses must be finite and >= 0");
  }
  LogPosterior lp;
  lp.kind_ = ModelKind::Proxy;
  lp.spec_ = std::move(spec);
  lp.priors_ = priors;
  lp.responses_ = std::move(responses);
  return lp;
}

std::size_t LogPosterior::dim() const {
  const std::size_t p = spec_.p();
  switch (kind_) {
    case ModelKind::Cnar: return p + 3;
    case ModelKind::Car1: return p + 2;
    case ModelKind::Car2: return p + 3;
    case ModelKind::Proxy: return p + 1;
  }
  return p;
}

std::vector<std::string> LogPosterior::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec_.p(); ++j) {
    names.push_back(spec_.covariate_names.empty() ? "beta[" + std::to_string(j) + "]"
                                                  : "beta[" + spec_.covariate_names[j] + "]");
  }
  if (kind_ == ModelKind::Cnar || kind_ == ModelKind::Proxy) names.emplace_back("kappa");
  if (kind_ != ModelKind::Proxy) {
    names.emplace_back("alpha_h");
    names.emplace_back("beta_h");
  }
  if (kind_ == ModelKind::Car2) names.emplace_back("lambda");
  return names;
}

ModelParams LogPosterior::to_params(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dim()) throw ValidationError("parameter vector has wrong length");
  const auto p = static_cast<Eigen::Index>(spec_.p());
  ModelParams out;
  out.beta = theta.head(p);
  Eigen::Index k = p;
  if (kind_ == ModelKind::Cnar || kind_ == ModelKind::Proxy) out.kappa = std::exp(theta[k++]);
  if (kind_ != ModelKind::Proxy) {
    out.alpha_h = std::exp(theta[k++]);
    out.beta_h = std::exp(theta[k++]);
  }
  if (kind_ == ModelKind::Car2) out.lambda = std::exp(theta[k++]);
  return out;
}

Eigen::VectorXd LogPosterior::to_unconstrained(const ModelParams& params) const {
  if (static_cast<std::size_t>(params.beta.size()) != spec_.p()) {
    throw ValidationError("coefficient vector length does not match covariates");
  }
  for (double v : {params.kappa, params.alpha_h, params.beta_h, params.lambda}) {
    if (!(v > 0.0)) throw ValidationError("kappa, alpha_h, beta_h and lambda must be positive");
  }
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dim()));
  const auto p = static_cast<Eigen::Index>(spec_.p());
  theta.head(p) = params.beta;
  Eigen::Index k = p;
  if (kind_ == ModelKind::Cnar || kind_ == ModelKind::Proxy) theta[k++] = std::log(params.kappa);
  if (kind_ != ModelKind::Proxy) {
    theta[k++] = std::log(params.alpha_h);
    theta[k++] = std::log(params.beta_h);
  }
  if (kind_ == ModelKind::Car2) theta[k++] = std::log(params.lambda);
  return theta;
}

Eigen::VectorXd LogPosterior::constrained(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = theta;
  const auto p = static_cast<Eigen::Index>(spec_.p());
  for (Eigen::Index k = p; k < out.size(); ++k) out[k] = std::exp(theta[k]);
  return out;
}

Eigen::VectorXd LogPosterior::prior_mean() const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(dim()));
  const auto p = static_cast<Eigen::Index>(spec_.p());
  m.head(p).setConstant(priors_.beta_mean);
  Eigen::Index k = p;
  if (kind_ == ModelKind::Cnar || kind_ == ModelKind::Proxy) m[k++] = priors_.log_kappa_mean;
  if (kind_ != ModelKind::Proxy) {
    m[k++] = priors_.log_alpha_h_mean;
    m[k++] = priors_.log_beta_h_mean;
  }
  if (kind_ == ModelKind::Car2) m[k++] = priors_.log_lambda_mean;
  return m;
}

double LogPosterior::log_density(const Eigen::VectorXd& theta) const { return evaluate(theta, nullptr); }

double LogPosterior::log_density_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  grad.setZero(static_cast<Eigen::Index>(dim()));
  return evaluate(theta, &grad);
}

// Location term of the Cnar likelihood: for each sample, log of
// sum_y p(y | mu, kappa) exp(L(y)) with p the NegBin truncated to {0..K}.
double LogPosterior::cnar_location(const Eigen::VectorXd& log_mu, double kappa, Eigen::VectorXd* d_log_mu,
                                   double* d_log_kappa) const {
  const std::size_t kmax = max_k_;
  // lgamma(y + kappa) - lgamma(kappa) - lgamma(y + 1) and digamma(y + kappa) - digamma(kappa).
  std::vector<double> lg(kmax + 1), dg(kmax + 1);
  lg[0] = 0.0;
  dg[0] = 0.0;
  for (std::size_t y = 0; y < kmax; ++y) {
    const double yy = static_cast<double>(y);
    lg[y + 1] = lg[y] + std::log((yy + kappa) / (yy + 1.0));
    dg[y + 1] = dg[y] + 1.0 / (yy + kappa);
  }
  const double log_kappa = std::log(kappa);

  std::vector<double> lp(kmax + 1), joint(kmax + 1);
  double total = 0.0, dkappa = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const std::size_t k = data_[i].k;
    const auto& ld = location_logdens_[i];
    const double lmu = log_mu[static_cast<Eigen::Index>(i)];
    const double log_kmu = log_sum(log_kappa, lmu);
    const double l0 = kappa * (log_kappa - log_kmu);
    const double lq = lmu - log_kmu;

    // Pass 1: latent log pmf, mass accumulated in linear scale.
    std::size_t end = k;
    double mass = 0.0, lp_max = kNegInf, joint_max = kNegInf;
    for (std::size_t y = 0; y <= k; ++y) {
      lp[y] = lg[y] + l0 + static_cast<double>(y) * lq;
      joint[y] = lp[y] + ld[y];
      lp_max = std::max(lp_max, lp[y]);
      joint_max = std::max(joint_max, joint[y]);
      if (!options_.exact_truncation) {
        mass += std::exp(lp[y]);
        if (mass >= 1.0 - options_.tail_mass) {
          end = y;
          break;
        }
      }
    }
    if (!std::isfinite(joint_max) || !std::isfinite(lp_max)) return kNegInf;

    // Pass 2: normalizers and the moments needed for the gradient.
    double z = 0.0, zy = 0.0, zd = 0.0, w = 0.0, wy = 0.0, wd = 0.0;
    for (std::size_t y = 0; y <= end; ++y) {
      const double yy = static_cast<double>(y);
      const double e = std::exp(lp[y] - lp_max);
      const double f = std::exp(joint[y] - joint_max);
      z += e;
      w += f;
      if (d_log_mu) {
        zy += e * yy;
        zd += e * dg[y];
        wy += f * yy;
        wd += f * dg[y];
      }
    }
    total += (joint_max + std::log(w)) - (lp_max + std::log(z));
    if (d_log_mu) {
      const double inv = std::exp(-log_kmu);  // 1 / (kappa + mu)
      const double ey_w = wy / w, ey_z = zy / z;
      (*d_log_mu)[static_cast<Eigen::Index>(i)] = kappa * inv * (ey_w - ey_z);
      dkappa += kappa * ((wd / w - zd / z) - (ey_w - ey_z) * inv);
    }
  }
  if (d_log_kappa) *d_log_kappa = dkappa;
  return total;
}

double LogPosterior::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(theta.size()) != dim()) throw ValidationError("parameter vector has wrong length");
  if (!theta.allFinite()) return kNegInf;
  const auto p = static_cast<Eigen::Index>(spec_.p());
  const auto n = static_cast<Eigen::Index>(spec_.n());
  const Eigen::VectorXd beta = theta.head(p);

  Eigen::VectorXd log_mu = spec_.offsets.array().log().matrix() + spec_.covariates * beta;
  if ((log_mu.array().abs() > kMaxLinearPredictor).any()) return kNegInf;

  Eigen::Index k = p;
  double lp = 0.0;
  Eigen::VectorXd d_log_mu = Eigen::VectorXd::Zero(n);

  // Priors, directly on the unconstrained scale.
  for (Eigen::Index j = 0; j < p; ++j) {
    lp += normal_logpdf(beta[j], priors_.beta_mean, priors_.beta_sd);
    if (grad) (*grad)[j] = -(beta[j] - priors_.beta_mean) / (priors_.beta_sd * priors_.beta_sd);
  }
  auto log_prior = [&](Eigen::Index idx, double mean, double sd) {
    lp += normal_logpdf(theta[idx], mean, sd);
    if (grad) (*grad)[idx] = -(theta[idx] - mean) / (sd * sd);
  };

  if (kind_ == ModelKind::Proxy) {
    const Eigen::Index ik = k++;
    log_prior(ik, priors_.log_kappa_mean, priors_.log_kappa_sd);
    const double kappa = std::exp(theta[ik]);
    if (!(kappa > 0.0 && std::isfinite(kappa))) return kNegInf;
    const double dg_kappa = digamma(kappa);
    double dkappa = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = responses_[static_cast<std::size_t>(i)];
      const double mu = std::exp(log_mu[i]);
      lp += negbin_log_pmf(y, mu, kappa);
      if (grad) {
        const double inv = 1.0 / (kappa + mu);
        d_log_mu[i] = kappa * (y - mu) * inv;
        dkappa += kappa * (digamma(y + kappa) - dg_kappa - std::log1p(mu / kappa) + (mu - y) * inv);
      }
    }
    if (grad) {
      (*grad)[ik] += dkappa;
      grad->head(p) += spec_.covariates.transpose() * d_log_mu;
      if (!grad->allFinite()) return kNegInf;
    }
    return std::isfinite(lp) ? lp : kNegInf;
  }

  Eigen::Index ik = -1;
  if (kind_ == ModelKind::Cnar) {
    ik = k++;
    log_prior(ik, priors_.log_kappa_mean, priors_.log_kappa_sd);
  }
  const Eigen::Index ia = k++, ib = k++;
  log_prior(ia, priors_.log_alpha_h_mean, priors_.log_alpha_h_sd);
  log_prior(ib, priors_.log_beta_h_mean, priors_.log_beta_h_sd);
  Eigen::Index il = -1;
  if (kind_ == ModelKind::Car2) {
    il = k++;
    log_prior(il, priors_.log_lambda_mean, priors_.log_lambda_sd);
  }

  // Gamma(alpha_h, beta_h) on the precisions; depends on data only through sums.
  const double alpha = std::exp(theta[ia]), rate = std::exp(theta[ib]);
  const double nn = static_cast<double>(n);
  lp += nn * (alpha * theta[ib] - std::lgamma(alpha)) + (alpha - 1.0) * sum_log_h_ - rate * sum_h_;
  if (grad) {
    (*grad)[ia] += alpha * (nn * theta[ib] - nn * digamma(alpha) + sum_log_h_);
    (*grad)[ib] += nn * alpha - rate * sum_h_;
  }

  if (kind_ == ModelKind::Cnar) {
    const double kappa = std::exp(theta[ik]);
    if (!(kappa > 0.0 && std::isfinite(kappa))) return kNegInf;
    double dkappa = 0.0;
    lp += cnar_location(log_mu, kappa, grad ? &d_log_mu : nullptr, grad ? &dkappa : nullptr);
    if (grad) (*grad)[ik] += dkappa;
  } else {
    const double lambda = kind_ == ModelKind::Car2 ? std::exp(theta[il]) : 1.0;
    double dlambda = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& d = data_[static_cast<std::size_t>(i)];
      double dm_dlogmu = 0.0;
      const double m = car_location_mean(std::exp(log_mu[i]), d.k, &dm_dlogmu);
      const double s = lambda * d.h;
      double da = 0.0, db = 0.0;
      lp += location_term(d.c, d.k, s * m, s * (1.0 - m), grad ? &da : nullptr, grad ? &db : nullptr);
      if (grad) {
        d_log_mu[i] = s * (da - db) * dm_dlogmu;
        if (kind_ == ModelKind::Car2) dlambda += s * (m * da + (1.0 - m) * db);
      }
    }
    if (grad && kind_ == ModelKind::Car2) (*grad)[il] += dlambda;
  }
  if (grad) grad->head(p) += spec_.covariates.transpose() * d_log_mu;
  if (grad && !grad->allFinite()) return kNegInf;
  return std::isfinite(lp) ? lp : kNegInf;
}

LoglikParts cnar_observed_loglik_parts(const RegressionSpec& spec, const ModelParams& params,
                                       const std::vector<FuzzyObservation>& data,
                                       const LikelihoodOptions& options) {
  check_data(spec, data);
  LoglikParts parts;
  if (data.empty()) return parts;
  for (const auto& d : data) {
    const double v = (params.alpha_h * std::log(params.beta_h) - std::lgamma(params.alpha_h)) +
                     (params.alpha_h - 1.0) * std::log(d.h) - params.beta_h * d.h;
    parts.precision_term += v;
  }
  auto post = LogPosterior::fuzzy(ModelKind::Cnar, spec, data, Priors{}, options);
  Eigen::VectorXd log_mu(static_cast<Eigen::Index>(spec.n()));
  for (std::size_t i = 0; i < spec.n(); ++i) {
    log_mu[static_cast<Eigen::Index>(i)] = std::log(mean_response(spec, params, i));
  }
  parts.location_term = post.cnar_location(log_mu, params.kappa, nullptr, nullptr);
  if (!std::isfinite(parts.total())) throw NumericalError("non-finite Cnar log-likelihood");
  return parts;
}

double cnar_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data, const LikelihoodOptions& options) {
  return cnar_observed_loglik_parts(spec, params, data, options).total();
}

namespace {

double car_loglik(const RegressionSpec& spec, const ModelParams& params,
                  const std::vector<FuzzyObservation>& data, double lambda) {
  check_data(spec, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& d = data[i];
    const double m = car_location_mean(mean_response(spec, params, i), d.k, nullptr);
    const double s = lambda * d.h;
    const double term = (params.alpha_h * std::log(params.beta_h) - std::lgamma(params.alpha_h)) +
                        (params.alpha_h - 1.0) * std::log(d.h) - params.beta_h * d.h +
                        location_term(d.c, d.k, s * m, s * (1.0 - m), nullptr, nullptr);
    if (!std::isfinite(term)) {
      throw NumericalError("non-finite log-likelihood contribution at sample " + std::to_string(i));
    }
    total += term;
  }
  return total;
}

}  // namespace

double car1_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data) {
  return car_loglik(spec, params, data, 1.0);
}

double car2_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                            const std::vector<FuzzyObservation>& data) {
  if (!(params.lambda > 0.0)) throw ValidationError("lambda must be positive");
  return car_loglik(spec, params, data, params.lambda);
}

double proxy_observed_loglik(const RegressionSpec& spec, const ModelParams& params,
                             const std::vector<double>& responses) {
  spec.validate();
  if (responses.size() != spec.n()) throw ValidationError("one response per sample required");
  double total = 0.0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    total += negbin_log_pmf(responses[i], mean_response(spec, params, i), params.kappa);
  }
  return total;
}

Eigen::VectorXd grad_log_posterior(const RegressionSpec& spec, const ModelParams& params,
                                   const std::vector<FuzzyObservation>& data, const Priors& priors,
                                   ModelKind kind) {
  auto post = LogPosterior::fuzzy(kind, spec, data, priors);
  const Eigen::VectorXd theta = post.to_unconstrained(params);
  Eigen::VectorXd grad;
  post.log_density_and_gradient(theta, grad);
  const auto names = post.parameter_names();
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    if (!std::isfinite(grad[j])) {
      throw NumericalError("non-finite gradient for " + names[static_cast<std::size_t>(j)]);
    }
  }
  return grad;
}

namespace {

double log_gamma_variate(Rng& rng, double shape) {
  boost::random::uniform_real_distribution<double> unif(0.0, 1.0);
  if (shape >= 1.0) {
    boost::random::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(rng));
  }
  // Ga(a) = Ga(a + 1) * U^(1/a); kept in log space so tiny shapes do not underflow.
  boost::random::gamma_distribution<double> g(shape + 1.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return std::log(g(rng)) + std::log(u) / shape;
}

double beta_variate(Rng& rng, double a, double b) {
  const double la = log_gamma_variate(rng, a);
  const double lb = log_gamma_variate(rng, b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

}  // namespace

SimulatedData simulate(const RegressionSpec& spec, const ModelParams& params, std::uint64_t seed,
                       ModelKind kind) {
  if (kind == ModelKind::Proxy) throw ValidationError("the scalar proxy model has no fuzzy simulator");
  spec.validate();
  if (!(params.kappa > 0.0 && params.alpha_h > 0.0 && params.beta_h > 0.0 && params.lambda > 0.0)) {
    throw ValidationError("simulation parameters must be positive");
  }
  Rng rng = make_stream(seed, 0);
  boost::random::uniform_real_distribution<double> unif(0.0, 1.0);
  boost::random::gamma_distribution<double> precision(params.alpha_h, 1.0 / params.beta_h);

  SimulatedData out;
  out.observations.reserve(spec.n());
  for (std::size_t i = 0; i < spec.n(); ++i) {
    const std::size_t k = spec.k_max[i];
    const double kk = static_cast<double>(k);
    const double mu = mean_response(spec, params, i);
    double location = 0.0;
    double h = 0.0;
    if (kind == ModelKind::Cnar) {
      const auto latent = truncated_count_pmf(mu, params.kappa, k);
      const double u = unif(rng);
      std::size_t y = 0;
      double cum = latent.pmf[0];
      while (y < k && cum < u) cum += latent.pmf[++y];
      out.latent.push_back(y);
      h = precision(rng);
      location = continuity_corrected(static_cast<double>(y), k);
      const double cbar = beta_variate(rng, h * location, h * (1.0 - location));
      out.observations.push_back({kk * cbar, h, k});
    } else {
      h = precision(rng);
      location = car_location_mean(mu, k, nullptr);
      const double s = kind == ModelKind::Car2 ? params.lambda * h : h;
      const double cbar = beta_variate(rng, s * location, s * (1.0 - location));
      out.observations.push_back({kk * cbar, h, k});
    }
  }
  return out;
}

}  // namespace granular

namespace granular {

ModelParams params_from_constrained(ModelKind kind, std::size_t p, const Eigen::VectorXd& row) {
  std::size_t expected = p + 2;
  if (kind == ModelKind::Cnar || kind == ModelKind::Car2) expected = p + 3;
  if (kind == ModelKind::Proxy) expected = p + 1;
  if (static_cast<std::size_t>(row.size()) != expected) {
    throw ValidationError("draw has " + std::to_string(row.size()) + " columns, model " +
                          std::string(to_string(kind)) + " expects " + std::to_string(expected));
  }
  ModelParams out;
  const auto pp = static_cast<Eigen::Index>(p);
  out.beta = row.head(pp);
  Eigen::Index k = pp;
  if (kind == ModelKind::Cnar || kind == ModelKind::Proxy) out.kappa = row[k++];
  if (kind != ModelKind::Proxy) {
    out.alpha_h = row[k++];
    out.beta_h = row[k++];
  }
  if (kind == ModelKind::Car2) out.lambda = row[k++];
  return out;
}

}  // namespace granular
