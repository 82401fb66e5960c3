#include "granular/config.hpp"

#include <string>

#include "granular/errors.hpp"
#include "json.hpp"

namespace granular {

using nlohmann::json;

void RunConfig::validate() const {
  hmc.validate();
  if (workers < 0) throw ValidationError("workers must be >= 0");
  for (double sd : {priors.beta_sd, priors.log_kappa_sd, priors.log_alpha_h_sd, priors.log_beta_h_sd,
                    priors.log_lambda_sd}) {
    if (!(sd > 0.0)) throw ValidationError("prior standard deviations must be positive");
  }
  if (!(likelihood.tail_mass >= 0.0 && likelihood.tail_mass < 1.0)) {
    throw ValidationError("likelihood.tail_mass must lie in [0, 1)");
  }
  if (!(fit.tolerance > 0.0) || fit.max_iterations < 1 || !(fit.crisp_ceiling > 0.0)) {
    throw ValidationError("fit settings must be positive");
  }
  if (ppc_reps < 1) throw ValidationError("ppc.n_reps must be >= 1");
  if (ppc_grid < 2) throw ValidationError("ppc.grid must be >= 2");
  if (!(car_tolerance >= 0.0)) throw ValidationError("kernel.car_tolerance must be >= 0");
  const auto& s = simulate;
  if (s.n < 1 || s.k < 1 || s.beta.empty()) throw ValidationError("simulate needs n >= 1, K >= 1 and a beta vector");
  for (double v : {s.kappa, s.alpha_h, s.beta_h, s.lambda}) {
    if (!(v > 0.0)) throw ValidationError("simulate: kappa, alpha_h, beta_h and lambda must be positive");
  }
  if (s.model == ModelKind::Proxy) throw ValidationError("simulate.model must be cnar, car1 or car2");
  if (!(s.covariate_sd >= 0.0)) throw ValidationError("simulate.covariate_sd must be >= 0");
}

RunConfig default_config() { return RunConfig{}; }

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["model"] = std::string(to_string(c.model));
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["intercept"] = c.intercept;
  j["priors"] = {{"beta_mean", c.priors.beta_mean},
                 {"beta_sd", c.priors.beta_sd},
                 {"log_kappa_mean", c.priors.log_kappa_mean},
                 {"log_kappa_sd", c.priors.log_kappa_sd},
                 {"log_alpha_h_mean", c.priors.log_alpha_h_mean},
                 {"log_alpha_h_sd", c.priors.log_alpha_h_sd},
                 {"log_beta_h_mean", c.priors.log_beta_h_mean},
                 {"log_beta_h_sd", c.priors.log_beta_h_sd},
                 {"log_lambda_mean", c.priors.log_lambda_mean},
                 {"log_lambda_sd", c.priors.log_lambda_sd}};
  j["hmc"] = {{"n_chains", c.hmc.n_chains},         {"n_warmup", c.hmc.n_warmup},
              {"n_draws", c.hmc.n_draws},           {"target_accept", c.hmc.target_accept},
              {"max_leapfrog", c.hmc.max_leapfrog}, {"init_jitter", c.hmc.init_jitter},
              {"path_length", c.hmc.path_length}};
  j["likelihood"] = {{"exact_truncation", c.likelihood.exact_truncation}, {"tail_mass", c.likelihood.tail_mass}};
  j["fit"] = {{"tolerance", c.fit.tolerance},
              {"max_iterations", c.fit.max_iterations},
              {"crisp_ceiling", c.fit.crisp_ceiling}};
  j["ppc"] = {{"n_reps", c.ppc_reps}, {"grid", c.ppc_grid}};
  j["kernel"] = {{"car_tolerance", c.car_tolerance}};
  j["simulate"] = {{"n", c.simulate.n},
                   {"K", c.simulate.k},
                   {"beta", c.simulate.beta},
                   {"kappa", c.simulate.kappa},
                   {"alpha_h", c.simulate.alpha_h},
                   {"beta_h", c.simulate.beta_h},
                   {"lambda", c.simulate.lambda},
                   {"covariate_sd", c.simulate.covariate_sd},
                   {"model", std::string(to_string(c.simulate.model))}};
  return j;
}

// Rejects any key in `given` that the defaults do not define.
void check_keys(const json& given, const json& reference, const std::string& path) {
  if (!given.is_object()) throw ValidationError("config: \"" + path + "\" must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ValidationError("config: unknown key \"" + here + "\"");
    if (reference.at(key).is_object()) check_keys(value, reference.at(key), here);
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  const json ref = to_json(c);
  check_keys(j, ref, "");
  json merged = ref;
  merged.merge_patch(j);
  try {
    c.model = parse_model_kind(merged.at("model").get<std::string>());
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.workers = merged.at("workers").get<int>();
    c.intercept = merged.at("intercept").get<bool>();
    const auto& p = merged.at("priors");
    c.priors.beta_mean = p.at("beta_mean").get<double>();
    c.priors.beta_sd = p.at("beta_sd").get<double>();
    c.priors.log_kappa_mean = p.at("log_kappa_mean").get<double>();
    c.priors.log_kappa_sd = p.at("log_kappa_sd").get<double>();
    c.priors.log_alpha_h_mean = p.at("log_alpha_h_mean").get<double>();
    c.priors.log_alpha_h_sd = p.at("log_alpha_h_sd").get<double>();
    c.priors.log_beta_h_mean = p.at("log_beta_h_mean").get<double>();
    c.priors.log_beta_h_sd = p.at("log_beta_h_sd").get<double>();
    c.priors.log_lambda_mean = p.at("log_lambda_mean").get<double>();
    c.priors.log_lambda_sd = p.at("log_lambda_sd").get<double>();
    const auto& h = merged.at("hmc");
    c.hmc.n_chains = h.at("n_chains").get<int>();
    c.hmc.n_warmup = h.at("n_warmup").get<int>();
    c.hmc.n_draws = h.at("n_draws").get<int>();
    c.hmc.target_accept = h.at("target_accept").get<double>();
    c.hmc.max_leapfrog = h.at("max_leapfrog").get<int>();
    c.hmc.init_jitter = h.at("init_jitter").get<double>();
    c.hmc.path_length = h.at("path_length").get<double>();
    c.hmc.seed = c.seed;
    c.hmc.n_workers = c.workers;
    const auto& l = merged.at("likelihood");
    c.likelihood.exact_truncation = l.at("exact_truncation").get<bool>();
    c.likelihood.tail_mass = l.at("tail_mass").get<double>();
    const auto& f = merged.at("fit");
    c.fit.tolerance = f.at("tolerance").get<double>();
    c.fit.max_iterations = f.at("max_iterations").get<int>();
    c.fit.crisp_ceiling = f.at("crisp_ceiling").get<double>();
    c.ppc_reps = merged.at("ppc").at("n_reps").get<std::size_t>();
    c.ppc_grid = merged.at("ppc").at("grid").get<std::size_t>();
    c.car_tolerance = merged.at("kernel").at("car_tolerance").get<double>();
    const auto& s = merged.at("simulate");
    c.simulate.n = s.at("n").get<std::size_t>();
    c.simulate.k = s.at("K").get<std::size_t>();
    c.simulate.beta = s.at("beta").get<std::vector<double>>();
    c.simulate.kappa = s.at("kappa").get<double>();
    c.simulate.alpha_h = s.at("alpha_h").get<double>();
    c.simulate.beta_h = s.at("beta_h").get<double>();
    c.simulate.lambda = s.at("lambda").get<double>();
    c.simulate.covariate_sd = s.at("covariate_sd").get<double>();
    c.simulate.model = parse_model_kind(s.at("model").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return from_json(j);
}

RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& overrides) {
  json j = to_json(cfg);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override \"" + o + "\" must look like key.path=value");
    const std::string path = o.substr(0, eq), raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) throw ValidationError("config: unknown key \"" + path + "\"");
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = value;
  }
  return from_json(j);
}

}  // namespace granular
