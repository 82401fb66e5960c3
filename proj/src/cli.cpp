#include "granular/cli.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "CLI11.hpp"
#include "granular/csv.hpp"
#include "granular/errors.hpp"
#include "granular/kernel.hpp"
#include "granular/rng.hpp"
#include "json.hpp"

namespace granular::cli {

using nlohmann::json;
using io::LabeledObservation;

namespace {

class LogLine {
 public:
  LogLine(std::ostream& out, const std::string& stage) : out_(out) { ss_ << "stage=" << stage; }
  template <class T>
  LogLine& kv(const std::string& key, const T& value) {
    ss_ << ' ' << key << '=' << value;
    return *this;
  }
  LogLine& quoted(const std::string& key, const std::string& value) {
    ss_ << ' ' << key << "=\"" << value << '"';
    return *this;
  }
  ~LogLine() { out_ << ss_.str() << '\n'; }

 private:
  std::ostream& out_;
  std::ostringstream ss_;
};

json metadata(const std::string& command, const RunConfig& cfg) {
  return {{"tool", "granular"}, {"command", command}, {"seed", cfg.seed}};
}

json model_labels(ModelKind kind) {
  json j;
  j["model"] = std::string(to_string(kind));
  if (kind == ModelKind::Car1 || kind == ModelKind::Car2) {
    j["note"] = "ignorable CAR-like baseline: Beta location conditioned on the scaled mean, no latent count";
  } else if (kind == ModelKind::Proxy) {
    j["note"] = "scalar proxy: NegBin regression on centroid-defuzzified counts";
  }
  return j;
}

struct AlignedData {
  RegressionSpec spec;
  std::vector<LabeledObservation> observations;
};

AlignedData align(const fs::path& stats_path, const fs::path& cov_path, bool intercept) {
  auto obs = io::read_observations(io::read_csv(stats_path));
  if (obs.empty()) throw ValidationError(stats_path.string() + ": no samples");
  const auto cov = io::read_covariates(io::read_csv(cov_path));

  std::map<std::string, Eigen::Index> cov_row;
  for (std::size_t i = 0; i < cov.sample_ids.size(); ++i) {
    if (!cov_row.emplace(cov.sample_ids[i], static_cast<Eigen::Index>(i)).second) {
      throw ValidationError(cov_path.string() + ": duplicate sample_id " + cov.sample_ids[i]);
    }
  }
  std::set<std::string> stat_ids;
  std::vector<std::string> orphans;
  for (const auto& o : obs) {
    if (!stat_ids.insert(o.sample_id).second) throw ValidationError(stats_path.string() + ": duplicate sample_id " + o.sample_id);
    if (!cov_row.count(o.sample_id)) orphans.push_back(o.sample_id + " (no covariates)");
  }
  for (const auto& id : cov.sample_ids) {
    if (!stat_ids.count(id)) orphans.push_back(id + " (no statistics)");
  }
  if (!orphans.empty()) {
    std::string msg = "sample ids do not match:";
    for (const auto& o : orphans) msg += " " + o;
    throw ValidationError(msg);
  }

  AlignedData a;
  const auto n = static_cast<Eigen::Index>(obs.size());
  const Eigen::Index extra = intercept ? 1 : 0;
  a.spec.covariates.resize(n, cov.values.cols() + extra);
  a.spec.offsets.resize(n);
  if (intercept) a.spec.covariate_names.emplace_back("intercept");
  for (const auto& name : cov.names) a.spec.covariate_names.push_back(name);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    const Eigen::Index r = cov_row.at(o.sample_id);
    if (intercept) a.spec.covariates(i, 0) = 1.0;
    a.spec.covariates.row(i).tail(cov.values.cols()) = cov.values.row(r);
    a.spec.offsets[i] = cov.offsets[r];
    a.spec.k_max.push_back(o.obs.k);
  }
  if (a.spec.p() == 0) throw ValidationError("model has no covariates; enable the intercept or supply columns");
  a.spec.validate();
  a.observations = std::move(obs);
  return a;
}

std::vector<FuzzyObservation> plain(const std::vector<LabeledObservation>& rows) {
  std::vector<FuzzyObservation> out;
  for (const auto& r : rows) out.push_back(r.obs);
  return out;
}

std::string summary_csv(const DiagnosticsTable& t) {
  std::ostringstream out;
  out << "parameter,mean,sd,q05,q50,q95,rhat,ess_bulk\n";
  for (const auto& p : t.parameters) {
    out << p.name << ',' << io::format_number(p.mean) << ',' << io::format_number(p.sd) << ','
        << io::format_number(p.q05) << ',' << io::format_number(p.q50) << ',' << io::format_number(p.q95) << ','
        << io::format_number(p.rhat) << ',' << io::format_number(p.ess_bulk) << '\n';
  }
  return out.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ModelKind model_from_names(const std::vector<std::string>& names) {
  const auto has = [&](const char* n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  if (has("alpha_h") && has("kappa")) return ModelKind::Cnar;
  if (has("alpha_h") && has("lambda")) return ModelKind::Car2;
  if (has("alpha_h")) return ModelKind::Car1;
  if (has("kappa")) return ModelKind::Proxy;
  throw ValidationError("cannot recognize the model from the draws columns");
}

void cmd_count(const CountArgs& args, std::ostream& log) {
  if (args.inputs.empty()) throw ValidationError("count: no input files");
  if (args.inputs.size() > 1 && !args.referent) throw ValidationError("count: several inputs require --referent");
  auto count = [&](const PossibilityAssignment& a, std::size_t r) {
    return args.bruteforce ? granular_count_bruteforce(a, r) : granular_count_fast(a, r);
  };
  std::vector<io::LabeledMembership> rows;
  for (const auto& path : args.inputs) {
    const auto assign = io::read_possibility(io::read_csv(path));
    const auto& names = assign.referent_names();
    if (args.referent) {
      const auto it = std::find(names.begin(), names.end(), *args.referent);
      if (it == names.end()) throw ValidationError(path.string() + ": no referent named " + *args.referent);
      const auto r = static_cast<std::size_t>(it - names.begin());
      rows.push_back({args.inputs.size() > 1 ? path.stem().string() : *args.referent, count(assign, r)});
    } else {
      for (std::size_t r = 0; r < assign.n_ref(); ++r) rows.push_back({names[r], count(assign, r)});
    }
    LogLine(log, "count").quoted("input", path.string()).kv("observations", assign.n_obs()).kv("referents", assign.n_ref())
        .kv("normalized", assign.normalized_per_observation() ? "yes" : "no");
  }
  io::write_file(args.out, io::write_counts(rows));
  LogLine(log, "count").kv("rows_out", rows.size()).quoted("output", args.out.string());
}

void cmd_fit(const FitArgs& args, const RunConfig& cfg, std::ostream& log) {
  const auto counts = io::read_counts(io::read_csv(args.input));
  std::vector<io::StatsRow> rows;
  for (const auto& c : counts) {
    std::string reason;
    if (c.membership.k_max < 1) {
      reason = "K < 1";
    } else if (!c.membership.has_support()) {
      reason = "empty support";
    } else if (c.membership.max() != 1.0) {
      reason = "not normalized";
    }
    if (!reason.empty()) {
      LogLine(log, "fit").kv("dropped", c.id).quoted("reason", reason);
      continue;
    }
    const auto res = fit_beta(c.membership, cfg.fit);
    if (!res.converged) LogLine(log, "fit").kv("warning", c.id).quoted("reason", "did not converge");
    rows.push_back({c.id, res});
  }
  LogLine(log, "fit").kv("rows_in", counts.size()).kv("rows_kept", rows.size()).kv("rows_dropped", counts.size() - rows.size());
  if (rows.empty()) throw ValidationError("fit: no usable rows in " + args.input.string());
  io::write_file(args.out, io::write_stats(rows));
}

void cmd_simulate(const SimulateArgs& args, const RunConfig& cfg, std::ostream& log) {
  const auto& s = cfg.simulate;
  const std::size_t p = s.beta.size();
  const std::size_t random_cols = cfg.intercept ? p - 1 : p;

  io::Covariates cov;
  const auto n = static_cast<Eigen::Index>(s.n);
  cov.values.resize(n, static_cast<Eigen::Index>(random_cols));
  cov.offsets = Eigen::VectorXd::Ones(n);
  for (std::size_t j = 0; j < random_cols; ++j) cov.names.push_back("x" + std::to_string(j + 1));
  Rng rng = make_stream(cfg.seed, 0xC0FFEE);
  boost::random::normal_distribution<double> normal(0.0, s.covariate_sd);
  for (Eigen::Index i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "s%04ld", static_cast<long>(i + 1));
    cov.sample_ids.emplace_back(id);
    for (Eigen::Index j = 0; j < cov.values.cols(); ++j) cov.values(i, j) = normal(rng);
  }

  RegressionSpec spec;
  spec.covariates.resize(n, static_cast<Eigen::Index>(p));
  if (cfg.intercept) {
    spec.covariates.col(0).setOnes();
    spec.covariates.rightCols(static_cast<Eigen::Index>(random_cols)) = cov.values;
  } else {
    spec.covariates = cov.values;
  }
  spec.offsets = cov.offsets;
  spec.k_max.assign(s.n, s.k);

  ModelParams params;
  params.beta = Eigen::Map<const Eigen::VectorXd>(s.beta.data(), static_cast<Eigen::Index>(p));
  params.kappa = s.kappa;
  params.alpha_h = s.alpha_h;
  params.beta_h = s.beta_h;
  params.lambda = s.lambda;
  const auto sim = simulate(spec, params, cfg.seed, s.model);

  std::vector<io::LabeledObservation> rows;
  for (std::size_t i = 0; i < s.n; ++i) {
    rows.push_back({cov.sample_ids[i], sim.observations[i], sim.latent.empty() ? -1L : static_cast<long>(sim.latent[i])});
  }
  io::write_file(args.out, io::write_observations(rows, !sim.latent.empty()));
  io::write_file(args.covariates_out, io::write_covariates(cov));
  json side;
  side["generating"] = model_labels(s.model);
  side["generating"]["beta"] = s.beta;
  side["generating"]["kappa"] = s.kappa;
  side["generating"]["alpha_h"] = s.alpha_h;
  side["generating"]["beta_h"] = s.beta_h;
  side["generating"]["lambda"] = s.lambda;
  side["n"] = s.n;
  side["K"] = s.k;
  side["covariate_sd"] = s.covariate_sd;
  side["intercept"] = cfg.intercept;
  side["seed"] = cfg.seed;
  side["metadata"] = metadata("simulate", cfg);
  io::write_file(fs::path(args.out.string() + ".json"), side.dump(2) + "\n");
  LogLine(log, "simulate").kv("model", to_string(s.model)).kv("samples", s.n).kv("K", s.k).kv("seed", cfg.seed);
}

PosteriorDraws cmd_infer(const InferArgs& args, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto data = align(args.stats, args.covariates, cfg.intercept);
  LogLine(log, "infer").kv("model", to_string(cfg.model)).kv("samples", data.spec.n()).kv("covariates", data.spec.p());

  std::optional<LogPosterior> post;
  if (cfg.model == ModelKind::Proxy) {
    std::vector<double> scalars;
    for (const auto& o : data.observations) scalars.push_back(defuzzify(to_membership(BetaFuzzy(o.obs.c, o.obs.h, o.obs.k))));
    post = LogPosterior::scalar_proxy(data.spec, std::move(scalars), cfg.priors);
  } else {
    post = LogPosterior::fuzzy(cfg.model, data.spec, plain(data.observations), cfg.priors, cfg.likelihood);
  }
  auto draws = sample(*post, cfg.hmc);

  const std::string tag(to_string(cfg.model));
  io::write_file(args.out_dir / ("draws_" + tag + ".csv"), io::write_draws(draws));
  io::write_file(args.out_dir / ("summary_" + tag + ".csv"), summary_csv(draws.diagnostics));
  json diag;
  diag["model"] = model_labels(cfg.model);
  diag["parameters"] = json::array();
  for (const auto& p : draws.diagnostics.parameters) {
    diag["parameters"].push_back({{"name", p.name},
                                  {"mean", p.mean},
                                  {"sd", p.sd},
                                  {"q05", p.q05},
                                  {"q95", p.q95},
                                  {"rhat", number_or_null(p.rhat)},
                                  {"ess_bulk", number_or_null(p.ess_bulk)},
                                  {"rhat_flag", p.rhat_flag}});
  }
  diag["chains"] = json::array();
  for (const auto& c : draws.chains) {
    diag["chains"].push_back({{"accept_rate", c.accept_rate},
                              {"step_size", c.step_size},
                              {"divergences", c.divergences},
                              {"warmup_divergences", c.warmup_divergences}});
  }
  diag["warnings"] = draws.diagnostics.warnings;
  json samples = json::array();
  for (const auto& o : data.observations) samples.push_back({{"sample_id", o.sample_id}, {"K", o.obs.k}});
  diag["samples"] = samples;
  diag["metadata"] = metadata("infer", cfg);
  io::write_file(args.out_dir / ("diagnostics_" + tag + ".json"), diag.dump(2) + "\n");
  for (const auto& w : draws.diagnostics.warnings) LogLine(log, "infer").quoted("warning", w);
  LogLine(log, "infer").kv("draws", draws.draws.rows()).kv("divergences", draws.total_divergences())
      .kv("max_rhat", draws.diagnostics.max_rhat());
  return draws;
}

namespace {

// The diagnostics file written by infer next to the draws lists the samples it
// saw; replicates are only meaningful against the same ids and truncation levels.
void check_inferred_layout(const fs::path& draws_path, std::string_view tag, const AlignedData& data) {
  const auto diag_path = draws_path.parent_path() / ("diagnostics_" + std::string(tag) + ".json");
  if (!fs::exists(diag_path)) return;
  const json diag = json::parse(io::read_file(diag_path), nullptr, false);
  if (diag.is_discarded() || !diag.contains("samples")) return;
  std::map<std::string, std::size_t> fitted;
  for (const auto& s : diag["samples"]) fitted[s.at("sample_id").get<std::string>()] = s.at("K").get<std::size_t>();
  for (const auto& o : data.observations) {
    const auto it = fitted.find(o.sample_id);
    if (it == fitted.end()) {
      throw ValidationError("ppc: sample " + o.sample_id + " was not part of the run behind " + draws_path.string());
    }
    if (it->second != o.obs.k) {
      throw ValidationError("ppc: sample " + o.sample_id + " has K = " + std::to_string(o.obs.k) + " but the draws were fit with K = " +
                            std::to_string(it->second));
    }
  }
}

}  // namespace

std::vector<PpcSummary> cmd_ppc(const PpcArgs& args, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (args.draws.empty()) throw ValidationError("ppc: no draws supplied");
  const auto data = align(args.stats, args.covariates, cfg.intercept);
  const auto observed = plain(data.observations);

  std::vector<PpcSummary> out;
  json summary;
  summary["models"] = json::array();
  for (const auto& path : args.draws) {
    const auto draws = io::read_draws(io::read_csv(path));
    const ModelKind kind = model_from_names(draws.names);
    if (kind == ModelKind::Proxy) throw ValidationError("ppc: " + path.string() + " holds scalar-proxy draws; fuzzy model required");
    if (static_cast<std::size_t>(draws.draws.cols()) != data.spec.p() + (kind == ModelKind::Car1 ? 2 : 3)) {
      throw ValidationError("ppc: " + path.string() + " does not match the covariate layout");
    }
    check_inferred_layout(path, to_string(kind), data);
    PpcOptions opt{cfg.ppc_reps, cfg.seed, cfg.ppc_grid};
    auto s = posterior_predictive_check(draws, data.spec, kind, observed, opt);

    std::ostringstream csv;
    csv << "rep_id,u_rep,u_cross,scaled_mean,iqr80\n";
    for (const auto& r : s.replicates) {
      csv << r.rep_id << ',' << io::format_number(r.u_rep) << ',' << io::format_number(r.u_cross) << ','
          << io::format_number(r.summary.scaled_mean) << ',' << io::format_number(r.summary.iqr80) << '\n';
    }
    const std::string tag(to_string(kind));
    io::write_file(args.out_dir / ("ppc_" + tag + ".csv"), csv.str());
    json m = model_labels(kind);
    m["draws"] = path.filename().string();
    m["n_reps"] = s.replicates.size();
    m["mean_u_rep"] = s.mean_u_rep;
    m["mean_u_cross"] = s.mean_u_cross;
    m["mean_abs_u_cross_minus_u_obs"] = s.mean_cross_gap;
    m["tail_prob_scaled_mean"] = s.tail_scaled_mean;
    m["tail_prob_iqr80"] = s.tail_iqr80;
    m["mean_replicate_iqr80"] = s.mean_iqr80;
    summary["models"].push_back(m);
    summary["u_obs"] = number_or_null(s.u_obs);
    summary["observed"] = json{{"scaled_mean", s.observed.scaled_mean}, {"iqr80", s.observed.iqr80}};
    LogLine(log, "ppc").kv("model", tag).kv("reps", s.replicates.size()).kv("u_obs", s.u_obs)
        .kv("mean_u_cross", s.mean_u_cross).kv("tail_scaled_mean", s.tail_scaled_mean);
    out.push_back(std::move(s));
  }
  summary["metadata"] = metadata("ppc", cfg);
  io::write_file(args.out_dir / "ppc_summary.json", summary.dump(2) + "\n");
  return out;
}

void cmd_kernel_audit(const fs::path& kernel_json, const RunConfig& cfg, std::ostream& out) {
  const auto kern = kernel_from_json(io::read_file(kernel_json));
  out << "# phi(y, {xi_j})\ny,c";
  for (std::size_t j = 0; j < kern.size(); ++j) out << ",xi_" << j;
  out << '\n';
  for (std::size_t y = 0; y <= kern.k_max(); ++y) {
    out << y << ',' << io::format_number(normalizer(kern, y));
    for (std::size_t j = 0; j < kern.size(); ++j) {
      const std::size_t single[] = {j};
      out << ',' << io::format_number(kernel_prob(kern, y, single));
    }
    out << '\n';
  }
  out << "# CAR verdicts\noutcome,car,ratio_min,ratio_max,witness_lo,witness_hi\n";
  for (std::size_t j = 0; j < kern.size(); ++j) {
    out << j << ',';
    if (!(kern.nu()[j] > 0.0)) {
      out << "skipped,,,,\n";
      continue;
    }
    const auto v = is_car(kern, j, cfg.car_tolerance);
    out << (v.car ? "true" : "false") << ',' << io::format_number(v.ratio_min) << ','
        << io::format_number(v.ratio_max) << ',';
    if (v.witness) out << v.witness->first << ',' << v.witness->second;
    else out << ',';
    out << '\n';
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Granular counts under fuzzy reporting: counting, fitting, inference and predictive checks"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config entry, e.g. hmc.n_draws=500");
  };

  CountArgs count_args;
  std::vector<std::string> count_inputs;
  std::string count_out, referent;
  auto* count = app.add_subcommand("count", "granular counts from possibility matrices");
  count->add_option("-i,--input", count_inputs, "possibility CSV (observations x referents)")->required();
  count->add_option("-r,--referent", referent, "referent to count; one row per input file");
  count->add_option("-o,--out", count_out, "granular counts CSV")->required();
  count->add_flag("--bruteforce", count_args.bruteforce, "use exhaustive subset enumeration");

  std::string fit_in, fit_out;
  auto* fit = app.add_subcommand("fit", "Beta-type fits of granular counts");
  fit->add_option("-i,--input", fit_in, "granular counts CSV")->required();
  fit->add_option("-o,--out", fit_out, "statistics CSV")->required();
  add_config(fit);

  std::string sim_out, sim_cov;
  auto* sim = app.add_subcommand("simulate", "synthetic fuzzy data from the generative model");
  sim->add_option("-o,--out", sim_out, "data CSV (parameters go to <out>.json)")->required();
  sim->add_option("--covariates-out", sim_cov, "covariates CSV")->required();
  add_config(sim);

  std::string inf_stats, inf_cov, inf_dir;
  auto* infer = app.add_subcommand("infer", "posterior sampling by HMC");
  infer->add_option("-s,--stats", inf_stats, "statistics CSV (sample_id,c,h,K)")->required();
  infer->add_option("-c,--covariates", inf_cov, "covariates CSV")->required();
  infer->add_option("-o,--out-dir", inf_dir, "output directory")->required();
  add_config(infer);

  std::vector<std::string> ppc_draws;
  std::string ppc_stats, ppc_cov, ppc_dir;
  auto* ppc = app.add_subcommand("ppc", "posterior predictive checks");
  ppc->add_option("-d,--draws", ppc_draws, "draws CSV; repeat to compare models")->required();
  ppc->add_option("-s,--stats", ppc_stats, "statistics CSV")->required();
  ppc->add_option("-c,--covariates", ppc_cov, "covariates CSV")->required();
  ppc->add_option("-o,--out-dir", ppc_dir, "output directory")->required();
  add_config(ppc);

  std::string kernel_path, audit_out;
  auto* audit = app.add_subcommand("kernel-audit", "print the reporting kernel and CAR verdicts");
  audit->add_option("-k,--kernel", kernel_path, "kernel JSON")->required()->check(CLI::ExistingFile);
  audit->add_option("-o,--out", audit_out, "write the table here instead of stdout");
  add_config(audit);

  auto* show = app.add_subcommand("show-config", "print the effective configuration");
  add_config(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationFailure;
  }

  try {
    RunConfig cfg = config_path.empty() ? default_config() : config_from_json(io::read_file(config_path));
    if (!overrides.empty()) cfg = apply_overrides(cfg, overrides);
    cfg.validate();

    if (count->parsed()) {
      for (const auto& i : count_inputs) count_args.inputs.emplace_back(i);
      count_args.out = count_out;
      if (!referent.empty()) count_args.referent = referent;
      cmd_count(count_args, err);
    } else if (fit->parsed()) {
      cmd_fit({fit_in, fit_out}, cfg, err);
    } else if (sim->parsed()) {
      cmd_simulate({sim_out, sim_cov}, cfg, err);
    } else if (infer->parsed()) {
      cmd_infer({inf_stats, inf_cov, inf_dir}, cfg, err);
    } else if (ppc->parsed()) {
      PpcArgs a;
      for (const auto& d : ppc_draws) a.draws.emplace_back(d);
      a.stats = ppc_stats;
      a.covariates = ppc_cov;
      a.out_dir = ppc_dir;
      cmd_ppc(a, cfg, err);
    } else if (audit->parsed()) {
      if (audit_out.empty()) {
        cmd_kernel_audit(kernel_path, cfg, out);
      } else {
        std::ostringstream ss;
        cmd_kernel_audit(kernel_path, cfg, ss);
        io::write_file(audit_out, ss.str());
      }
    } else if (show->parsed()) {
      out << config_to_json(cfg);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kOk;
}

}  // namespace granular::cli
