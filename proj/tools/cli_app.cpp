#include "cli_app.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "mm1re/errors.hpp"
#include "mm1re/parallel.hpp"

namespace mm1re::cli {
namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys{
    "experiment",   "queue",          "environment",  "perturbation",
    "epsilon",      "eps_grid",       "alphas",       "covariance_decay_rate",
    "n_replicas",   "coefficient_replicas", "bootstrap_resamples", "seed",
    "workers",      "max_events",     "output"};

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

// Infinite clamp levels are written as null or left out.
double clamp_level(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<double>(j, key, "perturbation");
}

AnyEnvironment parse_environment(const json& j) {
  if (!j.is_object()) throw ConfigError("environment: expected an object");
  const auto type = field<std::string>(j, "type", "environment");
  const double alpha = field_or<double>(j, "time_scale", 1.0, "environment");
  if (!(alpha > 0.0)) throw ValidationError("environment: time_scale must be positive");
  if (type == "ctmc") {
    const auto rows = field<std::vector<std::vector<double>>>(j, "generator", "environment");
    const auto n = rows.size();
    Eigen::MatrixXd q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw ConfigError("environment: generator must be square");
      for (std::size_t k = 0; k < n; ++k) {
        q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
    FiniteCtmc env(q);
    return alpha == 1.0 ? env : env.time_scale(alpha);
  }
  if (type == "ou") {
    OuEnvironment env(field<double>(j, "theta", "environment"),
                      field_or<double>(j, "mean", 0.0, "environment"),
                      field<double>(j, "variance", "environment"));
    return alpha == 1.0 ? env : env.time_scale(alpha);
  }
  throw ConfigError("environment: unknown type '" + type + "' (expected ctmc or ou)");
}

AnySpec parse_perturbation(const json& j, const AnyEnvironment& env) {
  if (!j.is_object()) throw ConfigError("perturbation: expected an object");
  const auto mode_name = field_or<std::string>(j, "bound_mode", "strict", "perturbation");
  if (mode_name != "strict" && mode_name != "soft") {
    throw ConfigError("perturbation: bound_mode must be strict or soft");
  }
  const auto mode = mode_name == "soft" ? BoundMode::soft : BoundMode::strict;
  if (const auto* ctmc = std::get_if<FiniteCtmc>(&env)) {
    auto values = field<std::vector<double>>(j, "values", "perturbation");
    return PerturbationSpec<FiniteCtmc>::make(*ctmc, std::move(values), mode);
  }
  const auto& ou = std::get<OuEnvironment>(env);
  constexpr double inf = std::numeric_limits<double>::infinity();
  ClampedAffine f{field_or<double>(j, "slope", 0.0, "perturbation"),
                  field_or<double>(j, "intercept", 0.0, "perturbation"),
                  clamp_level(j, "lower", -inf), clamp_level(j, "upper", inf)};
  return PerturbationSpec<OuEnvironment>::make(ou, f, mode);
}

bool needs_model(Experiment e) { return e != Experiment::moments_check; }
bool uses_grid(Experiment e) {
  return e == Experiment::first_order || e == Experiment::second_order ||
         e == Experiment::sweep;
}

// Calls f(env, spec) with the concrete model types.
template <class F>
decltype(auto) with_model(const ExperimentConfig& c, F&& f) {
  return std::visit(
      [&](const auto& env) -> decltype(auto) {
        using Env = std::decay_t<decltype(env)>;
        return f(env, std::get<PerturbationSpec<Env>>(*c.perturbation));
      },
      *c.environment);
}

double sign_of_spec(const AnySpec& s) {
  return std::visit([](const auto& spec) { return spec.mean_p; }, s);
}

std::string label(const char* prefix, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%g", prefix, x);
  return buf;
}

ResultRow row(std::string name, const CoefficientEstimate& e, std::string anchor) {
  return {std::move(name), e.value, e.std_error, e.n_replicas, e.method, std::move(anchor)};
}

McOptions coefficient_options(const ExperimentConfig& c) {
  return {c.seed, c.coefficient_replicas, c.workers, c.max_events};
}

void append_sweep_rows(RunOutput& out, const SweepResult& s) {
  out.rows.push_back(row("d1_hat", s.d1_hat(), "expansion_fit"));
  out.rows.push_back(row("d2_hat", s.d2_hat(), "expansion_fit"));
  if (s.bootstrap.resamples > 0) {
    out.rows.push_back({"d1_hat_bootstrap", s.fit.d1, s.bootstrap.d1_se, s.replicas(),
                        EstimateMethod::simulation, "expansion_fit_bootstrap"});
    out.rows.push_back({"d2_hat_bootstrap", s.fit.d2, s.bootstrap.d2_se, s.replicas(),
                        EstimateMethod::simulation, "expansion_fit_bootstrap"});
  }
  out.replicas += s.replicas();
  out.aborted += s.aborted;
  for (const auto& p : s.points) out.aborted_flag = out.aborted_flag || p.abort_flagged();
}

SweepResult sweep_for(const ExperimentConfig& c) {
  SweepOptions o;
  o.eps_grid = c.eps_grid;
  o.n_replicas = c.n_replicas;
  o.seed = c.seed;
  o.workers = c.workers;
  o.bootstrap_resamples = c.bootstrap_resamples;
  o.max_events = c.max_events;
  return with_model(c, [&](const auto& env, const auto& spec) {
    return run_sweep(c.queue, env, spec, o);
  });
}

RunOutput moments_check(const ExperimentConfig& c) {
  struct Partial {
    std::array<RunningStats, 6> s;
    std::uint64_t aborted = 0;
  };
  const auto part = reduce_replicas<Partial>(
      c.n_replicas, c.workers,
      [&](std::uint64_t begin, std::uint64_t end) {
        Partial p;
        auto rng = make_stream(c.seed, begin / kReplicaBlock, Substream::busy_period);
        for (std::uint64_t r = begin; r < end; ++r) {
          const auto b = sample_busy_period(rng, c.queue, c.max_events);
          if (!b) {
            ++p.aborted;
            continue;
          }
          const double n = static_cast<double>(b->n_services());
          p.s[0].add(b->length);
          p.s[1].add(b->length * b->length);
          p.s[2].add(n);
          p.s[3].add(n * b->length);
          p.s[4].add(n * (n - 1.0));
          p.s[5].add(b->departure_sum());
        }
        return p;
      },
      [](Partial& acc, const Partial& p) {
        for (std::size_t k = 0; k < acc.s.size(); ++k) acc.s[k].merge(p.s[k]);
        acc.aborted += p.aborted;
      });
  const auto m = busy_moments(c.queue);
  const std::array<std::pair<const char*, double>, 6> names{{
      {"E_B", m.mean_length},
      {"E_B2", m.second_moment},
      {"E_N", m.mean_services},
      {"E_NB", m.mean_services_times_length},
      {"E_NN1", m.factorial_moment_services},
      {"E_D", m.mean_departure_sum},
  }};
  RunOutput out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    out.rows.push_back(row(names[k].first,
                           CoefficientEstimate::from(part.s[k], EstimateMethod::simulation),
                           "busy_period_moments"));
    out.rows.push_back(row(std::string(names[k].first) + "_exact",
                           CoefficientEstimate::closed(names[k].second),
                           "busy_period_moments"));
  }
  out.replicas = part.s[0].count();
  out.aborted = part.aborted;
  out.aborted_flag = static_cast<double>(part.aborted) >
                     kAbortedFractionLimit * static_cast<double>(c.n_replicas);
  return out;
}

RunOutput second_order_run(const ExperimentConfig& c, bool full) {
  RunOutput out;
  const auto corr = with_model(c, [](const auto& env, const auto& spec) {
    return correlations_for(env, spec);
  });
  out.rows.push_back(row("delta1", delta1(c.queue, corr), "first_order_expansion"));
  if (full) {
    const auto so = second_order(c.queue, corr, coefficient_options(c));
    out.rows.push_back(row("a_plus", so.a_plus, "second_order_event_split"));
    out.rows.push_back(row("a_minus", so.a_minus, "second_order_event_split"));
    out.rows.push_back(row("delta2", so.delta2, "second_order_event_split"));
    if (corr.sign == SignPattern::nonneg || corr.sign == SignPattern::zero) {
      out.rows.push_back(row("delta2_covariance",
                             delta2_covariance(c.queue, corr, coefficient_options(c)),
                             "covariance_form"));
    }
    out.aborted += so.aborted;
  }
  auto sweep = sweep_for(c);
  append_sweep_rows(out, sweep);
  out.sweep = std::move(sweep);
  return out;
}

RunOutput rsr_run(const ExperimentConfig& c) {
  RunOutput out;
  const auto corr = with_model(c, [](const auto& env, const auto& spec) {
    return correlations_for(env, spec);
  });
  const auto side = corr.sign == SignPattern::nonpos ? RsrSide::nonpos : RsrSide::nonneg;
  out.rows.push_back(row("rsr_gap", rsr_gap(c.queue, corr, side, coefficient_options(c)),
                         "reduced_service_rate_gap"));
  if (c.covariance_decay_rate) {
    out.rows.push_back(row("delta2_exponential",
                           delta2_exponential(*c.covariance_decay_rate, corr.var_p, c.queue),
                           "exponential_covariance_gap"));
  }
  const double reference = rsr_reference(c.queue, corr.mean_p, c.epsilon);
  out.rows.push_back(row("rsr_reference", CoefficientEstimate::closed(reference),
                         "reduced_service_rate_mean"));
  GapOptions g{c.seed, c.n_replicas, c.workers, c.max_events, false};
  const auto gap = with_model(c, [&](const auto& env, const auto& spec) {
    return estimate_mean_gap(c.queue.with_epsilon(c.epsilon), env, spec, g);
  });
  const double e2 = c.epsilon * c.epsilon;
  const double mean_b = busy_moments(c.queue).mean_length;
  out.rows.push_back({"rsr_quotient", (reference - (mean_b - gap.gap.value)) / e2,
                      gap.gap.std_error / e2, gap.completed(), EstimateMethod::simulation,
                      "reduced_service_rate_gap"});
  out.replicas = gap.completed();
  out.aborted = gap.aborted;
  out.aborted_flag = gap.abort_flagged();
  return out;
}

RunOutput fast_env_run(const ExperimentConfig& c) {
  RunOutput out;
  const auto values = with_model(c, [&](const auto& env, const auto& spec) {
    return fast_env_sweep(c.queue, env, spec, c.alphas, coefficient_options(c));
  });
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.rows.push_back(row(label("delta2_alpha_", c.alphas[i]), values[i],
                           "fast_environment"));
    out.replicas += values[i].n_replicas;
  }
  out.rows.push_back(row("fast_env_limit",
                         fast_env_limit(c.queue, sign_of_spec(*c.perturbation)),
                         "fast_environment_limit"));
  return out;
}

RunOutput sweep_run(const ExperimentConfig& c) {
  RunOutput out;
  auto sweep = sweep_for(c);
  for (std::size_t i = 0; i < sweep.eps_grid.size(); ++i) {
    out.rows.push_back(row(label("gap_eps_", sweep.eps_grid[i]), sweep.points[i].gap,
                           "mean_gap"));
  }
  append_sweep_rows(out, sweep);
  out.sweep = std::move(sweep);
  return out;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path output_dir(const ExperimentConfig& c) {
  if (const char* dir = std::getenv("MM1RE_OUTPUT_DIR"); dir && *dir) return dir;
  return c.output;
}

int run_command(const std::string& path, std::optional<unsigned> workers) {
  auto config = load_config(path);
  if (workers) config.workers = *workers;
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const RunOutput out = run_experiment(config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dir = output_dir(config);
  std::filesystem::create_directories(dir);
  std::vector<std::string> files{"results.csv", "manifest.json"};
  {
    std::ofstream os(dir / "results.csv");
    write_results_csv(os, out.rows);
  }
  if (out.sweep) {
    std::ofstream os(dir / "sweep.csv");
    write_sweep_csv(os, *out.sweep);
    files.push_back("sweep.csv");
  }
  json manifest{
      {"schema", "mm1re.manifest.v1"},
      {"experiment", config.source.at("experiment")},
      {"config", config.source},
      {"config_path", std::filesystem::absolute(path).string()},
      {"seed", config.seed},
      {"workers", resolve_workers(config.workers)},
      {"started_at", utc_timestamp(started)},
      {"finished_at", utc_timestamp(std::chrono::system_clock::now())},
      {"wall_seconds", wall},
      {"replicas", out.replicas},
      {"aborted_replicas", out.aborted},
      {"aborted_fraction_flagged", out.aborted_flag},
      {"files", files},
  };
  if (out.sweep) {
    const auto& s = *out.sweep;
    manifest["fit"] = {{"d1_hat", s.fit.d1},
                       {"d2_hat", s.fit.d2},
                       {"covariance", {{s.fit.covariance(0, 0), s.fit.covariance(0, 1)},
                                       {s.fit.covariance(1, 0), s.fit.covariance(1, 1)}}},
                       {"chi2", s.fit.chi2},
                       {"max_abs_residual_over_eps3", s.max_scaled_residual},
                       {"bootstrap_resamples", s.bootstrap.resamples},
                       {"bootstrap_d1_se", s.bootstrap.d1_se},
                       {"bootstrap_d2_se", s.bootstrap.d2_se}};
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  if (out.aborted_flag) {
    std::cerr << "warning: aborted-replica fraction above " << kAbortedFractionLimit << '\n';
  }
  std::cout << "wrote " << (dir / "results.csv").string() << '\n';
  return kOk;
}

}  // namespace

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> list{
      {Experiment::moments_check, "moments_check",
       "simulated busy-period moments against their closed forms"},
      {Experiment::first_order, "first_order",
       "closed-form first-order coefficient and the fitted slope of an eps sweep"},
      {Experiment::second_order, "second_order",
       "a_plus, a_minus and delta2 by semi-analytic Monte Carlo, with the sweep fit"},
      {Experiment::rsr_gap, "rsr_gap",
       "second-order gap to the reduced-service-rate queue"},
      {Experiment::fast_env, "fast_env",
       "delta2 on a time-scaled environment for each alpha, and its limit"},
      {Experiment::sweep, "sweep",
       "mean gap per eps and the zero-intercept quadratic fit"},
  };
  return list;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a top-level object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevelKeys.count(key)) throw ConfigError("config: unknown field '" + key + "'");
  }
  ExperimentConfig c;
  c.source = j;
  const auto name = field<std::string>(j, "experiment", "config");
  bool found = false;
  for (const auto& e : experiments()) {
    if (name == e.name) {
      c.experiment = e.id;
      found = true;
    }
  }
  if (!found) throw ConfigError("config: unknown experiment '" + name + "'");

  const auto& q = j.contains("queue") ? j.at("queue") : json::object();
  if (!q.is_object()) throw ConfigError("queue: expected an object");
  c.queue.lambda = field<double>(q, "lambda", "queue");
  c.queue.mu = field<double>(q, "mu", "queue");
  c.queue.validate();

  c.epsilon = field_or<double>(j, "epsilon", c.epsilon, "config");
  c.eps_grid = field_or<std::vector<double>>(j, "eps_grid", c.eps_grid, "config");
  c.alphas = field_or<std::vector<double>>(j, "alphas", c.alphas, "config");
  if (j.contains("covariance_decay_rate")) {
    c.covariance_decay_rate = field<double>(j, "covariance_decay_rate", "config");
  }
  c.n_replicas = field_or<std::uint64_t>(j, "n_replicas", c.n_replicas, "config");
  c.coefficient_replicas =
      field_or<std::uint64_t>(j, "coefficient_replicas", c.coefficient_replicas, "config");
  c.bootstrap_resamples =
      field_or<std::size_t>(j, "bootstrap_resamples", c.bootstrap_resamples, "config");
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed, "config");
  c.workers = field_or<unsigned>(j, "workers", c.workers, "config");
  c.max_events = field_or<std::uint64_t>(j, "max_events", c.max_events, "config");
  c.output = field_or<std::string>(j, "output", c.output.string(), "config");

  if (uses_grid(c.experiment)) {
    try {
      check_eps_grid(c.eps_grid);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("eps_grid: ") + e.what());
    }
    if (c.n_replicas < 10'000) throw ConfigError("n_replicas: sweeps need at least 10^4");
  }
  if (c.experiment == Experiment::rsr_gap && c.n_replicas < 1000) {
    throw ConfigError("n_replicas: at least 1000 needed");
  }
  for (double a : c.alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas: values must be positive");
  }
  if (c.epsilon < 0.0) throw ConfigError("epsilon: must be non-negative");

  if (needs_model(c.experiment)) {
    if (!j.contains("environment")) throw ConfigError("config: missing field 'environment'");
    if (!j.contains("perturbation")) throw ConfigError("config: missing field 'perturbation'");
    c.environment = parse_environment(j.at("environment"));
    c.perturbation = parse_perturbation(j.at("perturbation"), *c.environment);
    std::vector<double> checked = uses_grid(c.experiment) ? c.eps_grid : std::vector<double>{};
    if (c.experiment == Experiment::rsr_gap) checked.push_back(c.epsilon);
    for (double e : checked) {
      std::visit([&](const auto& spec) { validate(spec, c.queue.with_epsilon(e)); },
                 *c.perturbation);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunOutput run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::moments_check: return moments_check(c);
    case Experiment::first_order: return second_order_run(c, false);
    case Experiment::second_order: return second_order_run(c, true);
    case Experiment::rsr_gap: return rsr_run(c);
    case Experiment::fast_env: return fast_env_run(c);
    case Experiment::sweep: return sweep_run(c);
  }
  throw std::logic_error("unhandled experiment");
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "#schema=" << kResultsSchema << '\n';
  os << "name,value,std_error,n_replicas,method,anchor\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%llu,", r.value, r.std_error,
                  static_cast<unsigned long long>(r.n_replicas));
    os << r.name << ',' << buf << to_string(r.method) << ',' << r.anchor << '\n';
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"M/M/1 queue in a random environment: coupled busy-period "
               "simulation and perturbation coefficients"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<unsigned> workers;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--workers", workers, "override the worker count (0 = all cores)");
  auto* check = app.add_subcommand("validate", "parse and validate a config file");
  check->add_option("config", config_path, "JSON config file")->required();
  app.add_subcommand("list-experiments", "list the experiment tags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("list-experiments")) {
      for (const auto& e : experiments()) std::cout << e.name << "\t" << e.summary << '\n';
      return kOk;
    }
    if (app.got_subcommand("validate")) {
      const auto c = load_config(config_path);
      std::cout << "ok: " << c.source.at("experiment").get<std::string>() << '\n';
      return kOk;
    }
    return run_command(config_path, workers);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
}

}  // namespace mm1re::cli
