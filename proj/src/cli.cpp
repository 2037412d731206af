#include "softprune/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "softprune/analysis.hpp"
#include "softprune/io.hpp"
#include "softprune/ista.hpp"
#include "softprune/models.hpp"
#include "softprune/schedulers.hpp"
#include "softprune/trainer.hpp"

namespace softprune {

namespace {

using Schema = std::map<std::string, std::string>;
using Json = nlohmann::ordered_json;

std::string default_seed() {
  const char* env = std::getenv(kSeedEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("0");
}

void add_schedule_keys(Schema& s) {
  s["scheduler.kind"] = "slats";
  s["scheduler.D"] = "1";
  s["scheduler.mu"] = "0";
  s["scheduler.beta"] = "0.1";
  s["scheduler.d0"] = "0";
  s["scheduler.s_init"] = "-5";
  s["scheduler.include_warmup"] = "true";
  s["lr.kind"] = "cosine";
  s["lr.eta_max"] = "0.1";
  s["lr.kappa"] = "0.9";
  s["lr.epochs"] = "10";
  s["lr.batches"] = "10";
  s["lr.warmup_epochs"] = "0";
}

void add_training_keys(Schema& s) {
  add_schedule_keys(s);
  s["scheduler.D"] = "0.1";
  s["lr.eta_max"] = "0.05";
  s["trainer.mode"] = "stds-identity";
  s["trainer.weight_decay"] = "0";
  s["trainer.momentum"] = "0";
  s["trainer.record_trace"] = "false";
  s["model.kind"] = "linear";
  s["model.hidden"] = "8";
  s["data.path"] = "";
  s["data.samples"] = "200";
  s["data.features"] = "50";
  s["data.nonzero"] = "5";
  s["data.noise"] = "0.1";
}

// Errors thrown while a specific key is being interpreted.
template <typename F>
auto with_key(const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()), key);
  }
}

LearningRateSpec lr_from(const ExperimentConfig& c) {
  LearningRateSpec lr;
  lr.kind = with_key("lr.kind", [&] { return parse_lr_kind(c.get("lr.kind")); });
  lr.eta_max = c.get_double("lr.eta_max");
  lr.kappa = c.get_double("lr.kappa");
  lr.epochs = c.get_size("lr.epochs");
  lr.batches = c.get_size("lr.batches");
  lr.warmup_epochs = c.get_size("lr.warmup_epochs");
  with_key("lr", [&] { lr.validate(); return 0; });
  return lr;
}

SchedulerSpec scheduler_from(const ExperimentConfig& c) {
  SchedulerSpec s;
  s.kind = with_key("scheduler.kind", [&] { return parse_scheduler_kind(c.get("scheduler.kind")); });
  s.final_threshold = c.get_double("scheduler.D");
  s.mu = c.get_double("scheduler.mu");
  s.beta = c.get_double("scheduler.beta");
  s.initial_threshold = c.get_double("scheduler.d0");
  s.s_init = c.get_double("scheduler.s_init");
  s.lats_include_warmup = c.get_bool("scheduler.include_warmup");
  with_key("scheduler", [&] { s.validate(); return 0; });
  return s;
}

TrainerConfig trainer_from(const ExperimentConfig& c) {
  TrainerConfig t;
  t.mode = with_key("trainer.mode", [&] { return parse_gradient_mode(c.get("trainer.mode")); });
  t.scheduler = scheduler_from(c);
  t.lr = lr_from(c);
  t.weight_decay = c.get_double("trainer.weight_decay");
  t.momentum = c.get_double("trainer.momentum");
  t.seed = c.get_u64("seed");
  t.record_trace = c.get_bool("trainer.record_trace");
  with_key("trainer", [&] { t.validate(); return 0; });
  return t;
}

struct Experiment {
  Model model;
  Dataset data;
};

Experiment experiment_from(const ExperimentConfig& c) {
  const ModelKind kind =
      with_key("model.kind", [&] { return parse_model_kind(c.get("model.kind")); });
  const std::uint64_t seed = c.get_u64("seed");
  Experiment e;
  if (c.has("data.path")) {
    e.data = read_dataset_csv(c.get("data.path"));
  } else if (kind == ModelKind::kLogistic) {
    e.data = gen_sparse_classification(c.get_size("data.samples"), c.get_size("data.features"),
                                       c.get_size("data.nonzero"), seed);
  } else {
    e.data = with_key("data", [&] {
      return gen_sparse_regression(c.get_size("data.samples"), c.get_size("data.features"),
                                   c.get_size("data.nonzero"), c.get_double("data.noise"), seed);
    });
  }
  const std::size_t d = e.data.features();
  switch (kind) {
    case ModelKind::kLinear: e.model = Model::linear(d); break;
    case ModelKind::kLogistic: e.model = Model::logistic(d); break;
    case ModelKind::kMlp2: e.model = Model::mlp2(d, c.get_size("model.hidden"), seed); break;
  }
  return e;
}

// Writes an artifact to output.path, or to `out` when no path is set.
void emit(const ExperimentConfig& c, std::ostream& out, const std::string& key,
          const std::function<void(std::ostream&)>& write) {
  if (!c.has(key)) {
    write(out);
    return;
  }
  std::ofstream file = open_output(c.get(key), c.get_bool("output.overwrite"));
  write(file);
  if (!file) throw IoError(fmt::format("write to '{}' failed", c.get(key)));
}

// The analysis reports serialize to nlohmann::json; artifacts keep key order.
template <typename T>
Json ordered(const T& value) {
  return Json::parse(nlohmann::json(value).dump());
}

Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

int cmd_schedule(const ExperimentConfig& c, std::ostream& out) {
  const SchedulerSpec spec = scheduler_from(c);
  const LearningRateSpec lr = lr_from(c);
  if (spec.kind == SchedulerKind::kTrainableStr) {
    throw ConfigError("scheduler.kind: trainable-str has no closed-form schedule", "scheduler.kind");
  }
  const std::vector<double> d = threshold_sequence(spec, lr);
  const std::vector<double> eta = lr_sequence(lr);
  const PenaltyTrace penalty = implicit_penalty(d, eta);
  emit(c, out, "output.path", [&](std::ostream& os) {
    os << "# config_hash=" << c.hash() << '\n';
    os << "iter,threshold,lr,penalty\n";
    for (std::size_t t = 0; t < d.size(); ++t) {
      const bool step = t < eta.size();
      const double mu = step && penalty.entries[t].defined ? penalty.entries[t].value
                                                           : std::nan("");
      os << t << ',' << format_double(d[t]) << ',' << format_double(step ? eta[t] : std::nan(""))
         << ',' << format_double(mu) << '\n';
    }
  });
  return kExitOk;
}

int cmd_solve(const ExperimentConfig& c, std::ostream& out) {
  LassoProblem p;
  if (c.has("problem.path")) {
    const Dataset data = read_dataset_csv(c.get("problem.path"));
    p.a = data.inputs;
    p.b = data.targets;
  } else {
    const Dataset data = with_key("problem", [&] {
      return gen_sparse_regression(c.get_size("problem.samples"), c.get_size("problem.features"),
                                   c.get_size("problem.nonzero"), c.get_double("problem.noise"),
                                   c.get_u64("seed"));
    });
    p.a = data.inputs;
    p.b = data.targets;
  }
  p.mu = c.has("problem.mu")
             ? c.get_double("problem.mu")
             : c.get_double("problem.mu_ratio") * (p.a.transpose() * p.b).cwiseAbs().maxCoeff();
  with_key("problem.mu", [&] { p.validate(); return 0; });

  IstaConfig cfg;
  if (c.has("solver.step")) cfg.step = c.get_double("solver.step");
  cfg.max_iterations = c.get_size("solver.max_iter");
  cfg.kkt_tolerance = c.get_double("solver.tol");
  cfg.fista = c.get_bool("solver.fista");

  const std::size_t stages = c.get_size("solver.continuation_stages");
  IstaResult result;
  if (stages > 0) {
    const auto schedule = with_key("solver.continuation_beta", [&] {
      return geometric_continuation(p.mu, c.get_double("solver.continuation_beta"), stages);
    });
    result = solve_with_continuation(p, schedule, cfg).result;
  } else {
    result = solve_lasso(p, cfg);
  }

  Json j;
  j["config_hash"] = c.hash();
  j["mu"] = p.mu;
  j["iterations"] = result.iterations;
  j["kkt"] = result.kkt;
  j["converged"] = result.converged;
  j["step"] = result.step;
  j["objective"] = p.objective(result.x);
  j["solution"] = vector_json(result.x);
  emit(c, out, "output.path", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return kExitOk;
}

int cmd_train(const ExperimentConfig& c, std::ostream& out) {
  const TrainerConfig cfg = trainer_from(c);
  const Experiment e = experiment_from(c);
  const RunResult result = run(cfg, e.model, e.data);
  emit(c, out, "output.path", [&](std::ostream& os) {
    write_metrics_csv(os, result.metrics, c.hash());
  });
  if (c.has("output.weights")) {
    std::ofstream file = open_output(c.get("output.weights"), c.get_bool("output.overwrite"));
    write_weights(file, WeightsFile{result.w, cfg.seed, c.hash()});
    if (!file) throw IoError(fmt::format("write to '{}' failed", c.get("output.weights")));
  }
  return kExitOk;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& out) {
  const TrainerConfig cfg = trainer_from(c);
  if (cfg.momentum != 0.0) {
    throw ConfigError("trainer.momentum: verification needs vanilla SGD (momentum 0)",
                      "trainer.momentum");
  }
  const Experiment e = experiment_from(c);
  const EquivalenceReport report =
      verify_equivalence(cfg, e.model, e.data, c.get_double("verify.tolerance"));
  Json j;
  j["config_hash"] = c.hash();
  j["passed"] = report.passed();
  j["report"] = ordered(report);
  emit(c, out, "output.path", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return report.passed() ? kExitOk : kExitVerifyMismatch;
}

int cmd_trace(const ExperimentConfig& c, std::ostream& out) {
  const SchedulerSpec spec = scheduler_from(c);
  const LearningRateSpec lr = lr_from(c);
  if (spec.kind == SchedulerKind::kTrainableStr) {
    throw ConfigError("scheduler.kind: trainable-str has no closed-form schedule", "scheduler.kind");
  }
  const PenaltyTrace trace = implicit_penalty(threshold_sequence(spec, lr), lr_sequence(lr));

  Json j;
  j["config_hash"] = c.hash();
  j["scheduler"] = std::string(to_string(spec.kind));
  j["total_iterations"] = lr.total_iterations();
  Json penalty = Json::array();
  for (const auto& entry : trace.entries) {
    if (entry.defined) penalty.push_back(entry.value);
    else penalty.push_back(nullptr);
  }
  j["penalty"] = std::move(penalty);
  j["penalty_fit"] = ordered(penalty_shape_test(spec, lr, c.get_double("trace.window_lo"),
                                                c.get_double("trace.window_hi")));

  const double level = c.get_double("trace.level");
  const std::vector<double> betas = c.get_double_list("trace.betas");
  Json stops = Json::array();
  for (double beta : betas) {
    const auto stop = with_key("trace.betas", [&] { return pgh_stop_fraction(beta, level); });
    Json row;
    row["beta"] = beta;
    if (stop) row["stop_fraction"] = *stop;
    else row["stop_fraction"] = nullptr;
    stops.push_back(std::move(row));
  }
  j["pgh_stop_fractions"] = std::move(stops);
  if (c.get_bool("trace.early_pruning")) j["early_pruning"] = ordered(early_pruning_report(betas, level));
  emit(c, out, "output.path", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return kExitOk;
}

const std::map<std::string, std::function<int(const ExperimentConfig&, std::ostream&)>>&
commands() {
  static const std::map<std::string, std::function<int(const ExperimentConfig&, std::ostream&)>>
      table{{"schedule", cmd_schedule},
            {"solve", cmd_solve},
            {"train", cmd_train},
            {"verify", cmd_verify},
            {"trace", cmd_trace}};
  return table;
}

void report_error(std::ostream& err, const char* kind, const std::string& message,
                  const std::string& key = {}) {
  Json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  if (!key.empty()) j["error"]["key"] = key;
  err << j.dump() << '\n';
}

}  // namespace

std::map<std::string, std::string> config_schema(const std::string& subcommand) {
  Schema s;
  s["seed"] = default_seed();
  s["output.path"] = "";
  s["output.overwrite"] = "false";
  if (subcommand == "schedule") {
    add_schedule_keys(s);
  } else if (subcommand == "solve") {
    s["problem.path"] = "";
    s["problem.samples"] = "20";
    s["problem.features"] = "50";
    s["problem.nonzero"] = "5";
    s["problem.noise"] = "0";
    s["problem.mu"] = "";
    s["problem.mu_ratio"] = "0.1";
    s["solver.step"] = "";
    s["solver.max_iter"] = "0";
    s["solver.tol"] = "1e-8";
    s["solver.fista"] = "false";
    s["solver.continuation_stages"] = "0";
    s["solver.continuation_beta"] = "0.1";
  } else if (subcommand == "train") {
    add_training_keys(s);
    s["output.weights"] = "";
  } else if (subcommand == "verify") {
    add_training_keys(s);
    s["verify.tolerance"] = "1e-12";
  } else if (subcommand == "trace") {
    add_schedule_keys(s);
    s["scheduler.kind"] = "sine";
    s["lr.epochs"] = "100";
    s["trace.window_lo"] = "0.1";
    s["trace.window_hi"] = "0.9";
    s["trace.level"] = "0.1";
    s["trace.betas"] = "0.1,1e-5,1e-10";
    s["trace.early_pruning"] = "false";
  } else {
    throw ConfigError(fmt::format("unknown subcommand '{}'", subcommand), "");
  }
  return s;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Soft-threshold pruning as ISTA: schedulers, solver, trainer, checks"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Sub> subs;
  for (const auto& [name, _] : commands()) {
    Sub& sub = subs[name];
    sub.app = app.add_subcommand(name);
    sub.app->add_option("--config", sub.config_file, "key = value config file");
    for (const auto& [key, def] : config_schema(name)) {
      sub.app->add_option("--" + key, sub.flags[key], fmt::format("default: '{}'", def));
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Sub& sub = subs.at(name);
  try {
    ExperimentConfig cfg(config_schema(name));
    if (!sub.config_file.empty()) cfg.merge_file(sub.config_file);
    for (const auto& [key, value] : sub.flags) {
      if (sub.app->count("--" + key) > 0) cfg.set(key, value);
    }
    err << "# config_hash=" << cfg.hash() << '\n';
    for (const auto& [key, value] : cfg.entries()) err << "# " << key << '=' << value << '\n';
    return commands().at(name)(cfg, out);
  } catch (const ConfigError& e) {
    report_error(err, "config", e.what(), e.key());
    return kExitConfig;
  } catch (const IoError& e) {
    report_error(err, "io", e.what());
    return kExitIo;
  } catch (const TrainingDiverged& e) {
    report_error(err, "diverged", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    report_error(err, "numeric", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    report_error(err, "config", e.what());
    return kExitConfig;
  } catch (const std::domain_error& e) {
    report_error(err, "config", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    report_error(err, "failure", e.what());
    return kExitFailure;
  }
}

}  // namespace softprune
