#pragma once

// Run configuration for the command-line tool: JSON text in, validated
// RunConfig out. Omitted fields take the defaults below.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swap/common.hpp"
#include "swap/compare.hpp"
#include "swap/ewr.hpp"
#include "swap/model.hpp"
#include "swap/schedule.hpp"

namespace swapkit::config {

enum class TaskKind { blobs, csv };
enum class ReportFormat { csv, json };

struct TaskSpec {
  TaskKind kind = TaskKind::blobs;
  std::uint64_t seed = 7;
  std::size_t samples = 2000;
  std::size_t dim = 32;
  std::size_t classes = 10;
  double spread = 0.3;
  std::string trainPath;  // csv only
  std::string testPath;   // csv only
  bool operator==(const TaskSpec&) const = default;
};

struct ModelSpec {
  std::vector<std::size_t> hidden{64};
  model::Activation activation = model::Activation::relu;
  std::size_t epochs = 50;
  double learningRate = 0.05;
  std::size_t batchSize = 32;
  std::uint64_t initSeed = 1;
  std::uint64_t trainSeed = 2;
  std::string weightsPath;  // when set, load instead of training
  bool operator==(const ModelSpec&) const = default;
};

struct ScheduleSpec {
  pruner::ScheduleKind kind = pruner::ScheduleKind::exponential;
  double k0 = 0.0;
  double kT = 0.95;
  std::size_t stages = 10;  // T
  bool operator==(const ScheduleSpec&) const = default;
};

struct RunConfig {
  TaskSpec task;
  ModelSpec model;
  double lambda = 0.01;
  double epsilon = 1.0;
  ewr::PlanSolver plan = ewr::PlanSolver::sinkhorn;
  double sinkhornTol = 1e-9;
  std::size_t maxIter = 10000;
  std::uint64_t solverSeed = 0;
  ewr::GradientForm gradientForm = ewr::GradientForm::exact;
  ScheduleSpec schedule;
  double noiseFraction = 0.25;
  double noiseLevel = 2.0;
  std::uint64_t noiseSeed = 11;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t fisherSamples = 100;
  bool pruneBiases = true;
  std::size_t innerSteps = 10;
  bool freezeReference = false;
  double confidence = 0.9;
  std::vector<double> epsilons{0.1, 1.0, 2.0, 10.0, std::numeric_limits<double>::infinity()};
  std::string out = "out";
  ReportFormat format = ReportFormat::csv;

  bool operator==(const RunConfig&) const = default;

  ewr::EwrConfig ewr_config() const {
    ewr::EwrConfig c;
    c.lambda = lambda;
    c.epsilon = epsilon;
    c.planSolver = plan;
    c.sinkhornTol = sinkhornTol;
    c.maxIter = maxIter;
    c.seed = solverSeed;
    c.gradientForm = gradientForm;
    return c;
  }
  ewr::EwrConfig lr_config() const {
    ewr::EwrConfig c = ewr_config();
    c.planSolver = ewr::PlanSolver::diagonal;
    c.epsilon = 0.0;
    return c;
  }
  model::NoiseSpec noise() const { return {noiseFraction, noiseLevel, noiseSeed}; }
  pruner::CompareOptions compare_options() const {
    pruner::CompareOptions o;
    o.innerSteps = innerSteps;
    o.freezeReference = freezeReference;
    o.confidence = confidence;
    return o;
  }
  pruner::SparsitySchedule make_schedule(std::size_t p) const {
    return schedule.kind == pruner::ScheduleKind::linear
               ? pruner::linear_schedule(schedule.k0, schedule.kT, schedule.stages, p)
               : pruner::exponential_schedule(schedule.k0, schedule.kT, schedule.stages, p);
  }
};

// --- names -----------------------------------------------------------------

inline std::string plan_name(ewr::PlanSolver s) {
  switch (s) {
    case ewr::PlanSolver::sinkhorn: return "sinkhorn";
    case ewr::PlanSolver::closed_form: return "closed-form";
    case ewr::PlanSolver::diagonal: return "diagonal";
    case ewr::PlanSolver::uniform: return "uniform";
  }
  return "sinkhorn";
}

inline ewr::PlanSolver parse_plan(const std::string& s) {
  if (s == "sinkhorn") return ewr::PlanSolver::sinkhorn;
  if (s == "closed-form") return ewr::PlanSolver::closed_form;
  if (s == "diagonal") return ewr::PlanSolver::diagonal;
  if (s == "uniform") return ewr::PlanSolver::uniform;
  throw ConfigError("plan: unknown solver '" + s + "' (expected sinkhorn, closed-form, diagonal or uniform)");
}

inline std::string schedule_name(pruner::ScheduleKind k) {
  return k == pruner::ScheduleKind::linear ? "linear" : "exp";
}

inline pruner::ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "exp" || s == "exponential") return pruner::ScheduleKind::exponential;
  if (s == "linear") return pruner::ScheduleKind::linear;
  throw ConfigError("schedule.kind: unknown schedule '" + s + "' (expected exp or linear)");
}

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("format: unknown report format '" + s + "' (expected csv or json)");
}

inline std::string format_name(ReportFormat f) { return f == ReportFormat::json ? "json" : "csv"; }

inline ewr::GradientForm parse_gradient_form(const std::string& s) {
  if (s == "exact") return ewr::GradientForm::exact;
  if (s == "printed") return ewr::GradientForm::printed;
  throw ConfigError("gradient_form: unknown value '" + s + "' (expected exact or printed)");
}

inline std::string gradient_form_name(ewr::GradientForm f) {
  return f == ewr::GradientForm::printed ? "printed" : "exact";
}

// "inf" or a number >= 0
inline double parse_epsilon_token(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError("epsilons: '" + s + "' is neither a number nor inf");
  return v;
}

// --- validation --------------------------------------------------------------

inline void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda: must be >= 0");
  need(c.epsilon >= 0.0 && std::isfinite(c.epsilon), "epsilon: must be >= 0");
  if (c.plan == ewr::PlanSolver::sinkhorn || c.plan == ewr::PlanSolver::closed_form)
    need(c.epsilon > 0.0, "epsilon: must be > 0 for plan " + plan_name(c.plan));
  need(c.sinkhornTol > 0.0, "sinkhorn_tol: must be > 0");
  need(c.maxIter >= 1, "max_iter: must be >= 1");
  need(c.schedule.k0 >= 0.0 && c.schedule.k0 <= 1.0, "schedule.k0: must lie in [0, 1]");
  need(c.schedule.kT >= 0.0 && c.schedule.kT <= 1.0, "schedule.kT: must lie in [0, 1]");
  need(c.schedule.k0 <= c.schedule.kT, "schedule.k0: must not exceed schedule.kT");
  need(c.schedule.stages >= 1, "schedule.T: must be >= 1");
  need(c.noiseFraction >= 0.0 && c.noiseFraction <= 1.0, "noise.fraction: must lie in [0, 1]");
  need(c.noiseLevel > 0.0, "noise.level: must be > 0");
  need(!c.seeds.empty(), "seeds: must be nonempty");
  need(c.fisherSamples >= 1, "fisher_samples: must be >= 1");
  need(c.innerSteps >= 1, "inner_steps: must be >= 1");
  need(c.confidence > 0.0 && c.confidence < 1.0, "confidence: must lie in (0, 1)");
  need(!c.epsilons.empty(), "epsilons: must be nonempty");
  for (double e : c.epsilons) need(e >= 0.0, "epsilons: every entry must be >= 0 or inf");
  need(!c.out.empty(), "out: must be nonempty");
  need(c.model.learningRate > 0.0, "model.lr: must be > 0");
  need(c.model.batchSize >= 1, "model.batch: must be >= 1");
  for (auto h : c.model.hidden) need(h >= 1, "model.hidden: widths must be >= 1");
  if (c.task.kind == TaskKind::blobs) {
    need(c.task.classes >= 2, "task.classes: must be >= 2");
    need(c.task.samples >= c.task.classes, "task.samples: must be >= task.classes");
    need(c.task.dim >= 1, "task.dim: must be >= 1");
    need(c.task.spread >= 0.0, "task.spread: must be >= 0");
  } else {
    need(std::filesystem::exists(c.task.trainPath), "task.train: file not found: " + c.task.trainPath);
    need(std::filesystem::exists(c.task.testPath), "task.test: file not found: " + c.task.testPath);
    need(c.task.classes >= 2, "task.classes: must be >= 2");
  }
  if (!c.model.weightsPath.empty())
    need(std::filesystem::exists(c.model.weightsPath), "model.weights: file not found: " + c.model.weightsPath);
}

// --- parsing -----------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError((where.empty() ? "" : where + ".") + k + ": unknown field");
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string name = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(name + ": expected a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError(name + ": expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(name + ": expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(name + ": expected a string");
    }
    dst = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

inline std::string read_string(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  std::string s = fallback;
  read(j, key, s, where);
  return s;
}

// Line and column (1-based) of a byte offset in text.
inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  RunConfig c;
  detail::check_keys(j, "",
                     {"task", "model", "lambda", "epsilon", "plan", "sinkhorn_tol", "max_iter", "solver_seed",
                      "gradient_form", "schedule", "noise", "seeds", "fisher_samples", "prune_biases", "inner_steps",
                      "freeze_reference", "confidence", "epsilons", "out", "format"});
  if (j.contains("task")) {
    const auto& t = j.at("task");
    detail::check_keys(t, "task", {"kind", "seed", "samples", "dim", "classes", "spread", "train", "test"});
    const std::string kind = detail::read_string(t, "kind", "blobs", "task");
    if (kind == "blobs") c.task.kind = TaskKind::blobs;
    else if (kind == "csv") c.task.kind = TaskKind::csv;
    else throw ConfigError("task.kind: unknown task '" + kind + "' (expected blobs or csv)");
    read(t, "seed", c.task.seed, "task");
    read(t, "samples", c.task.samples, "task");
    read(t, "dim", c.task.dim, "task");
    read(t, "classes", c.task.classes, "task");
    read(t, "spread", c.task.spread, "task");
    read(t, "train", c.task.trainPath, "task");
    read(t, "test", c.task.testPath, "task");
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m, "model", {"hidden", "activation", "epochs", "lr", "batch", "init_seed", "train_seed", "weights"});
    if (m.contains("hidden")) {
      if (!m.at("hidden").is_array()) throw ConfigError("model.hidden: expected an array of widths");
      c.model.hidden.clear();
      for (const auto& h : m.at("hidden")) {
        if (!h.is_number_unsigned()) throw ConfigError("model.hidden: widths must be positive integers");
        c.model.hidden.push_back(h.get<std::size_t>());
      }
    }
    c.model.activation = model::parse_activation(detail::read_string(m, "activation", "relu", "model"));
    read(m, "epochs", c.model.epochs, "model");
    read(m, "lr", c.model.learningRate, "model");
    read(m, "batch", c.model.batchSize, "model");
    read(m, "init_seed", c.model.initSeed, "model");
    read(m, "train_seed", c.model.trainSeed, "model");
    read(m, "weights", c.model.weightsPath, "model");
  }
  read(j, "lambda", c.lambda, "");
  read(j, "epsilon", c.epsilon, "");
  if (j.contains("plan")) c.plan = parse_plan(detail::read_string(j, "plan", "", ""));
  read(j, "sinkhorn_tol", c.sinkhornTol, "");
  read(j, "max_iter", c.maxIter, "");
  read(j, "solver_seed", c.solverSeed, "");
  if (j.contains("gradient_form")) c.gradientForm = parse_gradient_form(detail::read_string(j, "gradient_form", "", ""));
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::check_keys(s, "schedule", {"kind", "k0", "kT", "T"});
    if (s.contains("kind")) c.schedule.kind = parse_schedule_kind(detail::read_string(s, "kind", "", "schedule"));
    read(s, "k0", c.schedule.k0, "schedule");
    read(s, "kT", c.schedule.kT, "schedule");
    read(s, "T", c.schedule.stages, "schedule");
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    detail::check_keys(n, "noise", {"fraction", "level", "cal_seed"});
    read(n, "fraction", c.noiseFraction, "noise");
    read(n, "level", c.noiseLevel, "noise");
    read(n, "cal_seed", c.noiseSeed, "noise");
  }
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array()) throw ConfigError("seeds: expected an array of non-negative integers");
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds: entries must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  read(j, "fisher_samples", c.fisherSamples, "");
  read(j, "prune_biases", c.pruneBiases, "");
  read(j, "inner_steps", c.innerSteps, "");
  read(j, "freeze_reference", c.freezeReference, "");
  read(j, "confidence", c.confidence, "");
  if (j.contains("epsilons")) {
    if (!j.at("epsilons").is_array()) throw ConfigError("epsilons: expected an array");
    c.epsilons.clear();
    for (const auto& e : j.at("epsilons")) {
      if (e.is_number()) c.epsilons.push_back(e.get<double>());
      else if (e.is_string()) c.epsilons.push_back(parse_epsilon_token(e.get<std::string>()));
      else throw ConfigError("epsilons: entries must be numbers or \"inf\"");
    }
  }
  read(j, "out", c.out, "");
  if (j.contains("format")) c.format = parse_format(detail::read_string(j, "format", "", ""));
  validate(c);
  return c;
}

// Parses JSON text; syntax errors report line and column.
inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("config syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + e.what());
  }
  return config_from_json(j);
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  auto& t = j["task"];
  t["kind"] = c.task.kind == TaskKind::csv ? "csv" : "blobs";
  t["seed"] = c.task.seed;
  t["samples"] = c.task.samples;
  t["dim"] = c.task.dim;
  t["classes"] = c.task.classes;
  t["spread"] = c.task.spread;
  t["train"] = c.task.trainPath;
  t["test"] = c.task.testPath;
  auto& m = j["model"];
  m["hidden"] = c.model.hidden;
  m["activation"] = model::activation_name(c.model.activation);
  m["epochs"] = c.model.epochs;
  m["lr"] = c.model.learningRate;
  m["batch"] = c.model.batchSize;
  m["init_seed"] = c.model.initSeed;
  m["train_seed"] = c.model.trainSeed;
  m["weights"] = c.model.weightsPath;
  j["lambda"] = c.lambda;
  j["epsilon"] = c.epsilon;
  j["plan"] = plan_name(c.plan);
  j["sinkhorn_tol"] = c.sinkhornTol;
  j["max_iter"] = c.maxIter;
  j["solver_seed"] = c.solverSeed;
  j["gradient_form"] = gradient_form_name(c.gradientForm);
  j["schedule"] = {{"kind", schedule_name(c.schedule.kind)},
                   {"k0", c.schedule.k0},
                   {"kT", c.schedule.kT},
                   {"T", c.schedule.stages}};
  j["noise"] = {{"fraction", c.noiseFraction}, {"level", c.noiseLevel}, {"cal_seed", c.noiseSeed}};
  j["seeds"] = c.seeds;
  j["fisher_samples"] = c.fisherSamples;
  j["prune_biases"] = c.pruneBiases;
  j["inner_steps"] = c.innerSteps;
  j["freeze_reference"] = c.freezeReference;
  j["confidence"] = c.confidence;
  auto& eps = j["epsilons"] = nlohmann::ordered_json::array();
  for (double e : c.epsilons) {
    if (std::isinf(e)) eps.push_back("inf");
    else eps.push_back(e);
  }
  j["out"] = c.out;
  j["format"] = format_name(c.format);
  return j;
}

inline std::string serialize_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

}  // namespace swapkit::config
