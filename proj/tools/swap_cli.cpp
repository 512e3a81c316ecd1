// swap_cli: dataset generation, training, pruning, LR-vs-EWR comparison,
// epsilon sweeps and the hull witness demo.
//
// Settings come from --config (JSON), then command-line flags override them.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "swap/compare.hpp"
#include "swap/config.hpp"
#include "swap/io.hpp"
#include "swap/model.hpp"
#include "swap/ot.hpp"
#include "swap/pruner.hpp"

namespace fs = std::filesystem;
using namespace swapkit;

namespace {

struct Flags {
  std::string configPath;
  std::optional<double> epsilon, lambda, sparsity, noiseFrac, noiseLevel;
  std::optional<std::size_t> stages, innerSteps;
  std::optional<std::string> schedule, plan, seeds, out, format;
  bool freezeReference = false;
  // sweep-epsilon
  std::optional<std::string> epsilons;
  // witness
  std::size_t witnessCount = 100, witnessDim = 3, witnessPoints = 5;
  double witnessTol = 1e-8;
};

// "0,1,5" or "0..19" (inclusive) or a mix: "0..4,10".
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || s[0] == '-') throw ConfigError("--seeds: bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(num(item));
    } else {
      const auto a = num(item.substr(0, dots)), b = num(item.substr(dots + 2));
      if (b < a) throw ConfigError("--seeds: empty range '" + item + "'");
      for (auto s = a; s <= b; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

config::RunConfig resolve_config(const Flags& f) {
  config::RunConfig c = f.configPath.empty() ? config::RunConfig{} : config::parse_config_file(f.configPath);
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.lambda) c.lambda = *f.lambda;
  if (f.sparsity) c.schedule.kT = *f.sparsity;
  if (f.stages) c.schedule.stages = *f.stages;
  if (f.schedule) c.schedule.kind = config::parse_schedule_kind(*f.schedule);
  if (f.plan) c.plan = config::parse_plan(*f.plan);
  if (f.noiseFrac) c.noiseFraction = *f.noiseFrac;
  if (f.noiseLevel) c.noiseLevel = *f.noiseLevel;
  if (f.seeds) c.seeds = parse_seed_list(*f.seeds);
  if (f.out) c.out = *f.out;
  if (f.format) c.format = config::parse_format(*f.format);
  if (f.freezeReference) c.freezeReference = true;
  if (f.innerSteps) c.innerSteps = *f.innerSteps;
  if (f.epsilons) {
    c.epsilons.clear();
    std::stringstream ss(*f.epsilons);
    std::string tok;
    while (std::getline(ss, tok, ',')) c.epsilons.push_back(config::parse_epsilon_token(tok));
  }
  config::validate(c);
  return c;
}

model::Dataset load_dataset(const config::RunConfig& c) {
  if (c.task.kind == config::TaskKind::blobs)
    return model::synth_dataset(c.task.seed, c.task.samples, c.task.dim, c.task.classes, c.task.spread);
  model::Dataset ds;
  ds.train = model::read_csv_split(c.task.trainPath);
  ds.test = model::read_csv_split(c.task.testPath);
  ds.classes = c.task.classes;
  if (ds.train.features.cols() != ds.test.features.cols())
    throw FormatError("train and test CSV files have different feature counts");
  for (const auto* s : {&ds.train, &ds.test})
    for (auto l : s->labels)
      if (l >= ds.classes) throw FormatError("label " + std::to_string(l) + " exceeds task.classes");
  return ds;
}

std::vector<std::size_t> layer_dims(const config::RunConfig& c, const model::Dataset& ds) {
  std::vector<std::size_t> dims{ds.dim()};
  dims.insert(dims.end(), c.model.hidden.begin(), c.model.hidden.end());
  dims.push_back(ds.classes);
  return dims;
}

model::TinyMlp trained_model(const config::RunConfig& c, const model::Dataset& ds,
                             std::vector<double>* history = nullptr) {
  if (!c.model.weightsPath.empty()) {
    auto mlp = io::read_weights(c.model.weightsPath);
    if (mlp.dims() != layer_dims(c, ds)) throw ConfigError("model.weights: layer dims do not match the task");
    return mlp;
  }
  auto mlp = model::TinyMlp::random(layer_dims(c, ds), c.model.activation, c.model.initSeed);
  return model::train(mlp, ds, c.model.epochs, c.model.learningRate, c.model.trainSeed, c.model.batchSize, history);
}

fs::path prepare_out(const config::RunConfig& c) {
  fs::path out(c.out);
  fs::create_directories(out);
  io::write_text(out / "config.json", config::serialize_config(c));
  return out;
}

// --- commands ----------------------------------------------------------------

int cmd_gen_data(const config::RunConfig& c) {
  if (c.task.kind != config::TaskKind::blobs) throw ConfigError("gen-data: task.kind must be blobs");
  const auto out = prepare_out(c);
  const auto ds = load_dataset(c);
  model::write_csv_split((out / "train.csv").string(), ds.train);
  model::write_csv_split((out / "test.csv").string(), ds.test);
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test rows to " << out.string()
            << "\n";
  return 0;
}

int cmd_train(const config::RunConfig& c) {
  const auto out = prepare_out(c);
  const auto ds = load_dataset(c);
  std::vector<double> history;
  const auto mlp = trained_model(c, ds, &history);
  io::write_weights(out / "weights.json", mlp);
  std::string csv = "epoch,train_loss\r\n";
  for (std::size_t e = 0; e < history.size(); ++e) csv += std::to_string(e + 1) + ',' + io::fmt(history[e]) + "\r\n";
  io::write_text(out / "train.csv", csv);
  const auto ev = model::evaluate(mlp, ds.test);
  std::cout << "parameters " << mlp.parameter_count() << ", test loss " << io::fmt(ev.loss) << ", accuracy "
            << io::fmt(ev.accuracy) << "\n";
  return 0;
}

int cmd_prune(const config::RunConfig& c) {
  const auto out = prepare_out(c);
  const auto ds = load_dataset(c);
  pruner::CompareTask task{trained_model(c, ds), ds, c.fisherSamples, c.pruneBiases};
  const auto schedule = c.make_schedule(task.prunable_count());
  pruner::PruneOptions po;
  po.innerSteps = c.innerSteps;
  po.freezeReference = c.freezeReference;
  if (!c.pruneBiases) po.prunableMask = task.prunable_mask();
  const std::uint64_t seed = c.seeds.front();
  const auto result = pruner::swap_prune(pruner::make_gradient_source(task, seed, c.noise()), task.trained.weights(),
                                         schedule, c.ewr_config(), po, pruner::make_test_evaluator(task));
  std::string csv = "stage,nonzeros,sparsity,test_loss,accuracy,plan_iterations,plan_residual\r\n";
  for (const auto& r : result.perStage)
    csv += std::to_string(r.stage) + ',' + std::to_string(r.nonzeroBudget) + ',' + io::fmt(r.sparsity) + ',' +
           io::fmt(r.metrics.testLoss) + ',' + io::fmt(r.metrics.accuracy) + ',' + std::to_string(r.planIterations) +
           ',' + io::fmt(r.planResidual) + "\r\n";
  io::write_text(out / "prune.csv", csv);
  model::TinyMlp pruned = task.trained;
  pruned.set_weights(result.finalWeights);
  io::write_weights(out / "pruned_weights.json", pruned);
  std::cout << csv;
  return 0;
}

int finish_with_failures(const fs::path& out, const std::vector<pruner::SeedFailure>& failures) {
  if (failures.empty()) {
    std::error_code ec;
    fs::remove(out / "errors.csv", ec);
    return 0;
  }
  io::write_text(out / "errors.csv", io::failures_csv(failures));
  for (const auto& f : failures) std::cerr << "seed " << f.seed << " failed: " << f.message << "\n";
  return 1;
}

int cmd_compare(const config::RunConfig& c) {
  const auto out = prepare_out(c);
  const auto ds = load_dataset(c);
  pruner::CompareTask task{trained_model(c, ds), ds, c.fisherSamples, c.pruneBiases};
  const auto schedule = c.make_schedule(task.prunable_count());
  auto opt = c.compare_options();
  opt.threads = worker_count();
  const auto rep = pruner::compare_lr_ewr(task, schedule, c.lr_config(), c.ewr_config(), c.seeds, c.noise(), opt);
  const std::string csv = io::compare_csv(rep);
  const std::string json = io::compare_json(rep).dump(2) + "\n";
  io::write_text(out / "compare.csv", csv);
  io::write_text(out / "compare.json", json);
  io::write_text(out / "compare_rows.csv", io::compare_rows_csv(rep));
  std::cout << (c.format == config::ReportFormat::json ? json : csv);
  return finish_with_failures(out, rep.failures);
}

int cmd_sweep(const config::RunConfig& c) {
  const auto out = prepare_out(c);
  const auto ds = load_dataset(c);
  pruner::CompareTask task{trained_model(c, ds), ds, c.fisherSamples, c.pruneBiases};
  const auto schedule = c.make_schedule(task.prunable_count());
  auto opt = c.compare_options();
  opt.threads = worker_count();
  const auto rep =
      pruner::sweep_epsilon(task, schedule, c.lr_config(), c.ewr_config(), c.seeds, c.noise(), c.epsilons, opt);
  const std::string csv = io::sweep_csv(rep);
  const std::string json = io::sweep_json(rep).dump(2) + "\n";
  io::write_text(out / "sweep.csv", csv);
  io::write_text(out / "sweep.json", json);
  std::cout << (c.format == config::ReportFormat::json ? json : csv);
  return finish_with_failures(out, rep.failures);
}

// Random instances of the hull witness: x, m points in R^d, random weights.
int cmd_witness(const config::RunConfig& c, const Flags& f) {
  const auto out = prepare_out(c);
  if (f.witnessDim == 0 || f.witnessPoints == 0) throw ConfigError("witness: --dim and --points must be >= 1");
  std::mt19937_64 rng(c.seeds.front());
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::string csv = "instance,dim,points,target,residual\r\n";
  std::size_t bad = 0;
  double worst = 0.0;
  const auto d = static_cast<Eigen::Index>(f.witnessDim), m = static_cast<Eigen::Index>(f.witnessPoints);
  for (std::size_t i = 0; i < f.witnessCount; ++i) {
    Vector x(d);
    Matrix Y(d, m);
    for (Eigen::Index r = 0; r < d; ++r) x(r) = nd(rng);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index j = 0; j < m; ++j) Y(r, j) = nd(rng);
    Vector w(m);
    for (Eigen::Index j = 0; j < m; ++j) w(j) = ud(rng) + 1e-3;
    w /= w.sum();
    const auto res = ot::hull_equality_witness(x, Y, ot::ConvexWeights{w}, f.witnessTol);
    worst = std::max(worst, res.residual);
    if (res.residual > f.witnessTol) ++bad;
    csv += std::to_string(i) + ',' + std::to_string(d) + ',' + std::to_string(m) + ',' + io::fmt(res.target) + ',' +
           io::fmt(res.residual) + "\r\n";
  }
  io::write_text(out / "witness.csv", csv);
  std::cout << f.witnessCount << " instances, worst residual " << worst << ", above tolerance: " << bad << "\n";
  return bad == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse entropic Wasserstein regression pruning toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.configPath, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--epsilon", f.epsilon, "entropic multiplier");
    sub->add_option("--lambda", f.lambda, "ridge multiplier");
    sub->add_option("--sparsity", f.sparsity, "target sparsity fraction");
    sub->add_option("--stages", f.stages, "number of pruning stages T");
    sub->add_option("--schedule", f.schedule, "exp or linear")->check(CLI::IsMember({"exp", "linear"}));
    sub->add_option("--plan", f.plan, "plan solver")
        ->check(CLI::IsMember({"sinkhorn", "closed-form", "diagonal", "uniform"}));
    sub->add_option("--noise-frac", f.noiseFrac, "share of noisy gradient rows");
    sub->add_option("--noise-level", f.noiseLevel, "noise multiplier m");
    sub->add_option("--seeds", f.seeds, "seed list, e.g. 0..9 or 1,4,7");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--format", f.format, "stdout report format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--freeze-reference", f.freezeReference, "keep the original reference weights");
    sub->add_option("--inner-steps", f.innerSteps, "gradient steps per stage");
  };

  auto* gen = app.add_subcommand("gen-data", "write the synthetic blob task as CSV");
  auto* train = app.add_subcommand("train", "train the classifier and write its weights");
  auto* prune = app.add_subcommand("prune", "run one pruning pipeline");
  auto* compare = app.add_subcommand("compare", "LR vs EWR over seeds");
  auto* sweep = app.add_subcommand("sweep-epsilon", "EWR loss across epsilon values");
  auto* witness = app.add_subcommand("witness", "convex-hull witness on random instances");
  for (auto* s : {gen, train, prune, compare, sweep, witness}) add_common(s);
  sweep->add_option("--epsilons", f.epsilons, "comma list of epsilons, 'inf' for the uniform plan");
  witness->add_option("--count", f.witnessCount, "number of instances");
  witness->add_option("--dim", f.witnessDim, "point dimension");
  witness->add_option("--points", f.witnessPoints, "points per instance");
  witness->add_option("--tol", f.witnessTol, "residual tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(f);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (prune->parsed()) return cmd_prune(cfg);
    if (compare->parsed()) return cmd_compare(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (witness->parsed()) return cmd_witness(cfg, f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
