// alans: generate RPM splits, train and evaluate the reasoner, trace single
// instances, and compare variants.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alans/checkpoint.hpp"
#include "alans/dataset_io.hpp"
#include "alans/error.hpp"
#include "alans/experiment.hpp"
#include "alans/generator.hpp"
#include "alans/trainer.hpp"

namespace fs = std::filesystem;
using namespace alans;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

/// Flags shared by every subcommand. Each one maps onto a config key.
struct Flags {
  std::optional<std::string> config;
  std::map<std::string, std::string> values;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "Flat key = value config file")->check(CLI::ExistingFile);
    add(cmd, "seed", "--seed", "Random seed (u64)");
    add(cmd, "regime", "--regime", "systematicity | productivity | localism");
    add(cmd, "variant", "--variant", "alans | alans-ind | alans-gt");
    add(cmd, "noise", "--noise", "Perception noise epsilon");
    add(cmd, "out", "--out", "Output directory");
    add(cmd, "n", "--n", "Split size (train/val/test = 6/2/2 tenths)");
    add(cmd, "strategy", "--strategy", "perturb_one | hierarchical");
    add(cmd, "data", "--data", "Directory holding train/val/test.jsonl");
    add(cmd, "test", "--test", "Test fold file");
    add(cmd, "checkpoint", "--checkpoint", "Checkpoint file");
    add(cmd, "d", "--d", "Encoding dimension");
    cmd->add_option("--set", overrides, "Extra config entries as key=value");
  }

  void add(CLI::App* cmd, const std::string& key, const std::string& flag, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; },
                                          help);
  }

  bool given(const std::string& key) const { return values.count(key) > 0; }

  /// Defaults, then the config file, then flags.
  ExperimentConfig resolve() const {
    ExperimentConfig cfg = ExperimentConfig::defaults();
    if (config) cfg.load(*config);
    for (const auto& [k, v] : values) cfg.set(k, v);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw IoError(path.string() + ": write failed");
}

fs::path checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.checkpoint ? *cfg.checkpoint : cfg.out / "checkpoint.txt";
}

int cmd_gen(const Flags& flags) {
  ExperimentConfig cfg = flags.resolve();
  const fs::path dir = cfg.data_dir ? *cfg.data_dir : cfg.out;
  const DatasetManifest m = generate_split(cfg.regime, cfg.strategy, cfg.n, cfg.seed(), dir);
  std::printf("%s: %s, %s, seed %llu\n", dir.string().c_str(),
              std::string(to_string(m.regime)).c_str(), std::string(to_string(m.strategy)).c_str(),
              static_cast<unsigned long long>(m.seed));
  for (const auto& [name, file] : m.files) {
    const std::size_t count = name == "train" ? m.folds.train : name == "val" ? m.folds.val : m.folds.test;
    std::printf("  %-6s %6zu  %-12s %s  %zu relations\n", name.c_str(), count, file.c_str(),
                m.checksums.at(name).c_str(), m.relations.at(name).size());
  }
  return 0;
}

int cmd_train(const Flags& flags) {
  ExperimentConfig cfg = flags.resolve();
  fs::create_directories(cfg.out);
  const Folds folds = load_folds(cfg);
  const fs::path ckpt = checkpoint_path(cfg);
  cfg.train.checkpoint_path = ckpt;
  write_file(cfg.out / "config.txt", cfg.dump());

  TrainResult res = train(folds.train, folds.val, cfg.train);
  save_checkpoint(ckpt, {res.model, cfg.train.reasoner, res.optimizer});
  write_file(cfg.out / "train_report.ndjson", res.report.to_records());

  for (const auto& e : res.report.epochs) {
    std::printf("epoch %2d  stage %d %-8s train loss %.4f acc %.3f  val loss %.4f acc %.3f%s\n",
                e.epoch, e.stage, e.active ? std::string(to_string(*e.active)).c_str() : "",
                e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy,
                e.epoch == res.report.best_epoch ? "  *" : "");
  }
  std::printf("best epoch %d, val accuracy %.4f, checkpoint %s\n", res.report.best_epoch,
              res.report.best_val_accuracy, ckpt.string().c_str());
  return 0;
}

int cmd_eval(const Flags& flags) {
  ExperimentConfig cfg = flags.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint_path(cfg));
  std::vector<RpmInstance> test;
  if (const auto p = fold_path(cfg, Phase::Test)) {
    test = load_dataset(*p);
  } else {
    test = load_folds(cfg).test;
  }
  TrainConfig tc = cfg.train;
  tc.variant = ck.model.kind;
  Evaluation ev;
  ReportRow row = report_row(test, ck.model, ck.reasoner, tc.effective_noise(), eval_seed(tc.seed), &ev);
  ReportTable table{{row}};
  write_file(cfg.out / "eval_records.ndjson", instance_records(ev, row));
  write_file(cfg.out / "eval_table.txt", table.to_text());
  std::cout << table.to_text();
  return 0;
}

int cmd_solve(const Flags& flags, const std::optional<std::string>& id, std::size_t index) {
  ExperimentConfig cfg = flags.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint_path(cfg));
  std::vector<RpmInstance> data;
  if (const auto p = fold_path(cfg, Phase::Test)) {
    data = load_dataset(*p);
  } else {
    data = load_folds(cfg).test;
  }
  const RpmInstance* inst = nullptr;
  if (id) {
    for (const auto& x : data)
      if (x.id == *id) inst = &x;
    if (!inst) throw Error("no instance with id '" + *id + "'");
  } else {
    if (index >= data.size()) throw Error("instance index out of range");
    inst = &data[index];
  }
  TrainConfig tc = cfg.train;
  tc.variant = ck.model.kind;
  std::cout << solve_trace(*inst, ck.model, ck.reasoner, tc.effective_noise(), eval_seed(tc.seed));
  return 0;
}

int cmd_ablate(const Flags& flags) {
  ExperimentConfig cfg = flags.resolve();
  std::vector<Regime> regimes;
  if (flags.given("regime")) {
    regimes = {cfg.regime};
  } else {
    regimes = {Regime::Systematicity, Regime::Productivity, Regime::Localism};
  }
  const auto rows = run_ablation(cfg, regimes);
  write_file(cfg.out / "ablation.ndjson", ablation_records(rows));
  write_file(cfg.out / "ablation.txt", ablation_text(rows));
  std::cout << ablation_text(rows);
  return 0;
}

int cmd_gradcheck(const Flags& flags, GradCheckConfig gc) {
  ExperimentConfig cfg = flags.resolve();
  gc.variant = cfg.variant();
  gc.noise = cfg.noise();
  if (flags.given("d")) gc.d = cfg.train.d;
  const GradCheckReport r = grad_check(gc, cfg.seed());
  std::printf("gradcheck %s d=%d seeds=%d h=%g entries=%zu\n",
              std::string(to_string(gc.variant)).c_str(), gc.d, r.seeds, r.h, r.entries);
  std::printf("max relative error %.3e\nmax absolute error %.3e\n", r.max_relative_error,
              r.max_absolute_error);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Algebraic reasoning over Raven's Progressive Matrices"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Flags flags;
  auto* gen = app.add_subcommand("gen", "Generate train/val/test splits");
  auto* train = app.add_subcommand("train", "Train encodings and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test fold");
  auto* solve = app.add_subcommand("solve", "Trace the reasoning on one instance");
  auto* ablate = app.add_subcommand("ablate", "Compare two variants per regime");
  auto* gradcheck = app.add_subcommand("gradcheck", "Reverse-mode vs finite-difference gradients");
  for (auto* cmd : {gen, train, eval, solve, ablate, gradcheck}) flags.attach(cmd);

  std::optional<std::string> solve_id;
  std::size_t solve_index = 0;
  solve->add_option("--id", solve_id, "Instance id");
  solve->add_option("--index", solve_index, "Instance index in the test fold");

  GradCheckConfig gc;
  gradcheck->add_option("--seeds", gc.seeds, "Number of random instances")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gc.h, "Central-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--floor", gc.floor, "Relative-error denominator floor");
  gradcheck->add_option("--aux-weight", gc.aux_weight, "Auxiliary loss weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_gen(flags);
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags);
    if (*solve) return cmd_solve(flags, solve_id, solve_index);
    if (*ablate) return cmd_ablate(flags);
    if (*gradcheck) return cmd_gradcheck(flags, gc);
  } catch (const ConfigError& e) {
    std::cerr << "alans: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "alans: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
