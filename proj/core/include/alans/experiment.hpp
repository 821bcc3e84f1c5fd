#pragma once

// Reproducible experiments: configuration, fold loading, training, report
// tables, single-instance traces and variant ablations.
//
// Config files are flat `key = value` lines; '#' starts a comment. Keys:
//
//   regime, strategy, n, seed, variant, baseline, noise, d,
//   lr, beta1, beta2, adam_epsilon, stage1_epochs, stage2_epochs, batch_size,
//   aux_weight_stage1, aux_weight_stage2,
//   ridge_unary, ridge_binary, ridge_ternary, ridge.<attribute>.<kind>,
//   tau_posterior, tau_decode, tau_candidate, tau_candidate.<attribute>,
//   data, train, val, test, checkpoint, out

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alans/checkpoint.hpp"
#include "alans/generator.hpp"
#include "alans/trainer.hpp"

namespace alans {

struct ExperimentConfig {
  Regime regime = Regime::Systematicity;
  DistractorStrategy strategy = DistractorStrategy::PerturbOne;
  std::size_t n = 2000;  ///< split size when folds are generated
  TrainConfig train;     ///< seed, variant, noise, d and reasoner live here
  ModelKind baseline = ModelKind::AlansInd;  ///< second arm of an ablation

  std::optional<std::filesystem::path> data_dir;  ///< holds train/val/test.jsonl
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> val_path;
  std::optional<std::filesystem::path> test_path;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path out = "out";

  /// Settings used by the experiments: stronger binary and ternary ridges and
  /// sharper operator and candidate temperatures than the library defaults.
  static ExperimentConfig defaults();

  /// Throws ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  /// Applies every line of a config file. Throws ConfigError or IoError.
  void load(const std::filesystem::path& path);
  /// Effective configuration as key = value lines.
  std::string dump() const;

  std::uint64_t seed() const { return train.seed; }
  ModelKind variant() const { return train.variant; }
  double noise() const { return train.noise.epsilon; }
  void set_noise(double eps);
  void validate() const;
};

struct Folds {
  std::vector<RpmInstance> train;
  std::vector<RpmInstance> val;
  std::vector<RpmInstance> test;
};

/// Fold path from the explicit setting or `data_dir/<phase>.jsonl`.
std::optional<std::filesystem::path> fold_path(const ExperimentConfig& cfg, Phase phase);

/// Loads folds from disk when paths are configured, otherwise generates them
/// in memory from (regime, strategy, n, seed).
Folds load_folds(const ExperimentConfig& cfg);

/// Noise seed of test-time perception.
std::uint64_t eval_seed(std::uint64_t seed);

struct ReportRow {
  std::string label;
  Regime regime = Regime::Systematicity;
  ModelKind variant = ModelKind::Alans;
  double noise = 0.0;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// Operator-kind argmax vs label, over instances governing the attribute.
  std::array<std::optional<double>, kNumAttributes> operator_accuracy;
  std::array<std::size_t, kNumAttributes> operator_count{};
  /// Argmax of perceived beliefs vs the true value over all 16 panels.
  std::array<double, kNumAttributes> perception_accuracy{};
  /// Generated panel equal to the answer on every governed attribute.
  double generation_accuracy = 0.0;
  std::size_t fallbacks = 0;
};

struct ReportTable {
  std::vector<ReportRow> rows;

  /// Aligned human-readable table.
  std::string to_text() const;
  /// One JSON object per row, newline-delimited.
  std::string to_records() const;
};

/// Perception argmax accuracy of `data` under `noise`, using the same belief
/// draws as `evaluate`.
std::array<double, kNumAttributes> perception_accuracy(const std::vector<RpmInstance>& data,
                                                       const perception::NoiseModel& noise,
                                                       std::uint64_t seed);

/// Evaluates a trained model on `data`, filling `eval` when given.
ReportRow report_row(const std::vector<RpmInstance>& data, const Model& model,
                     const ReasonerConfig& reasoner, const perception::NoiseModel& noise,
                     std::uint64_t seed, Evaluation* eval = nullptr);

/// Per-instance records followed by the summary record.
std::string instance_records(const Evaluation& eval, const ReportRow& row);

struct TrainedExperiment {
  TrainResult result;
  ReportRow test;
};

/// Trains on the train fold, selects by validation accuracy, and evaluates on
/// the test fold.
TrainedExperiment run_experiment(const ExperimentConfig& cfg, const Folds& folds);

struct AblationRow {
  Regime regime = Regime::Systematicity;
  ReportRow primary;
  ReportRow baseline;
  double delta() const { return primary.accuracy - baseline.accuracy; }
};

/// Trains `variant` and `baseline` on each regime and compares their test
/// accuracies.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<Regime>& regimes);
std::string ablation_text(const std::vector<AblationRow>& rows);
std::string ablation_records(const std::vector<AblationRow>& rows);

/// Human-readable reasoning trace of one instance.
std::string solve_trace(const RpmInstance& inst, const Model& model, const ReasonerConfig& reasoner,
                        const perception::NoiseModel& noise, std::uint64_t seed);

}  // namespace alans
