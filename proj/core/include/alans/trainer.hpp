#pragma once

// End-to-end training of the value encodings.
//
// Stage 1 cycles over Number, Type, Size, Color one epoch at a time, updating
// only the active attribute's encoding with only its auxiliary term switched
// on. Stage 2 fine-tunes every encoding jointly. The model with the best
// validation answer accuracy is kept.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alans/algebra.hpp"
#include "alans/perception.hpp"
#include "alans/pipeline.hpp"
#include "alans/reasoner.hpp"
#include "alans/rpm.hpp"

namespace alans {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int stage1_epochs = 8;
  int stage2_epochs = 12;
  int batch_size = 32;
  double aux_weight_stage1 = 1.0;
  double aux_weight_stage2 = 0.1;
  std::uint64_t seed = 1;
  int d = 8;
  ModelKind variant = ModelKind::Alans;
  perception::NoiseModel noise;
  ReasonerConfig reasoner;
  /// Checkpoint written whenever validation accuracy improves (optional).
  std::optional<std::filesystem::path> checkpoint_path;

  /// Noise actually applied: ALANS-GT always perceives exactly.
  perception::NoiseModel effective_noise() const;
  void validate() const;
  int epochs() const { return stage1_epochs + stage2_epochs; }
};

/// Per-parameter first/second moment estimates.
struct AdamState {
  std::array<std::vector<Mat>, kNumAttributes> m;
  std::array<std::vector<Mat>, kNumAttributes> v;
  std::array<std::int64_t, kNumAttributes> steps{};

  static AdamState zeros_like(const Model& model);
};

void adam_step(Model& model, AdamState& state, const Gradients& grads, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  int stage = 1;
  std::optional<Attribute> active;  ///< stage 1 only
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  std::array<std::optional<double>, kNumAttributes> val_operator_accuracy;
  double min_separation = 0.0;  ///< smallest encoding separation across attributes
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::string checkpoint;

  /// One JSON object per epoch, newline-delimited.
  std::string to_records() const;
};

struct TrainResult {
  Model model;  ///< best-validation model
  AdamState optimizer;
  TrainReport report;
};

/// Deterministic beliefs of an instance for a given pass.
perception::InstanceBeliefs beliefs_for(const RpmInstance& inst, const perception::NoiseModel& noise,
                                        std::uint64_t seed, std::uint64_t index,
                                        std::uint64_t epoch);

struct InstanceOutcome {
  std::string id;
  int answer_index = 0;
  int predicted = 0;
  double answer_probability = 0.0;
  double loss = 0.0;  ///< answer CE plus aux_weight-weighted operator CEs
  std::array<std::optional<RelationKind>, kNumAttributes> label;
  std::array<RelationKind, kNumAttributes> predicted_kind{};
  std::array<bool, kNumAttributes> fallback{};
  GeneratedPanel generated;
  /// Generated value vs the answer panel, for every governed attribute.
  std::array<std::optional<bool>, kNumAttributes> generated_match;
  bool correct() const { return predicted == answer_index; }
  bool generated_correct() const;
};

struct Evaluation {
  std::vector<InstanceOutcome> outcomes;
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::array<std::optional<double>, kNumAttributes> operator_accuracy;
};

Evaluation evaluate(const std::vector<RpmInstance>& data, const Model& model,
                    const ReasonerConfig& reasoner, const perception::NoiseModel& noise,
                    std::uint64_t seed, double aux_weight = 0.0);

/// Throws DivergenceDetected on a non-finite loss, after writing the best
/// checkpoint so far when a checkpoint path is configured.
TrainResult train(const std::vector<RpmInstance>& train_set, const std::vector<RpmInstance>& val_set,
                  const TrainConfig& config);

struct GradCheckConfig {
  int d = 3;
  int seeds = 20;
  double h = 1e-5;
  /// Denominator floor of the relative error, for entries whose gradient is ~0.
  double floor = 1e-4;
  ModelKind variant = ModelKind::Alans;
  double noise = 0.1;
  ReasonerConfig reasoner;
  double aux_weight = 0.5;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
  int seeds = 0;
  double h = 0.0;
};

/// Reverse-mode gradients against central finite differences on random
/// instances and random encodings.
GradCheckReport grad_check(const GradCheckConfig& config, std::uint64_t seed);

}  // namespace alans
