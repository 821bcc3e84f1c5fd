#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "alans/rpm.hpp"

namespace alans {

using Rng = std::mt19937_64;

struct SplitRegime {
  Regime regime = Regime::Systematicity;
  Phase phase = Phase::Train;
};

enum class DistractorStrategy : std::uint8_t { PerturbOne, Hierarchical };
std::string_view to_string(DistractorStrategy s);
DistractorStrategy strategy_from_string(std::string_view name);

/// Relation identities admissible for one attribute under a regime and phase.
/// Validation folds draw from the training pool.
std::vector<RelationInstance> relation_pool(SplitRegime split, Attribute attribute);

/// Samples one relation per governed attribute; the Number/Position pair is
/// driven by exactly one of its members.
RuleSet sample_ruleset(SplitRegime split, Rng& rng);

/// Builds a full instance under `rules`, rejection-sampling until the context
/// satisfies every rule and exactly one candidate completes the matrix.
/// Throws GenerationExhausted after `max_attempts` failed draws.
RpmInstance generate_instance(const RuleSet& rules, DistractorStrategy strategy, Rng& rng,
                              int max_attempts = 1000);

/// Deterministic per-instance seed.
std::uint64_t derive_seed(std::uint64_t seed, Regime regime, Phase phase, std::uint64_t index);

struct FoldSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// 6/2/2 tenths partition of `n`.
FoldSizes fold_sizes(std::size_t n);

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  Regime regime = Regime::Systematicity;
  DistractorStrategy strategy = DistractorStrategy::PerturbOne;
  std::size_t count = 0;
  FoldSizes folds;
  std::uint64_t seed = 0;
  int format_version = kFormatVersion;
  std::string val_pool = "train";
  /// File name and FNV-1a checksum of each fold.
  std::map<std::string, std::string> files;
  std::map<std::string, std::string> checksums;
  /// Governing relation identities ("attribute:identity") observed per fold;
  /// implied relations are left out.
  std::map<std::string, std::set<std::string>> relations;
};

/// Generates train/val/test files plus `manifest.json` under `out_dir`.
DatasetManifest generate_split(Regime regime, DistractorStrategy strategy, std::size_t n,
                               std::uint64_t seed, const std::filesystem::path& out_dir);

/// In-memory variant of one fold, used by tests and benchmarks.
std::vector<RpmInstance> generate_fold(Regime regime, Phase phase, DistractorStrategy strategy,
                                       std::size_t n, std::uint64_t seed);

/// Governing relation identities of one ruleset ("attribute:identity").
std::set<std::string> governing_relations(const RuleSet& rules);

}  // namespace alans
