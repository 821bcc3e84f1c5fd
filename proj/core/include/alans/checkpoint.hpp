#pragma once

// Text checkpoints.
//
//   alans-checkpoint 1
//   variant <alans|alans-ind|alans-gt>
//   d <int>
//   reasoner tau_posterior <x> tau_decode <x>
//   tau_candidate <5 values, attribute order>
//   ridge <15 values, attribute-major, kinds unary binary ternary>
//   encoding <attribute> <peano|independent> <n matrices>
//   matrix <rows> <cols> <values, column-major>     (n lines)
//   adam <attribute> <steps>
//   m <rows> <cols> <values>                         (n lines)
//   v <rows> <cols> <values>                         (n lines)
//   end
//
// Encodings and optimizer states appear in attribute order Number, Type,
// Size, Color. Values are written with 17 significant digits, so a round trip
// is exact.

#include <filesystem>

#include "alans/algebra.hpp"
#include "alans/reasoner.hpp"
#include "alans/trainer.hpp"

namespace alans {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  ReasonerConfig reasoner;
  AdamState optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws VersionMismatch, ParseError or IoError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace alans
