#pragma once

// Training objective on the tape: answer cross-entropy plus weighted
// cross-entropies of the operator-kind posteriors against the rule labels.

#include <array>
#include <vector>

#include "alans/algebra.hpp"
#include "alans/perception.hpp"
#include "alans/reasoner.hpp"
#include "alans/rpm.hpp"
#include "alans/tape.hpp"

namespace alans {

struct LossWeights {
  /// Auxiliary operator-kind weight per attribute.
  std::array<double, kNumAttributes> aux{};
  /// Attributes whose encodings receive gradients.
  std::array<bool, kNumAttributes> trainable{};

  static LossWeights joint(double aux_weight);
  static LossWeights single(Attribute active, double aux_weight);
};

struct ForwardPass {
  ad::Tape tape;
  ad::Id loss = -1;
  /// Tape ids of each attribute's parameters, in parameters() order; empty
  /// for frozen attributes.
  std::array<std::vector<ad::Id>, kNumAttributes> params;

  double value = 0.0;
  double answer_ce = 0.0;
  std::array<double, kNumAttributes> aux_ce{};
  std::array<double, 8> probability{};
  std::array<bool, kNumAttributes> fallback{};
};

/// Gradients shaped like parameters(encoding) per attribute.
using Gradients = std::array<std::vector<Mat>, kNumAttributes>;

/// Builds the loss of one instance on a fresh tape.
ForwardPass forward_loss(const RpmInstance& inst, const perception::InstanceBeliefs& beliefs,
                         const Model& model, const ReasonerConfig& config,
                         const LossWeights& weights);

/// Reverse sweep; frozen attributes get empty gradient lists.
Gradients backward(ForwardPass& pass);

}  // namespace alans
