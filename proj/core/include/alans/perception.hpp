#pragma once

// Simulated perception: a controllable noise model over per-region object
// attribute distributions, and the belief inference that marginalizes them
// into panel attribute distributions.

#include <array>
#include <vector>

#include "alans/generator.hpp"
#include "alans/rpm.hpp"

namespace alans::perception {

/// Categorical distribution over attribute indices.
using Distribution = std::vector<double>;

/// Object attribute distributions predicted for one grid region.
struct RegionBelief {
  double objectiveness = 0.0;  ///< P(region holds an object)
  Distribution type;
  Distribution size;
  Distribution color;

  const Distribution& attribute(Attribute a) const;
};

using Regions = std::array<RegionBelief, kGridSlots>;

/// Panel belief state.
struct BeliefState {
  Distribution number;                   ///< over counts 0..9
  std::array<double, kGridSlots> position{};  ///< per-slot occupancy marginals
  Distribution type;
  Distribution size;
  Distribution color;

  /// Categorical for an encoded attribute (Number, Type, Size, Color).
  const Distribution& categorical(Attribute a) const;
};

struct NoiseModel {
  double epsilon = 0.0;            ///< mass moved off the true categorical value
  double objectiveness_epsilon = 0.0;  ///< occupancy corruption

  bool noiseless() const { return epsilon == 0.0 && objectiveness_epsilon == 0.0; }
};

/// Distribution with 1 - eps on `truth` and eps spread evenly elsewhere.
Distribution corrupted_categorical(int cardinality, int truth, double eps);

/// Region beliefs of a panel. Empty regions get random attribute
/// distributions, which only matter through their objectiveness weight.
Regions corrupt(const PanelSpec& panel, const NoiseModel& noise, Rng& rng);

/// Distribution of the object count by the O(N^2) Poisson-binomial recursion.
Distribution infer_number(const Regions& regions);

/// Slot occupancy marginals.
std::array<double, kGridSlots> infer_position(const Regions& regions);

/// Objectiveness-weighted geometric pooling of region distributions:
/// log q(v) = sum_j p_j log r_j(v) + const. Throws DegeneratePanel when no
/// region has positive objectiveness.
Distribution infer_attr(const Regions& regions, Attribute attribute);

BeliefState belief_state(const Regions& regions);

/// Noiseless point-mass belief of a panel.
BeliefState exact_belief(const PanelSpec& panel);

/// Belief states of the 8 context and 8 candidate panels.
struct InstanceBeliefs {
  std::array<BeliefState, 8> context;
  std::array<BeliefState, 8> candidates;
};

/// Perceives every panel of an instance with `noise`; with a noiseless model the
/// result equals the exact point-mass beliefs.
InstanceBeliefs perceive(const RpmInstance& inst, const NoiseModel& noise, Rng& rng);

/// Argmax index of a distribution (first maximum on ties).
int argmax(const Distribution& d);

}  // namespace alans::perception
