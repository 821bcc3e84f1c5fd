#pragma once

// Algebraic abstract reasoning: per attribute, induce one operator of each
// kind from the first two context rows by ridge regression, weigh the kinds by
// their fit, execute each operator on the last row and score the candidates.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alans/algebra.hpp"
#include "alans/perception.hpp"
#include "alans/rpm.hpp"

namespace alans {

/// Ridge strengths and temperatures of the reasoner.
struct ReasonerConfig {
  /// ridge[attribute][kind]; Position ignores the Binary entry.
  std::array<std::array<double, 3>, kNumAttributes> ridge;
  double tau_posterior = 1.0;
  double tau_decode = 1.0;
  /// Candidate scoring temperature per attribute.
  std::array<double, kNumAttributes> tau_candidate;

  ReasonerConfig();
  void set_ridge(RelationKind kind, double lambda);  // every attribute
};

struct InducedOperator {
  RelationKind kind = RelationKind::Unary;
  Mat T;
  /// Data-fit error at T, zero exactly when the relation is realized.
  double residual = 0.0;
  /// Minimized objective: residual plus ridge * ||T||_F^2. Scores the kinds.
  double objective = 0.0;
  double ridge = 0.0;
};

/// Closed-form solve of an SPD-or-general square system through column-pivoted
/// QR; throws SolveFailure when a pivot falls below 1e-10 relative to the
/// largest one.
Mat solve_checked(const Mat& K, const Mat& B);

/// Unary induction over the adjacent pairs (1,2), (2,3), (4,5), (5,6) of the
/// six representations of rows 1 and 2.
InducedOperator induce_unary(std::span<const Mat> reps, double lambda);

/// Binary induction over the triplets (1,2,3), (4,5,6):
/// min sum_i ||A_i T B_i - C_i||^2 + lambda ||T||^2 via the Kronecker normal equations.
InducedOperator induce_binary(std::span<const Mat> reps, double lambda);

/// Ternary induction: unary-form fit Agg1 T ~ Agg2 on row aggregates.
InducedOperator induce_ternary(const Mat& agg1, const Mat& agg2, double lambda);

/// Objective sum_i ||A_i T - C_i||^2 + lambda ||T||^2.
double unary_objective(std::span<const Mat> as, std::span<const Mat> cs, const Mat& T,
                       double lambda);
/// Objective sum_i ||A_i T B_i - C_i||^2 + lambda ||T||^2.
double binary_objective(std::span<const Mat> as, std::span<const Mat> bs, std::span<const Mat> cs,
                        const Mat& T, double lambda);

/// Position operators are circulant 9x9 maps T = sum_s t_s P^s acting on row
/// occupancy vectors (x T), which contain every cyclic shift.
Mat circulant(const Vec& t);
InducedOperator induce_position_unary(std::span<const Vec> occupancy, double lambda);
InducedOperator induce_position_ternary(const Vec& agg1, const Vec& agg2, double lambda);

/// softmax(-residual / tau) with max shift.
std::vector<double> operator_posterior(std::span<const double> residuals, double tau);

/// Predicted answer representation: R8 T, R7 T R8, or Agg1 T - R7 - R8.
Mat execute(const InducedOperator& op, const Mat& r7, const Mat& r8, const Mat& agg1);
/// Position prediction, clipped to [0, 1].
Vec execute_position(const InducedOperator& op, const Vec& x7, const Vec& x8, const Vec& agg1);

/// softmax over -||Mhat - encode(k)||^2 / tau.
perception::Distribution decode(const Mat& mhat, const Encoding& enc, double tau);
perception::Distribution decode(const Mat& mhat, std::span<const Mat> values, double tau);

/// Jensen-Shannon divergence in bits. Throws SupportMismatch.
double jsd(std::span<const double> p, std::span<const double> q);

/// Mean over slots of the Bernoulli JSD between occupancy marginals.
double position_distance(const Vec& predicted, std::span<const double> candidate);

/// Operator kind label of a relation (Constant and Progression are unary).
inline RelationKind label_of(const RelationInstance& rel) { return rel.kind(); }

struct KindTrace {
  bool induced = false;
  InducedOperator op;
  perception::Distribution decoded;  ///< encoded attributes
  Vec position_prediction;           ///< Position
  std::array<double, 8> distance{};
  std::array<double, 8> conditional{};
};

struct AttributeTrace {
  Attribute attribute = Attribute::Number;
  std::array<KindTrace, 3> kinds;
  std::array<double, 3> posterior{};
  std::array<double, 8> conditional{};  ///< posterior-mixed P(y^a = n)
  bool fallback = false;                ///< SolveFailure: uniform conditional
  std::string fallback_reason;

  RelationKind predicted_kind() const;
};

struct AnswerDistribution {
  std::array<double, 8> probability{};
  std::array<AttributeTrace, kNumAttributes> attributes;

  int predicted() const;
};

/// Reasons about one attribute, filling `trace`; returns log P(y^a = n).
/// Throws SolveFailure.
std::array<double, 8> reason_attribute(Attribute a, const perception::InstanceBeliefs& beliefs,
                                       const Model& model, const ReasonerConfig& config,
                                       AttributeTrace& trace);

/// Full answer distribution of one instance. An attribute whose normal
/// equations are singular contributes a uniform factor and is flagged.
AnswerDistribution answer_distribution(const perception::InstanceBeliefs& beliefs,
                                       const Model& model, const ReasonerConfig& config);

/// Symbolic panel generated from the most probable operator of each attribute.
struct GeneratedPanel {
  std::array<int, kNumAttributes> value{};  ///< count, mask, or index
};
GeneratedPanel generate_panel(const AnswerDistribution& dist);

}  // namespace alans
