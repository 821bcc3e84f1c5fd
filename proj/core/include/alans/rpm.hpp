#pragma once

// Attribute-level Raven's Progressive Matrices: domains, relations, panels,
// instances, and the rule semantics shared by the generator, the reasoner and
// the evaluation harness.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alans {

enum class Attribute : std::uint8_t { Number, Position, Type, Size, Color };

inline constexpr std::size_t kNumAttributes = 5;
inline constexpr std::array<Attribute, kNumAttributes> kAllAttributes = {
    Attribute::Number, Attribute::Position, Attribute::Type, Attribute::Size,
    Attribute::Color};
/// Attributes carried by learnable encodings (everything except Position).
inline constexpr std::array<Attribute, 4> kEncodedAttributes = {
    Attribute::Number, Attribute::Type, Attribute::Size, Attribute::Color};

inline constexpr int kGridSlots = 9;
inline constexpr std::uint16_t kFullMask = (1u << kGridSlots) - 1;

constexpr std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }

std::string_view to_string(Attribute a);
Attribute attribute_from_string(std::string_view name);

/// Fixed value domain of an attribute.
///
/// Number takes object counts 1..9 (generator index = count - 1), Position is
/// a 9-slot occupancy mask of the 3x3 grid, the rest are plain indices.
struct AttrDomain {
  Attribute attribute;
  int cardinality;

  static constexpr AttrDomain of(Attribute a) {
    switch (a) {
      case Attribute::Number: return {a, 9};
      case Attribute::Position: return {a, kGridSlots};
      case Attribute::Type: return {a, 5};
      case Attribute::Size: return {a, 6};
      case Attribute::Color: return {a, 10};
    }
    return {a, 0};
  }

  /// Smallest and largest admissible attribute *value* (counts for Number,
  /// masks for Position).
  constexpr int min_value() const {
    return attribute == Attribute::Number || attribute == Attribute::Position ? 1 : 0;
  }
  constexpr int max_value() const {
    switch (attribute) {
      case Attribute::Number: return 9;
      case Attribute::Position: return kFullMask;
      default: return cardinality - 1;
    }
  }
  constexpr bool contains(int v) const { return v >= min_value() && v <= max_value(); }
};

enum class RelationKind : std::uint8_t { Unary, Binary, Ternary };
inline constexpr std::array<RelationKind, 3> kAllKinds = {
    RelationKind::Unary, RelationKind::Binary, RelationKind::Ternary};
std::string_view to_string(RelationKind k);
RelationKind kind_from_string(std::string_view name);

enum class Variant : std::uint8_t {
  Constant,
  Progression,
  ArithmeticPlus,
  ArithmeticMinus,
  DistributeThree,
};
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

/// Row-permutation scheme of Distribute-Three. Row 1 is the triple (x, y, z);
/// left cycling gives rows (y, z, x), (z, x, y), right cycling (z, x, y), (y, z, x).
enum class Cycle : std::uint8_t { Left, Right };

/// One hidden row relation attached to an attribute.
struct RelationInstance {
  Attribute attribute = Attribute::Number;
  Variant variant = Variant::Constant;
  int step = 0;               ///< Progression only, in {-2, -1, +1, +2}.
  Cycle cycle = Cycle::Left;  ///< DistributeThree only.
  /// DistributeThree only: the value triple in row-1 order.
  std::optional<std::array<int, 3>> triple;
  /// Forced by another attribute (Number when Position drives the layout).
  bool implied = false;

  RelationKind kind() const;

  /// (kind, variant, step, cycle) identity used by split pools.
  std::string identity() const;

  static RelationInstance constant(Attribute a);
  static RelationInstance progression(Attribute a, int step);
  static RelationInstance plus(Attribute a);
  static RelationInstance minus(Attribute a);
  static RelationInstance distribute_three(Attribute a, Cycle cycle,
                                           std::optional<std::array<int, 3>> triple = {});

  friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

/// Cyclic shift of a 9-slot mask over the row-major slot order.
std::uint16_t shift_mask(std::uint16_t mask, int step);

/// Value completing a row under `rel`.
///
/// Unary relations take a one-element prefix (the preceding panel); binary and
/// ternary relations take the first two panels of the row. Throws
/// ArityMismatch or OutOfDomain.
int apply_relation(const RelationInstance& rel, std::span<const int> row_prefix);

/// Which attribute of the coupled (Number, Position) pair carries the rule.
enum class LayoutDriver : std::uint8_t { Number, Position };

/// One relation per attribute. Position is absent when Number drives the
/// layout: objects are then placed freely and only their count is governed.
struct RuleSet {
  std::array<std::optional<RelationInstance>, kNumAttributes> relations;
  LayoutDriver driver = LayoutDriver::Number;

  const std::optional<RelationInstance>& at(Attribute a) const { return relations[index_of(a)]; }
  std::optional<RelationInstance>& at(Attribute a) { return relations[index_of(a)]; }
  bool governs(Attribute a) const { return at(a).has_value(); }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

/// Symbolic panel: occupancy of the 3x3 grid plus the attributes shared by all
/// of its objects.
struct PanelSpec {
  std::uint16_t position = 1;
  int type = 0;
  int size = 0;
  int color = 0;

  int number() const;
  /// Attribute value: count for Number, mask for Position, index otherwise.
  int value(Attribute a) const;
  /// Sets one attribute; setting Number is not supported (it follows Position).
  void set(Attribute a, int v);
  bool valid() const;

  friend bool operator==(const PanelSpec&, const PanelSpec&) = default;
};

enum class Regime : std::uint8_t { Systematicity, Productivity, Localism };
enum class Phase : std::uint8_t { Train, Val, Test };
std::string_view to_string(Regime r);
std::string_view to_string(Phase p);
Regime regime_from_string(std::string_view name);
Phase phase_from_string(std::string_view name);

struct RpmInstance {
  std::string id;
  Regime regime = Regime::Systematicity;
  Phase phase = Phase::Train;
  std::array<PanelSpec, 8> context{};
  std::array<PanelSpec, 8> candidates{};
  int answer_index = 0;
  RuleSet rules;

  const PanelSpec& answer() const { return candidates[static_cast<std::size_t>(answer_index)]; }

  friend bool operator==(const RpmInstance&, const RpmInstance&) = default;
};

/// Whether the three rows `rows[r][c]` of one attribute satisfy `rel`.
bool rows_satisfy(const RelationInstance& rel, const std::array<std::array<int, 3>, 3>& rows);

struct AttributeCheck {
  Attribute attribute;
  bool governed = false;
  bool satisfied = true;
};

struct ValidationReport {
  std::array<AttributeCheck, kNumAttributes> attributes{};
  bool panels_valid = true;
  bool candidates_distinct = true;
  /// Candidate indices whose completion satisfies every rule.
  std::vector<int> satisfying_candidates;
  bool answer_unique = false;

  bool rules_hold() const;
  bool ok() const { return panels_valid && candidates_distinct && rules_hold() && answer_unique; }
  std::string summary() const;
};

/// Whether placing `candidate` in the missing slot satisfies every rule.
bool completes(const RpmInstance& inst, const PanelSpec& candidate);

ValidationReport validate_instance(const RpmInstance& inst);

}  // namespace alans
