#include "alans/rpm.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "alans/error.hpp"

namespace alans {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::array<std::string_view, N>& names,
             const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<E>(i);
  }
  throw Error(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

constexpr std::array<std::string_view, 5> kAttributeNames = {"number", "position", "type",
                                                             "size", "color"};
constexpr std::array<std::string_view, 3> kKindNames = {"unary", "binary", "ternary"};
constexpr std::array<std::string_view, 5> kVariantNames = {
    "constant", "progression", "arithmetic_plus", "arithmetic_minus", "distribute_three"};
constexpr std::array<std::string_view, 3> kRegimeNames = {"systematicity", "productivity",
                                                          "localism"};
constexpr std::array<std::string_view, 3> kPhaseNames = {"train", "val", "test"};

void require_in_domain(Attribute a, int v) {
  if (!AttrDomain::of(a).contains(v)) {
    throw OutOfDomain("value " + std::to_string(v) + " outside the " +
                      std::string(to_string(a)) + " domain");
  }
}

// Row r of a Distribute-Three matrix as positions into the triple.
constexpr std::array<std::array<int, 3>, 3> kLeftCycle = {{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
constexpr std::array<std::array<int, 3>, 3> kRightCycle = {{{0, 1, 2}, {2, 0, 1}, {1, 2, 0}}};

}  // namespace

std::string_view to_string(Attribute a) { return kAttributeNames[index_of(a)]; }
Attribute attribute_from_string(std::string_view name) {
  return parse_enum<Attribute>(name, kAttributeNames, "attribute");
}
std::string_view to_string(RelationKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
RelationKind kind_from_string(std::string_view name) {
  return parse_enum<RelationKind>(name, kKindNames, "relation kind");
}
std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }
Variant variant_from_string(std::string_view name) {
  return parse_enum<Variant>(name, kVariantNames, "relation variant");
}
std::string_view to_string(Regime r) { return kRegimeNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Phase p) { return kPhaseNames[static_cast<std::size_t>(p)]; }
Regime regime_from_string(std::string_view name) {
  return parse_enum<Regime>(name, kRegimeNames, "regime");
}
Phase phase_from_string(std::string_view name) {
  return parse_enum<Phase>(name, kPhaseNames, "phase");
}

RelationKind RelationInstance::kind() const {
  switch (variant) {
    case Variant::Constant:
    case Variant::Progression: return RelationKind::Unary;
    case Variant::ArithmeticPlus:
    case Variant::ArithmeticMinus: return RelationKind::Binary;
    case Variant::DistributeThree: return RelationKind::Ternary;
  }
  return RelationKind::Unary;
}

std::string RelationInstance::identity() const {
  std::string id(to_string(variant));
  if (variant == Variant::Progression) id += (step > 0 ? "(+" : "(") + std::to_string(step) + ")";
  if (variant == Variant::DistributeThree) id += cycle == Cycle::Left ? "(left)" : "(right)";
  return id;
}

RelationInstance RelationInstance::constant(Attribute a) {
  RelationInstance r;
  r.attribute = a;
  return r;
}
RelationInstance RelationInstance::progression(Attribute a, int step) {
  if (step == 0 || step < -2 || step > 2) throw Error("progression step must be in {-2,-1,1,2}");
  RelationInstance r;
  r.attribute = a;
  r.variant = Variant::Progression;
  r.step = step;
  return r;
}
RelationInstance RelationInstance::plus(Attribute a) {
  if (a == Attribute::Position) throw Error("binary relations are not defined on Position");
  RelationInstance r;
  r.attribute = a;
  r.variant = Variant::ArithmeticPlus;
  return r;
}
RelationInstance RelationInstance::minus(Attribute a) {
  if (a == Attribute::Position) throw Error("binary relations are not defined on Position");
  RelationInstance r;
  r.attribute = a;
  r.variant = Variant::ArithmeticMinus;
  return r;
}
RelationInstance RelationInstance::distribute_three(Attribute a, Cycle cycle,
                                                    std::optional<std::array<int, 3>> triple) {
  if (triple) {
    const auto& t = *triple;
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error("distribute-three values must be distinct");
    }
  }
  return {.attribute = a, .variant = Variant::DistributeThree, .cycle = cycle, .triple = triple};
}

std::uint16_t shift_mask(std::uint16_t mask, int step) {
  const int s = ((step % kGridSlots) + kGridSlots) % kGridSlots;
  std::uint16_t out = 0;
  for (int j = 0; j < kGridSlots; ++j) {
    if (mask & (1u << j)) out |= static_cast<std::uint16_t>(1u << ((j + s) % kGridSlots));
  }
  return out;
}

int apply_relation(const RelationInstance& rel, std::span<const int> row_prefix) {
  const Attribute a = rel.attribute;
  const std::size_t arity = rel.kind() == RelationKind::Unary ? 1 : 2;
  if (row_prefix.size() != arity) {
    throw ArityMismatch(std::string(to_string(rel.variant)) + " expects a prefix of length " +
                        std::to_string(arity) + ", got " + std::to_string(row_prefix.size()));
  }
  for (int v : row_prefix) require_in_domain(a, v);

  int out = 0;
  switch (rel.variant) {
    case Variant::Constant: out = row_prefix[0]; break;
    case Variant::Progression:
      out = a == Attribute::Position
                ? shift_mask(static_cast<std::uint16_t>(row_prefix[0]), rel.step)
                : row_prefix[0] + rel.step;
      break;
    case Variant::ArithmeticPlus: out = row_prefix[0] + row_prefix[1]; break;
    case Variant::ArithmeticMinus: out = row_prefix[0] - row_prefix[1]; break;
    case Variant::DistributeThree: {
      if (!rel.triple) throw Error("distribute-three relation has no value triple");
      const auto& t = *rel.triple;
      int missing = -1;
      int found = 0;
      for (int v : t) {
        if (v != row_prefix[0] && v != row_prefix[1]) {
          missing = v;
          ++found;
        }
      }
      if (found != 1 || row_prefix[0] == row_prefix[1]) {
        throw OutOfDomain("prefix is not two distinct members of the distribute-three triple");
      }
      out = missing;
      break;
    }
  }
  require_in_domain(a, out);
  return out;
}

bool rows_satisfy(const RelationInstance& rel, const std::array<std::array<int, 3>, 3>& rows) {
  const AttrDomain dom = AttrDomain::of(rel.attribute);
  for (const auto& row : rows) {
    for (int v : row) {
      if (!dom.contains(v)) return false;
    }
  }
  switch (rel.variant) {
    case Variant::Constant: {
      const int v = rows[0][0];
      for (const auto& row : rows) {
        for (int x : row) {
          if (x != v) return false;
        }
      }
      return true;
    }
    case Variant::Progression:
    case Variant::ArithmeticPlus:
    case Variant::ArithmeticMinus:
      for (const auto& row : rows) {
        try {
          if (rel.kind() == RelationKind::Unary) {
            if (apply_relation(rel, std::span(row.data(), 1)) != row[1]) return false;
            if (apply_relation(rel, std::span(row.data() + 1, 1)) != row[2]) return false;
          } else if (apply_relation(rel, std::span(row.data(), 2)) != row[2]) {
            return false;
          }
        } catch (const OutOfDomain&) {
          return false;
        }
      }
      return true;
    case Variant::DistributeThree: {
      const auto& order = rel.cycle == Cycle::Left ? kLeftCycle : kRightCycle;
      const auto& t = rows[0];
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return false;
      if (rel.triple && *rel.triple != t) return false;
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
          if (rows[r][c] != t[static_cast<std::size_t>(order[r][c])]) return false;
        }
      }
      return true;
    }
  }
  return false;
}

int PanelSpec::number() const { return std::popcount(static_cast<unsigned>(position)); }

int PanelSpec::value(Attribute a) const {
  switch (a) {
    case Attribute::Number: return number();
    case Attribute::Position: return position;
    case Attribute::Type: return type;
    case Attribute::Size: return size;
    case Attribute::Color: return color;
  }
  return 0;
}

void PanelSpec::set(Attribute a, int v) {
  switch (a) {
    case Attribute::Number: throw Error("Number follows Position; set the mask instead");
    case Attribute::Position: position = static_cast<std::uint16_t>(v); break;
    case Attribute::Type: type = v; break;
    case Attribute::Size: size = v; break;
    case Attribute::Color: color = v; break;
  }
}

bool PanelSpec::valid() const {
  if (position == 0 || position > kFullMask) return false;
  for (Attribute a : {Attribute::Type, Attribute::Size, Attribute::Color}) {
    if (!AttrDomain::of(a).contains(value(a))) return false;
  }
  return true;
}

namespace {

std::array<std::array<int, 3>, 3> attribute_rows(const RpmInstance& inst, const PanelSpec& last,
                                                 Attribute a) {
  std::array<std::array<int, 3>, 3> rows{};
  for (std::size_t i = 0; i < 8; ++i) rows[i / 3][i % 3] = inst.context[i].value(a);
  rows[2][2] = last.value(a);
  return rows;
}

}  // namespace

bool completes(const RpmInstance& inst, const PanelSpec& candidate) {
  for (Attribute a : kAllAttributes) {
    const auto& rel = inst.rules.at(a);
    if (rel && !rows_satisfy(*rel, attribute_rows(inst, candidate, a))) return false;
  }
  return true;
}

bool ValidationReport::rules_hold() const {
  return std::all_of(attributes.begin(), attributes.end(),
                     [](const AttributeCheck& c) { return c.satisfied; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream out;
  const char* sep = "";
  for (const auto& c : attributes) {
    if (!c.satisfied) {
      out << sep << to_string(c.attribute) << " rule violated";
      sep = "; ";
    }
  }
  if (!panels_valid) out << sep << "invalid panel", sep = "; ";
  if (!candidates_distinct) out << sep << "duplicate candidates", sep = "; ";
  if (!answer_unique) {
    out << sep << satisfying_candidates.size() << " candidates satisfy the rules";
  }
  return out.str();
}

ValidationReport validate_instance(const RpmInstance& inst) {
  ValidationReport report;
  for (const auto& p : inst.context) report.panels_valid &= p.valid();
  for (const auto& p : inst.candidates) report.panels_valid &= p.valid();
  if (inst.answer_index < 0 || inst.answer_index >= 8) {
    report.panels_valid = false;
    return report;
  }

  for (Attribute a : kAllAttributes) {
    auto& check = report.attributes[index_of(a)];
    check.attribute = a;
    const auto& rel = inst.rules.at(a);
    check.governed = rel.has_value();
    if (rel) check.satisfied = rows_satisfy(*rel, attribute_rows(inst, inst.answer(), a));
  }

  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = i + 1; j < 8; ++j) {
      if (inst.candidates[i] == inst.candidates[j]) report.candidates_distinct = false;
    }
    if (completes(inst, inst.candidates[i])) {
      report.satisfying_candidates.push_back(static_cast<int>(i));
    }
  }
  report.answer_unique = report.satisfying_candidates.size() == 1 &&
                         report.satisfying_candidates.front() == inst.answer_index;
  return report;
}

}  // namespace alans
