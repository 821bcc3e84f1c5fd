#include "alans/generator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <numeric>

#include "alans/dataset_io.hpp"
#include "alans/error.hpp"

namespace alans {

namespace {

using Rows = std::array<std::array<int, 3>, 3>;

constexpr std::array<std::array<int, 3>, 3> kLeftCycle = {{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
constexpr std::array<std::array<int, 3>, 3> kRightCycle = {{{0, 1, 2}, {2, 0, 1}, {1, 2, 0}}};

// Attribute order used by the hierarchical candidate tree.
constexpr std::array<Attribute, 5> kTreeOrder = {Attribute::Position, Attribute::Number,
                                                 Attribute::Type, Attribute::Size,
                                                 Attribute::Color};

int uniform(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::uint16_t random_mask(Rng& rng, int count) {
  std::array<int, kGridSlots> slots{};
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::uint16_t mask = 0;
  for (int i = 0; i < count; ++i) mask |= static_cast<std::uint16_t>(1u << slots[static_cast<std::size_t>(i)]);
  return mask;
}

std::uint16_t other_mask_same_count(Rng& rng, std::uint16_t mask) {
  const int n = std::popcount(static_cast<unsigned>(mask));
  for (;;) {
    const std::uint16_t m = random_mask(rng, n);
    if (m != mask) return m;
  }
}

int other_value(Rng& rng, Attribute a, int current) {
  const AttrDomain dom = AttrDomain::of(a);
  int v = uniform(rng, dom.min_value(), dom.max_value() - 1);
  if (v >= current) ++v;
  return v;
}

const RelationInstance& pick(const std::vector<RelationInstance>& pool, Rng& rng) {
  // Kind first, then variant, so every kind is equally likely.
  std::vector<RelationKind> kinds;
  for (const auto& r : pool) {
    if (std::find(kinds.begin(), kinds.end(), r.kind()) == kinds.end()) kinds.push_back(r.kind());
  }
  const RelationKind kind = kinds[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(kinds.size()) - 1))];
  std::vector<const RelationInstance*> members;
  for (const auto& r : pool) {
    if (r.kind() == kind) members.push_back(&r);
  }
  return *members[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(members.size()) - 1))];
}

// Row values of an integer-valued attribute under `rel`; Number rows hold counts.
Rows sample_rows(const RelationInstance& rel, Rng& rng) {
  const AttrDomain dom = AttrDomain::of(rel.attribute);
  const int lo = dom.min_value();
  const int hi = dom.max_value();
  Rows rows{};
  switch (rel.variant) {
    case Variant::Constant: {
      const int v = uniform(rng, lo, hi);
      for (auto& row : rows) row = {v, v, v};
      break;
    }
    case Variant::Progression: {
      const int s = rel.step;
      const int start_lo = lo - std::min(0, 2 * s);
      const int start_hi = hi - std::max(0, 2 * s);
      for (auto& row : rows) {
        const int x = uniform(rng, start_lo, start_hi);
        row = {x, x + s, x + 2 * s};
      }
      break;
    }
    case Variant::ArithmeticPlus: {
      const int operand_lo = std::max(lo, 1);
      for (auto& row : rows) {
        const int a = uniform(rng, operand_lo, hi - operand_lo);
        const int b = uniform(rng, operand_lo, hi - a);
        row = {a, b, a + b};
      }
      break;
    }
    case Variant::ArithmeticMinus: {
      for (auto& row : rows) {
        const int b = uniform(rng, 1, hi - lo);
        const int c = uniform(rng, lo, hi - b);
        row = {b + c, b, c};
      }
      break;
    }
    case Variant::DistributeThree: {
      std::array<int, 3> t{};
      do {
        for (int& v : t) v = uniform(rng, lo, hi);
      } while (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]);
      const auto& order = rel.cycle == Cycle::Left ? kLeftCycle : kRightCycle;
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) rows[r][c] = t[static_cast<std::size_t>(order[r][c])];
      }
      break;
    }
  }
  return rows;
}

// Masks of a Position-driven layout; every panel holds the same object count.
Rows sample_position_rows(const RelationInstance& rel, Rng& rng) {
  Rows rows{};
  switch (rel.variant) {
    case Variant::Constant: {
      const int m = random_mask(rng, uniform(rng, 1, kGridSlots));
      for (auto& row : rows) row = {m, m, m};
      break;
    }
    case Variant::Progression: {
      const int n = uniform(rng, 1, kGridSlots - 1);
      for (auto& row : rows) {
        const std::uint16_t m = random_mask(rng, n);
        row = {m, shift_mask(m, rel.step), shift_mask(m, 2 * rel.step)};
      }
      break;
    }
    case Variant::DistributeThree: {
      const int n = uniform(rng, 1, kGridSlots - 1);
      std::array<int, 3> t{};
      do {
        for (int& v : t) v = random_mask(rng, n);
      } while (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]);
      const auto& order = rel.cycle == Cycle::Left ? kLeftCycle : kRightCycle;
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) rows[r][c] = t[static_cast<std::size_t>(order[r][c])];
      }
      break;
    }
    default: throw Error("binary relations are not defined on Position");
  }
  return rows;
}

std::vector<Attribute> perturbable(const RuleSet& rules) {
  std::vector<Attribute> out;
  for (Attribute a : kTreeOrder) {
    if (a == Attribute::Position && !rules.governs(Attribute::Position)) continue;
    out.push_back(a);
  }
  return out;
}

// Answer with one attribute changed. Changing Number re-lays the objects.
std::optional<PanelSpec> perturb(const PanelSpec& answer, Attribute a, Rng& rng) {
  PanelSpec p = answer;
  switch (a) {
    case Attribute::Number: {
      const int n = other_value(rng, Attribute::Number, answer.number());
      p.position = random_mask(rng, n);
      break;
    }
    case Attribute::Position:
      if (answer.number() == kGridSlots) return std::nullopt;
      p.position = other_mask_same_count(rng, answer.position);
      break;
    default: p.set(a, other_value(rng, a, answer.value(a))); break;
  }
  return p;
}

bool fill_perturb_one(RpmInstance& inst, const PanelSpec& answer, Rng& rng) {
  const auto attrs = perturbable(inst.rules);
  std::vector<PanelSpec> distractors;
  for (int tries = 0; distractors.size() < 7 && tries < 500; ++tries) {
    const Attribute a =
        attrs[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(attrs.size()) - 1))];
    const auto cand = perturb(answer, a, rng);
    if (!cand || *cand == answer) continue;
    if (std::find(distractors.begin(), distractors.end(), *cand) != distractors.end()) continue;
    if (completes(inst, *cand)) continue;
    distractors.push_back(*cand);
  }
  if (distractors.size() < 7) return false;
  inst.answer_index = uniform(rng, 0, 7);
  std::size_t next = 0;
  for (int i = 0; i < 8; ++i) {
    inst.candidates[static_cast<std::size_t>(i)] =
        i == inst.answer_index ? answer : distractors[next++];
  }
  return true;
}

bool fill_hierarchical(RpmInstance& inst, const PanelSpec& answer, Rng& rng) {
  auto attrs = perturbable(inst.rules);
  if (answer.number() == kGridSlots) {
    std::erase(attrs, Attribute::Position);
  }
  // Three tree levels, kept in the fixed attribute order.
  std::vector<std::size_t> idx(attrs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(3);
  std::sort(idx.begin(), idx.end());
  std::array<Attribute, 3> levels{};
  for (std::size_t l = 0; l < 3; ++l) levels[l] = attrs[idx[l]];

  std::array<int, 3> alternatives{};
  int alt_count = answer.number();
  for (std::size_t l = 0; l < 3; ++l) {
    const Attribute a = levels[l];
    if (a == Attribute::Number) {
      alt_count = other_value(rng, Attribute::Number, answer.number());
      alternatives[l] = alt_count;
    } else if (a != Attribute::Position) {
      alternatives[l] = other_value(rng, a, answer.value(a));
    }
  }
  // Masks indexed by (number flipped, position flipped).
  std::array<std::array<std::uint16_t, 2>, 2> masks{};
  masks[0][0] = answer.position;
  masks[0][1] = answer.number() < kGridSlots ? other_mask_same_count(rng, answer.position)
                                              : answer.position;
  masks[1][0] = random_mask(rng, alt_count);
  masks[1][1] = alt_count < kGridSlots ? other_mask_same_count(rng, masks[1][0]) : masks[1][0];

  std::array<PanelSpec, 8> tree{};
  for (std::size_t combo = 0; combo < 8; ++combo) {
    PanelSpec p = answer;
    bool number_flip = false;
    bool position_flip = false;
    for (std::size_t l = 0; l < 3; ++l) {
      if (!(combo & (1u << (2 - l)))) continue;
      const Attribute a = levels[l];
      if (a == Attribute::Number) {
        number_flip = true;
      } else if (a == Attribute::Position) {
        position_flip = true;
      } else {
        p.set(a, alternatives[l]);
      }
    }
    p.position = masks[number_flip][position_flip];
    tree[combo] = p;
  }
  for (std::size_t combo = 1; combo < 8; ++combo) {
    if (completes(inst, tree[combo])) return false;
  }
  std::array<int, 8> order{};
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < 8; ++i) {
    inst.candidates[i] = tree[static_cast<std::size_t>(order[i])];
    if (order[i] == 0) inst.answer_index = static_cast<int>(i);
  }
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string instance_id(Regime regime, Phase phase, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3s-%s-%06zu", std::string(to_string(regime)).c_str(),
                std::string(to_string(phase)).c_str(), i);
  return buf;
}

}  // namespace

std::string_view to_string(DistractorStrategy s) {
  return s == DistractorStrategy::PerturbOne ? "perturb_one" : "hierarchical";
}

DistractorStrategy strategy_from_string(std::string_view name) {
  if (name == "perturb_one" || name == "perturb-one") return DistractorStrategy::PerturbOne;
  if (name == "hierarchical") return DistractorStrategy::Hierarchical;
  throw Error("unknown distractor strategy '" + std::string(name) + "'");
}

std::vector<RelationInstance> relation_pool(SplitRegime split, Attribute a) {
  using R = RelationInstance;
  const bool held_out = split.phase == Phase::Test;
  const bool position = a == Attribute::Position;

  std::vector<R> unary_all = {R::constant(a), R::progression(a, 1), R::progression(a, -1),
                              R::progression(a, 2), R::progression(a, -2)};
  std::vector<R> binary_all;
  if (!position) binary_all = {R::plus(a), R::minus(a)};

  switch (split.regime) {
    case Regime::Systematicity:
      if (!held_out) {
        std::vector<R> pool = {R::constant(a), R::progression(a, 1), R::progression(a, -1)};
        if (!position) pool.push_back(R::plus(a));
        pool.push_back(R::distribute_three(a, Cycle::Left));
        return pool;
      } else {
        std::vector<R> pool = {R::progression(a, 2), R::progression(a, -2)};
        if (!position) pool.push_back(R::minus(a));
        pool.push_back(R::distribute_three(a, Cycle::Right));
        return pool;
      }
    case Regime::Productivity:
      if (position) return {};
      return held_out ? binary_all : unary_all;
    case Regime::Localism:
      if (position) return {};
      return held_out ? unary_all : binary_all;
  }
  return {};
}

RuleSet sample_ruleset(SplitRegime split, Rng& rng) {
  RuleSet rules;
  for (Attribute a : {Attribute::Type, Attribute::Size, Attribute::Color}) {
    rules.at(a) = pick(relation_pool(split, a), rng);
  }
  const auto position_pool = relation_pool(split, Attribute::Position);
  const bool position_drives =
      !position_pool.empty() && std::bernoulli_distribution(0.5)(rng);
  if (position_drives) {
    rules.driver = LayoutDriver::Position;
    rules.at(Attribute::Position) = pick(position_pool, rng);
    auto number = RelationInstance::constant(Attribute::Number);
    number.implied = true;
    rules.at(Attribute::Number) = number;
  } else {
    rules.driver = LayoutDriver::Number;
    rules.at(Attribute::Number) = pick(relation_pool(split, Attribute::Number), rng);
  }
  return rules;
}

RpmInstance generate_instance(const RuleSet& rules, DistractorStrategy strategy, Rng& rng,
                              int max_attempts) {
  if (rules.at(Attribute::Position) &&
      rules.at(Attribute::Position)->kind() == RelationKind::Binary) {
    throw Error("binary relations are not defined on Position");
  }
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    RpmInstance inst;
    inst.rules = rules;
    std::array<Rows, kNumAttributes> values{};

    for (Attribute a : {Attribute::Type, Attribute::Size, Attribute::Color}) {
      values[index_of(a)] = sample_rows(*rules.at(a), rng);
    }
    Rows masks{};
    if (rules.driver == LayoutDriver::Position) {
      masks = sample_position_rows(*rules.at(Attribute::Position), rng);
    } else {
      const Rows counts = sample_rows(*rules.at(Attribute::Number), rng);
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) masks[r][c] = random_mask(rng, counts[r][c]);
      }
    }
    values[index_of(Attribute::Position)] = masks;

    for (Attribute a : kAllAttributes) {
      auto& rel = inst.rules.at(a);
      if (!rel || rel->variant != Variant::DistributeThree) continue;
      std::array<int, 3> t = values[index_of(a)][0];
      if (a == Attribute::Number) {
        for (std::size_t c = 0; c < 3; ++c) t[c] = std::popcount(static_cast<unsigned>(masks[0][c]));
      }
      rel->triple = t;
    }

    std::array<PanelSpec, 9> panels{};
    for (std::size_t i = 0; i < 9; ++i) {
      PanelSpec& p = panels[i];
      p.position = static_cast<std::uint16_t>(masks[i / 3][i % 3]);
      p.type = values[index_of(Attribute::Type)][i / 3][i % 3];
      p.size = values[index_of(Attribute::Size)][i / 3][i % 3];
      p.color = values[index_of(Attribute::Color)][i / 3][i % 3];
    }
    std::copy(panels.begin(), panels.begin() + 8, inst.context.begin());
    const PanelSpec answer = panels[8];

    const bool filled = strategy == DistractorStrategy::PerturbOne
                            ? fill_perturb_one(inst, answer, rng)
                            : fill_hierarchical(inst, answer, rng);
    if (!filled) continue;
    if (validate_instance(inst).ok()) return inst;
  }
  throw GenerationExhausted("no valid instance after " + std::to_string(max_attempts) +
                            " attempts");
}

std::uint64_t derive_seed(std::uint64_t seed, Regime regime, Phase phase, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(regime) + 1));
  h = splitmix64(h ^ ((static_cast<std::uint64_t>(phase) + 1) << 8));
  return splitmix64(h ^ index);
}

FoldSizes fold_sizes(std::size_t n) {
  FoldSizes f;
  f.train = n * 6 / 10;
  f.val = n * 2 / 10;
  f.test = n - f.train - f.val;
  return f;
}

std::vector<RpmInstance> generate_fold(Regime regime, Phase phase, DistractorStrategy strategy,
                                       std::size_t n, std::uint64_t seed) {
  std::vector<RpmInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, regime, phase, i));
    const RuleSet rules = sample_ruleset({regime, phase}, rng);
    RpmInstance inst = generate_instance(rules, strategy, rng);
    inst.id = instance_id(regime, phase, i);
    inst.regime = regime;
    inst.phase = phase;
    out.push_back(std::move(inst));
  }
  return out;
}

std::set<std::string> governing_relations(const RuleSet& rules) {
  std::set<std::string> out;
  for (const auto& rel : rules.relations) {
    if (rel && !rel->implied) {
      out.insert(std::string(to_string(rel->attribute)) + ":" + rel->identity());
    }
  }
  return out;
}

DatasetManifest generate_split(Regime regime, DistractorStrategy strategy, std::size_t n,
                               std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 10) throw Error("split size must be at least 10, got " + std::to_string(n));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.regime = regime;
  manifest.strategy = strategy;
  manifest.count = n;
  manifest.folds = fold_sizes(n);
  manifest.seed = seed;

  const std::array<std::pair<Phase, std::size_t>, 3> phases = {
      {{Phase::Train, manifest.folds.train},
       {Phase::Val, manifest.folds.val},
       {Phase::Test, manifest.folds.test}}};
  for (const auto& [phase, count] : phases) {
    const std::string name(to_string(phase));
    const auto path = out_dir / (name + ".jsonl");
    DatasetWriter writer(path, {regime, phase, strategy, count});
    auto& seen = manifest.relations[name];
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(derive_seed(seed, regime, phase, i));
      const RuleSet rules = sample_ruleset({regime, phase}, rng);
      RpmInstance inst = generate_instance(rules, strategy, rng);
      inst.id = instance_id(regime, phase, i);
      inst.regime = regime;
      inst.phase = phase;
      seen.merge(governing_relations(inst.rules));
      writer.write(inst);
    }
    writer.close();
    manifest.files[name] = path.filename().string();
    manifest.checksums[name] = checksum_file(path);
  }
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace alans
