#include "alans/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "alans/error.hpp"

namespace alans::perception {

namespace {

int categorical_size(Attribute a) { return AttrDomain::of(a).cardinality; }

Distribution random_distribution(int n, Rng& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Distribution d(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& v : d) total += (v = gamma(rng) + 1e-12);
  for (double& v : d) v /= total;
  return d;
}

}  // namespace

const Distribution& RegionBelief::attribute(Attribute a) const {
  switch (a) {
    case Attribute::Type: return type;
    case Attribute::Size: return size;
    case Attribute::Color: return color;
    default: throw Error("regions carry only type, size and color distributions");
  }
}

const Distribution& BeliefState::categorical(Attribute a) const {
  switch (a) {
    case Attribute::Number: return number;
    case Attribute::Type: return type;
    case Attribute::Size: return size;
    case Attribute::Color: return color;
    case Attribute::Position: break;
  }
  throw Error("Position belief is a vector of slot marginals, not a categorical");
}

Distribution corrupted_categorical(int cardinality, int truth, double eps) {
  Distribution d(static_cast<std::size_t>(cardinality), eps / (cardinality - 1));
  d[static_cast<std::size_t>(truth)] = 1.0 - eps;
  return d;
}

Regions corrupt(const PanelSpec& panel, const NoiseModel& noise, Rng& rng) {
  Regions regions{};
  for (int j = 0; j < kGridSlots; ++j) {
    RegionBelief& r = regions[static_cast<std::size_t>(j)];
    const bool occupied = panel.position & (1u << j);
    r.objectiveness = occupied ? 1.0 - noise.objectiveness_epsilon : noise.objectiveness_epsilon;
    if (occupied) {
      r.type = corrupted_categorical(categorical_size(Attribute::Type), panel.type, noise.epsilon);
      r.size = corrupted_categorical(categorical_size(Attribute::Size), panel.size, noise.epsilon);
      r.color =
          corrupted_categorical(categorical_size(Attribute::Color), panel.color, noise.epsilon);
    } else {
      r.type = random_distribution(categorical_size(Attribute::Type), rng);
      r.size = random_distribution(categorical_size(Attribute::Size), rng);
      r.color = random_distribution(categorical_size(Attribute::Color), rng);
    }
  }
  return regions;
}

Distribution infer_number(const Regions& regions) {
  // dp[k] = P(k objects among the regions seen so far)
  Distribution dp(kGridSlots + 1, 0.0);
  dp[0] = 1.0;
  for (std::size_t j = 0; j < regions.size(); ++j) {
    const double p = regions[j].objectiveness;
    for (std::size_t k = j + 1; k > 0; --k) dp[k] = dp[k] * (1.0 - p) + dp[k - 1] * p;
    dp[0] *= 1.0 - p;
  }
  return dp;
}

std::array<double, kGridSlots> infer_position(const Regions& regions) {
  std::array<double, kGridSlots> out{};
  for (std::size_t j = 0; j < regions.size(); ++j) out[j] = regions[j].objectiveness;
  return out;
}

Distribution infer_attr(const Regions& regions, Attribute attribute) {
  const std::size_t n = regions.front().attribute(attribute).size();
  const bool any = std::any_of(regions.begin(), regions.end(),
                               [](const RegionBelief& r) { return r.objectiveness > 0.0; });
  if (!any) throw DegeneratePanel("no region holds an object");

  const double neg_inf = -std::numeric_limits<double>::infinity();
  Distribution log_q(n, 0.0);
  for (const auto& r : regions) {
    if (r.objectiveness <= 0.0) continue;
    const auto& d = r.attribute(attribute);
    for (std::size_t v = 0; v < n; ++v) {
      log_q[v] += d[v] > 0.0 ? r.objectiveness * std::log(d[v]) : neg_inf;
    }
  }
  const double m = *std::max_element(log_q.begin(), log_q.end());
  if (m == neg_inf) throw DegeneratePanel("regions disagree on every value");
  double total = 0.0;
  for (double& v : log_q) total += (v = std::exp(v - m));
  for (double& v : log_q) v /= total;
  return log_q;
}

BeliefState belief_state(const Regions& regions) {
  BeliefState b;
  b.number = infer_number(regions);
  b.position = infer_position(regions);
  b.type = infer_attr(regions, Attribute::Type);
  b.size = infer_attr(regions, Attribute::Size);
  b.color = infer_attr(regions, Attribute::Color);
  return b;
}

BeliefState exact_belief(const PanelSpec& panel) {
  BeliefState b;
  b.number = corrupted_categorical(kGridSlots + 1, panel.number(), 0.0);
  for (int j = 0; j < kGridSlots; ++j) {
    b.position[static_cast<std::size_t>(j)] = (panel.position & (1u << j)) ? 1.0 : 0.0;
  }
  b.type = corrupted_categorical(categorical_size(Attribute::Type), panel.type, 0.0);
  b.size = corrupted_categorical(categorical_size(Attribute::Size), panel.size, 0.0);
  b.color = corrupted_categorical(categorical_size(Attribute::Color), panel.color, 0.0);
  return b;
}

InstanceBeliefs perceive(const RpmInstance& inst, const NoiseModel& noise, Rng& rng) {
  InstanceBeliefs out;
  for (std::size_t i = 0; i < 8; ++i) {
    out.context[i] = noise.noiseless() ? exact_belief(inst.context[i])
                                       : belief_state(corrupt(inst.context[i], noise, rng));
  }
  for (std::size_t i = 0; i < 8; ++i) {
    out.candidates[i] = noise.noiseless() ? exact_belief(inst.candidates[i])
                                          : belief_state(corrupt(inst.candidates[i], noise, rng));
  }
  return out;
}

int argmax(const Distribution& d) {
  return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

}  // namespace alans::perception
