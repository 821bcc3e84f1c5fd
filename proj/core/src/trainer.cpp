#include "alans/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "alans/checkpoint.hpp"
#include "alans/error.hpp"
#include "alans/generator.hpp"

namespace alans {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool all_finite(const Gradients& g) {
  for (const auto& list : g)
    for (const Mat& m : list)
      if (!m.allFinite()) return false;
  return true;
}

/// Every value representation of every encoding is finite.
bool representations_finite(const Model& model) {
  for (Attribute a : kEncodedAttributes)
    for (const Mat& m : encode_all(model.encoding(a)))
      if (!m.allFinite()) return false;
  return true;
}

}  // namespace

perception::NoiseModel TrainConfig::effective_noise() const {
  return variant == ModelKind::AlansGt ? perception::NoiseModel{} : noise;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error("moment decays must lie in [0, 1)");
  }
  if (stage1_epochs < 0 || stage2_epochs < 0 || epochs() == 0) throw Error("no training epochs");
  if (batch_size < 1) throw Error("batch size must be positive");
  if (d < 2 || d > 32) throw Error("encoding dimension must be in [2, 32]");
  if (!(noise.epsilon >= 0.0 && noise.epsilon < 1.0) ||
      !(noise.objectiveness_epsilon >= 0.0 && noise.objectiveness_epsilon < 1.0)) {
    throw Error("noise must lie in [0, 1)");
  }
}

AdamState AdamState::zeros_like(const Model& model) {
  AdamState s;
  for (Attribute a : kEncodedAttributes) {
    for (const Mat* p : parameters(model.encoding(a))) {
      s.m[index_of(a)].push_back(Mat::Zero(p->rows(), p->cols()));
      s.v[index_of(a)].push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  return s;
}

void adam_step(Model& model, AdamState& state, const Gradients& grads, const TrainConfig& config) {
  for (Attribute a : kEncodedAttributes) {
    const std::size_t ai = index_of(a);
    if (grads[ai].empty()) continue;
    auto params = parameters(model.encoding(a));
    const auto t = static_cast<double>(++state.steps[ai]);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t j = 0; j < params.size(); ++j) {
      Mat& m = state.m[ai][j];
      Mat& v = state.v[ai][j];
      const Mat& g = grads[ai][j];
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
      *params[j] -= (config.learning_rate * (m / c1).array() /
                     ((v / c2).array().sqrt() + config.adam_epsilon))
                        .matrix();
    }
  }
}

std::string TrainReport::to_records() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["stage"] = e.stage;
    j["active"] = e.active ? nlohmann::ordered_json(std::string(to_string(*e.active))) : nullptr;
    j["train_loss"] = e.train_loss;
    j["train_accuracy"] = e.train_accuracy;
    j["val_loss"] = e.val_loss;
    j["val_accuracy"] = e.val_accuracy;
    nlohmann::ordered_json ops = nlohmann::ordered_json::object();
    for (Attribute a : kAllAttributes) {
      const auto& v = e.val_operator_accuracy[index_of(a)];
      ops[std::string(to_string(a))] = v ? nlohmann::ordered_json(*v) : nullptr;
    }
    j["val_operator_accuracy"] = ops;
    j["min_separation"] = e.min_separation;
    j["best"] = e.epoch == best_epoch;
    out << j.dump() << '\n';
  }
  return out.str();
}

perception::InstanceBeliefs beliefs_for(const RpmInstance& inst, const perception::NoiseModel& noise,
                                        std::uint64_t seed, std::uint64_t index,
                                        std::uint64_t epoch) {
  Rng rng(mix(mix(mix(seed) ^ index) ^ epoch));
  return perception::perceive(inst, noise, rng);
}

bool InstanceOutcome::generated_correct() const {
  return std::all_of(generated_match.begin(), generated_match.end(),
                     [](const std::optional<bool>& m) { return m.value_or(true); });
}

Evaluation evaluate(const std::vector<RpmInstance>& data, const Model& model,
                    const ReasonerConfig& reasoner, const perception::NoiseModel& noise,
                    std::uint64_t seed, double aux_weight) {
  Evaluation ev;
  std::array<int, kNumAttributes> op_total{}, op_right{};
  int right = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RpmInstance& inst = data[i];
    const auto beliefs = beliefs_for(inst, noise, seed, i, 0);
    const AnswerDistribution dist = answer_distribution(beliefs, model, reasoner);
    InstanceOutcome o;
    o.id = inst.id;
    o.answer_index = inst.answer_index;
    o.predicted = dist.predicted();
    o.answer_probability = dist.probability[static_cast<std::size_t>(inst.answer_index)];
    o.loss = -std::log(o.answer_probability);
    o.generated = generate_panel(dist);
    for (Attribute a : kAllAttributes) {
      const std::size_t ai = index_of(a);
      const AttributeTrace& t = dist.attributes[ai];
      o.predicted_kind[ai] = t.predicted_kind();
      o.fallback[ai] = t.fallback;
      if (const auto& rel = inst.rules.at(a)) {
        o.label[ai] = rel->kind();
        ++op_total[ai];
        if (o.predicted_kind[ai] == rel->kind()) ++op_right[ai];
        o.generated_match[ai] = o.generated.value[ai] == inst.answer().value(a);
        o.loss -= aux_weight * std::log(t.posterior[static_cast<std::size_t>(rel->kind())]);
      }
    }
    right += o.correct() ? 1 : 0;
    loss += o.loss;
    ev.outcomes.push_back(std::move(o));
  }
  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  ev.accuracy = right / n;
  ev.mean_loss = loss / n;
  for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
    if (op_total[ai] > 0) ev.operator_accuracy[ai] = static_cast<double>(op_right[ai]) / op_total[ai];
  }
  return ev;
}

TrainResult train(const std::vector<RpmInstance>& train_set, const std::vector<RpmInstance>& val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error("training set is empty");
  Rng rng(config.seed);
  Model model = init_model(config.variant, config.d, rng);
  AdamState state = AdamState::zeros_like(model);
  const auto noise = config.effective_noise();
  const std::uint64_t val_seed = mix(config.seed ^ 0x5eedULL);

  TrainResult result{model, state, {}};
  auto save_best = [&] {
    if (config.checkpoint_path) {
      save_checkpoint(*config.checkpoint_path, {result.model, config.reasoner, result.optimizer});
      result.report.checkpoint = config.checkpoint_path->string();
    }
  };
  {
    const Evaluation v0 = evaluate(val_set, model, config.reasoner, noise, val_seed);
    result.report.best_val_accuracy = v0.accuracy;
    result.report.best_epoch = 0;
    save_best();
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs(); ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = epoch <= config.stage1_epochs ? 1 : 2;
    LossWeights weights;
    if (rec.stage == 1) {
      rec.active = kEncodedAttributes[static_cast<std::size_t>(epoch - 1) % kEncodedAttributes.size()];
      weights = LossWeights::single(*rec.active, config.aux_weight_stage1);
    } else {
      weights = LossWeights::joint(config.aux_weight_stage2);
    }
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int right = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Gradients acc;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const RpmInstance& inst = train_set[idx];
        const auto beliefs = beliefs_for(inst, noise, config.seed, idx, static_cast<std::uint64_t>(epoch));
        ForwardPass pass = forward_loss(inst, beliefs, model, config.reasoner, weights);
        if (!std::isfinite(pass.value)) {
          save_best();
          throw DivergenceDetected("non-finite loss at epoch " + std::to_string(epoch) + " on " +
                                   inst.id);
        }
        loss_sum += pass.value;
        const int predicted = static_cast<int>(
            std::max_element(pass.probability.begin(), pass.probability.end()) - pass.probability.begin());
        right += predicted == inst.answer_index ? 1 : 0;
        Gradients g = backward(pass);
        for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
          if (acc[ai].empty()) {
            acc[ai] = std::move(g[ai]);
          } else {
            for (std::size_t j = 0; j < g[ai].size(); ++j) acc[ai][j] += g[ai][j];
          }
        }
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& list : acc)
        for (Mat& m : list) m *= scale;
      if (!all_finite(acc)) {
        save_best();
        throw DivergenceDetected("non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam_step(model, state, acc, config);
      if (!representations_finite(model)) {
        save_best();
        throw DivergenceDetected("encodings overflowed at epoch " + std::to_string(epoch));
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = static_cast<double>(right) / static_cast<double>(train_set.size());

    const double aux = rec.stage == 1 ? 0.0 : config.aux_weight_stage2;
    const Evaluation val = evaluate(val_set, model, config.reasoner, noise, val_seed, aux);
    rec.val_loss = val.mean_loss;
    rec.val_accuracy = val.accuracy;
    rec.val_operator_accuracy = val.operator_accuracy;
    rec.min_separation = std::numeric_limits<double>::infinity();
    for (Attribute a : kEncodedAttributes) {
      rec.min_separation = std::min(rec.min_separation, min_separation(model.encoding(a)));
    }
    if (val.accuracy > result.report.best_val_accuracy) {
      result.report.best_val_accuracy = val.accuracy;
      result.report.best_epoch = epoch;
      result.model = model;
      result.optimizer = state;
      save_best();
    }
    result.report.epochs.push_back(rec);
  }
  return result;
}

GradCheckReport grad_check(const GradCheckConfig& config, std::uint64_t seed) {
  GradCheckReport report;
  report.seeds = config.seeds;
  report.h = config.h;
  for (int s = 0; s < config.seeds; ++s) {
    Rng rng(mix(seed + static_cast<std::uint64_t>(s)));
    const RuleSet rules = sample_ruleset({Regime::Systematicity, Phase::Train}, rng);
    RpmInstance inst = generate_instance(rules, DistractorStrategy::PerturbOne, rng);
    Model model = init_model(config.variant, config.d, rng);
    perception::NoiseModel noise{config.noise, config.noise};
    if (config.variant == ModelKind::AlansGt) noise = {};
    const auto beliefs = perception::perceive(inst, noise, rng);
    const LossWeights weights = LossWeights::joint(config.aux_weight);

    ForwardPass pass = forward_loss(inst, beliefs, model, config.reasoner, weights);
    const Gradients grads = backward(pass);

    for (Attribute a : kEncodedAttributes) {
      const std::size_t ai = index_of(a);
      auto params = parameters(model.encoding(a));
      for (std::size_t j = 0; j < params.size(); ++j) {
        Mat& p = *params[j];
        for (Eigen::Index e = 0; e < p.size(); ++e) {
          const double orig = p.data()[e];
          p.data()[e] = orig + config.h;
          const double up = forward_loss(inst, beliefs, model, config.reasoner, weights).value;
          p.data()[e] = orig - config.h;
          const double down = forward_loss(inst, beliefs, model, config.reasoner, weights).value;
          p.data()[e] = orig;
          const double fd = (up - down) / (2.0 * config.h);
          const double ad = grads[ai][j].data()[e];
          const double abs_err = std::abs(fd - ad);
          const double rel = abs_err / std::max({std::abs(fd), std::abs(ad), config.floor});
          report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
          report.max_relative_error = std::max(report.max_relative_error, rel);
          ++report.entries;
        }
      }
    }
  }
  return report;
}

}  // namespace alans
