#include "alans/pipeline.hpp"

#include <cmath>

#include "alans/error.hpp"

namespace alans {

using ad::Id;
using ad::Tape;

LossWeights LossWeights::joint(double aux_weight) {
  LossWeights w;
  w.aux.fill(aux_weight);
  for (Attribute a : kEncodedAttributes) w.trainable[index_of(a)] = true;
  return w;
}

LossWeights LossWeights::single(Attribute active, double aux_weight) {
  LossWeights w;
  w.aux[index_of(active)] = aux_weight;
  w.trainable[index_of(active)] = true;
  return w;
}

namespace {

Mat as_column(std::span<const double> p) {
  return Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
}

struct Induced {
  Id T;
  Id residual;
};

/// sum_i ||A_i T - C_i||^2 + lambda ||T||^2 minimized in closed form.
Induced unary_on_tape(Tape& t, std::span<const Id> as, std::span<const Id> cs, double lambda) {
  std::vector<Id> gram, cross;
  for (std::size_t i = 0; i < as.size(); ++i) {
    const Id at = t.transpose(as[i]);
    gram.push_back(t.matmul(at, as[i]));
    cross.push_back(t.matmul(at, cs[i]));
  }
  const Id T = t.solve(t.add_identity(t.sum(gram), lambda), t.sum(cross));
  std::vector<Id> terms;
  for (std::size_t i = 0; i < as.size(); ++i) {
    terms.push_back(t.frobenius_sq(t.sub(t.matmul(as[i], T), cs[i])));
  }
  terms.push_back(t.scale(t.frobenius_sq(T), lambda));
  return {T, t.sum(terms)};
}

Induced binary_on_tape(Tape& t, std::span<const Id> R, Eigen::Index d, double lambda) {
  std::vector<Id> gram, cross;
  std::array<std::array<Id, 3>, 2> trip{};
  for (std::size_t row = 0; row < 2; ++row) {
    const Id A = R[3 * row], B = R[3 * row + 1], C = R[3 * row + 2];
    trip[row] = {A, B, C};
    const Id at = t.transpose(A);
    const Id bt = t.transpose(B);
    gram.push_back(t.kron(t.matmul(B, bt), t.matmul(at, A)));
    cross.push_back(t.vec(t.matmul(t.matmul(at, C), bt)));
  }
  const Id tv = t.solve(t.add_identity(t.sum(gram), lambda), t.sum(cross));
  const Id T = t.unvec(tv, d, d);
  std::vector<Id> terms;
  for (const auto& [A, B, C] : trip) {
    terms.push_back(t.frobenius_sq(t.sub(t.matmul(t.matmul(A, T), B), C)));
  }
  terms.push_back(t.scale(t.frobenius_sq(T), lambda));
  return {T, t.sum(terms)};
}

/// Log candidate conditional of one kind, given its predicted representation.
Id score_kind(Tape& t, Id mhat, std::span<const Id> values,
              const perception::InstanceBeliefs& beliefs, Attribute a,
              const ReasonerConfig& config) {
  std::vector<Id> dist;
  for (Id v : values) dist.push_back(t.frobenius_sq(t.sub(mhat, v)));
  const Id decoded = t.softmax(t.scale(t.concat(dist), -1.0 / config.tau_decode));
  std::vector<Id> jsds;
  for (const auto& cand : beliefs.candidates) jsds.push_back(t.jsd(decoded, as_column(cand.categorical(a))));
  return t.log_softmax(t.scale(t.concat(jsds), -1.0 / config.tau_candidate[index_of(a)]));
}

struct AttributeNodes {
  Id log_conditional;
  Id log_posterior;
};

AttributeNodes encoded_on_tape(Tape& t, Attribute a, const perception::InstanceBeliefs& beliefs,
                               const Encoding& enc, const ReasonerConfig& config, bool trainable,
                               std::vector<Id>& param_ids) {
  for (const Mat* m : parameters(enc)) {
    param_ids.push_back(trainable ? t.variable(*m) : t.constant(*m));
  }
  std::vector<Id> values;
  if (is_peano(enc)) {
    values.push_back(param_ids[0]);
    for (int k = 1; k < value_count(a); ++k) values.push_back(t.matmul(param_ids[1], values.back()));
  } else {
    values = param_ids;
  }
  std::array<Id, 8> R{};
  for (std::size_t i = 0; i < 8; ++i) {
    R[i] = t.linear_combination(values, beliefs.context[i].categorical(a));
  }
  const std::array<Id, 3> row1 = {R[0], R[1], R[2]};
  const std::array<Id, 3> row2 = {R[3], R[4], R[5]};
  const Id agg1 = t.sum(row1);
  const Id agg2 = t.sum(row2);
  const auto& ridge = config.ridge[index_of(a)];

  const std::array<Id, 4> as = {R[0], R[1], R[3], R[4]};
  const std::array<Id, 4> cs = {R[1], R[2], R[4], R[5]};
  const Induced un = unary_on_tape(t, as, cs, ridge[0]);
  const Induced bi = binary_on_tape(t, std::span<const Id>(R.data(), 6), dimension(enc), ridge[1]);
  const std::array<Id, 1> aa = {agg1};
  const std::array<Id, 1> ac = {agg2};
  const Induced te = unary_on_tape(t, aa, ac, ridge[2]);

  const std::array<Id, 3> residuals = {un.residual, bi.residual, te.residual};
  const Id log_post = t.log_softmax(t.scale(t.concat(residuals), -1.0 / config.tau_posterior));

  const Id m_un = t.matmul(R[7], un.T);
  const Id m_bi = t.matmul(t.matmul(R[6], bi.T), R[7]);
  const Id m_te = t.sub(t.sub(t.matmul(agg1, te.T), R[6]), R[7]);
  const std::array<Id, 3> log_cond = {score_kind(t, m_un, values, beliefs, a, config),
                                      score_kind(t, m_bi, values, beliefs, a, config),
                                      score_kind(t, m_te, values, beliefs, a, config)};
  return {t.log_mix(log_post, log_cond), log_post};
}

}  // namespace

ForwardPass forward_loss(const RpmInstance& inst, const perception::InstanceBeliefs& beliefs,
                         const Model& model, const ReasonerConfig& config,
                         const LossWeights& weights) {
  ForwardPass pass;
  Tape& t = pass.tape;
  std::vector<Id> log_factors;
  std::vector<Id> loss_terms;
  std::vector<double> aux_values;

  for (Attribute a : kAllAttributes) {
    const std::size_t ai = index_of(a);
    const auto& rel = inst.rules.at(a);
    const double w = weights.aux[ai];
    if (a == Attribute::Position) {
      AttributeTrace trace;
      try {
        const auto logs = reason_attribute(a, beliefs, model, config, trace);
        log_factors.push_back(t.constant(as_column(logs)));
        if (rel) {
          pass.aux_ce[ai] = -std::log(trace.posterior[static_cast<std::size_t>(rel->kind())]);
        }
      } catch (const SolveFailure&) {
        pass.fallback[ai] = true;
        log_factors.push_back(t.constant(Mat::Constant(8, 1, -std::log(8.0))));
        if (rel) pass.aux_ce[ai] = std::log(2.0);
      }
      if (rel && w != 0.0) loss_terms.push_back(t.scalar_constant(w * pass.aux_ce[ai]));
      continue;
    }
    try {
      const AttributeNodes n = encoded_on_tape(t, a, beliefs, model.encoding(a), config,
                                               weights.trainable[ai], pass.params[ai]);
      log_factors.push_back(n.log_conditional);
      if (rel) {
        const Id ce =
            t.scale(t.element(n.log_posterior, static_cast<Eigen::Index>(rel->kind())), -1.0);
        pass.aux_ce[ai] = t.scalar(ce);
        if (w != 0.0) loss_terms.push_back(t.scale(ce, w));
      }
    } catch (const SolveFailure&) {
      // Uniform factor; the parameter leaves stay on the tape but receive no gradient.
      pass.fallback[ai] = true;
      log_factors.push_back(t.constant(Mat::Constant(8, 1, -std::log(8.0))));
      if (rel) {
        pass.aux_ce[ai] = std::log(3.0);
        if (w != 0.0) loss_terms.push_back(t.scalar_constant(w * pass.aux_ce[ai]));
      }
    }
  }

  const Id log_answer = t.log_softmax(t.sum(log_factors));
  const Id answer_ce = t.scale(t.element(log_answer, inst.answer_index), -1.0);
  pass.answer_ce = t.scalar(answer_ce);
  for (std::size_t n = 0; n < 8; ++n) {
    pass.probability[n] = std::exp(t.value(log_answer)(static_cast<Eigen::Index>(n), 0));
  }
  loss_terms.insert(loss_terms.begin(), answer_ce);
  pass.loss = t.sum(loss_terms);
  pass.value = t.scalar(pass.loss);
  return pass;
}

Gradients backward(ForwardPass& pass) {
  pass.tape.backward(pass.loss);
  Gradients g;
  for (std::size_t ai = 0; ai < kNumAttributes; ++ai) {
    for (Id id : pass.params[ai]) {
      if (!pass.tape.requires_grad(id)) continue;
      const Mat& gr = pass.tape.grad(id);
      g[ai].push_back(gr.size() ? gr : Mat::Zero(pass.tape.value(id).rows(), pass.tape.value(id).cols()));
    }
  }
  return g;
}

}  // namespace alans
