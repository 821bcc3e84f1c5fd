#include <gtest/gtest.h>

#include <cmath>

#include "alans/pipeline.hpp"
#include "alans/reasoner.hpp"

using namespace alans;

namespace {

struct Case {
  RpmInstance inst;
  perception::InstanceBeliefs beliefs;
  Model model;
};

Case make_case(std::uint64_t seed, ModelKind kind, int d, double eps) {
  Rng rng(seed);
  Case c;
  const RuleSet rules = sample_ruleset({Regime::Systematicity, Phase::Train}, rng);
  c.inst = generate_instance(rules, DistractorStrategy::PerturbOne, rng);
  c.model = init_model(kind, d, rng);
  c.beliefs = perception::perceive(c.inst, {eps, eps}, rng);
  return c;
}

}  // namespace

TEST(ForwardLoss, AgreesWithTheReasoner) {
  const ReasonerConfig config;
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (ModelKind kind : {ModelKind::Alans, ModelKind::AlansInd}) {
      const Case c = make_case(s, kind, 4, 0.1);
      const ForwardPass pass = forward_loss(c.inst, c.beliefs, c.model, config, LossWeights::joint(0.5));
      const AnswerDistribution dist = answer_distribution(c.beliefs, c.model, config);
      for (std::size_t n = 0; n < 8; ++n) {
        EXPECT_NEAR(pass.probability[n], dist.probability[n], 1e-10);
      }
      double expected = -std::log(dist.probability[static_cast<std::size_t>(c.inst.answer_index)]);
      EXPECT_NEAR(pass.answer_ce, expected, 1e-9);
      for (Attribute a : kAllAttributes) {
        const auto& rel = c.inst.rules.at(a);
        if (!rel) continue;
        const double post = dist.attributes[index_of(a)].posterior[static_cast<std::size_t>(rel->kind())];
        EXPECT_NEAR(pass.aux_ce[index_of(a)], -std::log(post), 1e-8);
        expected += 0.5 * pass.aux_ce[index_of(a)];
      }
      EXPECT_NEAR(pass.value, expected, 1e-8);
    }
  }
}

TEST(ForwardLoss, ZeroAuxWeightIsPureAnswerCrossEntropy) {
  const Case c = make_case(3, ModelKind::Alans, 4, 0.1);
  const ForwardPass pass = forward_loss(c.inst, c.beliefs, c.model, ReasonerConfig(), LossWeights::joint(0.0));
  EXPECT_DOUBLE_EQ(pass.value, pass.answer_ce);
}

TEST(ForwardLoss, UniformAnswerCostsLogEight) {
  Case c = make_case(4, ModelKind::Alans, 4, 0.1);
  for (auto& b : c.beliefs.candidates) b = c.beliefs.candidates[0];
  ForwardPass pass = forward_loss(c.inst, c.beliefs, c.model, ReasonerConfig(), LossWeights::joint(0.0));
  EXPECT_NEAR(pass.answer_ce, std::log(8.0), 1e-12);
  // Every parameter setting gives the same loss, so the gradient vanishes.
  const Gradients g = backward(pass);
  for (Attribute a : kEncodedAttributes) {
    for (const Mat& m : g[index_of(a)]) EXPECT_LE(m.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardLoss, FrozenAttributesGetNoGradient) {
  Case c = make_case(5, ModelKind::Alans, 3, 0.1);
  ForwardPass pass = forward_loss(c.inst, c.beliefs, c.model, ReasonerConfig(),
                                  LossWeights::single(Attribute::Size, 1.0));
  const Gradients g = backward(pass);
  for (Attribute a : kEncodedAttributes) {
    if (a == Attribute::Size) {
      ASSERT_EQ(g[index_of(a)].size(), 2u);
      EXPECT_GT(g[index_of(a)][0].norm(), 0.0);
    } else {
      EXPECT_TRUE(g[index_of(a)].empty());
    }
  }
}

TEST(Backward, MatchesCentralDifferences) {
  const ReasonerConfig config;
  const LossWeights weights = LossWeights::joint(0.5);
  for (std::uint64_t s = 0; s < 3; ++s) {
    for (ModelKind kind : {ModelKind::Alans, ModelKind::AlansInd}) {
      Case c = make_case(10 + s, kind, 3, 0.1);
      ForwardPass pass = forward_loss(c.inst, c.beliefs, c.model, config, weights);
      const Gradients g = backward(pass);
      for (Attribute a : kEncodedAttributes) {
        auto params = parameters(c.model.encoding(a));
        for (std::size_t j = 0; j < params.size(); ++j) {
          for (Eigen::Index e = 0; e < params[j]->size(); ++e) {
            double& x = params[j]->data()[e];
            const double x0 = x;
            const double h = 1e-5;
            x = x0 + h;
            const double up = forward_loss(c.inst, c.beliefs, c.model, config, weights).value;
            x = x0 - h;
            const double down = forward_loss(c.inst, c.beliefs, c.model, config, weights).value;
            x = x0;
            const double fd = (up - down) / (2 * h);
            const double ad = g[index_of(a)][j].data()[e];
            ASSERT_NEAR(ad, fd, 1e-6 + 1e-5 * std::abs(fd)) << to_string(a) << " " << j << " " << e;
          }
        }
      }
    }
  }
}
