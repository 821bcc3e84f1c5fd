#include <gtest/gtest.h>

#include <functional>

#include "alans/error.hpp"
#include "alans/tape.hpp"
#include "oracles.hpp"

using alans::ad::Id;
using alans::ad::Mat;
using alans::ad::Tape;
using alans::ad::Vec;

namespace {

/// Builds a scalar from the given leaf values on a fresh tape.
using Builder = std::function<Id(Tape&, const std::vector<Id>&)>;

/// Max relative error between reverse-mode gradients and a five-point
/// central-difference stencil.
double check(const Builder& f, std::vector<Mat> inputs, double h = 1e-4) {
  Tape t;
  std::vector<Id> ids;
  for (const Mat& m : inputs) ids.push_back(t.variable(m));
  const Id out = f(t, ids);
  t.backward(out);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Mat g = t.grad(ids[i]).size() ? t.grad(ids[i]) : Mat::Zero(inputs[i].rows(), inputs[i].cols());
    for (Eigen::Index e = 0; e < inputs[i].size(); ++e) {
      auto eval = [&](double delta) {
        std::vector<Mat> moved = inputs;
        moved[i].data()[e] += delta;
        Tape u;
        std::vector<Id> uid;
        for (const Mat& m : moved) uid.push_back(u.variable(m));
        return u.scalar(f(u, uid));
      };
      const double fd = (8.0 * (eval(h) - eval(-h)) - (eval(2 * h) - eval(-2 * h))) / (12 * h);
      const double ad = g.data()[e];
      worst = std::max(worst, std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-6}));
    }
  }
  return worst;
}

Mat rnd(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_matrix(r, c, rng);
}

Mat spd(int d, std::uint64_t seed) {
  const Mat a = rnd(d, d, seed);
  return a * a.transpose() + d * Mat::Identity(d, d);
}

}  // namespace

TEST(Tape, QuadraticFormGradient) {
  Tape t;
  const Mat m0 = rnd(3, 3, 1);
  const Id x = t.variable(m0);
  t.backward(t.frobenius_sq(x));
  EXPECT_TRUE(t.grad(x).isApprox(2.0 * m0, 1e-14));
}

TEST(Tape, BackwardOnlyOnce) {
  Tape t;
  const Id x = t.variable(rnd(2, 2, 2));
  const Id y = t.frobenius_sq(x);
  t.backward(y);
  EXPECT_THROW(t.backward(y), alans::Error);
}

TEST(Tape, ConstantsNeedNoGradient) {
  Tape t;
  const Id c = t.constant(rnd(2, 2, 3));
  const Id y = t.frobenius_sq(t.matmul(c, c));
  EXPECT_FALSE(t.requires_grad(y));
}

TEST(Tape, ElementwiseAndLinearOps) {
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              return t.frobenius_sq(t.sub(t.add(x[0], t.scale(x[1], 0.7)), t.transpose(x[0])));
            }, {rnd(3, 3, 4), rnd(3, 3, 5)}),
            1e-7);
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              return t.frobenius_sq(t.add_identity(t.matmul(x[0], x[1]), 0.3));
            }, {rnd(3, 2, 6), rnd(2, 3, 7)}),
            1e-7);
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              const std::vector<double> w = {0.2, -1.5, 0.7};
              const Id s = t.sum(x);
              return t.frobenius_sq(t.sub(t.linear_combination(x, w), t.scale(s, 0.1)));
            }, {rnd(2, 2, 8), rnd(2, 2, 9), rnd(2, 2, 10)}),
            1e-7);
}

TEST(Tape, KroneckerAndVectorization) {
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              const Id k = t.kron(x[0], x[1]);
              const Id v = t.vec(t.matmul(x[0], x[1]));
              return t.frobenius_sq(t.sub(t.matmul(k, v), t.vec(t.unvec(v, 3, 3))));
            }, {rnd(3, 3, 11), rnd(3, 3, 12)}),
            1e-7);
}

TEST(Tape, LinearSolve) {
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              return t.frobenius_sq(t.solve(x[0], x[1]));
            }, {spd(4, 13), rnd(4, 2, 14)}),
            1e-7);
}

TEST(Tape, SolveAdjointMatchesAnalyticFormula) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Mat K = spd(5, 100 + s);
    const Mat B = rnd(5, 3, 200 + s);
    const Mat W = rnd(5, 3, 300 + s);
    Tape t;
    const Id k = t.variable(K);
    const Id b = t.variable(B);
    const Id x = t.solve(k, b);
    // ||X + W||^2 - ||X||^2 = 2 <W, X> + const, so dL/dX = 2 W.
    const Id loss = t.sum(std::vector<Id>{t.frobenius_sq(t.add(x, t.constant(W))),
                                          t.scale(t.frobenius_sq(x), -1.0)});
    t.backward(loss);
    const Mat X = K.lu().solve(B);
    const Mat xbar = 2.0 * W;
    const Mat bbar = K.transpose().lu().solve(xbar);
    const Mat kbar = -bbar * X.transpose();
    EXPECT_TRUE(t.grad(b).isApprox(bbar, 1e-10));
    EXPECT_TRUE(t.grad(k).isApprox(kbar, 1e-10));
  }
}

TEST(Tape, SingularSolveThrows) {
  Tape t;
  const Id k = t.variable(Mat::Zero(3, 3));
  const Id b = t.variable(rnd(3, 1, 15));
  EXPECT_THROW(t.solve(k, b), alans::SolveFailure);
}

TEST(Tape, SoftmaxFamily) {
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              const Id s = t.softmax(x[0]);
              return t.frobenius_sq(t.sub(s, t.constant(Vec::LinSpaced(5, 0.0, 0.4))));
            }, {rnd(5, 1, 16)}),
            1e-7);
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              return t.element(t.log_softmax(x[0]), 2);
            }, {rnd(5, 1, 17)}),
            1e-7);
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              return t.element(t.log(t.softmax(x[0])), 1);
            }, {rnd(4, 1, 18)}),
            1e-7);
}

TEST(Tape, JsdAndConcat) {
  Vec q(4);
  q << 0.7, 0.1, 0.15, 0.05;
  EXPECT_LE(check([q](Tape& t, const std::vector<Id>& x) {
              const Id p = t.softmax(x[0]);
              const std::vector<Id> parts = {t.jsd(p, q), t.frobenius_sq(x[0])};
              return t.element(t.log_softmax(t.concat(parts)), 0);
            }, {rnd(4, 1, 19)}),
            1e-7);
  Tape t;
  Vec p(2), r(2);
  p << 0.5, 0.5;
  r << 1.0, 0.0;
  EXPECT_NEAR(t.scalar(t.jsd(t.constant(p), r)), 0.31127812445913283, 1e-14);
}

TEST(Tape, LogMix) {
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              const Id w = t.log_softmax(x[0]);
              const std::vector<Id> ps = {t.log_softmax(x[1]), t.log_softmax(x[2]), t.log_softmax(x[3])};
              return t.element(t.log_mix(w, ps), 3);
            }, {rnd(3, 1, 20), rnd(8, 1, 21), rnd(8, 1, 22), rnd(8, 1, 23)}),
            1e-7);
  Tape t;
  Vec lw(2), a(2), b(2);
  lw << std::log(0.25), std::log(0.75);
  a << std::log(0.5), std::log(0.5);
  b << std::log(0.1), std::log(0.9);
  const std::vector<Id> ps = {t.constant(a), t.constant(b)};
  const Id m = t.log_mix(t.constant(lw), ps);
  EXPECT_NEAR(std::exp(t.value(m)(0)), 0.25 * 0.5 + 0.75 * 0.1, 1e-15);
}

TEST(Tape, PowersAccumulateOverEveryUse) {
  // d/dM ||M^3 M0||^2 through repeated use of one leaf.
  EXPECT_LE(check([](Tape& t, const std::vector<Id>& x) {
              Id v = x[1];
              for (int k = 0; k < 3; ++k) v = t.matmul(x[0], v);
              return t.frobenius_sq(v);
            }, {rnd(3, 3, 24), rnd(3, 3, 25)}),
            1e-7);
}
