#include "alans/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alans/error.hpp"

namespace alans {

namespace {

constexpr double kPivotThreshold = 1e-10;

std::vector<double> log_softmax(std::vector<double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : x) v -= lse;
  return x;
}

/// log-softmax of -x / tau.
std::vector<double> log_softmax_neg(std::span<const double> x, double tau) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i] / tau;
  return log_softmax(std::move(out));
}

template <std::size_t N>
std::array<double, N> exp_array(const std::vector<double>& logs) {
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = std::exp(logs[i]);
  return out;
}

/// Columns of X are the cyclic shifts of x, so x T = X t for circulant T.
Mat shift_matrix(const Vec& x) {
  const int n = static_cast<int>(x.size());
  Mat X(n, n);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < n; ++j) X(j, s) = x((j - s + n) % n);
  return X;
}

InducedOperator fit_circulant(std::span<const Vec> xs, std::span<const Vec> cs, double lambda,
                              RelationKind kind) {
  const int n = kGridSlots;
  Mat G = Mat::Zero(n, n);
  Vec h = Vec::Zero(n);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Mat X = shift_matrix(xs[i]);
    G.noalias() += X.transpose() * X;
    h.noalias() += X.transpose() * cs[i];
  }
  // ||T||_F^2 = n ||t||^2 for a circulant T.
  G.diagonal().array() += n * lambda;
  const Vec t = solve_checked(G, h);
  InducedOperator op;
  op.kind = kind;
  op.T = circulant(t);
  op.ridge = lambda;
  double r = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    r += (xs[i].transpose() * op.T - cs[i].transpose()).squaredNorm();
  }
  op.residual = r;
  op.objective = r + lambda * op.T.squaredNorm();
  return op;
}

}  // namespace

ReasonerConfig::ReasonerConfig() {
  for (auto& r : ridge) r = {1e-3, 1e-3, 1e-3};
  tau_candidate.fill(1.0);
}

void ReasonerConfig::set_ridge(RelationKind kind, double lambda) {
  for (auto& r : ridge) r[static_cast<std::size_t>(kind)] = lambda;
}

Mat solve_checked(const Mat& K, const Mat& B) {
  Eigen::ColPivHouseholderQR<Mat> qr(K);
  const auto& R = qr.matrixQR();
  const double largest = std::abs(R(0, 0));
  const double smallest = std::abs(R(K.rows() - 1, K.rows() - 1));
  if (!std::isfinite(largest) || largest == 0.0 || smallest < kPivotThreshold * largest) {
    throw SolveFailure("normal matrix is numerically singular; use a positive ridge");
  }
  return qr.solve(B);
}

double unary_objective(std::span<const Mat> as, std::span<const Mat> cs, const Mat& T,
                       double lambda) {
  double r = lambda * T.squaredNorm();
  for (std::size_t i = 0; i < as.size(); ++i) r += (as[i] * T - cs[i]).squaredNorm();
  return r;
}

double binary_objective(std::span<const Mat> as, std::span<const Mat> bs, std::span<const Mat> cs,
                        const Mat& T, double lambda) {
  double r = lambda * T.squaredNorm();
  for (std::size_t i = 0; i < as.size(); ++i) r += (as[i] * T * bs[i] - cs[i]).squaredNorm();
  return r;
}

namespace {

InducedOperator fit_unary(std::span<const Mat> as, std::span<const Mat> cs, double lambda,
                          RelationKind kind) {
  const Eigen::Index d = as.front().cols();
  Mat G = Mat::Zero(d, d);
  Mat H = Mat::Zero(d, cs.front().cols());
  for (std::size_t i = 0; i < as.size(); ++i) {
    G.noalias() += as[i].transpose() * as[i];
    H.noalias() += as[i].transpose() * cs[i];
  }
  G.diagonal().array() += lambda;
  InducedOperator op;
  op.kind = kind;
  op.T = solve_checked(G, H);
  op.ridge = lambda;
  op.residual = unary_objective(as, cs, op.T, 0.0);
  op.objective = op.residual + lambda * op.T.squaredNorm();
  return op;
}

}  // namespace

InducedOperator induce_unary(std::span<const Mat> reps, double lambda) {
  if (reps.size() != 6) throw ArityMismatch("unary induction takes the six panels of rows 1-2");
  const std::array<Mat, 4> as = {reps[0], reps[1], reps[3], reps[4]};
  const std::array<Mat, 4> cs = {reps[1], reps[2], reps[4], reps[5]};
  return fit_unary(as, cs, lambda, RelationKind::Unary);
}

InducedOperator induce_binary(std::span<const Mat> reps, double lambda) {
  if (reps.size() != 6) throw ArityMismatch("binary induction takes the six panels of rows 1-2");
  const Eigen::Index d = reps[0].rows();
  const Eigen::Index d2 = d * d;
  Mat G = Mat::Zero(d2, d2);
  Vec h = Vec::Zero(d2);
  for (std::size_t row = 0; row < 2; ++row) {
    const Mat& A = reps[3 * row];
    const Mat& B = reps[3 * row + 1];
    const Mat& C = reps[3 * row + 2];
    // vec(A X B) = (B^T kron A) vec(X), so K^T K = (B B^T) kron (A^T A).
    const Mat BBt = B * B.transpose();
    const Mat AtA = A.transpose() * A;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) G.block(i * d, j * d, d, d).noalias() += BBt(i, j) * AtA;
    const Mat AtCBt = A.transpose() * C * B.transpose();
    h += Eigen::Map<const Vec>(AtCBt.data(), d2);
  }
  G.diagonal().array() += lambda;
  const Vec t = solve_checked(G, h);
  InducedOperator op;
  op.kind = RelationKind::Binary;
  op.T = Eigen::Map<const Mat>(t.data(), d, d);
  op.ridge = lambda;
  const std::array<Mat, 2> as = {reps[0], reps[3]};
  const std::array<Mat, 2> bs = {reps[1], reps[4]};
  const std::array<Mat, 2> cs = {reps[2], reps[5]};
  op.residual = binary_objective(as, bs, cs, op.T, 0.0);
  op.objective = op.residual + lambda * op.T.squaredNorm();
  return op;
}

InducedOperator induce_ternary(const Mat& agg1, const Mat& agg2, double lambda) {
  const std::array<Mat, 1> as = {agg1};
  const std::array<Mat, 1> cs = {agg2};
  return fit_unary(as, cs, lambda, RelationKind::Ternary);
}

Mat circulant(const Vec& t) {
  const int n = static_cast<int>(t.size());
  Mat T(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) T(i, j) = t((j - i + n) % n);
  return T;
}

InducedOperator induce_position_unary(std::span<const Vec> occupancy, double lambda) {
  if (occupancy.size() != 6) throw ArityMismatch("unary induction takes the six panels of rows 1-2");
  const std::array<Vec, 4> xs = {occupancy[0], occupancy[1], occupancy[3], occupancy[4]};
  const std::array<Vec, 4> cs = {occupancy[1], occupancy[2], occupancy[4], occupancy[5]};
  return fit_circulant(xs, cs, lambda, RelationKind::Unary);
}

InducedOperator induce_position_ternary(const Vec& agg1, const Vec& agg2, double lambda) {
  const std::array<Vec, 1> xs = {agg1};
  const std::array<Vec, 1> cs = {agg2};
  return fit_circulant(xs, cs, lambda, RelationKind::Ternary);
}

std::vector<double> operator_posterior(std::span<const double> residuals, double tau) {
  auto logs = log_softmax_neg(residuals, tau);
  for (double& v : logs) v = std::exp(v);
  return logs;
}

Mat execute(const InducedOperator& op, const Mat& r7, const Mat& r8, const Mat& agg1) {
  switch (op.kind) {
    case RelationKind::Unary: return r8 * op.T;
    case RelationKind::Binary: return r7 * op.T * r8;
    case RelationKind::Ternary: return agg1 * op.T - r7 - r8;
  }
  throw Error("unknown operator kind");
}

Vec execute_position(const InducedOperator& op, const Vec& x7, const Vec& x8, const Vec& agg1) {
  Vec out;
  switch (op.kind) {
    case RelationKind::Unary: out = (x8.transpose() * op.T).transpose(); break;
    case RelationKind::Ternary: out = (agg1.transpose() * op.T).transpose() - x7 - x8; break;
    case RelationKind::Binary: throw Error("binary operators are not defined on Position");
  }
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

perception::Distribution decode(const Mat& mhat, std::span<const Mat> values, double tau) {
  std::vector<double> dist(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) dist[k] = (mhat - values[k]).squaredNorm();
  auto logs = log_softmax_neg(dist, tau);
  for (double& v : logs) v = std::exp(v);
  return logs;
}

perception::Distribution decode(const Mat& mhat, const Encoding& enc, double tau) {
  const auto values = encode_all(enc);
  return decode(mhat, values, tau);
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw SupportMismatch("distributions have different supports");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) s += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) s += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::max(0.0, s);
}

double position_distance(const Vec& predicted, std::span<const double> candidate) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < predicted.size(); ++j) {
    const double p = predicted(j);
    const double q = candidate[static_cast<std::size_t>(j)];
    const std::array<double, 2> a = {p, 1.0 - p};
    const std::array<double, 2> b = {q, 1.0 - q};
    s += jsd(a, b);
  }
  return s / static_cast<double>(predicted.size());
}

RelationKind AttributeTrace::predicted_kind() const {
  return kAllKinds[static_cast<std::size_t>(std::max_element(posterior.begin(), posterior.end()) -
                                            posterior.begin())];
}

int AnswerDistribution::predicted() const {
  return static_cast<int>(std::max_element(probability.begin(), probability.end()) -
                          probability.begin());
}

namespace {

/// Candidate conditionals of one kind from its distances.
void score_candidates(KindTrace& kt, double tau, std::array<double, 8>& log_conditional) {
  const auto logs = log_softmax_neg(kt.distance, tau);
  for (std::size_t n = 0; n < 8; ++n) {
    log_conditional[n] = logs[n];
    kt.conditional[n] = std::exp(logs[n]);
  }
}

/// log sum_b post_b P_b(n).
std::array<double, 8> log_mix(std::span<const double> log_post,
                              std::span<const std::array<double, 8>> log_cond) {
  std::array<double, 8> out{};
  for (std::size_t n = 0; n < 8; ++n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < log_post.size(); ++b) m = std::max(m, log_post[b] + log_cond[b][n]);
    double s = 0.0;
    for (std::size_t b = 0; b < log_post.size(); ++b) s += std::exp(log_post[b] + log_cond[b][n] - m);
    out[n] = m + std::log(s);
  }
  return out;
}

std::array<double, 8> reason_encoded(Attribute a, const perception::InstanceBeliefs& beliefs,
                                     const Model& model, const ReasonerConfig& config,
                                     AttributeTrace& trace) {
  const Encoding& enc = model.encoding(a);
  const auto values = encode_all(enc);
  std::array<Mat, 8> R;
  for (std::size_t i = 0; i < 8; ++i) R[i] = expected_rep(values, beliefs.context[i].categorical(a));
  const Mat agg1 = R[0] + R[1] + R[2];
  const Mat agg2 = R[3] + R[4] + R[5];
  const auto& ridge = config.ridge[index_of(a)];

  const std::span<const Mat> rows(R.data(), 6);
  trace.kinds[0].op = induce_unary(rows, ridge[0]);
  trace.kinds[1].op = induce_binary(rows, ridge[1]);
  trace.kinds[2].op = induce_ternary(agg1, agg2, ridge[2]);

  std::array<double, 3> residuals{};
  std::array<std::array<double, 8>, 3> log_cond{};
  for (std::size_t b = 0; b < 3; ++b) {
    KindTrace& kt = trace.kinds[b];
    kt.induced = true;
    residuals[b] = kt.op.objective;
    const Mat mhat = execute(kt.op, R[6], R[7], agg1);
    kt.decoded = decode(mhat, values, config.tau_decode);
    for (std::size_t n = 0; n < 8; ++n) {
      kt.distance[n] = jsd(kt.decoded, beliefs.candidates[n].categorical(a));
    }
    score_candidates(kt, config.tau_candidate[index_of(a)], log_cond[b]);
  }
  const auto log_post = log_softmax_neg(residuals, config.tau_posterior);
  trace.posterior = exp_array<3>(log_post);
  return log_mix(log_post, log_cond);
}

std::array<double, 8> reason_position(const perception::InstanceBeliefs& beliefs,
                                      const ReasonerConfig& config, AttributeTrace& trace) {
  std::array<Vec, 8> X;
  for (std::size_t i = 0; i < 8; ++i) X[i] = position_rep(beliefs.context[i].position);
  const Vec agg1 = X[0] + X[1] + X[2];
  const Vec agg2 = X[3] + X[4] + X[5];
  const auto& ridge = config.ridge[index_of(Attribute::Position)];

  trace.kinds[0].op = induce_position_unary(std::span<const Vec>(X.data(), 6), ridge[0]);
  trace.kinds[2].op = induce_position_ternary(agg1, agg2, ridge[2]);

  std::array<double, 2> residuals{};
  std::array<std::array<double, 8>, 2> log_cond{};
  for (std::size_t i = 0; i < 2; ++i) {
    KindTrace& kt = trace.kinds[i == 0 ? 0 : 2];
    kt.induced = true;
    residuals[i] = kt.op.objective;
    kt.position_prediction = execute_position(kt.op, X[6], X[7], agg1);
    for (std::size_t n = 0; n < 8; ++n) {
      kt.distance[n] = position_distance(kt.position_prediction, beliefs.candidates[n].position);
    }
    score_candidates(kt, config.tau_candidate[index_of(Attribute::Position)], log_cond[i]);
  }
  const auto log_post = log_softmax_neg(residuals, config.tau_posterior);
  trace.posterior = {std::exp(log_post[0]), 0.0, std::exp(log_post[1])};
  return log_mix(log_post, log_cond);
}

}  // namespace

std::array<double, 8> reason_attribute(Attribute a, const perception::InstanceBeliefs& beliefs,
                                       const Model& model, const ReasonerConfig& config,
                                       AttributeTrace& trace) {
  trace.attribute = a;
  return a == Attribute::Position ? reason_position(beliefs, config, trace)
                                  : reason_encoded(a, beliefs, model, config, trace);
}

AnswerDistribution answer_distribution(const perception::InstanceBeliefs& beliefs,
                                       const Model& model, const ReasonerConfig& config) {
  AnswerDistribution out;
  std::array<double, 8> total{};
  for (Attribute a : kAllAttributes) {
    AttributeTrace& trace = out.attributes[index_of(a)];
    trace.attribute = a;
    std::array<double, 8> log_p{};
    try {
      log_p = reason_attribute(a, beliefs, model, config, trace);
    } catch (const SolveFailure& e) {
      trace = AttributeTrace{};
      trace.attribute = a;
      trace.fallback = true;
      trace.fallback_reason = e.what();
      trace.posterior = {1.0 / 3, 1.0 / 3, 1.0 / 3};
      log_p.fill(-std::log(8.0));
    }
    for (std::size_t n = 0; n < 8; ++n) {
      trace.conditional[n] = std::exp(log_p[n]);
      total[n] += log_p[n];
    }
  }
  out.probability = exp_array<8>(log_softmax(std::vector<double>(total.begin(), total.end())));
  return out;
}

GeneratedPanel generate_panel(const AnswerDistribution& dist) {
  GeneratedPanel g;
  for (Attribute a : kAllAttributes) {
    const AttributeTrace& t = dist.attributes[index_of(a)];
    if (t.fallback) continue;
    const KindTrace& kt = t.kinds[static_cast<std::size_t>(t.predicted_kind())];
    if (a == Attribute::Position) {
      int mask = 0;
      for (Eigen::Index j = 0; j < kt.position_prediction.size(); ++j) {
        if (kt.position_prediction(j) > 0.5) mask |= 1 << j;
      }
      g.value[index_of(a)] = mask;
    } else {
      g.value[index_of(a)] = perception::argmax(kt.decoded);
    }
  }
  return g;
}

}  // namespace alans
