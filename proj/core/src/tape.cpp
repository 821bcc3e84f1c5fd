#include "alans/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alans/error.hpp"
#include "alans/reasoner.hpp"

namespace alans::ad {

Id Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> pullback) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::accumulate(Id id, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

template <typename Fn>
Id Tape::unary_op(Id a, Mat value, Fn&& pullback) {
  return push(std::move(value), requires_grad(a), std::forward<Fn>(pullback));
}

template <typename Fn>
Id Tape::binary_op(Id a, Id b, Mat value, Fn&& pullback) {
  return push(std::move(value), requires_grad(a) || requires_grad(b), std::forward<Fn>(pullback));
}

Id Tape::variable(Mat value) { return push(std::move(value), true, [](Tape&, const Mat&) {}); }

Id Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Id Tape::add(Id a, Id b) {
  return binary_op(a, b, value(a) + value(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Id Tape::sub(Id a, Id b) {
  return binary_op(a, b, value(a) - value(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Id Tape::scale(Id a, double s) {
  return unary_op(a, s * value(a), [a, s](Tape& t, const Mat& g) { t.accumulate(a, s * g); });
}

Id Tape::matmul(Id a, Id b) {
  return binary_op(a, b, value(a) * value(b), [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Id Tape::transpose(Id a) {
  return unary_op(a, value(a).transpose(),
                  [a](Tape& t, const Mat& g) { t.accumulate(a, g.transpose()); });
}

Id Tape::add_identity(Id a, double s) {
  Mat v = value(a);
  v.diagonal().array() += s;
  return unary_op(a, std::move(v), [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Id Tape::linear_combination(std::span<const Id> xs, std::span<const double> w) {
  if (xs.size() != w.size() || xs.empty()) throw Error("linear_combination: size mismatch");
  Mat v = Mat::Zero(value(xs[0]).rows(), value(xs[0]).cols());
  bool rg = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (w[i] != 0.0) v.noalias() += w[i] * value(xs[i]);
    rg = rg || requires_grad(xs[i]);
  }
  std::vector<Id> ids(xs.begin(), xs.end());
  std::vector<double> ws(w.begin(), w.end());
  return push(std::move(v), rg, [ids = std::move(ids), ws = std::move(ws)](Tape& t, const Mat& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ws[i] != 0.0 && t.requires_grad(ids[i])) t.accumulate(ids[i], ws[i] * g);
    }
  });
}

Id Tape::sum(std::span<const Id> xs) {
  if (xs.empty()) throw Error("sum of no terms");
  Mat v = value(xs[0]);
  bool rg = requires_grad(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    v += value(xs[i]);
    rg = rg || requires_grad(xs[i]);
  }
  std::vector<Id> ids(xs.begin(), xs.end());
  return push(std::move(v), rg, [ids = std::move(ids)](Tape& t, const Mat& g) {
    for (Id id : ids) t.accumulate(id, g);
  });
}

Id Tape::solve(Id K, Id B) {
  Mat x = solve_checked(value(K), value(B));
  return binary_op(K, B, std::move(x), [K, B, self = static_cast<Id>(nodes_.size())](
                                           Tape& t, const Mat& g) {
    // X = K^{-1} B:  B_bar = K^{-T} X_bar,  K_bar = -B_bar X^T.
    const Mat bbar = Eigen::PartialPivLU<Mat>(t.value(K).transpose()).solve(g);
    if (t.requires_grad(K)) t.accumulate(K, -bbar * t.value(self).transpose());
    if (t.requires_grad(B)) t.accumulate(B, bbar);
  });
}

Id Tape::frobenius_sq(Id a) {
  return unary_op(a, Mat::Constant(1, 1, value(a).squaredNorm()),
                  [a](Tape& t, const Mat& g) { t.accumulate(a, 2.0 * g(0, 0) * t.value(a)); });
}

Id Tape::kron(Id a, Id b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  const Eigen::Index p = B.rows(), q = B.cols();
  Mat v(A.rows() * p, A.cols() * q);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) v.block(i * p, j * q, p, q) = A(i, j) * B;
  return binary_op(a, b, std::move(v), [a, b](Tape& t, const Mat& g) {
    const Mat& A = t.value(a);
    const Mat& B = t.value(b);
    const Eigen::Index p = B.rows(), q = B.cols();
    const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
    Mat abar = Mat::Zero(A.rows(), A.cols());
    Mat bbar = Mat::Zero(p, q);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        const auto blk = g.block(i * p, j * q, p, q);
        if (ga) abar(i, j) = blk.cwiseProduct(B).sum();
        if (gb) bbar.noalias() += A(i, j) * blk;
      }
    }
    if (ga) t.accumulate(a, abar);
    if (gb) t.accumulate(b, bbar);
  });
}

Id Tape::vec(Id a) {
  const Mat& A = value(a);
  const Eigen::Index rows = A.rows(), cols = A.cols();
  Mat v = Eigen::Map<const Mat>(A.data(), rows * cols, 1);
  return unary_op(a, std::move(v), [a, rows, cols](Tape& t, const Mat& g) {
    t.accumulate(a, Eigen::Map<const Mat>(g.data(), rows, cols));
  });
}

Id Tape::unvec(Id a, Eigen::Index rows, Eigen::Index cols) {
  const Mat& A = value(a);
  if (A.size() != rows * cols) throw Error("unvec: size mismatch");
  Mat v = Eigen::Map<const Mat>(A.data(), rows, cols);
  const Eigen::Index r0 = A.rows(), c0 = A.cols();
  return unary_op(a, std::move(v), [a, r0, c0](Tape& t, const Mat& g) {
    t.accumulate(a, Eigen::Map<const Mat>(g.data(), r0, c0));
  });
}

Id Tape::concat(std::span<const Id> scalars) {
  Mat v(static_cast<Eigen::Index>(scalars.size()), 1);
  bool rg = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    v(static_cast<Eigen::Index>(i), 0) = scalar(scalars[i]);
    rg = rg || requires_grad(scalars[i]);
  }
  std::vector<Id> ids(scalars.begin(), scalars.end());
  return push(std::move(v), rg, [ids = std::move(ids)](Tape& t, const Mat& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate(ids[i], Mat::Constant(1, 1, g(static_cast<Eigen::Index>(i), 0)));
    }
  });
}

Id Tape::element(Id v, Eigen::Index i) {
  return unary_op(v, Mat::Constant(1, 1, value(v)(i, 0)), [v, i](Tape& t, const Mat& g) {
    Mat e = Mat::Zero(t.value(v).rows(), 1);
    e(i, 0) = g(0, 0);
    t.accumulate(v, e);
  });
}

Id Tape::softmax(Id v) {
  const Mat& x = value(v);
  const double m = x.maxCoeff();
  Mat y = (x.array() - m).exp().matrix();
  y /= y.sum();
  return unary_op(v, std::move(y), [v, self = static_cast<Id>(nodes_.size())](Tape& t,
                                                                             const Mat& g) {
    const Mat& y = t.value(self);
    const double dot = y.cwiseProduct(g).sum();
    t.accumulate(v, y.cwiseProduct((g.array() - dot).matrix()));
  });
}

Id Tape::log_softmax(Id v) {
  const Mat& x = value(v);
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  Mat y = (x.array() - lse).matrix();
  return unary_op(v, std::move(y), [v, self = static_cast<Id>(nodes_.size())](Tape& t,
                                                                             const Mat& g) {
    const Mat p = t.value(self).array().exp().matrix();
    t.accumulate(v, g - p * g.sum());
  });
}

Id Tape::log(Id a) {
  return unary_op(a, value(a).array().log().matrix(), [a](Tape& t, const Mat& g) {
    t.accumulate(a, g.cwiseQuotient(t.value(a)));
  });
}

Id Tape::jsd(Id p, const Vec& q) {
  const Mat& P = value(p);
  if (P.rows() != q.size() || P.cols() != 1) throw SupportMismatch("distributions have different supports");
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double m = 0.5 * (P(i, 0) + q(i));
    if (P(i, 0) > 0.0) s += 0.5 * P(i, 0) * std::log2(P(i, 0) / m);
    if (q(i) > 0.0) s += 0.5 * q(i) * std::log2(q(i) / m);
  }
  return unary_op(p, Mat::Constant(1, 1, std::max(0.0, s)), [p, q](Tape& t, const Mat& g) {
    const Mat& P = t.value(p);
    Mat d(P.rows(), 1);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      // d/dp_i = 0.5 log2(p_i / m_i); the remaining terms cancel.
      // An underflowed p_i would give -inf; its upstream softmax weight is zero anyway.
      const double pi = std::max(P(i, 0), std::numeric_limits<double>::min());
      d(i, 0) = 0.5 * std::log2(pi / (0.5 * (pi + q(i))));
    }
    t.accumulate(p, g(0, 0) * d);
  });
}

Id Tape::log_mix(Id log_w, std::span<const Id> log_ps) {
  const Mat& lw = value(log_w);
  const Eigen::Index kinds = lw.rows();
  if (static_cast<Eigen::Index>(log_ps.size()) != kinds) throw Error("log_mix: size mismatch");
  const Eigen::Index n = value(log_ps[0]).rows();
  Mat out(n, 1);
  bool rg = requires_grad(log_w);
  for (Id id : log_ps) rg = rg || requires_grad(id);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < kinds; ++b) m = std::max(m, lw(b, 0) + value(log_ps[b])(i, 0));
    double s = 0.0;
    for (Eigen::Index b = 0; b < kinds; ++b) s += std::exp(lw(b, 0) + value(log_ps[b])(i, 0) - m);
    out(i, 0) = m + std::log(s);
  }
  std::vector<Id> ids(log_ps.begin(), log_ps.end());
  return push(std::move(out), rg,
              [log_w, ids = std::move(ids), self = static_cast<Id>(nodes_.size())](Tape& t,
                                                                                  const Mat& g) {
                const Mat& lw = t.value(log_w);
                const Mat& y = t.value(self);
                Mat gw = Mat::Zero(lw.rows(), 1);
                for (std::size_t b = 0; b < ids.size(); ++b) {
                  const Eigen::Index bi = static_cast<Eigen::Index>(b);
                  // Responsibility of kind b for candidate n.
                  const Mat r = (lw(bi, 0) + t.value(ids[b]).array() - y.array()).exp().matrix();
                  const Mat gr = r.cwiseProduct(g);
                  gw(bi, 0) = gr.sum();
                  if (t.requires_grad(ids[b])) t.accumulate(ids[b], gr);
                }
                t.accumulate(log_w, gw);
              });
}

void Tape::backward(Id root) {
  if (backward_done_) throw Error("backward already ran on this tape");
  backward_done_ = true;
  Node& r = nodes_[static_cast<std::size_t>(root)];
  if (!r.requires_grad) return;
  r.grad = Mat::Ones(r.value.rows(), r.value.cols());
  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0 || !n.pullback) continue;
    n.pullback(*this, n.grad);
  }
}

}  // namespace alans::ad
