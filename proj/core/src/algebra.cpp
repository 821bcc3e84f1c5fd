#include "alans/algebra.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "alans/error.hpp"

namespace alans {

namespace {

Mat gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(rows, cols);
  // Column-major fill keeps draws reproducible independent of Eigen internals.
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

Mat unit_frobenius(int d, Rng& rng) {
  for (;;) {
    Mat m = gaussian(d, d, rng);
    const double norm = m.norm();
    if (norm > 1e-12) return m / norm;
  }
}

}  // namespace

int value_count(Attribute a) {
  switch (a) {
    case Attribute::Number: return kGridSlots + 1;
    case Attribute::Position: break;
    default: return AttrDomain::of(a).cardinality;
  }
  throw Error("Position has no value encoding");
}

Attribute attribute_of(const Encoding& enc) {
  return std::visit([](const auto& e) { return e.attribute; }, enc);
}

int dimension(const Encoding& enc) {
  if (const auto* p = std::get_if<PeanoEncoding>(&enc)) return static_cast<int>(p->M0.rows());
  const auto& e = std::get<IndependentEncoding>(enc);
  return e.E.empty() ? 0 : static_cast<int>(e.E.front().rows());
}

bool is_peano(const Encoding& enc) { return std::holds_alternative<PeanoEncoding>(enc); }

std::vector<Mat*> parameters(Encoding& enc) {
  if (auto* p = std::get_if<PeanoEncoding>(&enc)) return {&p->M0, &p->M};
  std::vector<Mat*> out;
  for (Mat& m : std::get<IndependentEncoding>(enc).E) out.push_back(&m);
  return out;
}

std::vector<const Mat*> parameters(const Encoding& enc) {
  if (const auto* p = std::get_if<PeanoEncoding>(&enc)) return {&p->M0, &p->M};
  std::vector<const Mat*> out;
  for (const Mat& m : std::get<IndependentEncoding>(enc).E) out.push_back(&m);
  return out;
}

Mat encode(const Encoding& enc, int k) {
  const Attribute a = attribute_of(enc);
  if (k < 0 || k >= value_count(a)) {
    throw IndexOutOfDomain("value " + std::to_string(k) + " outside the " +
                           std::string(to_string(a)) + " domain");
  }
  if (const auto* p = std::get_if<PeanoEncoding>(&enc)) {
    Mat r = p->M0;
    for (int i = 0; i < k; ++i) r = p->M * r;
    return r;
  }
  return std::get<IndependentEncoding>(enc).E[static_cast<std::size_t>(k)];
}

std::vector<Mat> encode_all(const Encoding& enc) {
  const int n = value_count(attribute_of(enc));
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(n));
  if (const auto* p = std::get_if<PeanoEncoding>(&enc)) {
    out.push_back(p->M0);
    for (int k = 1; k < n; ++k) out.push_back(p->M * out.back());
    return out;
  }
  return std::get<IndependentEncoding>(enc).E;
}

Mat expected_rep(std::span<const Mat> values, std::span<const double> dist) {
  if (values.size() != dist.size()) throw SupportMismatch("distribution and encoding sizes differ");
  Mat r = Mat::Zero(values.front().rows(), values.front().cols());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (dist[k] != 0.0) r.noalias() += dist[k] * values[k];
  }
  return r;
}

Mat expected_rep(const Encoding& enc, std::span<const double> dist) {
  const auto values = encode_all(enc);
  return expected_rep(values, dist);
}

Mat row_aggregate(const Encoding& enc, std::span<const double> d1, std::span<const double> d2,
                  std::span<const double> d3) {
  const auto values = encode_all(enc);
  return expected_rep(values, d1) + expected_rep(values, d2) + expected_rep(values, d3);
}

Vec position_rep(std::span<const double> marginals) {
  return Eigen::Map<const Vec>(marginals.data(), static_cast<Eigen::Index>(marginals.size()));
}

PeanoEncoding init_encoding(Attribute attribute, int d, Rng& rng) {
  if (d < 2) throw Error("encoding dimension must be at least 2");
  PeanoEncoding enc;
  enc.attribute = attribute;
  enc.M0 = unit_frobenius(d, rng);
  for (;;) {
    Eigen::HouseholderQR<Mat> qr(gaussian(d, d, rng));
    Mat q = qr.householderQ();
    Mat m = q + 0.01 * gaussian(d, d, rng);
    if (std::abs(m.determinant()) > 1e-6) {
      enc.M = std::move(m);
      break;
    }
  }
  return enc;
}

IndependentEncoding init_independent(Attribute attribute, int d, Rng& rng) {
  if (d < 2) throw Error("encoding dimension must be at least 2");
  IndependentEncoding enc;
  enc.attribute = attribute;
  for (int k = 0; k < value_count(attribute); ++k) enc.E.push_back(unit_frobenius(d, rng));
  return enc;
}

double min_separation(const Encoding& enc) {
  const auto values = encode_all(enc);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j)
      best = std::min(best, (values[i] - values[j]).norm());
  return best;
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Alans: return "alans";
    case ModelKind::AlansInd: return "alans-ind";
    case ModelKind::AlansGt: return "alans-gt";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "alans") return ModelKind::Alans;
  if (name == "alans-ind") return ModelKind::AlansInd;
  if (name == "alans-gt") return ModelKind::AlansGt;
  throw Error("unknown variant '" + std::string(name) + "'");
}

const Encoding& Model::encoding(Attribute a) const {
  const auto& e = encodings[index_of(a)];
  if (!e) throw Error(std::string(to_string(a)) + " has no encoding");
  return *e;
}

Encoding& Model::encoding(Attribute a) {
  auto& e = encodings[index_of(a)];
  if (!e) throw Error(std::string(to_string(a)) + " has no encoding");
  return *e;
}

Model init_model(ModelKind kind, int d, Rng& rng) {
  Model m;
  m.kind = kind;
  m.d = d;
  for (Attribute a : kEncodedAttributes) {
    if (kind == ModelKind::AlansInd) {
      m.encodings[index_of(a)] = init_independent(a, d, rng);
    } else {
      m.encodings[index_of(a)] = init_encoding(a, d, rng);
    }
  }
  return m;
}

}  // namespace alans
