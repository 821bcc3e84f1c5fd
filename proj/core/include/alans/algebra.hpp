#pragma once

// Matrix encodings of attribute values.
//
// A Peano encoding represents value k as M^k * M0: M0 is the zero element and
// left multiplication by M is the successor. The independent encoding used by
// the ablation keeps one free matrix per value.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "alans/generator.hpp"
#include "alans/rpm.hpp"

namespace alans {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Number of encoded values of an attribute. Number is encoded by object count
/// 0..9, the support of its belief distribution; Position is not encoded.
int value_count(Attribute a);

struct PeanoEncoding {
  Attribute attribute = Attribute::Number;
  Mat M0;
  Mat M;
};

struct IndependentEncoding {
  Attribute attribute = Attribute::Number;
  std::vector<Mat> E;
};

using Encoding = std::variant<PeanoEncoding, IndependentEncoding>;

Attribute attribute_of(const Encoding& enc);
int dimension(const Encoding& enc);
bool is_peano(const Encoding& enc);

/// Learnable matrices of an encoding, in a fixed order (M0, M or E_0..E_{K-1}).
std::vector<Mat*> parameters(Encoding& enc);
std::vector<const Mat*> parameters(const Encoding& enc);

/// M^k * M0 by iterated multiplication, or E_k. Throws IndexOutOfDomain.
Mat encode(const Encoding& enc, int k);

/// Representations of every value, index k holding encode(enc, k).
std::vector<Mat> encode_all(const Encoding& enc);

/// sum_k dist(k) * encode(enc, k).
Mat expected_rep(const Encoding& enc, std::span<const double> dist);
/// Same, from precomputed value representations.
Mat expected_rep(std::span<const Mat> values, std::span<const double> dist);

/// Sum of the expected representations of one row.
Mat row_aggregate(const Encoding& enc, std::span<const double> d1, std::span<const double> d2,
                  std::span<const double> d3);

/// Occupancy-vector embedding of Position (the marginals themselves).
Vec position_rep(std::span<const double> marginals);

/// Random unit-Frobenius M0 and a near-orthogonal M (random orthogonal plus a
/// 0.01-scaled perturbation), redrawn until |det M| > 1e-6.
PeanoEncoding init_encoding(Attribute attribute, int d, Rng& rng);

/// Independent unit-Frobenius matrices, one per value.
IndependentEncoding init_independent(Attribute attribute, int d, Rng& rng);

/// Smallest Frobenius distance between two distinct value encodings.
double min_separation(const Encoding& enc);

enum class ModelKind : std::uint8_t { Alans, AlansInd, AlansGt };
std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view name);

/// Encodings of the four encoded attributes plus the model variant.
struct Model {
  ModelKind kind = ModelKind::Alans;
  int d = 8;
  std::array<std::optional<Encoding>, kNumAttributes> encodings;

  const Encoding& encoding(Attribute a) const;
  Encoding& encoding(Attribute a);
};

/// Freshly initialized model: independent encodings for AlansInd, Peano otherwise.
Model init_model(ModelKind kind, int d, Rng& rng);

}  // namespace alans
