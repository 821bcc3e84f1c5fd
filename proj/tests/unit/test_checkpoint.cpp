#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "alans/checkpoint.hpp"
#include "alans/error.hpp"

using namespace alans;
namespace fs = std::filesystem;

namespace {

Checkpoint sample(ModelKind kind, std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint ck;
  ck.model = init_model(kind, 4, rng);
  ck.reasoner.tau_posterior = 0.1;
  ck.reasoner.tau_candidate[index_of(Attribute::Color)] = 1.0 / 3.0;
  ck.reasoner.set_ridge(RelationKind::Ternary, 0.1);
  ck.optimizer = AdamState::zeros_like(ck.model);
  for (Attribute a : kEncodedAttributes) {
    const std::size_t ai = index_of(a);
    ck.optimizer.steps[ai] = 7 + static_cast<std::int64_t>(ai);
    for (Mat& m : ck.optimizer.m[ai]) m = Mat::Random(m.rows(), m.cols()) * 1e-3;
    for (Mat& v : ck.optimizer.v[ai]) v = Mat::Random(v.rows(), v.cols()).cwiseAbs() * 1e-7;
  }
  return ck;
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / name; }

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  for (ModelKind kind : {ModelKind::Alans, ModelKind::AlansInd, ModelKind::AlansGt}) {
    const Checkpoint ck = sample(kind, 11);
    const fs::path p = tmp("alans_rt.ckpt");
    save_checkpoint(p, ck);
    const Checkpoint back = load_checkpoint(p);
    EXPECT_EQ(back.model.kind, kind);
    EXPECT_EQ(back.model.d, 4);
    EXPECT_EQ(back.reasoner.tau_posterior, ck.reasoner.tau_posterior);
    EXPECT_EQ(back.reasoner.tau_decode, ck.reasoner.tau_decode);
    EXPECT_EQ(back.reasoner.tau_candidate, ck.reasoner.tau_candidate);
    EXPECT_EQ(back.reasoner.ridge, ck.reasoner.ridge);
    for (Attribute a : kEncodedAttributes) {
      const std::size_t ai = index_of(a);
      const auto x = parameters(back.model.encoding(a));
      const auto y = parameters(ck.model.encoding(a));
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(*x[j], *y[j]);
      EXPECT_EQ(back.optimizer.steps[ai], ck.optimizer.steps[ai]);
      ASSERT_EQ(back.optimizer.m[ai].size(), ck.optimizer.m[ai].size());
      for (std::size_t j = 0; j < x.size(); ++j) {
        EXPECT_EQ(back.optimizer.m[ai][j], ck.optimizer.m[ai][j]);
        EXPECT_EQ(back.optimizer.v[ai][j], ck.optimizer.v[ai][j]);
      }
    }
    // Saving the loaded checkpoint reproduces the same bytes.
    const fs::path q = tmp("alans_rt2.ckpt");
    save_checkpoint(q, back);
    EXPECT_EQ(lines_of(p), lines_of(q));
  }
}

TEST(Checkpoint, VersionMismatch) {
  const fs::path p = tmp("alans_ver.ckpt");
  save_checkpoint(p, sample(ModelKind::Alans, 1));
  auto lines = lines_of(p);
  lines[0] = "alans-checkpoint 2";
  write_lines(p, lines);
  EXPECT_THROW(load_checkpoint(p), VersionMismatch);
}

TEST(Checkpoint, MissingFile) {
  EXPECT_THROW(load_checkpoint(tmp("alans_does_not_exist.ckpt")), IoError);
}

TEST(Checkpoint, TruncationReportsTheLine) {
  const fs::path p = tmp("alans_trunc.ckpt");
  save_checkpoint(p, sample(ModelKind::Alans, 2));
  auto lines = lines_of(p);
  // Line 8 is the first matrix of Number; cut it short.
  ASSERT_EQ(lines[7].rfind("matrix", 0), 0u);
  lines[7] = lines[7].substr(0, lines[7].size() / 2);
  write_lines(p, lines);
  try {
    load_checkpoint(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 8u);
    EXPECT_EQ(e.path(), p.string());
  }
}

TEST(Checkpoint, EncodingsOutOfOrder) {
  const fs::path p = tmp("alans_order.ckpt");
  save_checkpoint(p, sample(ModelKind::Alans, 3));
  auto lines = lines_of(p);
  // Swap the Number and Type encoding blocks (three lines each).
  std::swap_ranges(lines.begin() + 6, lines.begin() + 9, lines.begin() + 9);
  write_lines(p, lines);
  try {
    load_checkpoint(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Checkpoint, WrongMatrixCount) {
  const fs::path p = tmp("alans_count.ckpt");
  save_checkpoint(p, sample(ModelKind::AlansInd, 4));
  auto lines = lines_of(p);
  ASSERT_EQ(lines[6].rfind("encoding number independent 10", 0), 0u);
  lines[6] = "encoding number peano 10";
  write_lines(p, lines);
  EXPECT_THROW(load_checkpoint(p), ParseError);
}

TEST(Checkpoint, UnknownVariant) {
  const fs::path p = tmp("alans_variant.ckpt");
  save_checkpoint(p, sample(ModelKind::Alans, 5));
  auto lines = lines_of(p);
  lines[1] = "variant resnet";
  write_lines(p, lines);
  try {
    load_checkpoint(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
