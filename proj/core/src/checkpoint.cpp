#include "alans/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "alans/error.hpp"

namespace alans {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& out, const char* tag, const Mat& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols();
  for (Eigen::Index i = 0; i < m.size(); ++i) out << ' ' << fmt(m.data()[i]);
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw IoError(path.string() + ": cannot open checkpoint");
  }

  std::istringstream next(const std::string& expected_tag) {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file, expected '" + expected_tag + "'");
    ++line_;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != expected_tag) fail("expected '" + expected_tag + "', found '" + tag + "'");
    return ss;
  }

  Mat matrix(const std::string& tag) {
    auto ss = next(tag);
    Eigen::Index rows = 0, cols = 0;
    if (!(ss >> rows >> cols) || rows <= 0 || cols <= 0 || rows > 1024 || cols > 1024) {
      fail("bad matrix shape");
    }
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (!(ss >> m.data()[i])) fail("truncated matrix values");
    }
    return m;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_.string(), line_, what); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  const ReasonerConfig& r = ckpt.reasoner;
  out << "alans-checkpoint " << kCheckpointVersion << '\n';
  out << "variant " << to_string(ckpt.model.kind) << '\n';
  out << "d " << ckpt.model.d << '\n';
  out << "reasoner tau_posterior " << fmt(r.tau_posterior) << " tau_decode " << fmt(r.tau_decode)
      << '\n';
  out << "tau_candidate";
  for (double t : r.tau_candidate) out << ' ' << fmt(t);
  out << "\nridge";
  for (const auto& row : r.ridge)
    for (double l : row) out << ' ' << fmt(l);
  out << '\n';
  for (Attribute a : kEncodedAttributes) {
    const Encoding& enc = ckpt.model.encoding(a);
    const auto params = parameters(enc);
    out << "encoding " << to_string(a) << ' ' << (is_peano(enc) ? "peano" : "independent") << ' '
        << params.size() << '\n';
    for (const Mat* m : params) write_matrix(out, "matrix", *m);
  }
  for (Attribute a : kEncodedAttributes) {
    const std::size_t ai = index_of(a);
    const auto& m = ckpt.optimizer.m[ai];
    const auto& v = ckpt.optimizer.v[ai];
    out << "adam " << to_string(a) << ' ' << ckpt.optimizer.steps[ai] << '\n';
    for (const Mat& x : m) write_matrix(out, "m", x);
    for (const Mat& x : v) write_matrix(out, "v", x);
  }
  out << "end\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  LineReader in(path);
  Checkpoint ck;
  {
    auto ss = in.next("alans-checkpoint");
    int version = -1;
    ss >> version;
    if (version != kCheckpointVersion) {
      throw VersionMismatch(path.string() + ": checkpoint version " + std::to_string(version) +
                            ", expected " + std::to_string(kCheckpointVersion));
    }
  }
  try {
    std::string name;
    in.next("variant") >> name;
    ck.model.kind = model_kind_from_string(name);
    if (!(in.next("d") >> ck.model.d) || ck.model.d < 2 || ck.model.d > 32) in.fail("bad dimension");
    {
      auto ss = in.next("reasoner");
      std::string k1, k2;
      if (!(ss >> k1 >> ck.reasoner.tau_posterior >> k2 >> ck.reasoner.tau_decode) ||
          k1 != "tau_posterior" || k2 != "tau_decode") {
        in.fail("bad reasoner line");
      }
    }
    {
      auto ss = in.next("tau_candidate");
      for (double& t : ck.reasoner.tau_candidate)
        if (!(ss >> t)) in.fail("truncated tau_candidate");
    }
    {
      auto ss = in.next("ridge");
      for (auto& row : ck.reasoner.ridge)
        for (double& l : row)
          if (!(ss >> l)) in.fail("truncated ridge");
    }
    for (Attribute a : kEncodedAttributes) {
      auto ss = in.next("encoding");
      std::string attr, kind;
      std::size_t n = 0;
      ss >> attr >> kind >> n;
      if (attribute_from_string(attr) != a) in.fail("encodings out of order");
      std::vector<Mat> mats;
      for (std::size_t i = 0; i < n; ++i) {
        mats.push_back(in.matrix("matrix"));
        if (mats.back().rows() != ck.model.d || mats.back().cols() != ck.model.d) {
          in.fail("matrix does not match the encoding dimension");
        }
      }
      if (kind == "peano") {
        if (n != 2) in.fail("a Peano encoding holds exactly two matrices");
        ck.model.encodings[index_of(a)] = PeanoEncoding{a, mats[0], mats[1]};
      } else if (kind == "independent") {
        if (static_cast<int>(n) != value_count(a)) in.fail("wrong number of independent matrices");
        ck.model.encodings[index_of(a)] = IndependentEncoding{a, mats};
      } else {
        in.fail("unknown encoding kind '" + kind + "'");
      }
    }
    for (Attribute a : kEncodedAttributes) {
      const std::size_t ai = index_of(a);
      auto ss = in.next("adam");
      std::string attr;
      ss >> attr >> ck.optimizer.steps[ai];
      if (attribute_from_string(attr) != a) in.fail("optimizer states out of order");
      const std::size_t n = parameters(ck.model.encoding(a)).size();
      for (std::size_t i = 0; i < n; ++i) ck.optimizer.m[ai].push_back(in.matrix("m"));
      for (std::size_t i = 0; i < n; ++i) ck.optimizer.v[ai].push_back(in.matrix("v"));
    }
    in.next("end");
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    in.fail(e.what());
  }
  return ck;
}

}  // namespace alans
