#include "alans/dataset_io.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "alans/error.hpp"

namespace alans {

namespace {

using Json = nlohmann::ordered_json;

Json panel_to_json(const PanelSpec& p) {
  return Json{{"position_mask", p.position}, {"type", p.type}, {"size", p.size},
              {"color", p.color}};
}

PanelSpec panel_from_json(const Json& j) {
  PanelSpec p;
  p.position = j.at("position_mask").get<std::uint16_t>();
  p.type = j.at("type").get<int>();
  p.size = j.at("size").get<int>();
  p.color = j.at("color").get<int>();
  if (!p.valid()) throw Error("panel attribute outside its domain");
  return p;
}

Json relation_to_json(const RelationInstance& r) {
  Json params = Json::object();
  if (r.variant == Variant::Progression) params["step"] = r.step;
  if (r.variant == Variant::DistributeThree) {
    params["cycle"] = r.cycle == Cycle::Left ? "left" : "right";
    if (r.triple) params["triple"] = *r.triple;
  }
  if (r.implied) params["implied"] = true;
  return Json{{"attribute", to_string(r.attribute)},
              {"kind", to_string(r.kind())},
              {"variant", to_string(r.variant)},
              {"params", params}};
}

RelationInstance relation_from_json(const Json& j) {
  RelationInstance r;
  r.attribute = attribute_from_string(j.at("attribute").get<std::string>());
  r.variant = variant_from_string(j.at("variant").get<std::string>());
  const Json& params = j.at("params");
  if (r.variant == Variant::Progression) r.step = params.at("step").get<int>();
  if (r.variant == Variant::DistributeThree) {
    const auto cycle = params.at("cycle").get<std::string>();
    if (cycle != "left" && cycle != "right") throw Error("unknown cycle '" + cycle + "'");
    r.cycle = cycle == "left" ? Cycle::Left : Cycle::Right;
    if (params.contains("triple")) r.triple = params.at("triple").get<std::array<int, 3>>();
  }
  r.implied = params.value("implied", false);
  if (kind_from_string(j.at("kind").get<std::string>()) != r.kind()) {
    throw Error("relation kind does not match its variant");
  }
  return r;
}

DatasetHeader header_from_json(const Json& j) {
  if (j.value("format", std::string()) != "alans-rpm") throw Error("not an alans-rpm dataset");
  DatasetHeader h;
  h.regime = regime_from_string(j.at("regime").get<std::string>());
  h.phase = phase_from_string(j.at("phase").get<std::string>());
  h.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  h.count = j.at("count").get<std::size_t>();
  return h;
}

}  // namespace

std::string to_record(const RpmInstance& inst) {
  Json rules = Json::array();
  for (const auto& rel : inst.rules.relations) {
    if (rel) rules.push_back(relation_to_json(*rel));
  }
  Json context = Json::array();
  for (const auto& p : inst.context) context.push_back(panel_to_json(p));
  Json candidates = Json::array();
  for (const auto& p : inst.candidates) candidates.push_back(panel_to_json(p));
  Json j{{"id", inst.id},
         {"regime", to_string(inst.regime)},
         {"phase", to_string(inst.phase)},
         {"driver", inst.rules.driver == LayoutDriver::Number ? "number" : "position"},
         {"rules", rules},
         {"context", context},
         {"candidates", candidates},
         {"answer_index", inst.answer_index}};
  return j.dump();
}

RpmInstance from_record(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
  try {
    RpmInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.regime = regime_from_string(j.at("regime").get<std::string>());
    inst.phase = phase_from_string(j.at("phase").get<std::string>());
    const auto driver = j.at("driver").get<std::string>();
    if (driver != "number" && driver != "position") throw Error("unknown driver '" + driver + "'");
    inst.rules.driver = driver == "number" ? LayoutDriver::Number : LayoutDriver::Position;
    for (const auto& r : j.at("rules")) {
      const RelationInstance rel = relation_from_json(r);
      if (inst.rules.at(rel.attribute)) throw Error("duplicate rule for an attribute");
      inst.rules.at(rel.attribute) = rel;
    }
    const auto& context = j.at("context");
    const auto& candidates = j.at("candidates");
    if (context.size() != 8 || candidates.size() != 8) throw Error("expected 8 context and 8 candidate panels");
    for (std::size_t i = 0; i < 8; ++i) {
      inst.context[i] = panel_from_json(context[i]);
      inst.candidates[i] = panel_from_json(candidates[i]);
    }
    inst.answer_index = j.at("answer_index").get<int>();
    if (inst.answer_index < 0 || inst.answer_index > 7) throw Error("answer_index out of range");
    return inst;
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, const DatasetHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError(path.string() + ": cannot open for writing");
  Json h{{"format", "alans-rpm"},
         {"version", kDatasetFormatVersion},
         {"regime", to_string(header.regime)},
         {"phase", to_string(header.phase)},
         {"strategy", to_string(header.strategy)},
         {"count", header.count}};
  out_ << h.dump() << '\n';
}

void DatasetWriter::write(const RpmInstance& inst) {
  out_ << to_record(inst) << '\n';
  if (!out_) throw IoError(path_.string() + ": write failed");
}

void DatasetWriter::close() {
  out_.close();
  if (out_.fail()) throw IoError(path_.string() + ": close failed");
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw IoError(path.string() + ": cannot open dataset");
  std::string line;
  if (!std::getline(in_, line)) throw ParseError(path.string(), 1, "empty dataset file");
  line_ = 1;
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), 1, std::string("malformed header: ") + e.what());
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw ParseError(path.string(), 1, "header carries no format version");
  }
  if (const int v = j["version"].get<int>(); v != kDatasetFormatVersion) {
    throw VersionMismatch(path.string() + ": dataset format version " + std::to_string(v) +
                          ", expected " + std::to_string(kDatasetFormatVersion));
  }
  try {
    header_ = header_from_json(j);
  } catch (const std::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

std::optional<RpmInstance> DatasetReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    try {
      return from_record(line);
    } catch (const Error& e) {
      throw ParseError(path_.string(), line_, e.what());
    }
  }
  return std::nullopt;
}

std::vector<RpmInstance> load_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  std::vector<RpmInstance> out;
  out.reserve(reader.header().count);
  while (auto inst = reader.next()) out.push_back(std::move(*inst));
  return out;
}

std::string checksum_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for checksum");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  Json relations = Json::object();
  for (const auto& [phase, set] : m.relations) relations[phase] = set;
  Json j{{"format", "alans-rpm-manifest"},
         {"version", m.format_version},
         {"regime", to_string(m.regime)},
         {"strategy", to_string(m.strategy)},
         {"count", m.count},
         {"folds", {{"train", m.folds.train}, {"val", m.folds.val}, {"test", m.folds.test}}},
         {"seed", m.seed},
         {"val_pool", m.val_pool},
         {"files", m.files},
         {"checksums", m.checksums},
         {"relations", relations}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  if (j.value("version", -1) != DatasetManifest::kFormatVersion) {
    throw VersionMismatch(path.string() + ": unsupported manifest version");
  }
  DatasetManifest m;
  m.regime = regime_from_string(j.at("regime").get<std::string>());
  m.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  m.count = j.at("count").get<std::size_t>();
  m.folds.train = j.at("folds").at("train").get<std::size_t>();
  m.folds.val = j.at("folds").at("val").get<std::size_t>();
  m.folds.test = j.at("folds").at("test").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.val_pool = j.at("val_pool").get<std::string>();
  m.files = j.at("files").get<std::map<std::string, std::string>>();
  m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
  for (const auto& [phase, set] : j.at("relations").items()) {
    m.relations[phase] = set.get<std::set<std::string>>();
  }
  return m;
}

}  // namespace alans
