#pragma once

// Newline-delimited dataset files.
//
// Line 1 is a header record:
//   {"format":"alans-rpm","version":1,"regime":...,"phase":...,"strategy":...,"count":N}
// Every following line is one instance:
//   {"id":...,"regime":...,"phase":...,"driver":"number"|"position",
//    "rules":[{"attribute":...,"kind":...,"variant":...,"params":{...}}, ...],
//    "context":[panel x8],"candidates":[panel x8],"answer_index":k}
// with panel = {"position_mask":1..511,"type":t,"size":s,"color":c}.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "alans/generator.hpp"
#include "alans/rpm.hpp"

namespace alans {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetHeader {
  Regime regime = Regime::Systematicity;
  Phase phase = Phase::Train;
  DistractorStrategy strategy = DistractorStrategy::PerturbOne;
  std::size_t count = 0;
};

/// Serializes one instance as a single-line record (no trailing newline).
std::string to_record(const RpmInstance& inst);
/// Parses one record; throws Error on malformed content.
RpmInstance from_record(const std::string& line);

class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, const DatasetHeader& header);
  void write(const RpmInstance& inst);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Streams instances from a dataset file.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetHeader& header() const { return header_; }
  /// Next instance, or nullopt at end of file. Throws ParseError.
  std::optional<RpmInstance> next();

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  DatasetHeader header_;
  std::size_t line_ = 0;
};

std::vector<RpmInstance> load_dataset(const std::filesystem::path& path);

/// FNV-1a 64-bit checksum of the file bytes, as 16 hex digits.
std::string checksum_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace alans
