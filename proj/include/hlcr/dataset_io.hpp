#pragma once

// Dataset files.
//
// CSV layout: header `agent_id,entity_id,f_1,...,f_F,y`, one event per row.
// Rows sharing (agent_id, entity_id) are the events of one entity, in row
// order; agents and entities keep their order of first appearance. Ids may
// not contain commas or newlines.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "hlcr/model.hpp"
#include "json.hpp"

namespace hlcr {

class DataFormatError : public std::runtime_error {
 public:
  explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

void write_dataset_csv(std::ostream& out, const HierDataset& data);
/// Throws DataFormatError with the offending line number on ragged rows,
/// unparsable or non-finite numbers, and malformed headers.
HierDataset read_dataset_csv(std::istream& in);

void save_dataset_csv(const std::filesystem::path& path, const HierDataset& data);
HierDataset load_dataset_csv(const std::filesystem::path& path);

struct DatasetManifest {
  std::size_t feature_dim = 0;
  std::size_t num_agents = 0;
  std::size_t num_entities = 0;
  std::size_t num_events = 0;
  std::uint64_t seed = 0;
  Hyperparams generator;
  SyntheticSpec spec;
  std::string ground_truth_path;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Labels are written 1-based.
nlohmann::json ground_truth_to_json(const GroundTruth& truth, const HierDataset& data);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

nlohmann::json hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

/// Reads a whole file; throws std::runtime_error when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hlcr
