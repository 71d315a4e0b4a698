#pragma once

// Model checkpoints as JSON. H is never stored; it is recomputed from D on
// load. Labels are 1-based in the file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hlcr/federated.hpp"
#include "hlcr/model.hpp"

namespace hlcr {

inline constexpr int kCheckpointVersion = 1;

struct LabelRecord {
  std::string agent_id;
  std::string entity_id;
  int z = 0;  // 0-based in memory
};

struct Checkpoint {
  int version = kCheckpointVersion;
  std::string mode = "centralized";  // or "federated"
  Hyperparams hp;
  std::size_t feature_dim = 0;
  int iteration = 0;  // sweeps or rounds completed
  std::vector<SpdMatrix> D;
  std::vector<Vec> c;
  std::vector<double> counts;
  std::vector<LabelRecord> labels;
  std::optional<double> fraction;  // federated runs only
  double heldout_fraction = 0.0;
  std::string rng_algorithm;
  std::uint64_t rng_seed = 0;

  int K() const { return static_cast<int>(D.size()); }
  /// D and c copied, H = invert(D).
  ClusterStats stats() const;
  /// (agent_id, entity_id) -> 0-based label.
  std::map<std::pair<std::string, std::string>, int> label_map() const;
};

Checkpoint checkpoint_from_training(const HierDataset& data, const Hyperparams& hp,
                                    const LabelAssignment& labels, const ClusterStats& stats,
                                    int sweeps, double heldout_fraction);
/// Entity labels are the argmax labels under the final global model.
Checkpoint checkpoint_from_federated(const HierDataset& data, const Hyperparams& hp,
                                     const RoundConfig& rc, const FederatedResult& result,
                                     double heldout_fraction);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hlcr
