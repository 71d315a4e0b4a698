#include "hlcr/checkpoint.hpp"

#include "hlcr/dataset_io.hpp"
#include "hlcr/random.hpp"
#include "json.hpp"

namespace hlcr {

using nlohmann::json;

ClusterStats Checkpoint::stats() const {
  ClusterStats s;
  s.clusters.reserve(D.size());
  for (std::size_t k = 0; k < D.size(); ++k) s.clusters.push_back({D[k], c[k], invert(D[k])});
  return s;
}

std::map<std::pair<std::string, std::string>, int> Checkpoint::label_map() const {
  std::map<std::pair<std::string, std::string>, int> m;
  for (const auto& r : labels) m[{r.agent_id, r.entity_id}] = r.z;
  return m;
}

Checkpoint checkpoint_from_training(const HierDataset& data, const Hyperparams& hp,
                                    const LabelAssignment& labels, const ClusterStats& stats,
                                    int sweeps, double heldout_fraction) {
  Checkpoint ck;
  ck.mode = "centralized";
  ck.hp = hp;
  ck.feature_dim = data.feature_dim;
  ck.iteration = sweeps;
  for (const auto& cl : stats.clusters) {
    ck.D.push_back(cl.D);
    ck.c.push_back(cl.c);
  }
  ck.counts.assign(labels.global_counts.begin(), labels.global_counts.end());
  for (std::size_t i = 0; i < data.agents.size(); ++i)
    for (std::size_t j = 0; j < data.agents[i].entities.size(); ++j)
      ck.labels.push_back({data.agents[i].id, data.agents[i].entities[j].id, labels.z[i][j]});
  ck.heldout_fraction = heldout_fraction;
  ck.rng_algorithm = std::string(kRngAlgorithm);
  ck.rng_seed = hp.seed;
  return ck;
}

Checkpoint checkpoint_from_federated(const HierDataset& data, const Hyperparams& hp,
                                     const RoundConfig& rc, const FederatedResult& result,
                                     double heldout_fraction) {
  Checkpoint ck;
  ck.mode = "federated";
  ck.hp = hp;
  ck.hp.gamma = rc.gamma;
  ck.hp.T = rc.rounds;
  ck.feature_dim = data.feature_dim;
  ck.iteration = result.model.round;
  for (const auto& cl : result.model.stats.clusters) {
    ck.D.push_back(cl.D);
    ck.c.push_back(cl.c);
  }
  ck.counts = result.model.counts;
  // Labels under the final model, the same ones the round trace is scored with.
  const auto z = evaluation_labels(data, result.model, result.memory, ck.hp);
  for (std::size_t i = 0; i < data.agents.size(); ++i)
    for (std::size_t j = 0; j < data.agents[i].entities.size(); ++j)
      ck.labels.push_back({data.agents[i].id, data.agents[i].entities[j].id, z[i][j]});
  ck.fraction = rc.fraction;
  ck.heldout_fraction = heldout_fraction;
  ck.rng_algorithm = std::string(kRngAlgorithm);
  ck.rng_seed = rc.seed;
  return ck;
}

std::string checkpoint_to_json(const Checkpoint& ck) {
  json j;
  j["version"] = ck.version;
  j["mode"] = ck.mode;
  j["hyperparams"] = hyperparams_to_json(ck.hp);
  j["K"] = ck.K();
  j["F"] = ck.feature_dim;
  j["iteration"] = ck.iteration;
  json clusters = json::array();
  for (int k = 0; k < ck.K(); ++k) {
    const auto d = ck.D[k].row_major();
    clusters.push_back({{"D", std::vector<double>(d.begin(), d.end())},
                        {"c", ck.c[k]},
                        {"count", ck.counts.at(k)}});
  }
  j["clusters"] = std::move(clusters);
  json labels = json::array();
  for (const auto& r : ck.labels)
    labels.push_back({{"agent_id", r.agent_id}, {"entity_id", r.entity_id}, {"z", r.z + 1}});
  j["labels"] = std::move(labels);
  if (ck.fraction) j["fraction"] = *ck.fraction;
  j["heldout_fraction"] = ck.heldout_fraction;
  j["rng"] = {{"algorithm", ck.rng_algorithm}, {"seed", ck.rng_seed}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint ck;
  try {
    const json j = json::parse(text);
    ck.version = j.at("version").get<int>();
    if (ck.version != kCheckpointVersion)
      throw DataFormatError("unsupported checkpoint version " + std::to_string(ck.version));
    ck.mode = j.at("mode").get<std::string>();
    ck.hp = hyperparams_from_json(j.at("hyperparams"));
    ck.feature_dim = j.at("F").get<std::size_t>();
    ck.iteration = j.at("iteration").get<int>();
    const int K = j.at("K").get<int>();
    const json& clusters = j.at("clusters");
    if (K < 1 || clusters.size() != static_cast<std::size_t>(K) || K != ck.hp.K)
      throw DataFormatError("checkpoint cluster count does not match K");
    for (const auto& cl : clusters) {
      auto d = cl.at("D").get<std::vector<double>>();
      auto c = cl.at("c").get<std::vector<double>>();
      if (d.size() != ck.feature_dim * ck.feature_dim || c.size() != ck.feature_dim)
        throw DataFormatError("checkpoint cluster payload does not match F");
      ck.D.emplace_back(ck.feature_dim, std::move(d));
      ck.c.push_back(std::move(c));
      ck.counts.push_back(cl.at("count").get<double>());
    }
    for (const auto& r : j.at("labels")) {
      const int z = r.at("z").get<int>();
      if (z < 1 || z > K) throw DataFormatError("checkpoint label out of range");
      ck.labels.push_back({r.at("agent_id").get<std::string>(), r.at("entity_id").get<std::string>(), z - 1});
    }
    if (j.contains("fraction")) ck.fraction = j.at("fraction").get<double>();
    ck.heldout_fraction = j.at("heldout_fraction").get<double>();
    ck.rng_algorithm = j.at("rng").at("algorithm").get<std::string>();
    ck.rng_seed = j.at("rng").at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("malformed checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace hlcr
