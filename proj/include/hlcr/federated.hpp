#pragma once

// Federated training: each round the server broadcasts (H, c, smoothed
// counts), a random subset of agents relabels its own entities against that
// snapshot and returns per-cluster sufficient statistics, and the server
// blends the fresh aggregate into the previous model with learning rate gamma.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlcr/inference.hpp"
#include "hlcr/model.hpp"
#include "hlcr/random.hpp"

namespace hlcr {

struct GlobalModel {
  int round = 0;
  ClusterStats stats;           // D_(t), c_(t), H_(t) per cluster
  std::vector<double> counts;   // smoothed entity counts, stand-in for N^(k)

  /// Round-0 model: H = delta^2 I, c = 0, D = I / delta^2, zero counts.
  static GlobalModel initial(int K, std::size_t F, const Hyperparams& hp);
  int K() const { return stats.K(); }
  std::size_t F() const { return stats.clusters.empty() ? 0 : stats.clusters[0].c.size(); }
};

struct AgentUpdate {
  std::string agent_id;
  int round = 0;
  std::vector<SpdMatrix> delta_D;   // (1/sigma^2) sum x x^T per cluster
  std::vector<Vec> delta_c;         // (1/sigma^2) sum x y per cluster
  std::vector<std::uint64_t> n;     // entities labeled k

  static AgentUpdate zero(std::string agent_id, int round, int K, std::size_t F);
  int K() const { return static_cast<int>(n.size()); }
  std::size_t F() const { return delta_c.empty() ? 0 : delta_c[0].size(); }

  bool operator==(const AgentUpdate&) const = default;
};

struct RoundConfig {
  double fraction = 1.0;   // share of agents sampled per round, in (0, 1]
  double gamma = 0.1;
  int rounds = 10;
  std::uint64_t seed = 0;
  /// Worker threads for the agent phase; 0 picks hardware concurrency.
  unsigned threads = 1;

  void validate() const;
};

/// Agent-side local label memory; -1 marks an entity never labeled.
using LocalLabels = std::vector<int>;

/// Relabels every entity of the agent against the broadcast model without
/// removing its own data, and accumulates the statistics of all its events.
/// The agent's previous labels (local memory) give N_i^(k); the broadcast
/// smoothed counts give N^(k).
AgentUpdate agent_local_round(const Agent& agent, const GlobalModel& model, LocalLabels& memory,
                              const Hyperparams& hp, Rng& rng, int round);

/// Sums the updates (in ascending agent id) on top of the prior precision,
/// then blends with `prev` using hp.gamma unless t == 1, and re-inverts.
GlobalModel server_aggregate(std::span<const AgentUpdate> updates, const GlobalModel& prev,
                             const Hyperparams& hp, int t);

/// Number of agents sampled per round: ceil(fraction * N), at least 1.
std::size_t agents_per_round(double fraction, std::size_t num_agents);

/// Uniform sample without replacement, returned in ascending order.
std::vector<std::size_t> sample_agents(std::size_t num_agents, std::size_t count, Rng& rng);

/// Per-agent stream seed; independent of which other agents run and in which
/// order.
std::uint64_t agent_stream_seed(std::uint64_t seed, int round, const std::string& agent_id);

struct RoundMetrics {
  int round = 0;
  double mse_train = 0.0;
  std::optional<double> mse_heldout;
  std::size_t agents_sampled = 0;
  std::int64_t label_changes = 0;
};

struct FederatedResult {
  GlobalModel model;
  std::vector<RoundMetrics> trace;
  std::vector<LocalLabels> memory;  // per agent
};

/// Labels every entity by posterior argmax against `model`; used for
/// evaluation, never for training.
std::vector<std::vector<int>> evaluation_labels(const HierDataset& data, const GlobalModel& model,
                                                const std::vector<LocalLabels>& memory,
                                                const Hyperparams& hp);

FederatedResult run_federated(const HierDataset& data, const Hyperparams& hp,
                              const RoundConfig& rc, std::span<const HeldoutEvent> heldout = {});

}  // namespace hlcr
