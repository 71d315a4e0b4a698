#pragma once

// Core domain types for hierarchical latent class regression: the
// agent -> entity -> event dataset, hyperparameters, label bookkeeping, and
// per-cluster sufficient statistics.
//
// Cluster labels are 0-based everywhere in memory and 1-based in every file
// written by the io layer.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlcr/linalg.hpp"

namespace hlcr {

class InvalidShape : public std::invalid_argument {
 public:
  explicit InvalidShape(const std::string& what) : std::invalid_argument(what) {}
};

class InvalidHyperparams : public std::invalid_argument {
 public:
  explicit InvalidHyperparams(const std::string& what) : std::invalid_argument(what) {}
};

struct Hyperparams {
  double alpha = 1.0;   // global Dirichlet concentration
  double beta = 1.0;    // per-agent concentration
  double delta = 1.0;   // coefficient prior std
  double sigma = 0.1;   // observation noise std
  int K = 4;
  double gamma = 0.1;   // federated learning rate
  int T = 10;           // sweeps / rounds
  std::uint64_t seed = 0;

  double noise_precision() const { return 1.0 / (sigma * sigma); }
  double prior_precision() const { return 1.0 / (delta * delta); }

  /// Throws InvalidHyperparams naming the first violated constraint.
  void validate() const;
};

struct Event {
  Vec x;
  double y = 0.0;
};

struct Entity {
  std::string id;
  std::vector<Event> events;
};

struct Agent {
  std::string id;
  std::vector<Entity> entities;
};

struct HierDataset {
  std::size_t feature_dim = 0;
  std::vector<Agent> agents;

  std::size_t num_entities() const;
  std::size_t num_events() const;
  /// Throws InvalidShape on dimension mismatch, empty agents/entities or
  /// duplicate agent ids.
  void validate() const;
};

/// Cluster label per (agent, entity) plus counts derived from it.
struct LabelAssignment {
  int K = 0;
  std::vector<std::vector<int>> z;                  // z[i][j] in [0, K)
  std::vector<std::vector<std::int64_t>> agent_counts;  // N_i^(k)
  std::vector<std::int64_t> global_counts;          // N^(k)

  /// Builds an assignment with the shape of `data`, every label set to 0.
  static LabelAssignment zeros(const HierDataset& data, int K);

  /// Moves entity (i, j) to cluster k, keeping counts in sync.
  void relabel(std::size_t i, std::size_t j, int k);
  void unassign_counts(std::size_t i, std::size_t j);
  void assign_counts(std::size_t i, std::size_t j);
};

/// Recomputes N_i^(k) and N^(k) from the z map.
LabelAssignment recount(const LabelAssignment& labels);

struct ClusterStat {
  SpdMatrix D;  // (1/delta^2) I + (1/sigma^2) X^T X
  Vec c;        // (1/sigma^2) X^T y
  SpdMatrix H;  // D^{-1}
};

struct ClusterStats {
  std::vector<ClusterStat> clusters;

  static ClusterStats prior_only(int K, std::size_t F, const Hyperparams& hp);
  int K() const { return static_cast<int>(clusters.size()); }
};

/// Batch computation of D, c and H = invert(D) for every cluster.
ClusterStats compute_cluster_stats(const HierDataset& data, const LabelAssignment& labels,
                                   const Hyperparams& hp);

struct GroundTruth {
  std::vector<Vec> w;                  // K coefficient vectors
  std::vector<double> psi;             // global topic distribution
  std::vector<std::vector<double>> theta;  // per-agent distributions
  std::vector<std::vector<int>> z;     // true labels, 0-based
};

struct SyntheticSpec {
  std::size_t num_agents = 128;
  double mean_entities = 4.0;
  double mean_events = 5.0;
  std::size_t feature_dim = 5;
  /// When set, the last feature coordinate is a constant 1.
  bool bias = false;
};

struct SyntheticData {
  HierDataset data;
  GroundTruth truth;
};

/// Samples a dataset from the generative model: w_k ~ N(0, delta^2 I),
/// psi ~ Dir(alpha/K), theta_i ~ Dir(beta psi), z_ij ~ Cat(theta_i),
/// x ~ N(0, I), y ~ N(w_z^T x, sigma^2). Entity and event counts are
/// 1 + Poisson(mean - 1).
SyntheticData generate_synthetic(const Hyperparams& hp, const SyntheticSpec& spec,
                                 std::uint64_t rng_seed);


/// One held-out event, addressed by the (agent, entity) pair it came from.
struct HeldoutEvent {
  std::size_t agent = 0;
  std::size_t entity = 0;
  Event event;
};

struct HeldoutSplit {
  HierDataset train;
  std::vector<HeldoutEvent> heldout;
};

/// Holds out the last floor(fraction * N_ij) events of every entity, always
/// leaving at least one event for training. Agent/entity indices are kept.
HeldoutSplit split_heldout(const HierDataset& data, double fraction);

}  // namespace hlcr
