#pragma once

// Collapsed Gibbs sampling for hierarchical latent class regression.
//
// The label of an agent-entity pair is resampled from
//   p(z = k | rest) ∝ prior(k | counts) * p(y_ij | X_ij, data currently in k)
// where the likelihood is evaluated event by event with a rank-one updated
// inverse Gram matrix, and everything is accumulated in log space.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hlcr/linalg.hpp"
#include "hlcr/model.hpp"
#include "hlcr/random.hpp"

namespace hlcr {

/// Label counts seen by one entity: its agent's N_i^(k) and the global N^(k),
/// both with the entity itself excluded. Real-valued so that smoothed
/// federated counts fit the same interface.
struct CountsView {
  std::span<const double> agent;
  std::span<const double> global;
};

/// Owns the buffers behind a CountsView built from integer counts.
struct CountsBuffer {
  std::vector<double> agent;
  std::vector<double> global;

  CountsView view() const { return {agent, global}; }
};

/// Counts for agent i as currently stored in `labels` (no exclusion applied).
CountsBuffer counts_for(const LabelAssignment& labels, std::size_t agent);

/// Collapsed asymmetric-Dirichlet prior over the K labels:
///   (N_i^k + beta (N^k + alpha/K) / (sum N + alpha)) / (sum N_i + beta)
std::vector<double> label_prior(const CountsView& counts, const Hyperparams& hp);

struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 1.0;

  double log_density(double y) const;
};

/// Which algebraic route produces the per-event predictive.
enum class PredictiveForm {
  /// N(b_{n-1}^T A_{n-1}^{-1} x, sigma^2 + x^T A_{n-1}^{-1} x)
  kPrior,
  /// N(b_{n-1}^T A_n^{-1} x / r, sigma^2 / r), r = 1 - x^T A_n^{-1} x / sigma^2
  kPosterior,
};

/// Per-event predictive distributions for an entity's events given
/// A_0^{-1} and b_0 built from the cluster data excluding this entity.
std::vector<PredictiveGaussian> predictive_sequence(const Entity& entity, const SpdMatrix& a0_inv,
                                                    std::span<const double> b0,
                                                    const Hyperparams& hp,
                                                    PredictiveForm form = PredictiveForm::kPrior);

/// log p(y_ij | X_ij, cluster data) as the sum of sequential predictive
/// log-densities.
double sequential_predictive(const Entity& entity, const SpdMatrix& a0_inv,
                             std::span<const double> b0, const Hyperparams& hp);

struct LabelPosterior {
  std::vector<double> log_probs;  // unnormalized
  std::vector<double> probs;      // normalized by log-sum-exp

  static LabelPosterior from_log(std::vector<double> log_probs);
  /// Lowest index among the maxima.
  int argmax() const;
};

/// Full conditional over labels for one entity. `stats` and `counts` must
/// both exclude the entity.
LabelPosterior label_posterior(const Entity& entity, const ClusterStats& stats,
                               const CountsView& counts, const Hyperparams& hp);

int sample_label(const Entity& entity, const ClusterStats& stats, const CountsView& counts,
                 const Hyperparams& hp, Rng& rng);

/// Adds the entity's events to cluster k in order n = 1..N_ij, maintaining
/// D, c and H.
void add_entity(ClusterStats& stats, const Entity& entity, int k, const Hyperparams& hp);
/// Removes the entity's events from cluster k in order n = N_ij..1. A
/// singular downdate rebuilds H from D. Returns the number of rebuilds.
int remove_entity(ClusterStats& stats, const Entity& entity, int k, const Hyperparams& hp);

/// Ridge prediction c^T H x for cluster k.
double predict(std::span<const double> x_new, int k, const ClusterStats& stats);

enum class LabelMode { kArgmax, kSample };

struct EntityPrediction {
  double y_hat = 0.0;
  int label = 0;
};

/// Two-step prediction: reuse `stored_label` when the pair was trained,
/// otherwise pick a label from the posterior over the entity's history
/// (prior only when the history is empty), then apply the ridge predictor.
/// kSample requires `rng`.
EntityPrediction predict_entity(const Entity& history, std::span<const double> x_new,
                                std::optional<int> stored_label, const ClusterStats& stats,
                                const CountsView& counts, const Hyperparams& hp,
                                LabelMode mode = LabelMode::kArgmax, Rng* rng = nullptr);

/// Label choice of step one of predict_entity.
int choose_label(const Entity& history, const ClusterStats& stats, const CountsView& counts,
                 const Hyperparams& hp, LabelMode mode, Rng* rng);

/// Mean squared error of the ridge predictor on every event of `data` using
/// the given labels.
double mse_with_labels(const HierDataset& data, const std::vector<std::vector<int>>& z,
                       const ClusterStats& stats);
/// Same over held-out events; nullopt when there are none.
std::optional<double> mse_heldout(std::span<const HeldoutEvent> heldout,
                                  const std::vector<std::vector<int>>& z,
                                  const ClusterStats& stats);

struct SweepTrace {
  int sweep = 0;
  std::int64_t label_changes = 0;
  /// Sum over entities of log(prior * likelihood) of the sampled label.
  double log_posterior = 0.0;
  double mse_train = 0.0;
  std::optional<double> mse_heldout;
};

struct GibbsOptions {
  /// Rebuild every H from its D after this many sweeps; <= 0 disables.
  int rebuild_every = 50;
};

/// Sequential collapsed Gibbs sampler over all agent-entity labels. Sweeps
/// visit agents, then entities, in ascending order.
class GibbsSampler {
 public:
  /// Labels initialized uniformly at random from `rng`.
  GibbsSampler(const HierDataset& data, const Hyperparams& hp, Rng& rng, GibbsOptions opts = {});
  GibbsSampler(const HierDataset& data, const Hyperparams& hp, LabelAssignment init,
               GibbsOptions opts = {});

  /// One full sweep. Fills sweep index, label changes and log posterior.
  SweepTrace sweep(Rng& rng);
  void rebuild_inverses();

  const LabelAssignment& labels() const { return labels_; }
  const ClusterStats& stats() const { return stats_; }
  int sweeps_done() const { return sweeps_; }

 private:
  const HierDataset* data_;
  Hyperparams hp_;
  GibbsOptions opts_;
  LabelAssignment labels_;
  ClusterStats stats_;
  int sweeps_ = 0;
};

struct TrainResult {
  LabelAssignment labels;
  ClusterStats stats;
  std::vector<SweepTrace> trace;
};

/// Random initialization followed by hp.T sweeps. When `heldout` is given its
/// MSE is traced per sweep.
TrainResult train_centralized(const HierDataset& data, const Hyperparams& hp, Rng& rng,
                              GibbsOptions opts = {},
                              std::span<const HeldoutEvent> heldout = {});

}  // namespace hlcr
