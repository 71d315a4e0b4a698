#include "hlcr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hlcr {

CountsBuffer counts_for(const LabelAssignment& labels, std::size_t agent) {
  CountsBuffer buf;
  buf.agent.assign(labels.agent_counts[agent].begin(), labels.agent_counts[agent].end());
  buf.global.assign(labels.global_counts.begin(), labels.global_counts.end());
  return buf;
}

std::vector<double> label_prior(const CountsView& counts, const Hyperparams& hp) {
  const std::size_t K = counts.global.size();
  if (counts.agent.size() != K) throw InvalidShape("label_prior: agent/global count sizes differ");
  double agent_total = 0.0;
  double global_total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    agent_total += counts.agent[k];
    global_total += counts.global[k];
  }
  const double Kd = static_cast<double>(K);
  std::vector<double> p(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double base = (counts.global[k] + hp.alpha / Kd) / (global_total + hp.alpha);
    p[k] = (counts.agent[k] + hp.beta * base) / (agent_total + hp.beta);
  }
  return p;
}

double PredictiveGaussian::log_density(double y) const {
  const double r = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

std::vector<PredictiveGaussian> predictive_sequence(const Entity& entity, const SpdMatrix& a0_inv,
                                                    std::span<const double> b0,
                                                    const Hyperparams& hp, PredictiveForm form) {
  const double s = hp.noise_precision();
  const double noise_var = hp.sigma * hp.sigma;
  SpdMatrix a_inv = a0_inv;
  Vec b(b0.begin(), b0.end());
  std::vector<PredictiveGaussian> out;
  out.reserve(entity.events.size());

  for (const auto& ev : entity.events) {
    if (form == PredictiveForm::kPrior) {
      const Vec ax = mat_vec(a_inv, ev.x);
      const double v = dot(ev.x, ax);
      out.push_back({dot(b, ax), noise_var + v});
      a_inv.add_outer(ax, -s / (1.0 + s * v));
      a_inv.symmetrize();
    } else {
      rank1_update_inverse_inplace(a_inv, ev.x, s);
      const Vec ax = mat_vec(a_inv, ev.x);
      const double r = 1.0 - s * dot(ev.x, ax);
      out.push_back({dot(b, ax) / r, noise_var / r});
    }
    for (std::size_t f = 0; f < b.size(); ++f) b[f] += s * ev.x[f] * ev.y;
  }
  return out;
}

double sequential_predictive(const Entity& entity, const SpdMatrix& a0_inv,
                             std::span<const double> b0, const Hyperparams& hp) {
  const auto seq = predictive_sequence(entity, a0_inv, b0, hp, PredictiveForm::kPrior);
  double total = 0.0;
  for (std::size_t n = 0; n < seq.size(); ++n) total += seq[n].log_density(entity.events[n].y);
  return total;
}

LabelPosterior LabelPosterior::from_log(std::vector<double> log_probs) {
  LabelPosterior post;
  post.log_probs = std::move(log_probs);
  const double mx = *std::max_element(post.log_probs.begin(), post.log_probs.end());
  post.probs.resize(post.log_probs.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < post.probs.size(); ++k) {
    post.probs[k] = std::exp(post.log_probs[k] - mx);
    sum += post.probs[k];
  }
  for (auto& p : post.probs) p /= sum;
  return post;
}

int LabelPosterior::argmax() const {
  return static_cast<int>(std::max_element(log_probs.begin(), log_probs.end()) - log_probs.begin());
}

LabelPosterior label_posterior(const Entity& entity, const ClusterStats& stats,
                               const CountsView& counts, const Hyperparams& hp) {
  const std::vector<double> prior = label_prior(counts, hp);
  if (prior.size() != stats.clusters.size()) throw InvalidShape("label_posterior: K mismatch");
  std::vector<double> logp(prior.size());
  for (std::size_t k = 0; k < prior.size(); ++k) {
    const ClusterStat& cl = stats.clusters[k];
    logp[k] = std::log(prior[k]) + sequential_predictive(entity, cl.H, cl.c, hp);
  }
  return LabelPosterior::from_log(std::move(logp));
}

int sample_label(const Entity& entity, const ClusterStats& stats, const CountsView& counts,
                 const Hyperparams& hp, Rng& rng) {
  if (stats.K() == 1) return 0;
  const LabelPosterior post = label_posterior(entity, stats, counts, hp);
  return static_cast<int>(rng.categorical(post.probs));
}

void add_entity(ClusterStats& stats, const Entity& entity, int k, const Hyperparams& hp) {
  const double s = hp.noise_precision();
  ClusterStat& cl = stats.clusters.at(k);
  for (const auto& ev : entity.events) {
    cl.D.add_outer(ev.x, s);
    for (std::size_t f = 0; f < cl.c.size(); ++f) cl.c[f] += s * ev.x[f] * ev.y;
    rank1_update_inverse_inplace(cl.H, ev.x, s);
  }
}

int remove_entity(ClusterStats& stats, const Entity& entity, int k, const Hyperparams& hp) {
  const double s = hp.noise_precision();
  ClusterStat& cl = stats.clusters.at(k);
  int rebuilds = 0;
  for (auto it = entity.events.rbegin(); it != entity.events.rend(); ++it) {
    cl.D.add_outer(it->x, -s);
    for (std::size_t f = 0; f < cl.c.size(); ++f) cl.c[f] -= s * it->x[f] * it->y;
    if (!rank1_downdate_inverse_inplace(cl.H, it->x, s)) {
      cl.D.symmetrize();
      cl.H = invert(cl.D);
      ++rebuilds;
    }
  }
  return rebuilds;
}

double predict(std::span<const double> x_new, int k, const ClusterStats& stats) {
  const ClusterStat& cl = stats.clusters.at(k);
  return dot(cl.c, mat_vec(cl.H, x_new));
}

int choose_label(const Entity& history, const ClusterStats& stats, const CountsView& counts,
                 const Hyperparams& hp, LabelMode mode, Rng* rng) {
  const LabelPosterior post = label_posterior(history, stats, counts, hp);
  if (mode == LabelMode::kArgmax) return post.argmax();
  if (rng == nullptr) throw std::invalid_argument("choose_label: sampling mode needs an rng");
  return static_cast<int>(rng->categorical(post.probs));
}

EntityPrediction predict_entity(const Entity& history, std::span<const double> x_new,
                                std::optional<int> stored_label, const ClusterStats& stats,
                                const CountsView& counts, const Hyperparams& hp, LabelMode mode,
                                Rng* rng) {
  const int label =
      stored_label ? *stored_label : choose_label(history, stats, counts, hp, mode, rng);
  return {predict(x_new, label, stats), label};
}

namespace {

std::vector<Vec> ridge_coefficients(const ClusterStats& stats) {
  std::vector<Vec> w;
  w.reserve(stats.clusters.size());
  for (const auto& cl : stats.clusters) w.push_back(mat_vec(cl.H, cl.c));
  return w;
}

}  // namespace

double mse_with_labels(const HierDataset& data, const std::vector<std::vector<int>>& z,
                       const ClusterStats& stats) {
  const auto w = ridge_coefficients(stats);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    for (std::size_t j = 0; j < data.agents[i].entities.size(); ++j) {
      const Vec& wk = w[z[i][j]];
      for (const auto& ev : data.agents[i].entities[j].events) {
        const double r = ev.y - dot(wk, ev.x);
        sum += r * r;
        ++n;
      }
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

std::optional<double> mse_heldout(std::span<const HeldoutEvent> heldout,
                                  const std::vector<std::vector<int>>& z,
                                  const ClusterStats& stats) {
  if (heldout.empty()) return std::nullopt;
  const auto w = ridge_coefficients(stats);
  double sum = 0.0;
  for (const auto& h : heldout) {
    const double r = h.event.y - dot(w[z[h.agent][h.entity]], h.event.x);
    sum += r * r;
  }
  return sum / static_cast<double>(heldout.size());
}

GibbsSampler::GibbsSampler(const HierDataset& data, const Hyperparams& hp, Rng& rng,
                           GibbsOptions opts)
    : data_(&data), hp_(hp), opts_(opts) {
  hp_.validate();
  LabelAssignment init;
  init.K = hp.K;
  init.z.resize(data.agents.size());
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    init.z[i].resize(data.agents[i].entities.size());
    for (auto& k : init.z[i]) k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hp.K)));
  }
  labels_ = recount(init);
  stats_ = compute_cluster_stats(data, labels_, hp_);
}

GibbsSampler::GibbsSampler(const HierDataset& data, const Hyperparams& hp, LabelAssignment init,
                           GibbsOptions opts)
    : data_(&data), hp_(hp), opts_(opts) {
  hp_.validate();
  if (init.K != hp.K) throw InvalidShape("initial labels have K=" + std::to_string(init.K));
  labels_ = recount(init);
  stats_ = compute_cluster_stats(data, labels_, hp_);
}

void GibbsSampler::rebuild_inverses() {
  for (auto& cl : stats_.clusters) {
    cl.D.symmetrize();
    cl.H = invert(cl.D);
  }
}

SweepTrace GibbsSampler::sweep(Rng& rng) {
  SweepTrace tr;
  for (std::size_t i = 0; i < data_->agents.size(); ++i) {
    const Agent& agent = data_->agents[i];
    for (std::size_t j = 0; j < agent.entities.size(); ++j) {
      const Entity& entity = agent.entities[j];
      const int old_label = labels_.z[i][j];
      remove_entity(stats_, entity, old_label, hp_);
      labels_.unassign_counts(i, j);

      const CountsBuffer counts = counts_for(labels_, i);
      int new_label = 0;
      if (hp_.K == 1) {
        tr.log_posterior += sequential_predictive(entity, stats_.clusters[0].H, stats_.clusters[0].c, hp_);
      } else {
        const LabelPosterior post = label_posterior(entity, stats_, counts.view(), hp_);
        new_label = static_cast<int>(rng.categorical(post.probs));
        tr.log_posterior += post.log_probs[new_label];
      }

      labels_.z[i][j] = new_label;
      labels_.assign_counts(i, j);
      add_entity(stats_, entity, new_label, hp_);
      if (new_label != old_label) ++tr.label_changes;
    }
  }
  ++sweeps_;
  tr.sweep = sweeps_;
  if (opts_.rebuild_every > 0 && sweeps_ % opts_.rebuild_every == 0) rebuild_inverses();
  return tr;
}

TrainResult train_centralized(const HierDataset& data, const Hyperparams& hp, Rng& rng,
                              GibbsOptions opts, std::span<const HeldoutEvent> heldout) {
  data.validate();
  GibbsSampler sampler(data, hp, rng, opts);
  TrainResult out;
  out.trace.reserve(hp.T);
  for (int t = 0; t < hp.T; ++t) {
    SweepTrace tr = sampler.sweep(rng);
    tr.mse_train = mse_with_labels(data, sampler.labels().z, sampler.stats());
    tr.mse_heldout = mse_heldout(heldout, sampler.labels().z, sampler.stats());
    out.trace.push_back(tr);
  }
  out.labels = sampler.labels();
  out.stats = sampler.stats();
  return out;
}

}  // namespace hlcr
