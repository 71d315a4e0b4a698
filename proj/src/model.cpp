#include "hlcr/model.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "hlcr/random.hpp"

namespace hlcr {

void Hyperparams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(alpha)) throw InvalidHyperparams("alpha must be positive");
  if (!positive(beta)) throw InvalidHyperparams("beta must be positive");
  if (!positive(delta)) throw InvalidHyperparams("delta must be positive");
  if (!positive(sigma)) throw InvalidHyperparams("sigma must be positive");
  if (K < 1) throw InvalidHyperparams("K must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidHyperparams("gamma must lie in [0, 1]");
  if (T < 1) throw InvalidHyperparams("T must be >= 1");
}

std::size_t HierDataset::num_entities() const {
  std::size_t n = 0;
  for (const auto& a : agents) n += a.entities.size();
  return n;
}

std::size_t HierDataset::num_events() const {
  std::size_t n = 0;
  for (const auto& a : agents)
    for (const auto& e : a.entities) n += e.events.size();
  return n;
}

void HierDataset::validate() const {
  if (feature_dim == 0) throw InvalidShape("feature dimension must be positive");
  std::set<std::string> ids;
  for (const auto& a : agents) {
    if (!ids.insert(a.id).second) throw InvalidShape("duplicate agent id '" + a.id + "'");
    if (a.entities.empty()) throw InvalidShape("agent '" + a.id + "' has no entities");
    for (const auto& e : a.entities) {
      if (e.events.empty())
        throw InvalidShape("entity '" + e.id + "' of agent '" + a.id + "' has no events");
      for (const auto& ev : e.events) {
        if (ev.x.size() != feature_dim)
          throw InvalidShape("event of entity '" + e.id + "' has dimension " +
                             std::to_string(ev.x.size()) + ", expected " +
                             std::to_string(feature_dim));
      }
    }
  }
}

LabelAssignment LabelAssignment::zeros(const HierDataset& data, int K) {
  LabelAssignment out;
  out.K = K;
  out.z.resize(data.agents.size());
  for (std::size_t i = 0; i < data.agents.size(); ++i)
    out.z[i].assign(data.agents[i].entities.size(), 0);
  return recount(out);
}

void LabelAssignment::unassign_counts(std::size_t i, std::size_t j) {
  const int k = z[i][j];
  --agent_counts[i][k];
  --global_counts[k];
}

void LabelAssignment::assign_counts(std::size_t i, std::size_t j) {
  const int k = z[i][j];
  ++agent_counts[i][k];
  ++global_counts[k];
}

void LabelAssignment::relabel(std::size_t i, std::size_t j, int k) {
  unassign_counts(i, j);
  z[i][j] = k;
  assign_counts(i, j);
}

LabelAssignment recount(const LabelAssignment& labels) {
  LabelAssignment out;
  out.K = labels.K;
  out.z = labels.z;
  out.global_counts.assign(labels.K, 0);
  out.agent_counts.assign(labels.z.size(), std::vector<std::int64_t>(labels.K, 0));
  for (std::size_t i = 0; i < labels.z.size(); ++i) {
    for (int k : labels.z[i]) {
      if (k < 0 || k >= labels.K) throw InvalidShape("label out of range");
      ++out.agent_counts[i][k];
      ++out.global_counts[k];
    }
  }
  return out;
}

ClusterStats ClusterStats::prior_only(int K, std::size_t F, const Hyperparams& hp) {
  ClusterStats s;
  s.clusters.reserve(K);
  for (int k = 0; k < K; ++k) {
    s.clusters.push_back({SpdMatrix::scaled_identity(F, hp.prior_precision()), Vec(F, 0.0),
                          SpdMatrix::scaled_identity(F, hp.delta * hp.delta)});
  }
  return s;
}

ClusterStats compute_cluster_stats(const HierDataset& data, const LabelAssignment& labels,
                                   const Hyperparams& hp) {
  const std::size_t F = data.feature_dim;
  const double s = hp.noise_precision();
  if (labels.z.size() != data.agents.size()) throw InvalidShape("labels/agents mismatch");

  std::vector<SpdMatrix> gram(labels.K, SpdMatrix(F));
  std::vector<Vec> moment(labels.K, Vec(F, 0.0));
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    const auto& agent = data.agents[i];
    if (labels.z[i].size() != agent.entities.size()) throw InvalidShape("labels/entities mismatch");
    for (std::size_t j = 0; j < agent.entities.size(); ++j) {
      const int k = labels.z[i][j];
      for (const auto& ev : agent.entities[j].events) {
        gram[k].add_outer(ev.x, 1.0);
        for (std::size_t f = 0; f < F; ++f) moment[k][f] += ev.x[f] * ev.y;
      }
    }
  }

  ClusterStats out;
  out.clusters.reserve(labels.K);
  for (int k = 0; k < labels.K; ++k) {
    SpdMatrix d = SpdMatrix::scaled_identity(F, hp.prior_precision());
    d.blend(1.0, gram[k], s);
    Vec c = moment[k];
    for (auto& v : c) v *= s;
    SpdMatrix h = invert(d);
    out.clusters.push_back({std::move(d), std::move(c), std::move(h)});
  }
  return out;
}

SyntheticData generate_synthetic(const Hyperparams& hp, const SyntheticSpec& spec,
                                 std::uint64_t rng_seed) {
  hp.validate();
  if (spec.num_agents < 1) throw InvalidShape("number of agents must be >= 1");
  if (spec.feature_dim < 1) throw InvalidShape("feature dimension must be >= 1");
  if (spec.bias && spec.feature_dim < 2) throw InvalidShape("bias needs feature dimension >= 2");
  if (!(spec.mean_entities >= 1.0) || !(spec.mean_events >= 1.0))
    throw InvalidShape("mean entity/event counts must be >= 1");

  Rng rng(rng_seed);
  const std::size_t F = spec.feature_dim;
  const int K = hp.K;
  SyntheticData out;
  GroundTruth& truth = out.truth;

  truth.w.resize(K);
  for (auto& w : truth.w) {
    w.resize(F);
    for (auto& v : w) v = hp.delta * rng.normal();
  }

  const std::vector<double> global_conc(K, hp.alpha / K);
  truth.psi = rng.dirichlet(global_conc);

  std::vector<double> agent_conc(K);
  for (int k = 0; k < K; ++k) agent_conc[k] = hp.beta * truth.psi[k];

  const int width = std::max(4, static_cast<int>(std::to_string(spec.num_agents).size()));
  HierDataset& data = out.data;
  data.feature_dim = F;
  data.agents.resize(spec.num_agents);
  truth.theta.resize(spec.num_agents);
  truth.z.resize(spec.num_agents);
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    Agent& agent = data.agents[i];
    char buf[32];
    std::snprintf(buf, sizeof buf, "a%0*zu", width, i);
    agent.id = buf;
    truth.theta[i] = rng.dirichlet(agent_conc);

    const std::size_t n_entities = 1 + rng.poisson(spec.mean_entities - 1.0);
    agent.entities.resize(n_entities);
    truth.z[i].resize(n_entities);
    for (std::size_t j = 0; j < n_entities; ++j) {
      Entity& entity = agent.entities[j];
      std::snprintf(buf, sizeof buf, "e%03zu", j);
      entity.id = buf;
      const int k = static_cast<int>(rng.categorical(truth.theta[i]));
      truth.z[i][j] = k;

      const std::size_t n_events = 1 + rng.poisson(spec.mean_events - 1.0);
      entity.events.resize(n_events);
      for (auto& ev : entity.events) {
        ev.x.resize(F);
        for (auto& v : ev.x) v = rng.normal();
        if (spec.bias) ev.x.back() = 1.0;
        ev.y = dot(truth.w[k], ev.x) + hp.sigma * rng.normal();
      }
    }
  }
  return out;
}


HeldoutSplit split_heldout(const HierDataset& data, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidShape("held-out fraction must be in [0, 1)");
  HeldoutSplit out;
  out.train.feature_dim = data.feature_dim;
  out.train.agents.reserve(data.agents.size());
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    const Agent& agent = data.agents[i];
    Agent kept{agent.id, {}};
    kept.entities.reserve(agent.entities.size());
    for (std::size_t j = 0; j < agent.entities.size(); ++j) {
      const Entity& entity = agent.entities[j];
      const std::size_t n = entity.events.size();
      std::size_t held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
      if (held >= n) held = n - 1;
      Entity train_part{entity.id, {}};
      train_part.events.assign(entity.events.begin(), entity.events.end() - static_cast<std::ptrdiff_t>(held));
      for (std::size_t e = n - held; e < n; ++e) out.heldout.push_back({i, j, entity.events[e]});
      kept.entities.push_back(std::move(train_part));
    }
    out.train.agents.push_back(std::move(kept));
  }
  return out;
}

}  // namespace hlcr
