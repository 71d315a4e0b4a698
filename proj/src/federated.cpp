#include "hlcr/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace hlcr {

GlobalModel GlobalModel::initial(int K, std::size_t F, const Hyperparams& hp) {
  GlobalModel m;
  m.round = 0;
  m.stats = ClusterStats::prior_only(K, F, hp);
  m.counts.assign(K, 0.0);
  return m;
}

AgentUpdate AgentUpdate::zero(std::string agent_id, int round, int K, std::size_t F) {
  AgentUpdate u;
  u.agent_id = std::move(agent_id);
  u.round = round;
  u.delta_D.assign(K, SpdMatrix(F));
  u.delta_c.assign(K, Vec(F, 0.0));
  u.n.assign(K, 0);
  return u;
}

void RoundConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidHyperparams("fraction must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidHyperparams("gamma must lie in [0, 1]");
  if (rounds < 1) throw InvalidHyperparams("rounds must be >= 1");
}

AgentUpdate agent_local_round(const Agent& agent, const GlobalModel& model, LocalLabels& memory,
                              const Hyperparams& hp, Rng& rng, int round) {
  const int K = model.K();
  const std::size_t F = model.F();
  const double s = hp.noise_precision();
  AgentUpdate upd = AgentUpdate::zero(agent.id, round, K, F);
  memory.resize(agent.entities.size(), -1);

  std::vector<double> own(K, 0.0);
  for (int k : memory)
    if (k >= 0) own[k] += 1.0;

  for (std::size_t j = 0; j < agent.entities.size(); ++j) {
    const Entity& entity = agent.entities[j];
    if (memory[j] >= 0) own[memory[j]] -= 1.0;
    const int k = sample_label(entity, model.stats, CountsView{own, model.counts}, hp, rng);
    memory[j] = k;
    own[k] += 1.0;

    for (const auto& ev : entity.events) {
      upd.delta_D[k].add_outer(ev.x, s);
      for (std::size_t f = 0; f < F; ++f) upd.delta_c[k][f] += s * ev.x[f] * ev.y;
    }
    ++upd.n[k];
  }
  return upd;
}

GlobalModel server_aggregate(std::span<const AgentUpdate> updates, const GlobalModel& prev,
                             const Hyperparams& hp, int t) {
  const int K = prev.K();
  const std::size_t F = prev.F();

  std::vector<const AgentUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const auto& u : updates) {
    if (u.round != t)
      throw std::invalid_argument("server_aggregate: update from agent '" + u.agent_id +
                                  "' is tagged round " + std::to_string(u.round) +
                                  ", expected " + std::to_string(t));
    if (u.K() != K || u.F() != F)
      throw InvalidShape("server_aggregate: update shape mismatch from agent '" + u.agent_id + "'");
    ordered.push_back(&u);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const AgentUpdate* a, const AgentUpdate* b) { return a->agent_id < b->agent_id; });

  GlobalModel fresh = GlobalModel::initial(K, F, hp);
  for (const AgentUpdate* u : ordered) {
    for (int k = 0; k < K; ++k) {
      fresh.stats.clusters[k].D += u->delta_D[k];
      for (std::size_t f = 0; f < F; ++f) fresh.stats.clusters[k].c[f] += u->delta_c[k][f];
      fresh.counts[k] += static_cast<double>(u->n[k]);
    }
  }

  GlobalModel next = std::move(fresh);
  next.round = t;
  if (t > 1) {
    const double g = hp.gamma;
    for (int k = 0; k < K; ++k) {
      ClusterStat& cl = next.stats.clusters[k];
      const ClusterStat& old = prev.stats.clusters[k];
      cl.D.blend(g, old.D, 1.0 - g);
      for (std::size_t f = 0; f < F; ++f) cl.c[f] = (1.0 - g) * old.c[f] + g * cl.c[f];
      next.counts[k] = (1.0 - g) * prev.counts[k] + g * next.counts[k];
    }
  }
  for (auto& cl : next.stats.clusters) cl.H = invert(cl.D);
  return next;
}

std::size_t agents_per_round(double fraction, std::size_t num_agents) {
  const double want = std::ceil(fraction * static_cast<double>(num_agents) - 1e-9);
  const auto m = static_cast<std::size_t>(std::max(1.0, want));
  return std::min(m, num_agents);
}

std::vector<std::size_t> sample_agents(std::size_t num_agents, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(num_agents);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, num_agents);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(num_agents - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::uint64_t agent_stream_seed(std::uint64_t seed, int round, const std::string& agent_id) {
  return derive_seed(seed, "fed-agent", static_cast<std::uint64_t>(round), fnv1a64(agent_id));
}

std::vector<std::vector<int>> evaluation_labels(const HierDataset& data, const GlobalModel& model,
                                                const std::vector<LocalLabels>& memory,
                                                const Hyperparams& hp) {
  const int K = model.K();
  std::vector<std::vector<int>> z(data.agents.size());
  for (std::size_t i = 0; i < data.agents.size(); ++i) {
    const Agent& agent = data.agents[i];
    std::vector<double> own(K, 0.0);
    const LocalLabels* mem = i < memory.size() ? &memory[i] : nullptr;
    if (mem)
      for (int k : *mem)
        if (k >= 0) own[k] += 1.0;
    z[i].resize(agent.entities.size());
    for (std::size_t j = 0; j < agent.entities.size(); ++j) {
      const int prev = (mem && j < mem->size()) ? (*mem)[j] : -1;
      if (prev >= 0) own[prev] -= 1.0;
      z[i][j] = choose_label(agent.entities[j], model.stats, CountsView{own, model.counts}, hp,
                             LabelMode::kArgmax, nullptr);
      if (prev >= 0) own[prev] += 1.0;
    }
  }
  return z;
}

FederatedResult run_federated(const HierDataset& data, const Hyperparams& hp_in,
                              const RoundConfig& rc, std::span<const HeldoutEvent> heldout) {
  data.validate();
  rc.validate();
  Hyperparams hp = hp_in;
  hp.gamma = rc.gamma;
  hp.T = rc.rounds;
  hp.validate();

  FederatedResult out;
  out.model = GlobalModel::initial(hp.K, data.feature_dim, hp);
  out.memory.resize(data.agents.size());
  for (std::size_t i = 0; i < data.agents.size(); ++i)
    out.memory[i].assign(data.agents[i].entities.size(), -1);

  const std::size_t per_round = agents_per_round(rc.fraction, data.agents.size());
  unsigned workers = rc.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : rc.threads;

  for (int t = 1; t <= rc.rounds; ++t) {
    Rng sampler(derive_seed(rc.seed, "fed-sample", static_cast<std::uint64_t>(t)));
    const std::vector<std::size_t> chosen = sample_agents(data.agents.size(), per_round, sampler);

    std::vector<AgentUpdate> updates(chosen.size());
    std::vector<std::int64_t> changes(chosen.size(), 0);
    auto run_agent = [&](std::size_t slot) {
      const std::size_t i = chosen[slot];
      const Agent& agent = data.agents[i];
      const LocalLabels before = out.memory[i];
      Rng rng(agent_stream_seed(rc.seed, t, agent.id));
      updates[slot] = agent_local_round(agent, out.model, out.memory[i], hp, rng, t);
      for (std::size_t j = 0; j < before.size(); ++j)
        if (before[j] >= 0 && before[j] != out.memory[i][j]) ++changes[slot];
    };

    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, chosen.size()));
    if (n_threads <= 1) {
      for (std::size_t slot = 0; slot < chosen.size(); ++slot) run_agent(slot);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(n_threads);
      for (unsigned w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t slot = w; slot < chosen.size(); slot += n_threads) run_agent(slot);
        });
      }
    }

    out.model = server_aggregate(updates, out.model, hp, t);

    RoundMetrics m;
    m.round = t;
    m.agents_sampled = chosen.size();
    m.label_changes = std::accumulate(changes.begin(), changes.end(), std::int64_t{0});
    const auto z = evaluation_labels(data, out.model, out.memory, hp);
    m.mse_train = mse_with_labels(data, z, out.model.stats);
    m.mse_heldout = mse_heldout(heldout, z, out.model.stats);
    out.trace.push_back(m);
  }
  return out;
}

}  // namespace hlcr
