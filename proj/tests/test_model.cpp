#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hlcr/model.hpp"
#include "hlcr/random.hpp"
#include "oracles.hpp"

using namespace hlcr;

namespace {

HierDataset tiny_dataset() {
  HierDataset d;
  d.feature_dim = 1;
  d.agents = {
      {"a", {{"e1", {{{1.0}, 2.0}}}, {"e2", {{{2.0}, -1.0}, {{0.5}, 0.3}}}}},
      {"b", {{"e1", {{{-1.0}, 1.0}}}}},
  };
  return d;
}

}  // namespace

TEST_CASE("rng: determinism and ranges") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int n = 0; n < 1000; ++n) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
    const double u = a.uniform();
    b.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(differs);
  CHECK(derive_seed(1, "x", 2, 3) == derive_seed(1, "x", 2, 3));
  CHECK(derive_seed(1, "x", 2, 3) != derive_seed(1, "y", 2, 3));
  CHECK(derive_seed(1, "x", 2, 3) != derive_seed(1, "x", 3, 2));
}

TEST_CASE("rng: sampler moments") {
  Rng rng(7);
  const int n = 200000;
  double s = 0, s2 = 0, g = 0, p = 0;
  for (int k = 0; k < n; ++k) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    g += rng.gamma(0.3);
    p += static_cast<double>(rng.poisson(23.5));
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(std::abs(g / n - 0.3) < 0.01);
  CHECK(std::abs(p / n - 23.5) < 0.05);
  // Tiny Dirichlet concentrations must still produce a valid simplex.
  const std::vector<double> conc(4, 1e-3);
  for (int k = 0; k < 100; ++k) {
    const auto d = rng.dirichlet(conc);
    CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0) <= 1e-12);
    for (double v : d) CHECK(v >= 0.0);
  }
}

TEST_CASE("hyperparams validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  for (auto bad : {&Hyperparams::alpha, &Hyperparams::beta, &Hyperparams::delta,
                   &Hyperparams::sigma}) {
    Hyperparams h;
    h.*bad = 0.0;
    CHECK_THROWS_AS(h.validate(), InvalidHyperparams);
    h.*bad = std::nan("");
    CHECK_THROWS_AS(h.validate(), InvalidHyperparams);
  }
  Hyperparams k0;
  k0.K = 0;
  CHECK_THROWS_AS(k0.validate(), InvalidHyperparams);
  Hyperparams t0;
  t0.T = 0;
  CHECK_THROWS_AS(t0.validate(), InvalidHyperparams);
  Hyperparams g;
  g.gamma = 1.5;
  CHECK_THROWS_AS(g.validate(), InvalidHyperparams);
}

TEST_CASE("dataset validation") {
  HierDataset d = tiny_dataset();
  CHECK_NOTHROW(d.validate());
  CHECK(d.num_entities() == 3);
  CHECK(d.num_events() == 4);
  d.agents[1].entities[0].events[0].x.push_back(0.0);
  CHECK_THROWS_AS(d.validate(), InvalidShape);
  HierDataset dup = tiny_dataset();
  dup.agents[1].id = "a";
  CHECK_THROWS_AS(dup.validate(), InvalidShape);
}

TEST_CASE("label bookkeeping: recount consistency") {
  const HierDataset d = tiny_dataset();
  LabelAssignment z = LabelAssignment::zeros(d, 3);
  CHECK(z.global_counts == std::vector<std::int64_t>{3, 0, 0});
  z.relabel(0, 1, 2);
  z.relabel(1, 0, 1);
  CHECK(z.agent_counts[0] == std::vector<std::int64_t>{1, 0, 1});
  CHECK(z.agent_counts[1] == std::vector<std::int64_t>{0, 1, 0});
  CHECK(z.global_counts == std::vector<std::int64_t>{1, 1, 1});
  const LabelAssignment r = recount(z);
  CHECK(r.agent_counts == z.agent_counts);
  CHECK(r.global_counts == z.global_counts);
  z.unassign_counts(0, 0);
  CHECK(z.global_counts == std::vector<std::int64_t>{0, 1, 1});
  z.assign_counts(0, 0);
  CHECK(z.global_counts == std::vector<std::int64_t>{1, 1, 1});
}

TEST_CASE("compute_cluster_stats") {
  Hyperparams hp;
  hp.delta = 1.0;
  hp.sigma = 1.0;
  hp.K = 2;

  SUBCASE("empty cluster is the prior") {
    hp.delta = 0.5;
    const HierDataset d = tiny_dataset();
    const ClusterStats s = compute_cluster_stats(d, LabelAssignment::zeros(d, 2), hp);
    CHECK(s.clusters[1].H == SpdMatrix::scaled_identity(1, 0.25));
    CHECK(s.clusters[1].c == Vec{0.0});
  }
  SUBCASE("single event by hand") {
    HierDataset d;
    d.feature_dim = 1;
    d.agents = {{"a", {{"e", {{{1.0}, 2.0}}}}}};
    const ClusterStats s = compute_cluster_stats(d, LabelAssignment::zeros(d, 1), hp);
    CHECK(s.clusters[0].D(0, 0) == 2.0);
    CHECK(s.clusters[0].c[0] == 2.0);
    CHECK(s.clusters[0].H(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("invariant to entity order within a cluster") {
    Rng rng(17);
    HierDataset d;
    d.feature_dim = 3;
    for (int a = 0; a < 4; ++a) {
      Agent ag{"a" + std::to_string(a), {}};
      for (int e = 0; e < 3; ++e)
        ag.entities.push_back({"e" + std::to_string(e), oracle::random_events(4, 3, rng, {1, 2, 3}, 0.1)});
      d.agents.push_back(ag);
    }
    HierDataset shuffled = d;
    std::reverse(shuffled.agents.begin(), shuffled.agents.end());
    for (auto& ag : shuffled.agents) std::reverse(ag.entities.begin(), ag.entities.end());
    const auto s1 = compute_cluster_stats(d, LabelAssignment::zeros(d, 1), hp);
    const auto s2 = compute_cluster_stats(shuffled, LabelAssignment::zeros(shuffled, 1), hp);
    CHECK(max_abs_diff(s1.clusters[0].D, s2.clusters[0].D) <= 1e-12);
    for (std::size_t f = 0; f < 3; ++f)
      CHECK(s1.clusters[0].c[f] == doctest::Approx(s2.clusters[0].c[f]).epsilon(1e-12));
  }
}

TEST_CASE("generate_synthetic") {
  Hyperparams hp;
  hp.K = 4;
  hp.alpha = 4.0;
  SyntheticSpec spec;
  spec.num_agents = 32;

  SUBCASE("deterministic and well formed") {
    const auto a = generate_synthetic(hp, spec, 9);
    const auto b = generate_synthetic(hp, spec, 9);
    REQUIRE(a.data.agents.size() == 32);
    CHECK_NOTHROW(a.data.validate());
    for (std::size_t i = 0; i < a.data.agents.size(); ++i)
      for (std::size_t j = 0; j < a.data.agents[i].entities.size(); ++j) {
        const auto& ea = a.data.agents[i].entities[j].events;
        const auto& eb = b.data.agents[i].entities[j].events;
        REQUIRE(ea.size() == eb.size());
        for (std::size_t n = 0; n < ea.size(); ++n) {
          CHECK(ea[n].y == eb[n].y);
          CHECK(ea[n].x == eb[n].x);
        }
      }
    CHECK(a.truth.z == b.truth.z);
    CHECK(std::abs(std::accumulate(a.truth.psi.begin(), a.truth.psi.end(), 0.0) - 1.0) <= 1e-12);
    for (const auto& th : a.truth.theta)
      CHECK(std::abs(std::accumulate(th.begin(), th.end(), 0.0) - 1.0) <= 1e-12);
  }
  SUBCASE("K=1 residuals have variance sigma^2") {
    hp.K = 1;
    hp.sigma = 0.3;
    spec.num_agents = 1000;
    spec.mean_events = 6.0;
    const auto s = generate_synthetic(hp, spec, 5);
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& ag : s.data.agents)
      for (const auto& en : ag.entities)
        for (const auto& ev : en.events) {
          const double r = ev.y - dot(s.truth.w[0], ev.x);
          ss += r * r;
          ++n;
        }
    REQUIRE(n >= 10000);
    CHECK(std::abs(ss / static_cast<double>(n) / (hp.sigma * hp.sigma) - 1.0) <= 0.15);
  }
  SUBCASE("bias column is constant") {
    spec.bias = true;
    const auto s = generate_synthetic(hp, spec, 3);
    for (const auto& ag : s.data.agents)
      for (const auto& en : ag.entities)
        for (const auto& ev : en.events) CHECK(ev.x.back() == 1.0);
  }
  SUBCASE("label frequencies follow theta") {
    // With very large beta every theta_i is close to psi, so labels pooled over
    // agents are close to multinomial(psi). Chi-square test at p = 0.001.
    hp.K = 2;
    hp.beta = 1e6;
    spec.num_agents = 2000;
    const auto s = generate_synthetic(hp, spec, 12);
    std::vector<double> observed(2, 0.0);
    double total = 0.0;
    for (const auto& row : s.truth.z)
      for (int k : row) {
        observed[k] += 1.0;
        total += 1.0;
      }
    double chi2 = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double expected = total * s.truth.psi[k];
      chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
    }
    CHECK(chi2 < 10.83);
  }
}

TEST_CASE("split_heldout") {
  HierDataset d;
  d.feature_dim = 1;
  Entity e5{"e5", {}};
  for (int n = 0; n < 5; ++n) e5.events.push_back({{double(n)}, double(n)});
  Entity e1{"e1", {{{9.0}, 9.0}}};
  Entity e10{"e10", {}};
  for (int n = 0; n < 10; ++n) e10.events.push_back({{double(n)}, double(n)});
  d.agents = {{"a", {e5, e1}}, {"b", {e10}}};

  const auto split = split_heldout(d, 0.2);
  CHECK(split.train.agents[0].entities[0].events.size() == 4);
  CHECK(split.train.agents[0].entities[1].events.size() == 1);
  CHECK(split.train.agents[1].entities[0].events.size() == 8);
  REQUIRE(split.heldout.size() == 3);
  CHECK(split.heldout[0].agent == 0);
  CHECK(split.heldout[0].entity == 0);
  CHECK(split.heldout[0].event.y == 4.0);
  CHECK(split.heldout[2].event.y == 9.0);

  const auto none = split_heldout(d, 0.0);
  CHECK(none.heldout.empty());
  CHECK(none.train.num_events() == d.num_events());
}
