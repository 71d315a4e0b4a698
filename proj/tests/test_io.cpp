#include "doctest.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include "hlcr/checkpoint.hpp"
#include "hlcr/dataset_io.hpp"
#include "hlcr/inference.hpp"
#include "hlcr/metrics.hpp"

using namespace hlcr;

namespace {

SyntheticData io_dataset(std::uint64_t seed) {
  Hyperparams hp;
  hp.K = 3;
  hp.alpha = 3;
  SyntheticSpec spec;
  spec.num_agents = 10;
  spec.feature_dim = 3;
  return generate_synthetic(hp, spec, seed);
}

std::string error_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_dataset_csv(in);
  } catch (const DataFormatError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hlcr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324}) {
    const std::string s = format_double(v);
    double back = 1.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(res.ec == std::errc());
    CHECK(back == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("dataset CSV") {
  SUBCASE("write then read reproduces the dataset") {
    const auto s = io_dataset(1);
    std::ostringstream out;
    write_dataset_csv(out, s.data);
    std::istringstream in(out.str());
    const HierDataset back = read_dataset_csv(in);
    REQUIRE(back.agents.size() == s.data.agents.size());
    CHECK(back.feature_dim == 3);
    for (std::size_t i = 0; i < back.agents.size(); ++i) {
      CHECK(back.agents[i].id == s.data.agents[i].id);
      REQUIRE(back.agents[i].entities.size() == s.data.agents[i].entities.size());
      for (std::size_t j = 0; j < back.agents[i].entities.size(); ++j) {
        const auto& a = back.agents[i].entities[j];
        const auto& b = s.data.agents[i].entities[j];
        CHECK(a.id == b.id);
        REQUIRE(a.events.size() == b.events.size());
        for (std::size_t n = 0; n < a.events.size(); ++n) {
          CHECK(a.events[n].x == b.events[n].x);
          CHECK(a.events[n].y == b.events[n].y);
        }
      }
    }
    std::ostringstream again;
    write_dataset_csv(again, back);
    CHECK(again.str() == out.str());
    // header + one row per event, F + 3 columns each
    const std::string text = out.str();
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == s.data.num_events() + 1);
    CHECK(text.substr(0, text.find('\n')) == "agent_id,entity_id,f_1,f_2,f_3,y");
  }
  SUBCASE("interleaved rows group by first appearance") {
    std::istringstream in("agent_id,entity_id,f_1,y\nb,x,1,2\na,y,3,4\nb,x,5,6\r\n\nb,z,7,8\n");
    const HierDataset d = read_dataset_csv(in);
    REQUIRE(d.agents.size() == 2);
    CHECK(d.agents[0].id == "b");
    CHECK(d.agents[0].entities.size() == 2);
    CHECK(d.agents[0].entities[0].events.size() == 2);
    CHECK(d.agents[0].entities[0].events[1].y == 6.0);
    CHECK(d.agents[1].entities[0].events[0].x[0] == 3.0);
  }
  SUBCASE("rejects malformed input with line numbers") {
    const std::string header = "agent_id,entity_id,f_1,f_2,y\n";
    CHECK(error_of(header + "a,e,1,2,3\na,e,1,2\n").find("line 3") != std::string::npos);
    CHECK(error_of(header + "a,e,1,2,3,4\n").find("line 2") != std::string::npos);
    CHECK(error_of(header + "a,e,1,nan,3\n").find("line 2") != std::string::npos);
    CHECK(error_of(header + "a,e,1,2,3\na,e,1,inf,3\n").find("line 3") != std::string::npos);
    CHECK(error_of(header + "a,e,1,2,abc\n").find("line 2") != std::string::npos);
    CHECK(error_of(header + "a,e,1,2,3x\n").find("line 2") != std::string::npos);
    CHECK_FALSE(error_of("agent,entity,f_1,y\na,e,1,2\n").empty());
    CHECK_FALSE(error_of("agent_id,entity_id,f_2,y\na,e,1,2\n").empty());
    CHECK_FALSE(error_of("").empty());
    CHECK_FALSE(error_of(header).empty());
    CHECK(error_of(header + "a,e,1,2,3\n").empty());
  }
}

TEST_CASE("manifest and ground truth JSON") {
  const auto s = io_dataset(2);
  DatasetManifest m;
  m.feature_dim = 3;
  m.num_agents = s.data.agents.size();
  m.num_entities = s.data.num_entities();
  m.num_events = s.data.num_events();
  m.seed = 99;
  m.generator.K = 3;
  m.generator.alpha = 3;
  m.spec.num_agents = 10;
  m.ground_truth_path = "truth.json";
  const auto back = manifest_from_json(manifest_to_json(m));
  CHECK(manifest_to_json(back) == manifest_to_json(m));
  CHECK(back.num_events == m.num_events);

  const auto truth = ground_truth_from_json(ground_truth_to_json(s.truth, s.data));
  CHECK(truth.z == s.truth.z);
  CHECK(truth.w == s.truth.w);
  CHECK(truth.psi == s.truth.psi);
  const auto j = ground_truth_to_json(s.truth, s.data);
  CHECK(j["labels"][0]["entities"][0]["z"].get<int>() == s.truth.z[0][0] + 1);
}

TEST_CASE("checkpoints") {
  const auto s = io_dataset(3);
  Hyperparams hp;
  hp.K = 3;
  hp.alpha = 3;
  hp.T = 4;
  hp.seed = 17;
  Rng rng(17);
  const auto res = train_centralized(s.data, hp, rng);
  const Checkpoint ck = checkpoint_from_training(s.data, hp, res.labels, res.stats, 4, 0.2);
  const std::string text = checkpoint_to_json(ck);

  SUBCASE("load then save is byte stable") {
    const Checkpoint back = checkpoint_from_json(text);
    CHECK(checkpoint_to_json(back) == text);
    CHECK(checkpoint_to_json(checkpoint_from_json(checkpoint_to_json(back))) == text);
    const auto dir = temp_dir("ckpt");
    save_checkpoint(dir / "m.json", back);
    CHECK(read_text_file(dir / "m.json") == text);
    std::filesystem::remove_all(dir);
  }
  SUBCASE("predictions are bit identical after loading") {
    const Checkpoint back = checkpoint_from_json(text);
    const ClusterStats a = ck.stats();
    const ClusterStats b = back.stats();
    const auto map = back.label_map();
    for (std::size_t i = 0; i < s.data.agents.size(); ++i)
      for (std::size_t j = 0; j < s.data.agents[i].entities.size(); ++j) {
        const int k = map.at({s.data.agents[i].id, s.data.agents[i].entities[j].id});
        CHECK(k == res.labels.z[i][j]);
        for (const auto& ev : s.data.agents[i].entities[j].events) CHECK(predict(ev.x, k, a) == predict(ev.x, k, b));
      }
  }
  SUBCASE("stored statistics match the trained model") {
    const ClusterStats st = ck.stats();
    for (int k = 0; k < 3; ++k) {
      CHECK(st.clusters[k].D == res.stats.clusters[k].D);
      CHECK(st.clusters[k].c == res.stats.clusters[k].c);
      CHECK(inverse_residual(st.clusters[k].D, st.clusters[k].H) <= 1e-9);
    }
  }
  SUBCASE("federated checkpoints round trip") {
    RoundConfig rc{0.5, 0.1, 3, 5, 1};
    const auto fr = run_federated(s.data, hp, rc);
    const Checkpoint fc = checkpoint_from_federated(s.data, hp, rc, fr, 0.0);
    CHECK(fc.mode == "federated");
    CHECK(fc.fraction.has_value());
    const std::string ftext = checkpoint_to_json(fc);
    CHECK(checkpoint_to_json(checkpoint_from_json(ftext)) == ftext);
  }
  SUBCASE("corrupt files are rejected") {
    CHECK_THROWS_AS(checkpoint_from_json("{"), DataFormatError);
    CHECK_THROWS_AS(checkpoint_from_json("{}"), DataFormatError);
    std::string wrong = text;
    wrong.replace(wrong.find("\"version\": 1"), 12, "\"version\": 7");
    CHECK_THROWS_AS(checkpoint_from_json(wrong), DataFormatError);
  }
}

TEST_CASE("best-permutation accuracy") {
  SUBCASE("perfect relabeling scores one") {
    const std::vector<int> truth{0, 0, 1, 1, 2, 2, 3};
    const std::vector<int> pred{2, 2, 0, 0, 3, 3, 1};
    CHECK(best_permutation_accuracy(truth, pred) == 1.0);
  }
  SUBCASE("agrees with brute force over all permutations") {
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
      const int K = 1 + static_cast<int>(rng.uniform_int(5));
      const std::size_t n = 1 + rng.uniform_int(40);
      std::vector<int> truth(n), pred(n);
      for (std::size_t m = 0; m < n; ++m) {
        truth[m] = static_cast<int>(rng.uniform_int(K));
        pred[m] = rng.uniform() < 0.6 ? (truth[m] + 1) % K : static_cast<int>(rng.uniform_int(K));
      }
      std::vector<int> perm(K);
      std::iota(perm.begin(), perm.end(), 0);
      std::size_t best = 0;
      do {
        std::size_t hits = 0;
        for (std::size_t m = 0; m < n; ++m) hits += perm[pred[m]] == truth[m];
        best = std::max(best, hits);
      } while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(best_permutation_accuracy(truth, pred) == doctest::Approx(double(best) / double(n)).epsilon(1e-15));
    }
  }
  SUBCASE("more predicted clusters than true ones") {
    const std::vector<int> truth{0, 0, 0, 0};
    const std::vector<int> pred{0, 1, 1, 2};
    CHECK(best_permutation_accuracy(truth, pred) == 0.5);
  }
  SUBCASE("hungarian on a known matrix") {
    const std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
    CHECK(hungarian_min_cost(cost) == std::vector<int>{1, 0, 2});
  }
}

TEST_CASE("adjusted Rand index") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> b{1, 1, 0, 0, 2, 2};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  // Textbook example: ARI = 0.24242...
  const std::vector<int> t{0, 0, 0, 1, 1, 1};
  const std::vector<int> p{0, 0, 1, 1, 2, 2};
  CHECK(adjusted_rand_index(t, p) == doctest::Approx(8.0 / 33.0).epsilon(1e-12));

  Rng rng(8);
  std::vector<int> truth(10000), random(10000);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    truth[n] = static_cast<int>(rng.uniform_int(4));
    random[n] = static_cast<int>(rng.uniform_int(4));
  }
  CHECK(std::abs(adjusted_rand_index(truth, random)) <= 0.05);
}

TEST_CASE("mean squared error") {
  const std::vector<double> y{1, 2, 3};
  const std::vector<double> h{1, 0, 4};
  CHECK(mean_squared_error(y, h) == doctest::Approx(5.0 / 3.0));
}
