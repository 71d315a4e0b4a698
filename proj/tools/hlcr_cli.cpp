// hlcr command line: generate, train, fed-train, predict, evaluate.
//
// Exit status is 0 on success, 2 on invalid flags or input data, 1 on any
// other failure. HLCR_LOG (trace, debug, info, warn, error, off) sets the
// stderr log level.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hlcr/checkpoint.hpp"
#include "hlcr/dataset_io.hpp"
#include "hlcr/federated.hpp"
#include "hlcr/inference.hpp"
#include "hlcr/metrics.hpp"
#include "hlcr/model.hpp"
#include "hlcr/random.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hlcr;

namespace {

/// Bad flags or bad input; mapped to exit status 2.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("hlcr");
  logger->set_pattern("hlcr: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("HLCR_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("unknown HLCR_LOG level '{}', keeping info", env);
    else
      spdlog::set_level(level);
  }
}

struct ModelFlags {
  int K = 4;
  std::optional<double> alpha;  // defaults to K
  double beta = 1.0;
  double delta = 1.0;
  double sigma = 0.1;
  int T = 10;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd, const std::string& t_help) {
    cmd->add_option("--K", K, "number of clusters")->capture_default_str();
    cmd->add_option("--alpha", alpha, "global Dirichlet concentration (default: K)");
    cmd->add_option("--beta", beta, "per-agent concentration")->capture_default_str();
    cmd->add_option("--delta", delta, "prior std of the regression coefficients")->capture_default_str();
    cmd->add_option("--sigma", sigma, "observation noise std")->capture_default_str();
    cmd->add_option("--T", T, t_help)->capture_default_str();
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  Hyperparams hyperparams() const {
    Hyperparams hp;
    hp.K = K;
    hp.alpha = alpha.value_or(static_cast<double>(K));
    hp.beta = beta;
    hp.delta = delta;
    hp.sigma = sigma;
    hp.T = T;
    hp.seed = seed;
    hp.validate();
    return hp;
  }
};

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

HierDataset load_data(const fs::path& path, std::optional<std::size_t> expect_F) {
  HierDataset data = load_dataset_csv(path);
  if (expect_F && *expect_F != data.feature_dim)
    throw UsageError("--F " + std::to_string(*expect_F) + " does not match the " +
                     std::to_string(data.feature_dim) + " feature columns of " + path.string());
  spdlog::info("loaded {}: {} agents, {} entities, {} events, F={}", path.string(),
               data.agents.size(), data.num_entities(), data.num_events(), data.feature_dim);
  return data;
}

// ---------------------------------------------------------------- generate

struct GenerateFlags {
  ModelFlags model;
  std::size_t F = 5;
  std::size_t N = 128;
  double mean_entities = 4.0;
  double mean_events = 5.0;
  bool bias = false;
  fs::path out;
};

void run_generate(const GenerateFlags& f) {
  const Hyperparams hp = f.model.hyperparams();
  SyntheticSpec spec;
  spec.num_agents = f.N;
  spec.feature_dim = f.F;
  spec.mean_entities = f.mean_entities;
  spec.mean_events = f.mean_events;
  spec.bias = f.bias;
  const SyntheticData synth = generate_synthetic(hp, spec, derive_seed(hp.seed, "generate"));

  fs::create_directories(f.out);
  save_dataset_csv(f.out / "data.csv", synth.data);
  DatasetManifest m;
  m.feature_dim = synth.data.feature_dim;
  m.num_agents = synth.data.agents.size();
  m.num_entities = synth.data.num_entities();
  m.num_events = synth.data.num_events();
  m.seed = hp.seed;
  m.generator = hp;
  m.spec = spec;
  m.ground_truth_path = "truth.json";
  write_text_file(f.out / "manifest.json", manifest_to_json(m).dump(1) + "\n");
  write_text_file(f.out / "truth.json", ground_truth_to_json(synth.truth, synth.data).dump(1) + "\n");
  spdlog::info("wrote {} events for {} entities to {}", m.num_events, m.num_entities, f.out.string());
}

// ---------------------------------------------------------------- train / fed-train

struct TrainFlags {
  ModelFlags model;
  fs::path data;
  fs::path out;
  std::optional<fs::path> trace;
  std::optional<std::size_t> F;
  double heldout = 0.2;
  int rebuild_every = 50;
  // federated only
  double fraction = 1.0;
  double gamma = 0.1;
  unsigned threads = 1;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool federated) {
  f.model.add_to(cmd, federated ? "number of rounds" : "number of Gibbs sweeps");
  cmd->add_option("--data", f.data, "dataset CSV")->required();
  cmd->add_option("--out", f.out, "checkpoint JSON to write")->required();
  cmd->add_option("--trace", f.trace, "per-iteration trace CSV to write");
  cmd->add_option("--F", f.F, "expected feature dimension");
  cmd->add_option("--heldout", f.heldout, "share of each entity's last events held out")->capture_default_str();
  if (federated) {
    cmd->add_option("--fraction", f.fraction, "share of agents sampled per round")->capture_default_str();
    cmd->add_option("--gamma", f.gamma, "server learning rate")->capture_default_str();
    cmd->add_option("--threads", f.threads, "agent worker threads, 0 = all cores")->capture_default_str();
  } else {
    cmd->add_option("--rebuild-every", f.rebuild_every, "sweeps between inverse rebuilds, 0 = never")
        ->capture_default_str();
  }
}

HeldoutSplit load_split(const TrainFlags& f) {
  if (!(f.heldout >= 0.0 && f.heldout < 1.0)) throw UsageError("--heldout must lie in [0, 1)");
  const HierDataset data = load_data(f.data, f.F);
  return split_heldout(data, f.heldout);
}

void run_train(const TrainFlags& f) {
  const Hyperparams hp = f.model.hyperparams();
  const HeldoutSplit split = load_split(f);
  Rng rng(derive_seed(hp.seed, "train"));
  GibbsOptions opts;
  opts.rebuild_every = f.rebuild_every;
  const TrainResult res = train_centralized(split.train, hp, rng, opts, split.heldout);

  ensure_parent(f.out);
  save_checkpoint(f.out, checkpoint_from_training(split.train, hp, res.labels, res.stats, hp.T, f.heldout));
  if (f.trace) {
    std::ostringstream csv;
    csv << "sweep,label_changes,log_posterior,mse_train,mse_heldout\n";
    for (const auto& t : res.trace)
      csv << t.sweep << ',' << t.label_changes << ',' << format_double(t.log_posterior) << ','
          << format_double(t.mse_train) << ',' << fmt_opt(t.mse_heldout) << '\n';
    ensure_parent(*f.trace);
    write_text_file(*f.trace, csv.str());
  }
  const auto& last = res.trace.back();
  spdlog::info("{} sweeps, train MSE {}, held-out MSE {}", hp.T, format_double(last.mse_train),
               fmt_opt(last.mse_heldout));
}

void run_fed_train(const TrainFlags& f) {
  const Hyperparams hp = f.model.hyperparams();
  RoundConfig rc;
  rc.fraction = f.fraction;
  rc.gamma = f.gamma;
  rc.rounds = hp.T;
  rc.seed = derive_seed(hp.seed, "fed-train");
  rc.threads = f.threads;
  rc.validate();
  const HeldoutSplit split = load_split(f);
  const FederatedResult res = run_federated(split.train, hp, rc, split.heldout);

  Checkpoint ck = checkpoint_from_federated(split.train, hp, rc, res, f.heldout);
  ck.rng_seed = hp.seed;
  ensure_parent(f.out);
  save_checkpoint(f.out, ck);
  if (f.trace) {
    std::ostringstream csv;
    csv << "round,mse_train,mse_heldout,agents_sampled,label_changes\n";
    for (const auto& m : res.trace)
      csv << m.round << ',' << format_double(m.mse_train) << ',' << fmt_opt(m.mse_heldout) << ','
          << m.agents_sampled << ',' << m.label_changes << '\n';
    ensure_parent(*f.trace);
    write_text_file(*f.trace, csv.str());
  }
  const auto& last = res.trace.back();
  spdlog::info("{} rounds, train MSE {}, held-out MSE {}", rc.rounds, format_double(last.mse_train),
               fmt_opt(last.mse_heldout));
}

// ---------------------------------------------------------------- predict / evaluate

struct PredictFlags {
  fs::path model;
  fs::path data;
  std::string split = "all";
  std::string label_mode = "argmax";
  std::uint64_t seed = 0;
  std::optional<fs::path> out;
  std::optional<fs::path> metrics;
  std::optional<fs::path> truth;
};

struct PredictionRow {
  std::size_t agent = 0;
  std::size_t entity = 0;
  std::size_t event = 0;  // index within the entity
  double y = 0.0;
  double y_hat = 0.0;
  int label = 0;
};

struct PredictionRun {
  Checkpoint ckpt;
  HierDataset data;
  std::vector<std::vector<int>> labels;  // per (agent, entity)
  std::vector<PredictionRow> rows;
};

PredictionRun predict_split(const PredictFlags& f) {
  PredictionRun run;
  run.ckpt = load_checkpoint(f.model);
  run.data = load_data(f.data, std::nullopt);
  if (run.data.feature_dim != run.ckpt.feature_dim)
    throw UsageError("model has F=" + std::to_string(run.ckpt.feature_dim) + " but " + f.data.string() +
                     " has F=" + std::to_string(run.data.feature_dim));
  if (f.split != "all" && f.split != "train" && f.split != "heldout")
    throw UsageError("--split must be all, train or heldout");
  const LabelMode mode = f.label_mode == "sample" ? LabelMode::kSample : LabelMode::kArgmax;
  const Hyperparams& hp = run.ckpt.hp;
  const ClusterStats stats = run.ckpt.stats();
  const auto stored = run.ckpt.label_map();
  // Unseen entities are labeled from their training-portion events only.
  const HeldoutSplit split = split_heldout(run.data, run.ckpt.heldout_fraction);

  run.labels.resize(run.data.agents.size());
  for (std::size_t i = 0; i < run.data.agents.size(); ++i) {
    const Agent& agent = run.data.agents[i];
    std::vector<double> own(hp.K, 0.0);
    for (const auto& en : agent.entities)
      if (auto it = stored.find({agent.id, en.id}); it != stored.end()) own[it->second] += 1.0;
    for (std::size_t j = 0; j < agent.entities.size(); ++j) {
      const auto it = stored.find({agent.id, agent.entities[j].id});
      if (it != stored.end()) {
        run.labels[i].push_back(it->second);
        continue;
      }
      Rng rng(derive_seed(f.seed, "predict-label", i, j));
      run.labels[i].push_back(choose_label(split.train.agents[i].entities[j], stats,
                                           CountsView{own, run.ckpt.counts}, hp, mode, &rng));
    }
  }

  for (std::size_t i = 0; i < run.data.agents.size(); ++i) {
    for (std::size_t j = 0; j < run.data.agents[i].entities.size(); ++j) {
      const auto& events = run.data.agents[i].entities[j].events;
      const std::size_t n_train = split.train.agents[i].entities[j].events.size();
      std::size_t from = 0, to = events.size();
      if (f.split == "train") to = n_train;
      if (f.split == "heldout") from = n_train;
      const int k = run.labels[i][j];
      for (std::size_t n = from; n < to; ++n)
        run.rows.push_back({i, j, n, events[n].y, predict(events[n].x, k, stats), k});
    }
  }
  spdlog::info("predicted {} events ({} split)", run.rows.size(), f.split);
  return run;
}

double rows_mse(const std::vector<PredictionRow>& rows) {
  std::vector<double> y, y_hat;
  for (const auto& r : rows) {
    y.push_back(r.y);
    y_hat.push_back(r.y_hat);
  }
  return mean_squared_error(y, y_hat);
}

json base_metrics(const PredictFlags& f, const PredictionRun& run) {
  json m;
  m["split"] = f.split;
  m["num_events"] = run.rows.size();
  if (run.rows.empty())
    m["mse"] = nullptr;
  else
    m["mse"] = rows_mse(run.rows);
  return m;
}

void write_json(const std::optional<fs::path>& path, const json& j) {
  const std::string text = j.dump(1) + "\n";
  if (path) {
    ensure_parent(*path);
    write_text_file(*path, text);
  } else {
    std::cout << text;
  }
}

void run_predict(const PredictFlags& f) {
  const PredictionRun run = predict_split(f);
  std::ostringstream csv;
  csv << "agent_id,entity_id,event,y,y_hat,label\n";
  for (const auto& r : run.rows) {
    const Agent& a = run.data.agents[r.agent];
    csv << a.id << ',' << a.entities[r.entity].id << ',' << r.event << ',' << format_double(r.y) << ','
        << format_double(r.y_hat) << ',' << r.label + 1 << '\n';
  }
  ensure_parent(*f.out);
  write_text_file(*f.out, csv.str());
  if (f.metrics) write_json(f.metrics, base_metrics(f, run));
}

/// Ground-truth labels keyed by (agent_id, entity_id), 0-based. Looks at
/// --truth first, then at the manifest next to the dataset.
std::optional<std::map<std::pair<std::string, std::string>, int>> load_truth(const PredictFlags& f) {
  std::optional<fs::path> path = f.truth;
  if (!path) {
    const fs::path manifest = f.data.parent_path() / "manifest.json";
    if (fs::exists(manifest)) {
      const DatasetManifest m = manifest_from_json(json::parse(read_text_file(manifest)));
      if (!m.ground_truth_path.empty()) path = manifest.parent_path() / m.ground_truth_path;
    }
  }
  if (!path || !fs::exists(*path)) {
    spdlog::warn("no ground truth found, clustering metrics omitted");
    return std::nullopt;
  }
  const json j = json::parse(read_text_file(*path));
  std::map<std::pair<std::string, std::string>, int> out;
  for (const auto& agent : j.at("labels"))
    for (const auto& en : agent.at("entities"))
      out[{agent.at("agent_id").get<std::string>(), en.at("entity_id").get<std::string>()}] =
          en.at("z").get<int>() - 1;
  return out;
}

void run_evaluate(const PredictFlags& f) {
  const PredictionRun run = predict_split(f);
  json m = base_metrics(f, run);
  m["num_entities"] = run.data.num_entities();
  if (const auto truth = load_truth(f)) {
    std::vector<int> t, p;
    for (std::size_t i = 0; i < run.data.agents.size(); ++i)
      for (std::size_t j = 0; j < run.data.agents[i].entities.size(); ++j) {
        const auto it = truth->find({run.data.agents[i].id, run.data.agents[i].entities[j].id});
        if (it == truth->end()) continue;
        t.push_back(it->second);
        p.push_back(run.labels[i][j]);
      }
    if (t.empty()) {
      spdlog::warn("ground truth shares no entities with the dataset, clustering metrics omitted");
    } else {
      m["labeled_entities"] = t.size();
      m["accuracy"] = best_permutation_accuracy(t, p);
      m["ari"] = adjusted_rand_index(t, p);
    }
  }
  write_json(f.out, m);
}

void add_predict_flags(CLI::App* cmd, PredictFlags& f, bool evaluate) {
  cmd->add_option("--model", f.model, "checkpoint JSON")->required();
  cmd->add_option("--data", f.data, "dataset CSV")->required();
  cmd->add_option("--split", f.split, "events to score: all, train or heldout")
      ->check(CLI::IsMember({"all", "train", "heldout"}))
      ->capture_default_str();
  cmd->add_option("--label-mode", f.label_mode, "label choice for unseen entities: argmax or sample")
      ->check(CLI::IsMember({"argmax", "sample"}))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "seed for --label-mode sample")->capture_default_str();
  if (evaluate) {
    cmd->add_option("--out", f.out, "metrics JSON to write (default: stdout)");
    cmd->add_option("--truth", f.truth, "ground-truth JSON (default: from manifest.json next to the data)");
  } else {
    cmd->add_option("--out", f.out, "predictions CSV to write")->required();
    cmd->add_option("--metrics", f.metrics, "metrics JSON to write");
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Hierarchical latent class regression"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* cmd_gen = app.add_subcommand("generate", "sample a synthetic dataset");
  gen.model.add_to(cmd_gen, "unused by generate");
  cmd_gen->add_option("--F", gen.F, "feature dimension")->capture_default_str();
  cmd_gen->add_option("--N", gen.N, "number of agents")->capture_default_str();
  cmd_gen->add_option("--mean-entities", gen.mean_entities, "mean entities per agent")->capture_default_str();
  cmd_gen->add_option("--mean-events", gen.mean_events, "mean events per entity")->capture_default_str();
  cmd_gen->add_flag("--bias", gen.bias, "make the last feature a constant 1");
  cmd_gen->add_option("--out", gen.out, "output directory")->required();

  TrainFlags train;
  add_train_flags(app.add_subcommand("train", "centralized collapsed Gibbs training"), train, false);
  TrainFlags fed;
  add_train_flags(app.add_subcommand("fed-train", "simulated federated training"), fed, true);

  PredictFlags pred;
  add_predict_flags(app.add_subcommand("predict", "predict targets with a checkpoint"), pred, false);
  PredictFlags eval;
  add_predict_flags(app.add_subcommand("evaluate", "score a checkpoint on a dataset"), eval, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("generate")) run_generate(gen);
    if (app.got_subcommand("train")) run_train(train);
    if (app.got_subcommand("fed-train")) run_fed_train(fed);
    if (app.got_subcommand("predict")) run_predict(pred);
    if (app.got_subcommand("evaluate")) run_evaluate(eval);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const InvalidHyperparams& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const InvalidShape& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const DataFormatError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
