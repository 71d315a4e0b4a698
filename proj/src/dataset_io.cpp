#include "hlcr/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

namespace hlcr {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_dataset_csv(std::ostream& out, const HierDataset& data) {
  out << "agent_id,entity_id";
  for (std::size_t f = 1; f <= data.feature_dim; ++f) out << ",f_" << f;
  out << ",y\n";
  for (const auto& agent : data.agents) {
    for (const auto& entity : agent.entities) {
      for (const auto& ev : entity.events) {
        out << agent.id << ',' << entity.id;
        for (double v : ev.x) out << ',' << format_double(v);
        out << ',' << format_double(ev.y) << '\n';
      }
    }
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || field.empty()) {
    throw DataFormatError("line " + std::to_string(line_no) + ": column " + std::string(column) +
                          ": cannot parse '" + std::string(field) + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw DataFormatError("line " + std::to_string(line_no) + ": column " + std::string(column) +
                          ": non-finite value '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

HierDataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataFormatError("line 1: missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 4 || header[0] != "agent_id" || header[1] != "entity_id" || header.back() != "y")
    throw DataFormatError("line 1: header must be agent_id,entity_id,f_1,...,f_F,y");
  const std::size_t F = header.size() - 3;
  for (std::size_t f = 0; f < F; ++f) {
    if (header[2 + f] != "f_" + std::to_string(f + 1))
      throw DataFormatError("line 1: expected column f_" + std::to_string(f + 1) + ", found '" +
                            std::string(header[2 + f]) + "'");
  }

  HierDataset data;
  data.feature_dim = F;
  std::map<std::string, std::size_t, std::less<>> agent_index;
  std::vector<std::map<std::string, std::size_t, std::less<>>> entity_index;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw DataFormatError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty())
      throw DataFormatError("line " + std::to_string(line_no) + ": empty agent_id or entity_id");

    Event ev;
    ev.x.resize(F);
    for (std::size_t f = 0; f < F; ++f) ev.x[f] = parse_number(fields[2 + f], line_no, header[2 + f]);
    ev.y = parse_number(fields.back(), line_no, "y");

    auto [ait, anew] = agent_index.try_emplace(std::string(fields[0]), data.agents.size());
    if (anew) {
      data.agents.push_back({std::string(fields[0]), {}});
      entity_index.emplace_back();
    }
    Agent& agent = data.agents[ait->second];
    auto& eidx = entity_index[ait->second];
    auto [eit, enew] = eidx.try_emplace(std::string(fields[1]), agent.entities.size());
    if (enew) agent.entities.push_back({std::string(fields[1]), {}});
    agent.entities[eit->second].events.push_back(std::move(ev));
  }
  if (data.agents.empty()) throw DataFormatError("no data rows after the header");
  data.validate();
  return data;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_dataset_csv(const std::filesystem::path& path, const HierDataset& data) {
  std::ostringstream ss;
  write_dataset_csv(ss, data);
  write_text_file(path, ss.str());
}

HierDataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset_csv(in);
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {{"alpha", hp.alpha}, {"beta", hp.beta},   {"delta", hp.delta}, {"sigma", hp.sigma},
          {"K", hp.K},         {"gamma", hp.gamma}, {"T", hp.T},         {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.alpha = j.at("alpha").get<double>();
  hp.beta = j.at("beta").get<double>();
  hp.delta = j.at("delta").get<double>();
  hp.sigma = j.at("sigma").get<double>();
  hp.K = j.at("K").get<int>();
  hp.gamma = j.at("gamma").get<double>();
  hp.T = j.at("T").get<int>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

json manifest_to_json(const DatasetManifest& m) {
  json gen = hyperparams_to_json(m.generator);
  gen.erase("gamma");
  gen.erase("T");
  gen["N"] = m.spec.num_agents;
  gen["mean_entities"] = m.spec.mean_entities;
  gen["mean_events"] = m.spec.mean_events;
  gen["F"] = m.spec.feature_dim;
  gen["bias"] = m.spec.bias;
  gen["feature_distribution"] = "standard normal";
  gen["count_distribution"] = "1 + Poisson(mean - 1)";
  gen["rng"] = "xoshiro256**/splitmix64-v1";
  return {{"F", m.feature_dim},
          {"num_agents", m.num_agents},
          {"num_entities", m.num_entities},
          {"num_events", m.num_events},
          {"seed", m.seed},
          {"generator", std::move(gen)},
          {"ground_truth", m.ground_truth_path}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.feature_dim = j.at("F").get<std::size_t>();
  m.num_agents = j.at("num_agents").get<std::size_t>();
  m.num_entities = j.at("num_entities").get<std::size_t>();
  m.num_events = j.at("num_events").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const json& gen = j.at("generator");
  m.generator.alpha = gen.at("alpha").get<double>();
  m.generator.beta = gen.at("beta").get<double>();
  m.generator.delta = gen.at("delta").get<double>();
  m.generator.sigma = gen.at("sigma").get<double>();
  m.generator.K = gen.at("K").get<int>();
  m.generator.seed = gen.at("seed").get<std::uint64_t>();
  m.spec.num_agents = gen.at("N").get<std::size_t>();
  m.spec.mean_entities = gen.at("mean_entities").get<double>();
  m.spec.mean_events = gen.at("mean_events").get<double>();
  m.spec.feature_dim = gen.at("F").get<std::size_t>();
  m.spec.bias = gen.at("bias").get<bool>();
  m.ground_truth_path = j.value("ground_truth", std::string{});
  return m;
}

json ground_truth_to_json(const GroundTruth& truth, const HierDataset& data) {
  json labels = json::array();
  for (std::size_t i = 0; i < truth.z.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < truth.z[i].size(); ++j) {
      row.push_back({{"entity_id", data.agents[i].entities[j].id}, {"z", truth.z[i][j] + 1}});
    }
    labels.push_back({{"agent_id", data.agents[i].id}, {"entities", std::move(row)}});
  }
  return {{"K", truth.w.size()}, {"w", truth.w},           {"psi", truth.psi},
          {"theta", truth.theta}, {"labels", std::move(labels)}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth truth;
  truth.w = j.at("w").get<std::vector<Vec>>();
  truth.psi = j.at("psi").get<std::vector<double>>();
  truth.theta = j.at("theta").get<std::vector<std::vector<double>>>();
  for (const auto& agent : j.at("labels")) {
    std::vector<int> row;
    for (const auto& e : agent.at("entities")) row.push_back(e.at("z").get<int>() - 1);
    truth.z.push_back(std::move(row));
  }
  return truth;
}

}  // namespace hlcr
