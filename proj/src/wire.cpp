#include "hlcr/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace hlcr {

using nlohmann::json;

std::string encode_update_json(const AgentUpdate& update) {
  json j;
  j["version"] = kWireVersion;
  j["round"] = update.round;
  j["agent_id"] = update.agent_id;
  j["K"] = update.K();
  j["F"] = update.F();
  json clusters = json::array();
  for (int k = 0; k < update.K(); ++k) {
    const auto d = update.delta_D[k].row_major();
    clusters.push_back({{"D", std::vector<double>(d.begin(), d.end())},
                        {"c", update.delta_c[k]},
                        {"n", update.n[k]}});
  }
  j["clusters"] = std::move(clusters);
  return j.dump();
}

AgentUpdate decode_update_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("version").get<std::uint32_t>() != kWireVersion)
      throw WireFormatError("unsupported update version " + j.at("version").dump());
    const int K = j.at("K").get<int>();
    const auto F = j.at("F").get<std::size_t>();
    const json& clusters = j.at("clusters");
    if (K < 1 || F < 1 || clusters.size() != static_cast<std::size_t>(K))
      throw WireFormatError("update shape does not match K/F header");
    AgentUpdate u = AgentUpdate::zero(j.at("agent_id").get<std::string>(), j.at("round").get<int>(), K, F);
    for (int k = 0; k < K; ++k) {
      auto d = clusters[k].at("D").get<std::vector<double>>();
      auto c = clusters[k].at("c").get<std::vector<double>>();
      if (d.size() != F * F || c.size() != F) throw WireFormatError("cluster payload size mismatch");
      u.delta_D[k] = SpdMatrix(F, std::move(d));
      u.delta_c[k] = std::move(c);
      u.n[k] = clusters[k].at("n").get<std::uint64_t>();
    }
    return u;
  } catch (const json::exception& e) {
    throw WireFormatError(std::string("malformed update JSON: ") + e.what());
  }
}

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int b = 0; b < n; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw WireFormatError("truncated update at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(in_[pos_ + b]) << (8 * b);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "HLAU";

}  // namespace

std::vector<std::uint8_t> encode_update_binary(const AgentUpdate& update) {
  Writer w;
  w.bytes(kMagic);
  w.u32(kWireVersion);
  w.u64(static_cast<std::uint64_t>(update.round));
  w.u32(static_cast<std::uint32_t>(update.agent_id.size()));
  w.bytes(update.agent_id);
  w.u32(static_cast<std::uint32_t>(update.K()));
  w.u32(static_cast<std::uint32_t>(update.F()));
  for (int k = 0; k < update.K(); ++k) {
    for (double v : update.delta_D[k].row_major()) w.f64(v);
    for (double v : update.delta_c[k]) w.f64(v);
    w.u64(update.n[k]);
  }
  return w.take();
}

AgentUpdate decode_update_binary(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic) throw WireFormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kWireVersion) throw WireFormatError("unsupported update version " + std::to_string(version));
  const auto round = static_cast<int>(r.u64());
  const std::string id = r.bytes(r.u32());
  const std::uint32_t K = r.u32();
  const std::uint32_t F = r.u32();
  if (K < 1 || F < 1) throw WireFormatError("empty K or F");
  AgentUpdate u = AgentUpdate::zero(id, round, static_cast<int>(K), F);
  for (std::uint32_t k = 0; k < K; ++k) {
    for (double& v : u.delta_D[k].row_major()) v = r.f64();
    for (double& v : u.delta_c[k]) v = r.f64();
    u.n[k] = r.u64();
  }
  if (!r.done()) throw WireFormatError("trailing bytes after update");
  return u;
}

}  // namespace hlcr
