#pragma once

// Serialized AgentUpdate envelopes.
//
// JSON: {"version":1,"round":t,"agent_id":"..","K":K,"F":F,
//        "clusters":[{"D":[F*F row-major],"c":[F],"n":count}, ...]}
//
// Binary (all integers and floats little-endian, floats IEEE-754 float64):
//   magic "HLAU" | u32 version | u64 round | u32 id length | id bytes |
//   u32 K | u32 F | K x (F*F f64 D row-major, F f64 c, u64 n)

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hlcr/federated.hpp"

namespace hlcr {

inline constexpr std::uint32_t kWireVersion = 1;

class WireFormatError : public std::runtime_error {
 public:
  explicit WireFormatError(const std::string& what) : std::runtime_error(what) {}
};

std::string encode_update_json(const AgentUpdate& update);
AgentUpdate decode_update_json(std::string_view text);

std::vector<std::uint8_t> encode_update_binary(const AgentUpdate& update);
AgentUpdate decode_update_binary(std::span<const std::uint8_t> bytes);

}  // namespace hlcr
