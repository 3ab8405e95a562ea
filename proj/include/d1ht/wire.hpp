// Copyright 2026 The d1ht Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "d1ht/messages.hpp"

namespace d1ht::wire {

// Sizes in bits including the 28-byte IPv4+UDP overhead, which is accounted
// but never serialized.
struct WireCosts {
    static constexpr std::uint32_t kNetOverheadBytes = 28;
    static constexpr std::uint32_t kNetOverheadBits = kNetOverheadBytes * 8;
    static constexpr std::uint32_t v_m = 320;  // maintenance fixed part
    static constexpr std::uint32_t v_a = 288;  // ack
    static constexpr std::uint32_t v_h = 288;  // heartbeat / probe
    static constexpr std::uint32_t v_c = 384;  // 1h-Calot notification
    static constexpr std::uint32_t m_default = 32;
    static constexpr std::uint32_t m_alt = 48;

    static constexpr std::size_t kMaintenanceFixedPayload = v_m / 8 - kNetOverheadBytes;  // 12
    static constexpr std::size_t kAckPayload = v_a / 8 - kNetOverheadBytes;               // 8
    static constexpr std::size_t kCalotPayload = v_c / 8 - kNetOverheadBytes;             // 20
};
static_assert(WireCosts::kMaintenanceFixedPayload == 12);
static_assert(WireCosts::kAckPayload == 8);
static_assert(WireCosts::kCalotPayload == 20);

enum class MsgType : std::uint8_t {
    maintenance = 1,
    ack = 2,
    heartbeat = 3,
    calot = 4,
    probe = 5,
    probe_reply = 6,
};

class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EncodedDatagram {
    std::vector<std::uint8_t> bytes;  // payload only
    std::uint32_t accounted_bits = 0;  // payload + network overhead
};

inline constexpr std::size_t kMaxClassCount = 255;

/// Encodes a maintenance message. Events are grouped as join/leave x
/// default/alternate port; when a group exceeds 255 entries the message is
/// split and each extra datagram takes the next sequence number.
/// Throws WireError when ttl >= rho (except for flagged control messages,
/// which always travel with ttl 0).
std::vector<EncodedDatagram> encode_maintenance(const MaintenanceMsg& msg, std::uint16_t default_port, unsigned rho);

EncodedDatagram encode_ack(const AckMsg& msg);
EncodedDatagram encode_heartbeat(const HeartbeatMsg& msg);
EncodedDatagram encode_probe(const ProbeMsg& msg);
EncodedDatagram encode_probe_reply(const ProbeReplyMsg& msg);
EncodedDatagram encode_calot(const CalotMsg& msg);
/// Contract form: 1h-Calot carries exactly one event. Throws std::invalid_argument otherwise.
EncodedDatagram encode_calot(const std::vector<Event>& events, const Header& hdr, std::uint32_t origin_seq);

/// Decodes one payload. The sender ip is not part of the payload and comes
/// from the datagram's network source. Throws WireError on truncated,
/// oversized or unknown input; never reads past `bytes`.
Datagram decode(std::span<const std::uint8_t> bytes, std::uint16_t default_port, std::array<std::uint8_t, 4> source_ip = {});

/// Events in wire order: join/default, leave/default, join/alt, leave/alt,
/// stable within each group. decode(encode(m)) == canonical(m).
MaintenanceMsg canonical(MaintenanceMsg msg, std::uint16_t default_port);

/// Accounted size of a datagram without serializing it; equals the sum of
/// accounted_bits over the datagrams the encoder would produce.
std::uint64_t accounted_bits(const Datagram& d, std::uint16_t default_port);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Parses hex digits, ignoring whitespace. Throws WireError on bad input.
std::vector<std::uint8_t> from_hex(const std::string& text);
/// Human-readable multi-line rendering of a decoded datagram.
std::string describe(const Datagram& d, std::uint16_t default_port);

}  // namespace d1ht::wire
