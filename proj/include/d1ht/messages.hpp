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

#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <variant>
#include <vector>

#include "d1ht/ring.hpp"

namespace d1ht {

/// Simulated and protocol time: integer microseconds since an arbitrary epoch.
using Duration = std::chrono::microseconds;
using Time = Duration;

inline constexpr Time kNever = Time::max();

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-6; }
inline Duration from_seconds(double s) { return Duration(static_cast<std::int64_t>(std::llround(s * 1e6))); }

enum class EventKind : std::uint8_t { join = 0, leave = 1 };

/// A membership change. Identity is (kind, subject): a rejoin after a leave
/// is a different event from the original join only through time.
struct Event {
    EventKind kind = EventKind::join;
    PeerAddr subject;

    friend auto operator<=>(const Event&, const Event&) = default;
    friend bool operator==(const Event&, const Event&) = default;
};

namespace msg_flags {
/// Events acknowledged at TTL 0 and never forwarded: join catch-up and gap repair.
inline constexpr std::uint8_t kDirect = 0x01;
inline constexpr std::uint8_t kLeaveNotice = 0x02;  // voluntary departure announced to the successor
}  // namespace msg_flags

/// Fields shared by every datagram: the sender endpoint (ip from the network
/// header, port from PortNo), the instance discriminator and the sequence
/// number used for acknowledgment.
struct Header {
    PeerAddr sender;
    std::uint8_t system_id = 0;
    std::uint16_t seq = 0;

    friend bool operator==(const Header&, const Header&) = default;
};

struct MaintenanceMsg {
    Header hdr;
    std::uint8_t ttl = 0;
    std::uint8_t flags = 0;
    std::vector<Event> events;

    friend bool operator==(const MaintenanceMsg&, const MaintenanceMsg&) = default;
};

struct AckMsg {
    Header hdr;
    friend bool operator==(const AckMsg&, const AckMsg&) = default;
};

struct HeartbeatMsg {
    Header hdr;
    friend bool operator==(const HeartbeatMsg&, const HeartbeatMsg&) = default;
};

struct ProbeMsg {
    Header hdr;
    friend bool operator==(const ProbeMsg&, const ProbeMsg&) = default;
};

struct ProbeReplyMsg {
    Header hdr;
    friend bool operator==(const ProbeReplyMsg&, const ProbeReplyMsg&) = default;
};

/// 1h-Calot notification: exactly one event, no buffering.
struct CalotMsg {
    Header hdr;
    Event event;
    std::uint32_t origin_seq = 0;

    friend bool operator==(const CalotMsg&, const CalotMsg&) = default;
};

using Datagram = std::variant<MaintenanceMsg, AckMsg, HeartbeatMsg, ProbeMsg, ProbeReplyMsg, CalotMsg>;

inline const Header& header_of(const Datagram& d) {
    return std::visit([](const auto& m) -> const Header& { return m.hdr; }, d);
}

struct Outbound {
    PeerAddr to;
    Datagram dgram;
};

}  // namespace d1ht
