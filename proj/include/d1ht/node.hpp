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
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "d1ht/messages.hpp"
#include "d1ht/routing_table.hpp"

namespace d1ht {

struct EdraConfig {
    double f = 0.01;
    std::uint8_t system_id = 1;
    std::uint16_t default_port = 7700;
    double theta_min = 0.5;  // seconds
    double theta_max = 300.0;
    Duration retransmit_timeout = std::chrono::milliseconds(500);
    unsigned retransmit_max = 3;  // total transmissions of one datagram
    /// How long a departed subject stays blocked from re-insertion and how
    /// long an acknowledged event is remembered for dedup.
    Duration event_memory = std::chrono::seconds(120);
    bool passive_learning = true;
    bool event_cap_enabled = true;
    /// When > 0, Θ is pinned to this value (seconds) and never re-tuned.
    double theta_fixed = 0.0;
    /// 1h-Calot only: heartbeat period and missed-heartbeat timeout.
    Duration heartbeat_period = std::chrono::seconds(15);
    Duration heartbeat_timeout = std::chrono::seconds(30);

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

enum class AckOutcome : std::uint8_t {
    fresh,      // first acknowledgment of this event
    raised,     // seen before at a lower TTL, re-buffered at the higher one
    duplicate,  // seen before at the same or a higher TTL
    stale,      // join of a subject whose leave is still remembered; ignored
};

struct AckRecord {
    Event event;
    std::uint8_t ttl = 0;
    AckOutcome outcome = AckOutcome::fresh;
    bool origin = false;  // this peer detected the event (acknowledged at TTL ρ)
};

/// Everything a single transition emits.
struct Effects {
    std::vector<Outbound> send;
    std::vector<AckRecord> acks;
    /// Maintenance messages emitted by each interval closed in this step.
    std::vector<unsigned> interval_msgs;

    void append(Effects&& other);
};

struct LookupReply {
    enum class Status : std::uint8_t { owner, not_owner, dead };
    Status status = Status::owner;
    PeerAddr redirect;  // the answering peer's own owner for the key, when not_owner
};

/// Answers the remote side of a lookup: how `target` responds to a request
/// for `key`, and the authoritative owner a bootstrap server would return.
struct LookupOracle {
    std::function<LookupReply(const PeerAddr& target, const PeerId& key)> ask;
    std::function<PeerAddr(const PeerId& key)> bootstrap;
};

struct LookupResult {
    PeerAddr target;
    unsigned hops = 0;
    bool routing_failure = false;
    bool via_bootstrap = false;
};

inline constexpr unsigned kLookupRetries = 8;

/// State shared by every protocol variant: identity, full routing table and
/// the memory of recently acknowledged events.
class Node {
public:
    Node(const EdraConfig& cfg, const PeerAddr& self);
    virtual ~Node() = default;

    const PeerAddr& addr() const { return self_; }
    const PeerId& id() const { return self_id_; }
    const RoutingTable& table() const { return table_; }
    const EdraConfig& config() const { return cfg_; }

    virtual Effects on_receive(const Datagram& d, Time now) = 0;
    virtual Effects on_timer(Time now) = 0;
    /// Earliest time on_timer has work to do; kNever if none.
    virtual Time next_deadline() const = 0;
    /// Called on the successor of a joining peer once the joiner holds the table.
    virtual Effects admit(const PeerAddr& joiner, Time now) = 0;
    /// Builds the joiner's initial state from this (successor) peer.
    virtual std::unique_ptr<Node> make_joiner(const PeerAddr& joiner, Time now) const = 0;
    virtual Effects leave(bool voluntary, Time now) = 0;
    /// Events buffered for forwarding (acknowledged with TTL > 0) and not yet sent.
    virtual std::size_t forwardable_buffered() const = 0;

    /// One-hop lookup with retries on routing failure. Dead targets are dropped
    /// from the table; not-owner answers are learned.
    LookupResult lookup(const PeerId& key, const LookupOracle& oracle, Time now);

protected:
    struct Recent {
        EventKind kind = EventKind::leave;
        std::int16_t max_ttl = -1;  // -1: removed locally, event not yet received
        Time at{};
    };

    bool recently_departed(const PeerAddr& a, Time now) const;
    /// A lookup found `a` gone. Default: drop it from the table.
    virtual void on_unreachable(const PeerAddr& a, Time now);
    void forget_locally(const PeerAddr& a, Time now);
    void sweep_recent(Time now);
    bool learn(const PeerAddr& a, Time now);

    EdraConfig cfg_;
    PeerAddr self_;
    PeerId self_id_;
    RoutingTable table_;
    std::unordered_map<PeerAddr, Recent, PeerAddrHash> recent_;
};

}  // namespace d1ht
