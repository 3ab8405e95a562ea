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

#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "d1ht/node.hpp"

namespace d1ht::quarantine {

struct QuarantineConfig {
    double t_q = 600.0;  // seconds; 0 disables
    unsigned gateways = 1;
    double gateway_rate_limit = 10.0;  // forwarded lookups per second per client

    bool enabled() const { return t_q > 0.0; }
    void validate() const;
};

enum class Phase : std::uint8_t { quarantined, promoting, member };

struct QuarantinePhase {
    Phase phase = Phase::quarantined;
    Time entered_at{};
    std::vector<PeerAddr> gateway_addrs;  // best first
    std::size_t active_gateway = 0;
};

/// A member contacted while joining, with what the joiner measured about it.
struct GatewayCandidate {
    PeerAddr addr;
    Duration probe_delay{};
    Duration uptime{};
};

class Unreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RateLimited : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Enters quarantine. Gateways are the `cfg.gateways` candidates with the
/// lowest probe delay, ties broken by longer uptime. Throws Unreachable when
/// no candidate was contacted.
QuarantinePhase request_join(const std::vector<GatewayCandidate>& contacted, const QuarantineConfig& cfg, Time now);

bool ready_to_promote(const QuarantinePhase& q, const QuarantineConfig& cfg, Time now);

/// Marks the peer a member; the caller then runs the overlay join.
/// Throws std::logic_error before t_q has elapsed.
void promote(QuarantinePhase& q, const QuarantineConfig& cfg, Time now);

/// Per-client limiter over fixed one-second windows.
class GatewayLimiter {
public:
    explicit GatewayLimiter(double per_second) : per_second_(per_second) {}
    /// Consumes one slot for `client`; false when the window is exhausted.
    bool admit(const PeerAddr& client, Time now);

private:
    struct Window {
        std::int64_t second = -1;
        unsigned used = 0;
    };
    double per_second_;
    std::unordered_map<PeerAddr, Window, PeerAddrHash> windows_;
};

/// Gateway side: resolves `key` in one hop and relays; the client observes
/// one extra hop. Throws RateLimited when the client exceeded its budget.
LookupResult gateway_lookup(const PeerAddr& client, const PeerId& key, Node& gateway, GatewayLimiter& limiter,
                            const LookupOracle& oracle, Time now);

/// Client side: tries gateways in order starting at the active one, failing
/// over on dead or rate-limiting gateways. `live` maps an address to its
/// node, or nullptr when the peer is gone. Falls back to the bootstrap after
/// every gateway failed.
LookupResult quarantined_lookup(QuarantinePhase& q, const PeerAddr& client, const PeerId& key,
                                const std::function<Node*(const PeerAddr&)>& live,
                                const std::function<GatewayLimiter&(const PeerAddr&)>& limiter_of,
                                const LookupOracle& oracle, Time now);

}  // namespace d1ht::quarantine
