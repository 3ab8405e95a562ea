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

#include "d1ht/quarantine.hpp"

#include <algorithm>
#include <cmath>

namespace d1ht::quarantine {

void QuarantineConfig::validate() const {
    if (t_q < 0.0)
        throw std::invalid_argument("t_q must be non-negative");
    if (gateways < 1)
        throw std::invalid_argument("at least one gateway is required");
    if (!(gateway_rate_limit > 0.0))
        throw std::invalid_argument("gateway_rate_limit must be positive");
}

QuarantinePhase request_join(const std::vector<GatewayCandidate>& contacted, const QuarantineConfig& cfg, Time now) {
    cfg.validate();
    if (contacted.empty())
        throw Unreachable("no member answered the join request");
    auto ranked = contacted;
    std::stable_sort(ranked.begin(), ranked.end(), [](const GatewayCandidate& a, const GatewayCandidate& b) {
        if (a.probe_delay != b.probe_delay)
            return a.probe_delay < b.probe_delay;
        return a.uptime > b.uptime;
    });
    QuarantinePhase q;
    q.entered_at = now;
    for (std::size_t i = 0; i < ranked.size() && i < cfg.gateways; ++i)
        q.gateway_addrs.push_back(ranked[i].addr);
    return q;
}

bool ready_to_promote(const QuarantinePhase& q, const QuarantineConfig& cfg, Time now) {
    return q.phase != Phase::member && now - q.entered_at >= from_seconds(cfg.t_q);
}

void promote(QuarantinePhase& q, const QuarantineConfig& cfg, Time now) {
    if (!ready_to_promote(q, cfg, now))
        throw std::logic_error("quarantine period has not elapsed");
    q.phase = Phase::member;
}

bool GatewayLimiter::admit(const PeerAddr& client, Time now) {
    const auto second = now.count() / 1'000'000;
    auto& w = windows_[client];
    if (w.second != second) {
        w.second = second;
        w.used = 0;
    }
    if (static_cast<double>(w.used) + 1.0 > per_second_)
        return false;
    ++w.used;
    return true;
}

LookupResult gateway_lookup(const PeerAddr& client, const PeerId& key, Node& gateway, GatewayLimiter& limiter,
                            const LookupOracle& oracle, Time now) {
    if (!limiter.admit(client, now))
        throw RateLimited("gateway " + gateway.addr().str() + " rejected " + client.str());
    auto res = gateway.lookup(key, oracle, now);
    ++res.hops;
    return res;
}

LookupResult quarantined_lookup(QuarantinePhase& q, const PeerAddr& client, const PeerId& key,
                                const std::function<Node*(const PeerAddr&)>& live,
                                const std::function<GatewayLimiter&(const PeerAddr&)>& limiter_of,
                                const LookupOracle& oracle, Time now) {
    unsigned wasted = 0;
    for (std::size_t tried = 0; tried < q.gateway_addrs.size(); ++tried) {
        const auto idx = (q.active_gateway + tried) % q.gateway_addrs.size();
        const auto& gw_addr = q.gateway_addrs[idx];
        Node* gw = live(gw_addr);
        if (gw == nullptr) {
            ++wasted;
            continue;
        }
        try {
            auto res = gateway_lookup(client, key, *gw, limiter_of(gw_addr), oracle, now);
            q.active_gateway = idx;
            res.hops += wasted;
            res.routing_failure = res.routing_failure || wasted > 0;
            return res;
        } catch (const RateLimited&) {
            ++wasted;
        }
    }
    LookupResult res;
    res.hops = wasted + 1;
    res.routing_failure = true;
    res.via_bootstrap = true;
    res.target = oracle.bootstrap(key);
    return res;
}

}  // namespace d1ht::quarantine
