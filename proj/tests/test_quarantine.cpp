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


#include <doctest.h>

#include <map>
#include <set>

#include "d1ht/edra.hpp"
#include "d1ht/quarantine.hpp"
#include "net.hpp"

using namespace d1ht;
using namespace d1ht::quarantine;
using d1ht::testing::make_addrs;

namespace {

LookupOracle oracle_for(const RoutingTable& t) {
    LookupOracle o;
    o.ask = [&t](const PeerAddr& target, const PeerId& key) {
        if (!t.contains(ring::id_of(target)))
            return LookupReply{LookupReply::Status::dead, {}};
        const auto owner = t.owner_of(key).addr;
        if (owner == target)
            return LookupReply{LookupReply::Status::owner, {}};
        return LookupReply{LookupReply::Status::not_owner, owner};
    };
    o.bootstrap = [&t](const PeerId& key) { return t.owner_of(key).addr; };
    return o;
}

}  // namespace

TEST_CASE("request_join ranks gateways by probe delay then uptime") {
    QuarantineConfig cfg;
    cfg.gateways = 2;
    const auto a = make_addrs(4);
    using std::chrono::milliseconds;
    using std::chrono::seconds;
    const std::vector<GatewayCandidate> cands = {
        {a[0], milliseconds(30), seconds(10)},
        {a[1], milliseconds(10), seconds(5)},
        {a[2], milliseconds(10), seconds(50)},
        {a[3], milliseconds(5), seconds(1)},
    };
    const auto q = request_join(cands, cfg, from_seconds(7));
    CHECK(q.phase == Phase::quarantined);
    CHECK(q.entered_at == from_seconds(7));
    CHECK(q.gateway_addrs == std::vector<PeerAddr>{a[3], a[2]});
    CHECK_THROWS_AS(request_join({}, cfg, Time{}), Unreachable);
}

TEST_CASE("promotion happens at exactly t_q") {
    QuarantineConfig cfg;
    cfg.t_q = 600;
    auto q = request_join({{make_addrs(1)[0], {}, {}}}, cfg, from_seconds(100));
    CHECK_FALSE(ready_to_promote(q, cfg, from_seconds(699.999999)));
    CHECK_THROWS_AS(promote(q, cfg, from_seconds(699)), std::logic_error);
    CHECK(ready_to_promote(q, cfg, from_seconds(700)));
    promote(q, cfg, from_seconds(700));
    CHECK(q.phase == Phase::member);
    CHECK_FALSE(ready_to_promote(q, cfg, from_seconds(800)));
}

TEST_CASE("disabled quarantine promotes immediately") {
    QuarantineConfig cfg;
    cfg.t_q = 0;
    CHECK_FALSE(cfg.enabled());
    auto q = request_join({{make_addrs(1)[0], {}, {}}}, cfg, from_seconds(5));
    CHECK(ready_to_promote(q, cfg, from_seconds(5)));
}

TEST_CASE("limiter admits the configured rate per client") {
    GatewayLimiter lim(10);
    const auto a = make_addrs(2);
    int admitted = 0;
    for (int i = 0; i < 20; ++i)
        admitted += lim.admit(a[0], from_seconds(3.0 + i / 20.0));
    CHECK(admitted == 10);
    CHECK(lim.admit(a[1], from_seconds(3.5)));
    CHECK(lim.admit(a[0], from_seconds(4.0)));
}

TEST_CASE("quarantined lookups take two hops and fail over") {
    const auto members = make_addrs(16);
    const RoutingTable truth(members);
    const auto oracle = oracle_for(truth);
    EdraConfig ecfg;
    std::map<PeerAddr, std::unique_ptr<edra::Peer>> nodes;
    for (const auto& m : members)
        nodes[m] = std::make_unique<edra::Peer>(ecfg, m, members, Time{});
    std::map<PeerAddr, GatewayLimiter> limiters;
    const auto client = PeerAddr::from_u32(0x0E000001u, 7700);
    QuarantineConfig cfg;
    cfg.gateways = 2;
    auto q = request_join({{members[3], std::chrono::milliseconds(1), {}}, {members[7], std::chrono::milliseconds(2), {}}},
                          cfg, Time{});
    std::set<PeerAddr> dead;
    auto live = [&](const PeerAddr& a) -> Node* { return dead.count(a) ? nullptr : nodes.at(a).get(); };
    auto limiter_of = [&](const PeerAddr& a) -> GatewayLimiter& { return limiters.try_emplace(a, 10.0).first->second; };
    const auto key = ring::id_of(PeerAddr::from_u32(0x0F000001u, 1));

    SUBCASE("fresh gateway") {
        const auto r = quarantined_lookup(q, client, key, live, limiter_of, oracle, from_seconds(1));
        CHECK(r.hops == 2);
        CHECK(r.target == truth.owner_of(key).addr);
        CHECK(q.active_gateway == 0);
    }
    SUBCASE("dead gateway fails over to the next one") {
        dead.insert(members[3]);
        const auto r = quarantined_lookup(q, client, key, live, limiter_of, oracle, from_seconds(1));
        CHECK(r.target == truth.owner_of(key).addr);
        CHECK(q.active_gateway == 1);
        CHECK(r.hops == 3);
    }
    SUBCASE("every gateway gone falls back to the bootstrap") {
        dead.insert(members[3]);
        dead.insert(members[7]);
        const auto r = quarantined_lookup(q, client, key, live, limiter_of, oracle, from_seconds(1));
        CHECK(r.via_bootstrap);
        CHECK(r.target == truth.owner_of(key).addr);
    }
    SUBCASE("rate limit rejects half of 20 lookups offered in one second") {
        GatewayLimiter lim(10);
        int rejected = 0;
        for (int i = 0; i < 20; ++i) {
            try {
                gateway_lookup(client, key, *nodes.at(members[3]), lim, oracle, from_seconds(9.0 + i / 20.0));
            } catch (const RateLimited&) {
                ++rejected;
            }
        }
        CHECK(rejected == 10);
    }
}

TEST_CASE("invalid configuration") {
    QuarantineConfig cfg;
    cfg.gateways = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.gateways = 1;
    cfg.t_q = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
