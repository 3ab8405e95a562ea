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

#include <algorithm>
#include <array>
#include <random>
#include <vector>

#include "d1ht/ring.hpp"

using namespace d1ht;

namespace {

PeerId random_id(std::mt19937_64& rng) {
    PeerId id;
    for (auto& b : id.bytes)
        b = static_cast<std::uint8_t>(rng());
    return id;
}

// Eleven peers in id order: the crashed peer p, then P, P1, ..., P9.
ring::RingView fig1_full() {
    std::vector<ring::Member> ms;
    for (std::uint64_t i = 0; i < 11; ++i)
        ms.push_back({PeerId::from_uint(100 + 10 * i), PeerAddr::from_u32(0x0A000001u + static_cast<std::uint32_t>(i), 7700)});
    return ring::RingView(ms);
}

// The same ring after p crashed: P, P1, ..., P9.
ring::RingView fig1_live() {
    auto ms = fig1_full().members();
    ms.erase(ms.begin());
    return ring::RingView(ms);
}

PeerId P(std::size_t i) { return PeerId::from_uint(110 + 10 * i); }
const PeerId kCrashed = PeerId::from_uint(100);

}  // namespace

TEST_CASE("id_of is SHA-1 of ip bytes followed by the big-endian port") {
    CHECK(ring::id_of(PeerAddr::from_u32(0x0A000001u, 7700)).hex() == "e218852f953758955da5f4d924c66c85030452bb");
    CHECK(ring::id_of(PeerAddr::from_u32(0xC0A80107u, 8080)).hex() == "736ece5b51e6da38b756893932466cc5944764ac");
    const auto a = PeerAddr::from_u32(0x0A0B0C0Du, 4242);
    CHECK(ring::id_of(a) == ring::id_of(a));
}

TEST_CASE("distinct addresses give distinct ids") {
    std::vector<PeerId> ids;
    for (std::uint32_t i = 0; i < 20000; ++i)
        ids.push_back(ring::id_of(PeerAddr::from_u32(0x0A000000u + i, 7700)));
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("ids of random addresses are uniform over 64 equal arcs") {
    std::mt19937_64 rng(20260101);
    std::array<double, 64> counts{};
    const int samples = 100000;
    for (int i = 0; i < samples; ++i) {
        const auto a = PeerAddr::from_u32(static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng()));
        ++counts[ring::id_of(a).bytes[0] >> 2];
    }
    const double expected = samples / 64.0;
    double chi2 = 0;
    for (double c : counts)
        chi2 += (c - expected) * (c - expected) / expected;
    // Upper 1% point of chi-square with 63 degrees of freedom.
    CHECK(chi2 < 92.010);
}

TEST_CASE("in_arc includes both ends and wraps") {
    const auto a = PeerId::from_uint(10), b = PeerId::from_uint(20), c = PeerId::from_uint(30);
    CHECK(ring::in_arc(b, a, c));
    CHECK(ring::in_arc(a, a, c));
    CHECK(ring::in_arc(c, a, c));
    CHECK_FALSE(ring::in_arc(a, b, c));
    CHECK(ring::in_arc(a, c, b));  // wrapping arc c -> b passes through a
    CHECK(ring::in_arc(a, a, a));
    CHECK_FALSE(ring::in_arc(b, a, a));
}

TEST_CASE("succ and pred walks") {
    const auto full = fig1_full();
    const auto live = fig1_live();
    SUBCASE("zero steps stay put") {
        CHECK(ring::succ(full, P(3), 0) == P(3));
        CHECK(ring::pred(full, P(3), 0) == P(3));
    }
    SUBCASE("a full turn returns to the start") {
        for (const auto& m : full.members())
            CHECK(ring::succ(full, m.id, full.size()) == m.id);
    }
    SUBCASE("pred inverts succ") {
        for (const auto& m : full.members())
            CHECK(ring::pred(full, ring::succ(full, m.id, 1), 1) == m.id);
    }
    SUBCASE("eleven-peer ring labels") {
        CHECK(ring::succ(full, P(0), 8) == P(8));
        CHECK(ring::pred(full, P(8), 2) == P(6));
        CHECK(ring::succ(full, P(9), 1) == kCrashed);
        CHECK(ring::succ(live, P(9), 1) == P(0));
    }
    SUBCASE("non-members are rejected") {
        CHECK_THROWS_AS(ring::succ(full, PeerId::from_uint(7), 1), NotAMember);
    }
}

TEST_CASE("stretch_contains") {
    const auto live = fig1_live();
    CHECK(ring::stretch_contains(live, P(4), 0, P(4)));
    CHECK_FALSE(ring::stretch_contains(live, P(4), 0, P(5)));
    for (const auto& m : live.members())
        CHECK(ring::stretch_contains(live, P(2), live.size() - 1, m.id));
    // stretch(P8, 2) = {P8, P9, P}: the wraparound case behind P8's suppressed messages.
    CHECK(ring::stretch_contains(live, P(8), 2, P(0)));
    CHECK_FALSE(ring::stretch_contains(live, P(8), 2, P(1)));
}

TEST_CASE("owner_of") {
    SUBCASE("a member's own id maps to that member") {
        const auto live = fig1_live();
        for (const auto& m : live.members())
            CHECK(ring::owner_of(live, m.id) == m.id);
    }
    SUBCASE("single member owns everything") {
        const ring::RingView one({{PeerId::from_uint(5), PeerAddr::from_u32(1, 1)}});
        std::mt19937_64 rng(3);
        for (int i = 0; i < 100; ++i)
            CHECK(ring::owner_of(one, random_id(rng)) == PeerId::from_uint(5));
    }
    SUBCASE("random view matches a linear scan") {
        std::mt19937_64 rng(77);
        std::vector<PeerAddr> addrs;
        for (std::uint32_t i = 0; i < 64; ++i)
            addrs.push_back(PeerAddr::from_u32(static_cast<std::uint32_t>(rng()), 7700));
        const auto view = ring::RingView::from_addrs(addrs);
        std::vector<PeerId> ids;
        for (const auto& a : addrs)
            ids.push_back(ring::id_of(a));
        for (int i = 0; i < 10000; ++i) {
            const auto key = random_id(rng);
            PeerId best{}, lowest = ids.front();
            bool found = false;
            for (const auto& id : ids) {
                lowest = std::min(lowest, id);
                if (id >= key && (!found || id < best)) {
                    best = id;
                    found = true;
                }
            }
            REQUIRE(ring::owner_of(view, key) == (found ? best : lowest));
        }
    }
    SUBCASE("empty view throws") {
        CHECK_THROWS_AS(ring::owner_of(ring::RingView{}, PeerId::from_uint(1)), EmptyRing);
    }
}

TEST_CASE("duplicate ids are rejected") {
    const auto a = PeerAddr::from_u32(0x0A000001u, 7700);
    CHECK_THROWS_AS(ring::RingView::from_addrs({a, a}), IdCollision);
}
