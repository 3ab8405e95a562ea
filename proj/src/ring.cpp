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

#include "d1ht/ring.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace d1ht {

PeerId PeerId::from_uint(std::uint64_t v) {
    PeerId id;
    for (int i = 0; i < 8; ++i)
        id.bytes[kBytes - 1 - i] = static_cast<std::uint8_t>(v >> (8 * i));
    return id;
}

PeerId PeerId::from_prefix(std::uint64_t v) {
    PeerId id;
    for (int i = 0; i < 8; ++i)
        id.bytes[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    return id;
}

std::uint64_t PeerId::prefix64() const {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v = (v << 8) | bytes[i];
    return v;
}

std::string PeerId::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(kBytes * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

PeerAddr PeerAddr::from_u32(std::uint32_t ip, std::uint16_t port) {
    PeerAddr a;
    a.ip = {static_cast<std::uint8_t>(ip >> 24), static_cast<std::uint8_t>(ip >> 16),
            static_cast<std::uint8_t>(ip >> 8), static_cast<std::uint8_t>(ip)};
    a.port = port;
    return a;
}

std::uint32_t PeerAddr::ip_u32() const {
    return (std::uint32_t{ip[0]} << 24) | (std::uint32_t{ip[1]} << 16) | (std::uint32_t{ip[2]} << 8) | ip[3];
}

std::string PeerAddr::str() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u:%u", ip[0], ip[1], ip[2], ip[3], port);
    return buf;
}

namespace ring {

namespace {

PeerId sha1_of(const PeerAddr& addr) {
    const std::uint8_t input[6] = {addr.ip[0], addr.ip[1], addr.ip[2], addr.ip[3],
                                   static_cast<std::uint8_t>(addr.port >> 8),
                                   static_cast<std::uint8_t>(addr.port)};
    PeerId id;
    unsigned int len = 0;
    if (EVP_Digest(input, sizeof(input), id.bytes.data(), &len, EVP_sha1(), nullptr) != 1 ||
        len != PeerId::kBytes)
        throw std::runtime_error("SHA-1 digest failed");
    return id;
}

}  // namespace

PeerId id_of(const PeerAddr& addr) {
    // Hot path in the simulator: every acknowledged event needs its subject id.
    thread_local std::unordered_map<std::uint64_t, PeerId> memo;
    if (memo.size() > (1u << 20))
        memo.clear();
    auto [it, inserted] = memo.try_emplace(addr.packed());
    if (inserted)
        it->second = sha1_of(addr);
    return it->second;
}

bool in_arc(const PeerId& x, const PeerId& from, const PeerId& to) {
    if (from <= to)
        return from <= x && x <= to;
    return x >= from || x <= to;
}

RingView::RingView(std::vector<Member> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end(), [](const Member& a, const Member& b) { return a.id < b.id; });
    auto dup = std::adjacent_find(members_.begin(), members_.end(),
                                  [](const Member& a, const Member& b) { return a.id == b.id; });
    if (dup != members_.end())
        throw IdCollision("duplicate peer id " + dup->id.hex());
}

RingView RingView::from_addrs(const std::vector<PeerAddr>& addrs) {
    std::vector<Member> m;
    m.reserve(addrs.size());
    for (const auto& a : addrs)
        m.push_back({id_of(a), a});
    return RingView(std::move(m));
}

std::size_t RingView::rank_of(const PeerId& p) const {
    auto it = std::lower_bound(members_.begin(), members_.end(), p,
                               [](const Member& m, const PeerId& id) { return m.id < id; });
    if (it == members_.end() || it->id != p)
        throw NotAMember("peer " + p.hex() + " is not a ring member");
    return static_cast<std::size_t>(it - members_.begin());
}

bool RingView::contains(const PeerId& p) const {
    return std::binary_search(members_.begin(), members_.end(), Member{p, {}},
                              [](const Member& a, const Member& b) { return a.id < b.id; });
}

PeerId succ(const RingView& view, const PeerId& p, std::size_t i) {
    const auto r = view.rank_of(p);
    return view.at((r + i % view.size()) % view.size()).id;
}

PeerId pred(const RingView& view, const PeerId& p, std::size_t i) {
    const auto r = view.rank_of(p);
    const auto n = view.size();
    return view.at((r + n - i % n) % n).id;
}

bool stretch_contains(const RingView& view, const PeerId& p, std::size_t k, const PeerId& x) {
    const auto n = view.size();
    const auto rp = view.rank_of(p);
    const auto rx = view.rank_of(x);
    return (rx + n - rp) % n <= k;
}

PeerId owner_of(const RingView& view, const PeerId& key) {
    if (view.empty())
        throw EmptyRing("owner_of on an empty ring");
    const auto& m = view.members();
    auto it = std::lower_bound(m.begin(), m.end(), key, [](const Member& a, const PeerId& k) { return a.id < k; });
    return it == m.end() ? m.front().id : it->id;
}

}  // namespace ring
}  // namespace d1ht
