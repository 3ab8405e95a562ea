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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace d1ht {

/// Point on the 160-bit identifier ring, stored big-endian so that
/// lexicographic byte order equals numeric order.
struct PeerId {
    static constexpr std::size_t kBytes = 20;
    std::array<std::uint8_t, kBytes> bytes{};

    /// Id whose numeric value is `v` (upper 96 bits zero). Handy for tests.
    static PeerId from_uint(std::uint64_t v);
    /// Id whose top 64 bits are `v` and the rest zero.
    static PeerId from_prefix(std::uint64_t v);

    std::uint64_t prefix64() const;
    std::string hex() const;

    friend auto operator<=>(const PeerId&, const PeerId&) = default;
    friend bool operator==(const PeerId&, const PeerId&) = default;
};

/// IPv4 endpoint. Packed to the 6 bytes a routing-table entry stores.
struct PeerAddr {
    std::array<std::uint8_t, 4> ip{};
    std::uint16_t port = 0;

    static PeerAddr from_u32(std::uint32_t ip, std::uint16_t port);
    std::uint32_t ip_u32() const;
    /// 48-bit packing ip||port, used as a compact map key.
    std::uint64_t packed() const { return (std::uint64_t{ip_u32()} << 16) | port; }
    bool default_port(std::uint16_t instance_default) const { return port == instance_default; }
    std::string str() const;

    friend auto operator<=>(const PeerAddr&, const PeerAddr&) = default;
    friend bool operator==(const PeerAddr&, const PeerAddr&) = default;
};
static_assert(sizeof(PeerAddr) == 6, "routing-table payload must stay 6 bytes per peer");

struct PeerAddrHash {
    std::size_t operator()(const PeerAddr& a) const noexcept { return std::hash<std::uint64_t>{}(a.packed()); }
};

class NotAMember : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class EmptyRing : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class IdCollision : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace ring {

/// SHA-1 of the 6-byte ip||port encoding (port big-endian).
PeerId id_of(const PeerAddr& addr);

/// x lies on the clockwise arc from `from` to `to`, both ends included.
/// When from == to the arc is the single point.
bool in_arc(const PeerId& x, const PeerId& from, const PeerId& to);

struct Member {
    PeerId id;
    PeerAddr addr;
};

/// Immutable snapshot of the membership sorted by id. Used as the ground
/// truth the simulator and tests compare routing tables against.
class RingView {
public:
    RingView() = default;
    explicit RingView(std::vector<Member> members);
    static RingView from_addrs(const std::vector<PeerAddr>& addrs);

    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    const Member& at(std::size_t rank) const { return members_[rank]; }
    const std::vector<Member>& members() const { return members_; }

    /// Rank of `p`; throws NotAMember.
    std::size_t rank_of(const PeerId& p) const;
    bool contains(const PeerId& p) const;

private:
    std::vector<Member> members_;
};

PeerId succ(const RingView& view, const PeerId& p, std::size_t i);
PeerId pred(const RingView& view, const PeerId& p, std::size_t i);
/// x is one of p, succ(p,1), ..., succ(p,k).
bool stretch_contains(const RingView& view, const PeerId& p, std::size_t k, const PeerId& x);
/// First member clockwise at or after `key`.
PeerId owner_of(const RingView& view, const PeerId& key);

}  // namespace ring
}  // namespace d1ht
