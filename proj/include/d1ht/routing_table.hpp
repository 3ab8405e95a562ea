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

#include <cstddef>
#include <optional>
#include <vector>

#include "d1ht/ring.hpp"

namespace d1ht {

/// Full routing table of a single-hop peer: every known member, ordered by id.
///
/// Storage is a list of sorted chunks so that inserts, erases and rank
/// selection cost O(sqrt-ish) instead of shifting the whole table; a peer in
/// a churning system applies one update per system-wide event. The id acts
/// as the index; the payload per member is the 6-byte address.
class RoutingTable {
public:
    using Entry = ring::Member;
    static constexpr std::size_t kPayloadBytesPerEntry = sizeof(PeerAddr);

    RoutingTable() = default;
    explicit RoutingTable(const std::vector<PeerAddr>& addrs);

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    std::size_t payload_bytes() const { return size_ * kPayloadBytesPerEntry; }

    /// Returns false if the id is already present.
    bool insert(const PeerId& id, const PeerAddr& addr);
    bool insert(const PeerAddr& addr) { return insert(ring::id_of(addr), addr); }
    bool erase(const PeerId& id);

    bool contains(const PeerId& id) const;
    std::optional<PeerAddr> find(const PeerId& id) const;

    /// Entry at position `rank` in id order; rank < size().
    const Entry& at(std::size_t rank) const;
    /// Position of a member; throws NotAMember.
    std::size_t rank_of(const PeerId& id) const;
    /// Number of entries with id strictly below `key`.
    std::size_t lower_rank(const PeerId& key) const;

    /// i-th clockwise successor / predecessor of member `self`.
    const Entry& succ(const PeerId& self, std::size_t i) const;
    const Entry& pred(const PeerId& self, std::size_t i) const;
    /// First member clockwise at or after `key`; throws EmptyRing.
    const Entry& owner_of(const PeerId& key) const;
    /// First member strictly clockwise after `key` (key need not be a member).
    const Entry& next_after(const PeerId& key) const;

    std::vector<Entry> entries() const;
    ring::RingView view() const { return ring::RingView(entries()); }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& c : chunks_)
            for (const auto& e : c)
                fn(e);
    }

private:
    static constexpr std::size_t kMaxChunk = 128;

    std::size_t chunk_for(const PeerId& id) const;
    void reindex(std::size_t from);

    std::vector<std::vector<Entry>> chunks_;
    std::vector<std::size_t> starts_;  // rank of each chunk's first entry
    std::size_t size_ = 0;
};

}  // namespace d1ht
