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

#include "d1ht/routing_table.hpp"

#include <algorithm>

namespace d1ht {

namespace {

bool id_less(const RoutingTable::Entry& e, const PeerId& id) { return e.id < id; }

}  // namespace

RoutingTable::RoutingTable(const std::vector<PeerAddr>& addrs) {
    std::vector<Entry> all;
    all.reserve(addrs.size());
    for (const auto& a : addrs)
        all.push_back({ring::id_of(a), a});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });
    all.erase(std::unique(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.id == b.id; }),
              all.end());
    for (std::size_t i = 0; i < all.size(); i += kMaxChunk / 2) {
        auto end = std::min(all.size(), i + kMaxChunk / 2);
        chunks_.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(i), all.begin() + static_cast<std::ptrdiff_t>(end));
    }
    size_ = all.size();
    reindex(0);
}

std::size_t RoutingTable::chunk_for(const PeerId& id) const {
    // Last chunk whose first id is <= id, or chunk 0.
    auto it = std::upper_bound(chunks_.begin(), chunks_.end(), id,
                               [](const PeerId& k, const std::vector<Entry>& c) { return k < c.front().id; });
    return it == chunks_.begin() ? 0 : static_cast<std::size_t>(it - chunks_.begin()) - 1;
}

void RoutingTable::reindex(std::size_t from) {
    starts_.resize(chunks_.size());
    std::size_t acc = from == 0 ? 0 : starts_[from - 1] + chunks_[from - 1].size();
    for (std::size_t i = from; i < chunks_.size(); ++i) {
        starts_[i] = acc;
        acc += chunks_[i].size();
    }
}

bool RoutingTable::insert(const PeerId& id, const PeerAddr& addr) {
    if (chunks_.empty()) {
        chunks_.push_back({{id, addr}});
        size_ = 1;
        reindex(0);
        return true;
    }
    const auto c = chunk_for(id);
    auto& chunk = chunks_[c];
    auto it = std::lower_bound(chunk.begin(), chunk.end(), id, id_less);
    if (it != chunk.end() && it->id == id)
        return false;
    chunk.insert(it, Entry{id, addr});
    ++size_;
    if (chunk.size() > kMaxChunk) {
        std::vector<Entry> tail(chunk.begin() + static_cast<std::ptrdiff_t>(kMaxChunk / 2), chunk.end());
        chunk.resize(kMaxChunk / 2);
        chunks_.insert(chunks_.begin() + static_cast<std::ptrdiff_t>(c) + 1, std::move(tail));
    }
    reindex(c);
    return true;
}

bool RoutingTable::erase(const PeerId& id) {
    if (chunks_.empty())
        return false;
    const auto c = chunk_for(id);
    auto& chunk = chunks_[c];
    auto it = std::lower_bound(chunk.begin(), chunk.end(), id, id_less);
    if (it == chunk.end() || it->id != id)
        return false;
    chunk.erase(it);
    --size_;
    if (chunk.empty())
        chunks_.erase(chunks_.begin() + static_cast<std::ptrdiff_t>(c));
    reindex(c == 0 ? 0 : c - 1);
    return true;
}

bool RoutingTable::contains(const PeerId& id) const { return find(id).has_value(); }

std::optional<PeerAddr> RoutingTable::find(const PeerId& id) const {
    if (chunks_.empty())
        return std::nullopt;
    const auto& chunk = chunks_[chunk_for(id)];
    auto it = std::lower_bound(chunk.begin(), chunk.end(), id, id_less);
    if (it == chunk.end() || it->id != id)
        return std::nullopt;
    return it->addr;
}

const RoutingTable::Entry& RoutingTable::at(std::size_t rank) const {
    if (rank >= size_)
        throw std::out_of_range("routing table rank out of range");
    auto it = std::upper_bound(starts_.begin(), starts_.end(), rank);
    const auto c = static_cast<std::size_t>(it - starts_.begin()) - 1;
    return chunks_[c][rank - starts_[c]];
}

std::size_t RoutingTable::lower_rank(const PeerId& key) const {
    if (chunks_.empty())
        return 0;
    const auto c = chunk_for(key);
    const auto& chunk = chunks_[c];
    auto it = std::lower_bound(chunk.begin(), chunk.end(), key, id_less);
    return starts_[c] + static_cast<std::size_t>(it - chunk.begin());
}

std::size_t RoutingTable::rank_of(const PeerId& id) const {
    const auto r = lower_rank(id);
    if (r >= size_ || at(r).id != id)
        throw NotAMember("peer " + id.hex() + " is not in the routing table");
    return r;
}

const RoutingTable::Entry& RoutingTable::succ(const PeerId& self, std::size_t i) const {
    const auto r = rank_of(self);
    return at((r + i % size_) % size_);
}

const RoutingTable::Entry& RoutingTable::pred(const PeerId& self, std::size_t i) const {
    const auto r = rank_of(self);
    return at((r + size_ - i % size_) % size_);
}

const RoutingTable::Entry& RoutingTable::owner_of(const PeerId& key) const {
    if (size_ == 0)
        throw EmptyRing("owner_of on an empty routing table");
    const auto r = lower_rank(key);
    return at(r == size_ ? 0 : r);
}

const RoutingTable::Entry& RoutingTable::next_after(const PeerId& key) const {
    if (size_ == 0)
        throw EmptyRing("next_after on an empty routing table");
    auto r = lower_rank(key);
    if (r < size_ && at(r).id == key)
        ++r;
    return at(r >= size_ ? 0 : r);
}

std::vector<RoutingTable::Entry> RoutingTable::entries() const {
    std::vector<Entry> out;
    out.reserve(size_);
    for_each([&](const Entry& e) { out.push_back(e); });
    return out;
}

}  // namespace d1ht
