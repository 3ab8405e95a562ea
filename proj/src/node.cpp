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

#include "d1ht/node.hpp"

#include <stdexcept>

namespace d1ht {

void EdraConfig::validate() const {
    if (!(f > 0.0 && f < 1.0))
        throw std::invalid_argument("f must lie in (0, 1)");
    if (!(theta_min > 0.0) || theta_max < theta_min)
        throw std::invalid_argument("theta bounds must satisfy 0 < min <= max");
    if (retransmit_max < 1)
        throw std::invalid_argument("retransmit_max must be at least 1");
    if (retransmit_timeout <= Duration::zero())
        throw std::invalid_argument("retransmit_timeout must be positive");
    if (theta_fixed < 0.0)
        throw std::invalid_argument("theta_fixed must be non-negative");
}

void Effects::append(Effects&& other) {
    send.insert(send.end(), std::make_move_iterator(other.send.begin()), std::make_move_iterator(other.send.end()));
    acks.insert(acks.end(), other.acks.begin(), other.acks.end());
    interval_msgs.insert(interval_msgs.end(), other.interval_msgs.begin(), other.interval_msgs.end());
}

Node::Node(const EdraConfig& cfg, const PeerAddr& self) : cfg_(cfg), self_(self), self_id_(ring::id_of(self)) {
    cfg_.validate();
    table_.insert(self_id_, self_);
}

bool Node::recently_departed(const PeerAddr& a, Time now) const {
    auto it = recent_.find(a);
    return it != recent_.end() && it->second.kind == EventKind::leave && now - it->second.at < cfg_.event_memory;
}

void Node::forget_locally(const PeerAddr& a, Time now) {
    if (a == self_)
        return;
    table_.erase(ring::id_of(a));
    auto& r = recent_[a];
    if (r.kind != EventKind::leave || now - r.at >= cfg_.event_memory)
        r = Recent{EventKind::leave, -1, now};
}

void Node::on_unreachable(const PeerAddr& a, Time now) { forget_locally(a, now); }

void Node::sweep_recent(Time now) {
    std::erase_if(recent_, [&](const auto& kv) { return now - kv.second.at >= cfg_.event_memory; });
}

bool Node::learn(const PeerAddr& a, Time now) {
    if (a == self_ || recently_departed(a, now))
        return false;
    return table_.insert(a);
}

LookupResult Node::lookup(const PeerId& key, const LookupOracle& oracle, Time now) {
    LookupResult res;
    PeerAddr target = table_.owner_of(key).addr;
    for (unsigned attempt = 0; attempt <= kLookupRetries; ++attempt) {
        ++res.hops;
        const auto reply = oracle.ask(target, key);
        switch (reply.status) {
        case LookupReply::Status::owner:
            res.target = target;
            return res;
        case LookupReply::Status::dead:
            res.routing_failure = true;
            on_unreachable(target, now);
            if (table_.contains(ring::id_of(target)))
                target = table_.next_after(ring::id_of(target)).addr;  // kept pending confirmation
            else
                target = table_.owner_of(key).addr;
            break;
        case LookupReply::Status::not_owner:
            res.routing_failure = true;
            if (reply.redirect == target)
                attempt = kLookupRetries;  // no progress possible; fall back to bootstrap
            learn(reply.redirect, now);
            target = reply.redirect;
            break;
        }
    }
    ++res.hops;
    res.via_bootstrap = true;
    res.target = oracle.bootstrap(key);
    learn(res.target, now);
    return res;
}

}  // namespace d1ht
