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

#include "d1ht/calot.hpp"

#include <algorithm>
#include <stdexcept>

namespace d1ht::calot {

namespace {
constexpr unsigned kProbeTries = 2;
}  // namespace

Peer::Peer(const EdraConfig& cfg, const PeerAddr& self, const std::vector<PeerAddr>& members, Time now)
    : Node(cfg, self), next_heartbeat_(now + cfg.heartbeat_period), pred_watch_(now) {
    for (const auto& m : members)
        table_.insert(m);
    watch_predecessor(now);
}

Header Peer::header() { return Header{self_, cfg_.system_id, seq_++}; }

void Peer::watch_predecessor(Time now) {
    std::optional<PeerAddr> pred;
    if (table_.size() > 1)
        pred = table_.pred(self_id_, 1).addr;
    if (pred != watched_pred_) {
        watched_pred_ = pred;
        pred_watch_ = now;
    }
}

AckRecord Peer::record(const Event& ev, Time now, bool origin) {
    AckRecord rec{ev, 0, AckOutcome::fresh, origin};
    if (ev.subject == self_) {
        rec.outcome = AckOutcome::stale;
        return rec;
    }
    auto it = recent_.find(ev.subject);
    const bool remembered = it != recent_.end() && now - it->second.at < cfg_.event_memory;
    if (remembered && it->second.kind == ev.kind && it->second.max_ttl >= 0) {
        rec.outcome = AckOutcome::duplicate;
        return rec;
    }
    if (remembered && it->second.kind == EventKind::leave && ev.kind == EventKind::join && !origin) {
        rec.outcome = AckOutcome::stale;
        return rec;
    }
    recent_[ev.subject] = Recent{ev.kind, 0, now};
    if (ev.kind == EventKind::join)
        table_.insert(ev.subject);
    else
        table_.erase(ring::id_of(ev.subject));
    watch_predecessor(now);
    return rec;
}

Effects Peer::report(const Event& ev, Time now) {
    Effects fx;
    const auto rec = record(ev, now, true);
    fx.acks.push_back(rec);
    if (rec.outcome != AckOutcome::fresh)
        return fx;
    const auto origin = origin_seq_++;
    table_.for_each([&](const RoutingTable::Entry& e) {
        if (e.addr == self_ || e.addr == ev.subject)
            return;
        CalotMsg m{header(), ev, origin};
        fx.send.push_back({e.addr, m});
        pending_[m.hdr.seq] = Pending{e.addr, m, 1, now + cfg_.retransmit_timeout};
    });
    return fx;
}

Effects Peer::on_receive(const Datagram& d, Time now) {
    Effects fx;
    const auto& h = header_of(d);
    if (h.system_id != cfg_.system_id)
        return fx;
    if (watched_pred_ && h.sender == *watched_pred_)
        pred_watch_ = now;

    if (const auto* c = std::get_if<CalotMsg>(&d)) {
        fx.send.push_back({h.sender, AckMsg{Header{self_, cfg_.system_id, h.seq}}});
        if (c->event.kind == EventKind::leave && c->event.subject == h.sender) {
            // Voluntary departure announced to its successor, who reports it.
            fx.append(report(c->event, now));
            return fx;
        }
        fx.acks.push_back(record(c->event, now, false));
        return fx;
    }
    if (std::holds_alternative<AckMsg>(d)) {
        auto it = pending_.find(h.seq);
        if (it != pending_.end() && it->second.to == h.sender)
            pending_.erase(it);
        return fx;
    }
    if (std::holds_alternative<ProbeMsg>(d)) {
        fx.send.push_back({h.sender, ProbeReplyMsg{Header{self_, cfg_.system_id, h.seq}}});
        return fx;
    }
    if (std::holds_alternative<ProbeReplyMsg>(d)) {
        if (probe_.active && probe_.seq == h.seq && probe_.target == h.sender) {
            probe_.active = false;
            pred_watch_ = now;
        }
        return fx;
    }
    return fx;
}

Effects Peer::on_timer(Time now) {
    Effects fx;
    std::vector<std::uint16_t> expired;
    for (const auto& [seq, p] : pending_)
        if (p.deadline <= now)
            expired.push_back(seq);
    for (auto seq : expired) {
        auto& p = pending_.at(seq);
        if (p.tries < cfg_.retransmit_max) {
            ++p.tries;
            p.deadline = now + cfg_.retransmit_timeout;
            fx.send.push_back({p.to, p.msg});
        } else {
            const auto to = p.to;
            pending_.erase(seq);
            forget_locally(to, now);
            watch_predecessor(now);
        }
    }

    if (probe_.active && now >= probe_.deadline) {
        if (probe_.tries < kProbeTries) {
            ++probe_.tries;
            probe_.deadline = now + cfg_.retransmit_timeout;
            fx.send.push_back({probe_.target, ProbeMsg{Header{self_, cfg_.system_id, probe_.seq}}});
        } else {
            probe_.active = false;
            if (table_.contains(ring::id_of(probe_.target)))
                fx.append(report({EventKind::leave, probe_.target}, now));
        }
    }

    if (now >= next_heartbeat_) {
        if (table_.size() > 1)
            fx.send.push_back({table_.succ(self_id_, 1).addr, HeartbeatMsg{header()}});
        next_heartbeat_ = now + cfg_.heartbeat_period;
    }

    if (!probe_.active && watched_pred_ && now - pred_watch_ > cfg_.heartbeat_timeout) {
        const auto h = header();
        probe_ = Probe{true, *watched_pred_, h.seq, 1, now + cfg_.retransmit_timeout};
        fx.send.push_back({*watched_pred_, ProbeMsg{h}});
    }
    return fx;
}

Time Peer::next_deadline() const {
    Time t = next_heartbeat_;
    for (const auto& [seq, p] : pending_)
        t = std::min(t, p.deadline);
    if (probe_.active)
        t = std::min(t, probe_.deadline);
    else if (watched_pred_)
        t = std::min(t, pred_watch_ + cfg_.heartbeat_timeout + Duration(1));
    return t;
}

Effects Peer::admit(const PeerAddr& joiner, Time now) {
    if (joiner == self_)
        throw std::invalid_argument("a peer cannot admit itself");
    return report({EventKind::join, joiner}, now);
}

std::unique_ptr<Node> Peer::make_joiner(const PeerAddr& joiner, Time now) const {
    if (auto existing = table_.find(ring::id_of(joiner)); existing && *existing != joiner)
        throw IdCollision("address " + joiner.str() + " collides with " + existing->str());
    auto p = std::make_unique<Peer>(cfg_, joiner, std::vector<PeerAddr>{}, now);
    p->table_ = table_;
    p->table_.insert(joiner);
    p->recent_ = recent_;
    p->recent_.erase(joiner);
    p->watched_pred_.reset();
    p->watch_predecessor(now);
    return p;
}

Effects Peer::leave(bool voluntary, Time now) {
    Effects fx;
    if (voluntary && table_.size() > 1) {
        CalotMsg m{header(), {EventKind::leave, self_}, origin_seq_++};
        fx.send.push_back({table_.succ(self_id_, 1).addr, m});
    }
    pending_.clear();
    (void)now;
    return fx;
}

}  // namespace d1ht::calot
