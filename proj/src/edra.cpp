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

#include "d1ht/edra.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace d1ht::edra {

namespace {

constexpr unsigned kProbeTries = 2;
constexpr Duration kMinWindow = std::chrono::seconds(60);

}  // namespace

unsigned compute_rho(std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("compute_rho: n must be at least 1");
    return n == 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

double tune_theta(const EdraConfig& cfg, double s_avg_seconds, std::size_t n) {
    const double rho = compute_rho(std::max<std::size_t>(n, 2));
    const double theta = 4.0 * cfg.f * s_avg_seconds / (16.0 + 3.0 * rho);
    return std::clamp(theta, cfg.theta_min, cfg.theta_max);
}

std::size_t event_cap(const EdraConfig& cfg, std::size_t n) {
    const double rho = compute_rho(std::max<std::size_t>(n, 2));
    const auto e = static_cast<std::size_t>(std::floor(8.0 * cfg.f * static_cast<double>(n) / (16.0 + 3.0 * rho)));
    return std::max<std::size_t>(e, 1);
}

Peer::Peer(const EdraConfig& cfg, const PeerAddr& self, const std::vector<PeerAddr>& members, Time now)
    : Node(cfg, self),
      theta_(from_seconds(cfg.theta_fixed > 0.0 ? cfg.theta_fixed : cfg.theta_max)),
      next_close_(now + theta_),
      window_origin_(now),
      pred_watch_(now),
      last_stabilize_(Time(std::numeric_limits<std::int64_t>::min() / 2)) {
    for (const auto& m : members) {
        const auto id = ring::id_of(m);
        if (auto existing = table_.find(id); existing && *existing != m)
            throw IdCollision("address " + m.str() + " collides with " + existing->str());
        table_.insert(id, m);
    }
    watch_predecessor(now);
}

std::unique_ptr<Peer> Peer::join(const EdraConfig& cfg, const PeerAddr& self, const Peer& successor, Time now) {
    if (cfg.system_id != successor.cfg_.system_id)
        throw std::invalid_argument("system id mismatch: joiner " + std::to_string(cfg.system_id) + ", successor " +
                                    std::to_string(successor.cfg_.system_id));
    if (auto existing = successor.table_.find(ring::id_of(self)); existing && *existing != self)
        throw IdCollision("address " + self.str() + " collides with " + existing->str());
    auto p = std::make_unique<Peer>(cfg, self, std::vector<PeerAddr>{}, now);
    p->table_ = successor.table_;
    p->table_.insert(p->self_id_, self);
    p->recent_ = successor.recent_;
    p->recent_.erase(self);
    p->theta_ = successor.theta_;
    p->window_ = successor.window_;
    p->window_origin_ = successor.window_origin_;
    p->observed_events_ = successor.observed_events_;
    p->next_close_ = now + p->theta_;
    p->watched_pred_.reset();
    p->watch_predecessor(now);
    return p;
}

std::unique_ptr<Node> Peer::make_joiner(const PeerAddr& joiner, Time now) const { return join(cfg_, joiner, *this, now); }

Header Peer::header() { return Header{self_, cfg_.system_id, seq_++}; }

Duration Peer::probe_timeout() const { return std::min<Duration>(theta_ / 2, cfg_.retransmit_timeout); }

void Peer::send(Effects& fx, const PeerAddr& to, Datagram d, Time now, std::size_t offset) {
    const auto seq = header_of(d).seq;
    fx.send.push_back({to, d});
    pending_[seq] = Pending{to, std::move(d), 1, now + cfg_.retransmit_timeout, offset};
}

void Peer::send_maintenance(Effects& fx, unsigned level, std::vector<Event> events, Time now) {
    send_at(fx, std::size_t{1} << level, level, std::move(events), now);
}

void Peer::send_at(Effects& fx, std::size_t offset, unsigned ttl, std::vector<Event> events, Time now) {
    const auto& target = table_.succ(self_id_, offset);
    MaintenanceMsg m{header(), static_cast<std::uint8_t>(ttl), 0, std::move(events)};
    send(fx, target.addr, std::move(m), now, offset);
}

void Peer::watch_predecessor(Time now) {
    std::optional<PeerAddr> pred;
    if (table_.size() > 1)
        pred = table_.pred(self_id_, 1).addr;
    if (pred != watched_pred_) {
        watched_pred_ = pred;
        pred_watch_ = now;
    }
}

void Peer::apply(const Event& ev, Time now) {
    if (ev.kind == EventKind::join)
        table_.insert(ev.subject);
    else
        table_.erase(ring::id_of(ev.subject));
    watch_predecessor(now);
}

Effects Peer::ack_event(const Event& ev, unsigned ttl, Time now, bool origin) {
    Effects fx;
    AckRecord rec{ev, static_cast<std::uint8_t>(ttl), AckOutcome::fresh, origin};
    if (ev.subject == self_) {
        rec.outcome = AckOutcome::stale;
        fx.acks.push_back(rec);
        return fx;
    }

    bool buffer_it = true;
    auto it = recent_.find(ev.subject);
    const bool remembered = it != recent_.end() && now - it->second.at < cfg_.event_memory;
    if (remembered && it->second.kind == ev.kind) {
        auto& r = it->second;
        if (r.max_ttl >= static_cast<int>(ttl)) {
            rec.outcome = AckOutcome::duplicate;
            buffer_it = false;
        } else {
            rec.outcome = r.max_ttl < 0 ? AckOutcome::fresh : AckOutcome::raised;
            r.max_ttl = static_cast<std::int16_t>(ttl);
            apply(ev, now);
        }
    } else if (remembered && it->second.kind == EventKind::leave && it->second.max_ttl >= 0 &&
               ev.kind == EventKind::join && !origin) {
        rec.outcome = AckOutcome::stale;
        buffer_it = false;
    } else {
        recent_[ev.subject] = Recent{ev.kind, static_cast<std::int16_t>(ttl), now};
        apply(ev, now);
    }

    if (buffer_it) {
        auto [slot, inserted] = buffer_.try_emplace(ev, Buffered{static_cast<std::uint8_t>(ttl), ring::id_of(ev.subject)});
        if (inserted) {
            if (ttl > 0)
                ++forwardable_;
        } else if (ttl > slot->second.ttl) {
            if (slot->second.ttl == 0)
                ++forwardable_;
            slot->second.ttl = static_cast<std::uint8_t>(ttl);
        }
    }
    if (rec.outcome == AckOutcome::fresh) {
        window_.push_back(now);
        observed_events_ = true;
        for (auto& s : serving_)
            if (s.joiner != ev.subject)
                s.events.push_back(ev);
    }
    fx.acks.push_back(rec);
    maybe_close_early(fx, now);
    return fx;
}

void Peer::maybe_close_early(Effects& fx, Time now) {
    if (cfg_.event_cap_enabled && forwardable_ > 0 && forwardable_ >= event_cap(cfg_, table_.size()))
        fx.append(close_interval(now));
}

Effects Peer::close_interval(Time now) {
    Effects fx;
    const unsigned rho = this->rho();
    unsigned msgs = 0;
    for (unsigned l = 0; l < rho; ++l) {
        const auto& target = table_.succ(self_id_, std::size_t{1} << l);
        std::vector<Event> events;
        for (const auto& [ev, b] : buffer_)
            if (b.ttl > l && !ring::in_arc(b.id, self_id_, target.id))
                events.push_back(ev);
        if (l == 0 || !events.empty()) {
            send_maintenance(fx, l, std::move(events), now);
            ++msgs;
        }
    }
    fx.interval_msgs.push_back(msgs);

    for (auto& s : serving_) {
        if (!s.events.empty() && table_.contains(ring::id_of(s.joiner))) {
            MaintenanceMsg m{header(), 0, msg_flags::kDirect, std::move(s.events)};
            send(fx, s.joiner, std::move(m), now, 0);
        }
        s.events.clear();
        --s.intervals_left;
    }
    std::erase_if(serving_, [&](const JoinServe& s) {
        return s.intervals_left == 0 || !table_.contains(ring::id_of(s.joiner));
    });

    buffer_.clear();
    forwardable_ = 0;
    sweep_recent(now);
    retune(now);
    next_close_ = now + theta_;
    return fx;
}

void Peer::retune(Time now) {
    if (cfg_.theta_fixed > 0.0) {
        theta_ = from_seconds(cfg_.theta_fixed);
        return;
    }
    if (!observed_events_) {
        theta_ = from_seconds(cfg_.theta_max);
        return;
    }
    const Duration window = std::max<Duration>(theta_ * 10, kMinWindow);
    while (!window_.empty() && window_.front() < now - window)
        window_.pop_front();
    const Duration span = std::min(window, now - window_origin_);
    const double r = span > Duration::zero() ? static_cast<double>(window_.size()) / to_seconds(span) : 0.0;
    const auto n = table_.size();
    if (r <= 0.0 || n < 2) {
        theta_ = from_seconds(cfg_.theta_max);
        return;
    }
    theta_ = from_seconds(tune_theta(cfg_, 2.0 * static_cast<double>(n) / r, n));
}

Effects Peer::on_receive(const Datagram& d, Time now) {
    Effects fx;
    const auto& h = header_of(d);
    if (h.system_id != cfg_.system_id)
        return fx;

    if (const auto* m = std::get_if<MaintenanceMsg>(&d)) {
        fx.send.push_back({h.sender, AckMsg{Header{self_, cfg_.system_id, h.seq}}});
        if (m->flags & msg_flags::kLeaveNotice) {
            if (table_.contains(ring::id_of(h.sender)))
                fx.append(ack_event({EventKind::leave, h.sender}, compute_rho(std::max<std::size_t>(table_.size() - 1, 1)),
                                    now, true));
            return fx;
        }
        if (m->flags & msg_flags::kDirect) {
            for (const auto& e : m->events)
                fx.append(ack_event(e, 0, now));
            return fx;
        }
        if (cfg_.passive_learning && learn(h.sender, now))
            watch_predecessor(now);
        for (const auto& e : m->events)
            fx.append(ack_event(e, m->ttl, now));
        repair_gap(fx, *m, now);

        if (watched_pred_ && h.sender == *watched_pred_)
            pred_watch_ = now;
        bool unexpected = false;
        if (table_.size() > 1 && m->ttl == 0)
            unexpected = h.sender != table_.pred(self_id_, 1).addr;
        else if (table_.size() > 2 && m->ttl == 1)
            unexpected = h.sender != table_.pred(self_id_, 2).addr;
        if (unexpected && !probe_.active && now - last_stabilize_ >= theta_)
            fx.append(stabilize(now));
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
            if (watched_pred_ && *watched_pred_ == h.sender)
                pred_watch_ = now;
        }
        return fx;
    }
    return fx;
}

void Peer::repair_gap(Effects& fx, const MaintenanceMsg& m, Time now) {
    const auto sender = ring::id_of(m.hdr.sender);
    if (m.events.empty() || !table_.contains(sender) || sender == self_id_)
        return;
    const auto n = table_.size();
    const auto d = (table_.rank_of(self_id_) + n - table_.rank_of(sender)) % n;
    const auto expected = std::size_t{1} << m.ttl;
    if (d <= expected)
        return;
    // The sender's view lacked peers between it and us, so the stretch ending
    // just before us has no other carrier.
    for (std::size_t i = 1; i <= d - expected; ++i) {
        const auto& target = table_.pred(self_id_, i);
        std::vector<Event> events;
        for (const auto& e : m.events)
            if (e.subject != target.addr)
                events.push_back(e);
        if (!events.empty())
            send(fx, target.addr, MaintenanceMsg{header(), 0, msg_flags::kDirect, std::move(events)}, now, 0);
    }
}

void Peer::on_unreachable(const PeerAddr& a, Time now) {
    // Only the successor reports a departure: expire the watchdog so a probe confirms it.
    if (watched_pred_ && *watched_pred_ == a) {
        pred_watch_ = std::min(pred_watch_, now - 2 * theta_ - Duration(1));
        return;
    }
    forget_locally(a, now);
}

Effects Peer::stabilize(Time now) {
    Effects fx;
    if (!probe_.active && watched_pred_)
        start_probe(fx, *watched_pred_, now);
    return fx;
}

void Peer::start_probe(Effects& fx, const PeerAddr& target, Time now) {
    const auto h = header();
    probe_ = Probe{true, target, h.seq, 1, now + probe_timeout()};
    last_stabilize_ = now;
    fx.send.push_back({target, ProbeMsg{h}});
}

void Peer::probe_failed(Effects& fx, Time now) {
    const PeerAddr target = probe_.target;
    probe_.active = false;
    const auto tid = ring::id_of(target);
    if (!table_.contains(tid))
        return;
    if (watched_pred_ && *watched_pred_ == target) {
        fx.append(ack_event({EventKind::leave, target}, compute_rho(std::max<std::size_t>(table_.size() - 1, 1)), now, true));
        if (watched_pred_)
            start_probe(fx, *watched_pred_, now);
    } else {
        forget_locally(target, now);
        watch_predecessor(now);
    }
}

void Peer::give_up(Effects& fx, Pending p, Time now) {
    if (watched_pred_ && *watched_pred_ == p.to) {
        on_unreachable(p.to, now);  // the watchdog probes and reports it
        return;
    }
    forget_locally(p.to, now);
    watch_predecessor(now);
    if (probe_.active && probe_.target == p.to)
        probe_.active = false;
    auto* m = std::get_if<MaintenanceMsg>(&p.dgram);
    if (m == nullptr || m->flags != 0 || p.offset == 0 || table_.size() < 2)
        return;
    if (m->ttl == 0) {
        // The dead target's stretch was itself; only the liveness signal to the new successor remains.
        if (p.offset == 1)
            send_at(fx, 1, 0, {}, now);
        return;
    }
    // Forward on the dead target's behalf: M(j), j < ttl, to the peers it would have reached.
    // With the target gone every later peer moves one rank closer.
    for (unsigned j = 0; j < m->ttl; ++j) {
        const std::size_t offset = p.offset + (std::size_t{1} << j) - 1;
        if (offset >= table_.size())
            break;
        const auto& target = table_.succ(self_id_, offset);
        std::vector<Event> events;
        for (const auto& e : m->events)
            if (!ring::in_arc(ring::id_of(e.subject), self_id_, target.id))
                events.push_back(e);
        if (!events.empty())
            send_at(fx, offset, j, std::move(events), now);
    }
}

Effects Peer::on_timer(Time now) {
    Effects fx;
    std::vector<std::uint16_t> expired;
    for (const auto& [seq, p] : pending_)
        if (p.deadline <= now)
            expired.push_back(seq);
    for (auto seq : expired) {
        auto it = pending_.find(seq);
        if (it == pending_.end())
            continue;
        auto& p = it->second;
        if (p.tries < cfg_.retransmit_max) {
            ++p.tries;
            p.deadline = now + cfg_.retransmit_timeout;
            fx.send.push_back({p.to, p.dgram});
        } else {
            Pending dead = std::move(p);
            pending_.erase(it);
            give_up(fx, std::move(dead), now);
        }
    }

    if (probe_.active && now >= probe_.deadline) {
        if (probe_.tries < kProbeTries) {
            ++probe_.tries;
            probe_.deadline = now + probe_timeout();
            fx.send.push_back({probe_.target, ProbeMsg{Header{self_, cfg_.system_id, probe_.seq}}});
        } else {
            probe_failed(fx, now);
        }
    }

    if (now >= next_close_)
        fx.append(close_interval(now));

    if (!probe_.active && watched_pred_ && now - pred_watch_ > 2 * theta_)
        start_probe(fx, *watched_pred_, now);
    return fx;
}

Time Peer::next_deadline() const {
    Time t = next_close_;
    for (const auto& [seq, p] : pending_)
        t = std::min(t, p.deadline);
    if (probe_.active)
        t = std::min(t, probe_.deadline);
    else if (watched_pred_)
        t = std::min(t, pred_watch_ + 2 * theta_ + Duration(1));
    return t;
}

Effects Peer::admit(const PeerAddr& joiner, Time now) {
    if (joiner == self_)
        throw std::invalid_argument("a peer cannot admit itself");
    const auto n_after = table_.size() + (table_.contains(ring::id_of(joiner)) ? 0 : 1);
    auto fx = ack_event({EventKind::join, joiner}, compute_rho(n_after), now, true);
    serving_.push_back({joiner, rho() + 1, {}});
    return fx;
}

Effects Peer::leave(bool voluntary, Time now) {
    if (!voluntary)
        return {};
    auto fx = close_interval(now);
    if (table_.size() > 1)
        fx.send.push_back({table_.succ(self_id_, 1).addr, MaintenanceMsg{header(), 0, msg_flags::kLeaveNotice, {}}});
    pending_.clear();
    return fx;
}

std::vector<std::pair<Event, std::uint8_t>> Peer::buffered() const {
    std::vector<std::pair<Event, std::uint8_t>> out;
    out.reserve(buffer_.size());
    for (const auto& [ev, b] : buffer_)
        out.emplace_back(ev, b.ttl);
    return out;
}

}  // namespace d1ht::edra
