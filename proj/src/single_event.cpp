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

#include "d1ht/single_event.hpp"

#include <algorithm>
#include <stdexcept>

namespace d1ht::single_event {

bool Result::exactly_once() const {
    return std::all_of(ack_count.begin(), ack_count.end(), [](unsigned c) { return c == 1; });
}

namespace {

std::vector<PeerAddr> default_members(std::size_t n) {
    std::vector<PeerAddr> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(PeerAddr::from_u32(0x0A000001u + static_cast<std::uint32_t>(i), 7700));
    return out;
}

EdraConfig harness_config(double theta) {
    EdraConfig cfg;
    cfg.theta_fixed = theta;
    cfg.theta_min = std::min(cfg.theta_min, theta);
    cfg.theta_max = std::max(cfg.theta_max, theta);
    cfg.event_cap_enabled = false;
    return cfg;
}

}  // namespace

Harness::Harness(std::size_t n, double theta, double detect_phase)
    : Harness(default_members(n), theta, detect_phase) {}

Harness::Harness(const std::vector<PeerAddr>& members, double theta, double detect_phase)
    : theta_(theta), phase_(detect_phase) {
    if (members.size() < 2)
        throw std::invalid_argument("harness needs at least two peers");
    if (!(theta > 0) || !(detect_phase >= 0 && detect_phase < 1))
        throw std::invalid_argument("harness needs theta > 0 and phase in [0, 1)");
    const auto cfg = harness_config(theta);
    RoutingTable order(members);
    for (const auto& e : order.entries())
        ring_.push_back(e.addr);
    for (std::size_t i = 0; i < ring_.size(); ++i) {
        rank_[ring_[i]] = i;
        peers_.push_back(std::make_unique<edra::Peer>(cfg, ring_[i], ring_, Time{}));
    }
}

PeerAddr Harness::phantom_before(std::size_t rank) {
    const auto self = ring::id_of(ring_[rank]);
    const auto prev = ring::id_of(ring_[(rank + ring_.size() - 1) % ring_.size()]);
    // Phantoms live in 172.16/12 so they never alias a member address.
    for (;;) {
        const auto a = PeerAddr::from_u32(0xAC100000u + (phantom_seed_++ & 0x000FFFFFu), 7700);
        const auto id = ring::id_of(a);
        if (id != self && id != prev && ring::in_arc(id, prev, self))
            return a;
    }
}

void Harness::record(const std::vector<AckRecord>& acks, std::size_t peer, const PeerAddr& subject, Result& r,
                     Time now, Time detected, std::size_t origin) {
    for (const auto& a : acks) {
        if (a.event.subject != subject || a.outcome == AckOutcome::stale)
            continue;
        const auto off = (peer + size() - origin) % size();
        ++r.ack_count[off];
        if (r.ack_ttl[off] < 0) {
            r.ack_ttl[off] = a.ttl;
            r.ack_time[off] = to_seconds(now - detected);
        }
    }
}

void Harness::deliver_all(std::vector<Outbound>& queue, Time now, const PeerAddr& subject, Result& r, Time detected,
                          std::size_t origin) {
    for (std::size_t i = 0; i < queue.size(); ++i) {
        const Outbound out = std::move(queue[i]);
        const auto to = rank_.at(out.to);
        if (const auto* m = std::get_if<MaintenanceMsg>(&out.dgram)) {
            const bool carries = std::any_of(m->events.begin(), m->events.end(),
                                             [&](const Event& e) { return e.subject == subject; });
            if (carries) {
                const auto from = rank_.at(m->hdr.sender);
                r.hops.push_back({(from + size() - origin) % size(), (to + size() - origin) % size(), m->ttl});
            }
        }
        auto fx = peers_[to]->on_receive(out.dgram, now);
        record(fx.acks, to, subject, r, now, detected, origin);
        for (auto& o : fx.send)
            queue.push_back(std::move(o));
    }
    queue.clear();
}

Result Harness::run(std::size_t origin) {
    if (origin >= size())
        throw std::out_of_range("origin rank out of range");
    Result r;
    r.n = size();
    r.rho = rho();
    r.theta = theta_;
    r.ack_count.assign(size(), 0);
    r.ack_ttl.assign(size(), -1);
    r.ack_time.assign(size(), 0.0);

    const auto theta = from_seconds(theta_);
    const auto subject = phantom_before(origin);
    const Time detected = boundary_ + from_seconds(phase_ * theta_);
    std::vector<Outbound> queue;
    {
        auto fx = peers_[origin]->ack_event({EventKind::leave, subject}, r.rho, detected, true);
        record(fx.acks, origin, subject, r, detected, detected, origin);
        queue = std::move(fx.send);
        deliver_all(queue, detected, subject, r, detected, origin);
    }
    for (unsigned k = 0; k <= r.rho; ++k) {
        boundary_ += theta;
        for (std::size_t p = 0; p < size(); ++p) {
            auto fx = peers_[p]->on_timer(boundary_);
            record(fx.acks, p, subject, r, boundary_, detected, origin);
            for (auto& o : fx.send)
                queue.push_back(std::move(o));
        }
        deliver_all(queue, boundary_, subject, r, detected, origin);
    }
    double sum = 0;
    for (std::size_t off = 1; off < size(); ++off) {
        sum += r.ack_time[off];
        r.max_ack_time = std::max(r.max_ack_time, r.ack_time[off]);
    }
    r.mean_ack_time = sum / static_cast<double>(size() - 1);
    return r;
}

std::vector<std::vector<std::size_t>> ttl_coverage(std::size_t n) {
    Harness h(n);
    const unsigned rho = h.rho();
    std::vector<std::vector<std::size_t>> cov(n, std::vector<std::size_t>(rho + 1, 0));
    for (std::size_t origin = 0; origin < n; ++origin) {
        const auto r = h.run(origin);
        for (std::size_t off = 0; off < n; ++off) {
            if (r.ack_ttl[off] < 0)
                continue;
            const auto q = (origin + off) % n;
            for (unsigned l = 0; l <= rho && static_cast<int>(l) <= r.ack_ttl[off]; ++l)
                ++cov[q][l];
        }
    }
    return cov;
}

}  // namespace d1ht::single_event
