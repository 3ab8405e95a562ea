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

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "d1ht/node.hpp"

namespace d1ht::edra {

/// ⌈log2 n⌉; 0 for n == 1. Throws std::invalid_argument for n == 0.
unsigned compute_rho(std::size_t n);

/// Buffering interval in seconds for an observed average session length,
/// clamped into the configured bounds.
double tune_theta(const EdraConfig& cfg, double s_avg_seconds, std::size_t n);

/// Maximum buffered events before an interval closes early; never below 1.
std::size_t event_cap(const EdraConfig& cfg, std::size_t n);

/// A D1HT peer. Single owner: every transition takes `now` and returns the
/// datagrams and acknowledgments it produced; identical inputs give
/// identical outputs.
class Peer final : public Node {
public:
    /// Founding peer of a new system, or a member of a pre-built system whose
    /// table holds `members` (self is added if missing).
    Peer(const EdraConfig& cfg, const PeerAddr& self, const std::vector<PeerAddr>& members, Time now);

    /// Joins through `successor`: copies its table, Θ and recent-event memory.
    /// Throws IdCollision when the joiner's id is already taken and
    /// std::invalid_argument on a system id mismatch.
    static std::unique_ptr<Peer> join(const EdraConfig& cfg, const PeerAddr& self, const Peer& successor, Time now);

    Effects on_receive(const Datagram& d, Time now) override;
    Effects on_timer(Time now) override;
    Time next_deadline() const override;
    Effects admit(const PeerAddr& joiner, Time now) override;
    std::unique_ptr<Node> make_joiner(const PeerAddr& joiner, Time now) const override;
    Effects leave(bool voluntary, Time now) override;
    std::size_t forwardable_buffered() const override { return forwardable_; }

    /// Records an acknowledgment. Closes the interval early when the cap trips.
    Effects ack_event(const Event& ev, unsigned ttl, Time now, bool origin = false);
    /// Emits M(0..ρ-1) for the current interval, clears buffers and re-tunes Θ.
    Effects close_interval(Time now);
    /// Probes the predecessor; a failed probe acknowledges its leave at TTL ρ
    /// and moves on to the next predecessor.
    Effects stabilize(Time now);

    unsigned rho() const { return compute_rho(table_.size()); }
    Duration theta() const { return theta_; }
    Time next_close() const { return next_close_; }
    void set_next_close(Time t) { next_close_ = t; }
    bool probing() const { return probe_.active; }
    std::size_t pending_count() const { return pending_.size(); }
    /// Buffered events and their TTL slot, for inspection.
    std::vector<std::pair<Event, std::uint8_t>> buffered() const;

private:
    struct Buffered {
        std::uint8_t ttl = 0;
        PeerId id;
    };
    struct Pending {
        PeerAddr to;
        Datagram dgram;
        unsigned tries = 1;
        Time deadline{};
        std::size_t offset = 0;  // rank offset of a dissemination target, else 0
    };
    struct Probe {
        bool active = false;
        PeerAddr target;
        std::uint16_t seq = 0;
        unsigned tries = 0;
        Time deadline{};
    };
    struct JoinServe {
        PeerAddr joiner;
        unsigned intervals_left = 0;
        std::vector<Event> events;
    };

    Header header();
    void send(Effects& fx, const PeerAddr& to, Datagram d, Time now, std::size_t offset);
    void send_maintenance(Effects& fx, unsigned level, std::vector<Event> events, Time now);
    void send_at(Effects& fx, std::size_t offset, unsigned ttl, std::vector<Event> events, Time now);
    void apply(const Event& ev, Time now);
    void retune(Time now);
    void watch_predecessor(Time now);
    void start_probe(Effects& fx, const PeerAddr& target, Time now);
    void probe_failed(Effects& fx, Time now);
    void give_up(Effects& fx, Pending p, Time now);
    Duration probe_timeout() const;
    void maybe_close_early(Effects& fx, Time now);
    void on_unreachable(const PeerAddr& a, Time now) override;
    /// Covers peers skipped by a sender whose table missed members before us.
    void repair_gap(Effects& fx, const MaintenanceMsg& m, Time now);

    std::map<Event, Buffered> buffer_;
    std::size_t forwardable_ = 0;
    Duration theta_;
    Time next_close_;
    std::deque<Time> window_;  // acknowledgment times of fresh events
    Time window_origin_;
    bool observed_events_ = false;
    std::optional<PeerAddr> watched_pred_;
    Time pred_watch_;
    Time last_stabilize_ = Time::min();
    std::uint16_t seq_ = 0;
    std::map<std::uint16_t, Pending> pending_;
    Probe probe_;
    std::vector<JoinServe> serving_;
};

}  // namespace d1ht::edra
