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

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "d1ht/edra.hpp"

namespace d1ht::single_event {

/// One maintenance datagram that carried the tracked event. Ranks are
/// clockwise offsets from the detector (0 = detector).
struct Hop {
    std::size_t from = 0;
    std::size_t to = 0;
    unsigned ttl = 0;

    friend bool operator==(const Hop&, const Hop&) = default;
};

struct Result {
    std::size_t n = 0;
    unsigned rho = 0;
    double theta = 0;                 // seconds
    std::vector<Hop> hops;            // in send order
    std::vector<unsigned> ack_count;  // by offset; the detector counts its own detection
    std::vector<int> ack_ttl;         // by offset; -1 when never acknowledged
    std::vector<double> ack_time;     // by offset, seconds after detection
    double mean_ack_time = 0;         // over offsets 1..n-1
    double max_ack_time = 0;

    /// Every peer acknowledged exactly once (the detector by detection).
    bool exactly_once() const;
};

/// Delay-free network of D1HT peers with synchronised intervals of fixed
/// length and the early-close cap disabled. Interval closes at a given
/// instant run before datagrams delivered at that instant. Peers persist
/// across runs; each run uses a fresh crashed subject placed just before the
/// detector, so no table ever holds it.
class Harness {
public:
    /// `n` peers with deterministic addresses. `detect_phase` in [0, 1) is
    /// where inside an interval the detector acknowledges the event; 0.5 gives
    /// the phase-averaged timing because ack times are linear in the phase.
    explicit Harness(std::size_t n, double theta = 1.0, double detect_phase = 0.5);
    Harness(const std::vector<PeerAddr>& members, double theta = 1.0, double detect_phase = 0.5);

    std::size_t size() const { return peers_.size(); }
    unsigned rho() const { return edra::compute_rho(peers_.size()); }
    /// Members in id order.
    const std::vector<PeerAddr>& ring() const { return ring_; }

    /// Detector at id rank `origin` acknowledges the crash of its phantom
    /// predecessor with TTL ρ; runs until every buffer drains.
    Result run(std::size_t origin);

private:
    PeerAddr phantom_before(std::size_t rank);
    void deliver_all(std::vector<Outbound>& queue, Time now, const PeerAddr& subject, Result& r, Time detected,
                     std::size_t origin);
    void record(const std::vector<AckRecord>& acks, std::size_t peer, const PeerAddr& subject, Result& r, Time now,
                Time detected, std::size_t origin);

    double theta_;
    double phase_;
    std::vector<PeerAddr> ring_;
    std::vector<std::unique_ptr<edra::Peer>> peers_;  // by id rank
    std::unordered_map<PeerAddr, std::size_t, PeerAddrHash> rank_;
    Time boundary_{};  // last interval close processed
    std::uint32_t phantom_seed_ = 0;
};

/// coverage[q][l] = number of origins whose event peer q acknowledged with
/// TTL >= l, for l in [0, ρ]. Brute force over every origin.
std::vector<std::vector<std::size_t>> ttl_coverage(std::size_t n);

}  // namespace d1ht::single_event
