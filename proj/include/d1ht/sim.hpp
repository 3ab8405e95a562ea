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
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "d1ht/node.hpp"
#include "d1ht/quarantine.hpp"

namespace d1ht::sim {

enum class Protocol { d1ht, calot };
enum class DelayModel { constant, exponential, empirical };
enum class ChurnModel {
    poisson,   // leaves at rate n/S_avg with uniform victims
    sessions,  // per-peer session lengths from a short/long mixture
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SimAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    std::size_t n_target = 1024;  // logical peers
    double s_avg = 10440.0;       // seconds
    double f = 0.01;
    DelayModel delay_model = DelayModel::exponential;
    double delta_avg = 0.0;  // seconds
    /// Empirical delays as (cumulative probability, seconds), ascending.
    std::vector<std::pair<double, double>> delay_table;
    double duration = 1800.0;  // measurement phase, seconds
    std::size_t warmup_start = 8;
    double warmup_join_rate = 1.0;  // new logical peers per second
    double lookup_rate = 1.0;       // per live peer per second
    double kill_fraction = 0.5;
    double rejoin_delay = 180.0;
    bool reuse_ids = true;
    Protocol protocol = Protocol::d1ht;
    quarantine::QuarantineConfig quarantine{0.0, 1, 10.0};
    ChurnModel churn = ChurnModel::poisson;
    double phi = 0.0;             // sessions: probability a session is short
    double short_session = 600.0; // sessions: short sessions are uniform below this
    double stale_sample_period = 10.0;
    std::size_t stale_sample_peers = 16;
    std::uint64_t seed = 1;
    EdraConfig edra;  // protocol knobs; f and retransmit timeout are derived from this config

    void validate() const;
    /// Upper bound of one network delay.
    double max_delay() const;
};

struct Metrics {
    // lookups issued by members during measurement
    std::uint64_t lookups = 0;
    std::uint64_t one_hop = 0;
    std::uint64_t routing_failures = 0;
    std::uint64_t bootstrap_fallbacks = 0;
    double one_hop_fraction = 0.0;
    double mean_hops = 0.0;
    // lookups relayed for quarantined peers
    std::uint64_t gateway_lookups = 0;
    double gateway_mean_hops = 0.0;

    // outgoing traffic of members, wire-accounted
    double mean_bps = 0.0;
    double p50_bps = 0.0;
    double p99_bps = 0.0;
    double maintenance_bps = 0.0;  // maintenance + acks only
    std::uint64_t maintenance_msgs = 0;
    std::uint64_t ack_msgs = 0;
    std::uint64_t probe_msgs = 0;
    std::uint64_t heartbeat_msgs = 0;
    std::uint64_t calot_msgs = 0;
    std::vector<std::uint64_t> msgs_per_interval;  // histogram, index = messages
    double mean_msgs_per_interval = 0.0;
    double mean_theta = 0.0;

    double stale_fraction = 0.0;  // time average
    std::vector<std::pair<double, double>> stale_series;

    std::uint64_t events_generated = 0;
    std::uint64_t events_detected = 0;
    std::uint64_t events_complete = 0;
    std::uint64_t events_with_carrier_loss = 0;
    std::uint64_t expected_acks = 0;
    std::uint64_t missing_acks_carrier = 0;
    // events some forwarder relayed to a hop whose offset in its table
    // disagreed with live membership
    std::uint64_t events_with_broken_chain = 0;
    std::uint64_t missing_acks_broken_chain = 0;
    std::uint64_t missing_acks_unattributed = 0;
    double broken_chain_loss_rate = 0.0;  // missing_acks_broken_chain / expected_acks
    std::uint64_t duplicate_acks = 0;
    double event_rate = 0.0;       // generated events per second
    double mean_detect = 0.0;      // generation to detection, leaves only
    double mean_ack_latency = 0.0; // detection to mean-peer acknowledgment
    double mean_last_ack = 0.0;    // detection to last-peer acknowledgment
    double mean_total_time = 0.0;  // generation to mean-peer acknowledgment
    double p95_last_ack = 0.0;

    std::uint64_t joins = 0;
    std::uint64_t leaves = 0;
    std::uint64_t kills = 0;
    double mean_live = 0.0;
    std::size_t live_at_end = 0;
    double member_session_fraction = 0.0;  // member time over online time
    double sim_seconds = 0.0;
};

/// Runs warmup then measurement. Deterministic in the config. Throws
/// ConfigError on invalid input and SimAbort when fewer than two live peers remain.
Metrics run(const SimConfig& cfg, std::ostream* trace = nullptr);

const char* to_string(Protocol p);
const char* to_string(DelayModel d);
const char* to_string(ChurnModel c);

}  // namespace d1ht::sim
