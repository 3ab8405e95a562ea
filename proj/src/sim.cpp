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

#include "d1ht/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <random>
#include <unordered_map>

#include "d1ht/calot.hpp"
#include "d1ht/edra.hpp"
#include "d1ht/models.hpp"
#include "d1ht/wire.hpp"

namespace d1ht::sim {

const char* to_string(Protocol p) { return p == Protocol::d1ht ? "d1ht" : "calot"; }

const char* to_string(DelayModel d) {
    switch (d) {
    case DelayModel::constant:
        return "constant";
    case DelayModel::exponential:
        return "exponential";
    case DelayModel::empirical:
        return "empirical";
    }
    return "?";
}

const char* to_string(ChurnModel c) { return c == ChurnModel::poisson ? "poisson" : "sessions"; }

void SimConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (n_target < 2)
        fail("n must be at least 2");
    if (!(s_avg > 0))
        fail("s_avg must be positive");
    if (!(f > 0 && f < 1))
        fail("f must lie in (0, 1)");
    if (!(delta_avg >= 0))
        fail("delta must be non-negative");
    if (!(duration > 0))
        fail("duration must be positive");
    if (warmup_start < 2)
        fail("warmup must start with at least 2 peers");
    if (!(warmup_join_rate > 0))
        fail("warmup join rate must be positive");
    if (!(lookup_rate >= 0))
        fail("lookup rate must be non-negative");
    if (!(kill_fraction >= 0 && kill_fraction <= 1))
        fail("kill_fraction must lie in [0, 1]");
    if (!(rejoin_delay >= 0))
        fail("rejoin delay must be non-negative");
    if (!(phi >= 0 && phi < 1))
        fail("phi must lie in [0, 1)");
    if (!(short_session > 0))
        fail("short_session must be positive");
    if (churn == ChurnModel::sessions) {
        const double t_short = quarantine.enabled() ? quarantine.t_q : short_session;
        if (phi * t_short / 2 + (1 - phi) * t_short >= s_avg)
            fail("s_avg too small for the short-session mass");
    }
    if (!(stale_sample_period > 0) || stale_sample_peers == 0)
        fail("stale sampling needs a positive period and at least one peer");
    if (delay_model == DelayModel::empirical) {
        if (delay_table.empty())
            fail("empirical delay model needs a table");
        double last_p = 0, last_d = 0;
        for (const auto& [p, d] : delay_table) {
            if (p < last_p || d < last_d || d < 0)
                fail("empirical delay table must be ascending");
            last_p = p;
            last_d = d;
        }
        if (std::abs(last_p - 1.0) > 1e-9)
            fail("empirical delay table must end at probability 1");
    }
    try {
        quarantine.validate();
        EdraConfig e = edra;
        e.f = f;
        e.validate();
    } catch (const std::invalid_argument& ex) {
        fail(ex.what());
    }
}

double SimConfig::max_delay() const {
    switch (delay_model) {
    case DelayModel::constant:
        return delta_avg;
    case DelayModel::exponential:
        return 10.0 * delta_avg;
    case DelayModel::empirical:
        return delay_table.empty() ? 0.0 : delay_table.back().second;
    }
    return 0.0;
}

namespace {

std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class Ev : std::uint8_t { deliver, wake, churn, rejoin, grow, lookup, sample, promote, session_end, finalize, phase_end };

struct QItem {
    Time t;
    std::uint64_t order;
    Ev kind;
    std::uint32_t a;
    std::uint32_t b;
};

struct Later {
    bool operator()(const QItem& x, const QItem& y) const { return x.t != y.t ? x.t > y.t : x.order > y.order; }
};

struct EventHash {
    std::size_t operator()(const Event& e) const noexcept {
        return std::hash<std::uint64_t>{}(e.subject.packed() * 2 + static_cast<std::uint64_t>(e.kind));
    }
};

enum class State : std::uint8_t { offline, quarantined, member };

struct Slot {
    PeerAddr addr;
    std::unique_ptr<Node> node;
    State state = State::offline;
    std::uint32_t epoch = 0;    // bumps on every state change
    std::uint32_t session = 0;  // bumps on every request to join
    Time scheduled_at = kNever;
    Time member_since{};
    Time online_since{};
    Time member_acct{};  // accounting cursors
    Time online_acct{};
    quarantine::QuarantinePhase q;
    std::size_t live_pos = 0;
    std::size_t online_pos = 0;
    double bits = 0;
    double member_secs = 0;
    double online_secs = 0;
};

struct Track {
    Event ev;
    std::uint32_t subject_slot = 0;
    Time generated{};
    Time detected = kNever;
    std::vector<bool> acked;
    unsigned acks = 0;
    double latency_sum = 0;
    Time last_ack{};
    bool carrier_lost = false;
    bool broken_chain = false;
};

class Simulator {
public:
    Simulator(const SimConfig& cfg, std::ostream* trace);
    Metrics run();

private:
    Time secs(double s) const { return from_seconds(s); }
    bool measuring(Time now) const { return now >= meas_start_ && now < meas_end_; }
    void push(Time t, Ev kind, std::uint32_t a = 0, std::uint32_t b = 0) { q_.push({t, order_++, kind, a, b}); }

    PeerAddr fresh_addr();
    Duration delay();
    std::unique_ptr<Node> make_node(const PeerAddr& self, const std::vector<PeerAddr>& members, Time now);
    std::uint32_t new_slot();

    void process(std::uint32_t s, Effects&& fx, Time now);
    void check_chain(std::uint32_t s, const MaintenanceMsg& m, const PeerAddr& to);
    void reschedule(std::uint32_t s, Time now);
    void on_ack(std::uint32_t s, const AckRecord& rec, Time now);
    Track* track_of(const Event& ev);
    void start_track(const Event& ev, std::uint32_t subject, Time now);

    void request(std::uint32_t s, Time now);
    void member_join(std::uint32_t s, Time now);
    void leave(std::uint32_t s, Time now, bool abrupt);
    void account(Slot& slot, Time now);
    void add_live(std::uint32_t s);
    void remove_live(std::uint32_t s);
    void add_online(std::uint32_t s);
    void remove_online(std::uint32_t s);

    void handle_deliver(const QItem& it, Time now);
    void handle_wake(const QItem& it, Time now);
    void handle_churn(Time now);
    void handle_lookup(Time now);
    void handle_sample(Time now);
    void handle_finalize(std::uint32_t track, Time now);
    void start_measurement(Time now);
    double session_length();

    LookupOracle oracle();
    Metrics collect();

    SimConfig cfg_;
    EdraConfig ecfg_;
    std::ostream* trace_;
    std::mt19937_64 churn_rng_, delay_rng_, lookup_rng_, misc_rng_;
    std::priority_queue<QItem, std::vector<QItem>, Later> q_;
    std::uint64_t order_ = 0;

    std::vector<Slot> slots_;
    std::vector<std::uint32_t> live_, online_;
    std::unordered_map<PeerAddr, std::uint32_t, PeerAddrHash> by_addr_;
    std::unordered_map<std::uint64_t, bool> used_addrs_;
    RoutingTable truth_;

    std::vector<Outbound> pool_;
    std::vector<std::uint32_t> pool_free_;

    std::vector<Track> tracks_;
    std::unordered_map<Event, std::uint32_t, EventHash> current_;
    std::vector<quarantine::GatewayLimiter> limiters_;

    Time meas_start_ = kNever;
    Time meas_end_ = kNever;
    Time drain_end_ = kNever;
    Duration finalize_after_{};

    Metrics m_;
    double total_bits_ = 0;
    double maint_bits_ = 0;
    double gateway_hops_ = 0;
    double hops_ = 0;
    std::vector<double> last_ack_samples_;
    double detect_sum_ = 0;
    std::uint64_t detect_n_ = 0;
    double latency_sum_ = 0, last_sum_ = 0, total_sum_ = 0;
    std::uint64_t latency_n_ = 0;
    double theta_sum_ = 0;
    std::uint64_t theta_n_ = 0;
};

Simulator::Simulator(const SimConfig& cfg, std::ostream* trace) : cfg_(cfg), trace_(trace) {
    cfg_.validate();
    cfg_.warmup_start = std::min(cfg_.warmup_start, cfg_.n_target);
    ecfg_ = cfg_.edra;
    ecfg_.f = cfg_.f;
    ecfg_.retransmit_timeout = from_seconds(std::max(2.0 * cfg_.max_delay(), 0.01));
    std::uint64_t s = cfg_.seed;
    churn_rng_.seed(splitmix(s));
    delay_rng_.seed(splitmix(s));
    lookup_rng_.seed(splitmix(s));
    misc_rng_.seed(splitmix(s));

    models::ModelParams p{static_cast<double>(cfg_.n_target), cfg_.s_avg, cfg_.f, cfg_.delta_avg};
    // Peers clamp their interval, so the drain horizon uses the clamped value.
    const double th = edra::tune_theta(ecfg_, cfg_.s_avg, cfg_.n_target);
    const double t_avg = models::t_avg(th, models::rho_of(p.n), cfg_.max_delay());
    finalize_after_ = secs(std::max(120.0, 3.0 * t_avg + 30.0));
}

PeerAddr Simulator::fresh_addr() {
    std::uniform_int_distribution<std::uint32_t> ip(0x0A000001u, 0x0AFFFFFEu);
    for (;;) {
        auto a = PeerAddr::from_u32(ip(misc_rng_), ecfg_.default_port);
        if (used_addrs_.emplace(a.packed(), true).second)
            return a;
    }
}

Duration Simulator::delay() {
    switch (cfg_.delay_model) {
    case DelayModel::constant:
        return secs(cfg_.delta_avg);
    case DelayModel::exponential: {
        if (cfg_.delta_avg <= 0)
            return Duration::zero();
        std::exponential_distribution<double> d(1.0 / cfg_.delta_avg);
        return secs(std::min(d(delay_rng_), 10.0 * cfg_.delta_avg));
    }
    case DelayModel::empirical: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double x = u(delay_rng_);
        double prev_p = 0, prev_d = 0;
        for (const auto& [p, d] : cfg_.delay_table) {
            if (x <= p) {
                const double w = p > prev_p ? (x - prev_p) / (p - prev_p) : 1.0;
                return secs(prev_d + w * (d - prev_d));
            }
            prev_p = p;
            prev_d = d;
        }
        return secs(cfg_.delay_table.back().second);
    }
    }
    return Duration::zero();
}

std::unique_ptr<Node> Simulator::make_node(const PeerAddr& self, const std::vector<PeerAddr>& members, Time now) {
    if (cfg_.protocol == Protocol::calot)
        return std::make_unique<calot::Peer>(ecfg_, self, members, now);
    return std::make_unique<edra::Peer>(ecfg_, self, members, now);
}

std::uint32_t Simulator::new_slot() {
    slots_.emplace_back();
    limiters_.emplace_back(cfg_.quarantine.gateway_rate_limit);
    auto s = static_cast<std::uint32_t>(slots_.size() - 1);
    slots_[s].addr = fresh_addr();
    return s;
}

void Simulator::add_live(std::uint32_t s) {
    slots_[s].live_pos = live_.size();
    live_.push_back(s);
}

void Simulator::remove_live(std::uint32_t s) {
    const auto pos = slots_[s].live_pos;
    live_[pos] = live_.back();
    slots_[live_[pos]].live_pos = pos;
    live_.pop_back();
}

void Simulator::add_online(std::uint32_t s) {
    slots_[s].online_pos = online_.size();
    online_.push_back(s);
}

void Simulator::remove_online(std::uint32_t s) {
    const auto pos = slots_[s].online_pos;
    online_[pos] = online_.back();
    slots_[online_[pos]].online_pos = pos;
    online_.pop_back();
}

void Simulator::account(Slot& slot, Time now) {
    auto overlap = [&](Time from, Time to) {
        const Time lo = std::max(from, meas_start_);
        const Time hi = std::min(to, meas_end_);
        return hi > lo ? to_seconds(hi - lo) : 0.0;
    };
    if (slot.state == State::member) {
        slot.member_secs += overlap(slot.member_acct, now);
        slot.member_acct = now;
    }
    if (slot.state != State::offline) {
        slot.online_secs += overlap(slot.online_acct, now);
        slot.online_acct = now;
    }
}

void Simulator::process(std::uint32_t s, Effects&& fx, Time now) {
    auto& slot = slots_[s];
    const bool meas = measuring(now) && slot.state == State::member;
    for (auto& out : fx.send) {
        if (const auto* mm = std::get_if<MaintenanceMsg>(&out.dgram); mm && slot.state == State::member)
            check_chain(s, *mm, out.to);
        if (meas) {
            const double bits = static_cast<double>(wire::accounted_bits(out.dgram, ecfg_.default_port));
            slot.bits += bits;
            total_bits_ += bits;
            std::visit(
                [&](const auto& msg) {
                    using T = std::decay_t<decltype(msg)>;
                    if constexpr (std::is_same_v<T, MaintenanceMsg>) {
                        ++m_.maintenance_msgs;
                        maint_bits_ += bits;
                    } else if constexpr (std::is_same_v<T, AckMsg>) {
                        ++m_.ack_msgs;
                        maint_bits_ += bits;
                    } else if constexpr (std::is_same_v<T, HeartbeatMsg>) {
                        ++m_.heartbeat_msgs;
                    } else if constexpr (std::is_same_v<T, CalotMsg>) {
                        ++m_.calot_msgs;
                        maint_bits_ += bits;
                    } else {
                        ++m_.probe_msgs;
                    }
                },
                out.dgram);
        }
        std::uint32_t idx;
        if (!pool_free_.empty()) {
            idx = pool_free_.back();
            pool_free_.pop_back();
            pool_[idx] = std::move(out);
        } else {
            idx = static_cast<std::uint32_t>(pool_.size());
            pool_.push_back(std::move(out));
        }
        push(now + delay(), Ev::deliver, idx);
    }
    for (const auto& a : fx.acks)
        on_ack(s, a, now);
    if (meas) {
        for (auto k : fx.interval_msgs) {
            if (m_.msgs_per_interval.size() <= k)
                m_.msgs_per_interval.resize(k + 1, 0);
            ++m_.msgs_per_interval[k];
        }
    }
}

void Simulator::check_chain(std::uint32_t s, const MaintenanceMsg& m, const PeerAddr& to) {
    if ((m.flags & msg_flags::kDirect) != 0 || m.events.empty())
        return;
    const auto self = ring::id_of(slots_[s].addr);
    const auto target = ring::id_of(to);
    const auto& view = slots_[s].node->table();
    if (!view.contains(target) || !view.contains(self) || !truth_.contains(self))
        return;
    const auto vn = view.size(), tn = truth_.size();
    const auto view_off = (view.rank_of(target) + vn - view.rank_of(self)) % vn;
    const auto truth_off = (truth_.lower_rank(target) + tn - truth_.rank_of(self)) % tn;
    if (truth_.contains(target) && view_off == truth_off)
        return;
    for (const auto& e : m.events)
        if (Track* t = track_of(e))
            t->broken_chain = true;
}

void Simulator::reschedule(std::uint32_t s, Time now) {
    auto& slot = slots_[s];
    if (!slot.node)
        return;
    Time t = slot.node->next_deadline();
    if (t == kNever)
        return;
    if (t <= now)
        t = now + Duration(1);
    if (t != slot.scheduled_at) {
        slot.scheduled_at = t;
        push(t, Ev::wake, s, slot.epoch);
    }
}

Track* Simulator::track_of(const Event& ev) {
    auto it = current_.find(ev);
    return it == current_.end() ? nullptr : &tracks_[it->second];
}

void Simulator::start_track(const Event& ev, std::uint32_t subject, Time now) {
    if (!measuring(now))
        return;
    Track t;
    t.ev = ev;
    t.subject_slot = subject;
    t.generated = now;
    t.acked.assign(slots_.size(), false);
    const auto id = static_cast<std::uint32_t>(tracks_.size());
    tracks_.push_back(std::move(t));
    current_[ev] = id;
    ++m_.events_generated;
    push(now + finalize_after_, Ev::finalize, id);
}

void Simulator::on_ack(std::uint32_t s, const AckRecord& rec, Time now) {
    Track* t = track_of(rec.event);
    if (t == nullptr || rec.outcome == AckOutcome::stale)
        return;
    if (rec.origin && t->detected == kNever) {
        t->detected = now;
        ++m_.events_detected;
    }
    if (s >= t->acked.size())
        return;
    if (t->acked[s]) {
        ++m_.duplicate_acks;
        return;
    }
    t->acked[s] = true;
    if (rec.origin)
        return;
    ++t->acks;
    const Time base = t->detected != kNever ? t->detected : t->generated;
    t->latency_sum += to_seconds(now - base);
    t->last_ack = std::max(t->last_ack, now);
}

double Simulator::session_length() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double t_short = cfg_.quarantine.enabled() ? cfg_.quarantine.t_q : cfg_.short_session;
    if (u(churn_rng_) < cfg_.phi)
        return u(churn_rng_) * t_short;
    const double mean_long = (cfg_.s_avg - cfg_.phi * t_short / 2) / (1 - cfg_.phi) - t_short;
    std::exponential_distribution<double> e(1.0 / mean_long);
    return t_short + e(churn_rng_);
}

void Simulator::request(std::uint32_t s, Time now) {
    auto& slot = slots_[s];
    by_addr_[slot.addr] = s;
    slot.online_since = now;
    slot.online_acct = now;
    add_online(s);
    ++slot.session;
    if (cfg_.churn == ChurnModel::sessions)
        push(now + secs(session_length()), Ev::session_end, s, slot.session);
    if (!cfg_.quarantine.enabled() || live_.empty()) {
        member_join(s, now);
        return;
    }
    std::vector<quarantine::GatewayCandidate> contacted;
    const std::size_t k = std::max<std::size_t>(4, cfg_.quarantine.gateways);
    std::uniform_int_distribution<std::size_t> pick(0, live_.size() - 1);
    for (std::size_t i = 0; i < k; ++i) {
        const auto c = live_[pick(misc_rng_)];
        contacted.push_back({slots_[c].addr, delay() + delay(), now - slots_[c].member_since});
    }
    slot.q = quarantine::request_join(contacted, cfg_.quarantine, now);
    slot.state = State::quarantined;
    ++slot.epoch;
    push(now + secs(cfg_.quarantine.t_q), Ev::promote, s, slot.epoch);
}

void Simulator::member_join(std::uint32_t s, Time now) {
    auto& slot = slots_[s];
    const auto id = ring::id_of(slot.addr);
    std::uint32_t succ_slot = 0;
    Effects fx;
    if (truth_.empty()) {
        slot.node = make_node(slot.addr, {slot.addr}, now);
    } else {
        if (auto clash = truth_.find(id); clash && *clash != slot.addr)
            throw SimAbort("identifier collision for " + slot.addr.str());
        succ_slot = by_addr_.at(truth_.owner_of(id).addr);
        auto& succ = slots_[succ_slot];
        slot.node = succ.node->make_joiner(slot.addr, now);
        start_track({EventKind::join, slot.addr}, s, now);
        fx = succ.node->admit(slot.addr, now);
    }
    if (slot.state == State::quarantined)
        quarantine::promote(slot.q, cfg_.quarantine, now);
    slot.state = State::member;
    ++slot.epoch;
    slot.scheduled_at = kNever;
    slot.member_since = now;
    slot.member_acct = now;
    truth_.insert(id, slot.addr);
    add_live(s);
    if (measuring(now))
        ++m_.joins;
    if (!fx.send.empty() || !fx.acks.empty() || !fx.interval_msgs.empty()) {
        process(succ_slot, std::move(fx), now);
    }
    if (!truth_.empty() && succ_slot != s)
        reschedule(succ_slot, now);
    reschedule(s, now);
}

void Simulator::leave(std::uint32_t s, Time now, bool abrupt) {
    auto& slot = slots_[s];
    if (slot.state == State::offline)
        return;
    account(slot, now);
    if (slot.state == State::member) {
        if (measuring(now)) {
            ++m_.leaves;
            if (abrupt)
                ++m_.kills;
        }
        if (abrupt) {
            if (auto* p = dynamic_cast<edra::Peer*>(slot.node.get())) {
                for (const auto& [ev, ttl] : p->buffered())
                    if (ttl > 0)
                        if (Track* t = track_of(ev))
                            t->carrier_lost = true;
            }
        } else {
            process(s, slot.node->leave(true, now), now);
        }
        truth_.erase(ring::id_of(slot.addr));
        remove_live(s);
        start_track({EventKind::leave, slot.addr}, s, now);
    }
    remove_online(s);
    slot.node.reset();
    slot.state = State::offline;
    ++slot.epoch;
    slot.scheduled_at = kNever;
    by_addr_.erase(slot.addr);
    push(now + secs(cfg_.rejoin_delay), Ev::rejoin, s, slot.epoch);
    if (now >= meas_start_ && live_.size() < 2)
        throw SimAbort("fewer than two live peers remain");
}

LookupOracle Simulator::oracle() {
    LookupOracle o;
    o.ask = [this](const PeerAddr& target, const PeerId& key) {
        LookupReply r;
        auto it = by_addr_.find(target);
        if (it == by_addr_.end() || slots_[it->second].state != State::member) {
            r.status = LookupReply::Status::dead;
            return r;
        }
        if (truth_.owner_of(key).addr == target) {
            r.status = LookupReply::Status::owner;
            return r;
        }
        r.status = LookupReply::Status::not_owner;
        r.redirect = slots_[it->second].node->table().owner_of(key).addr;
        return r;
    };
    o.bootstrap = [this](const PeerId& key) { return truth_.owner_of(key).addr; };
    return o;
}

void Simulator::handle_deliver(const QItem& it, Time now) {
    Outbound out = std::move(pool_[it.a]);
    pool_free_.push_back(it.a);
    auto f = by_addr_.find(out.to);
    if (f == by_addr_.end())
        return;
    const auto s = f->second;
    auto& slot = slots_[s];
    if (slot.state != State::member || !slot.node)
        return;
    process(s, slot.node->on_receive(out.dgram, now), now);
    reschedule(s, now);
}

void Simulator::handle_wake(const QItem& it, Time now) {
    auto& slot = slots_[it.a];
    if (slot.epoch != it.b || slot.scheduled_at != it.t || !slot.node)
        return;
    slot.scheduled_at = kNever;
    process(it.a, slot.node->on_timer(now), now);
    reschedule(it.a, now);
}

void Simulator::handle_churn(Time now) {
    // Thinning: candidates arrive at the peak rate n_target/S and are kept with
    // probability online/n_target, giving a leave rate that tracks the population.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = static_cast<double>(online_.size()) / static_cast<double>(cfg_.n_target);
    if (!online_.empty() && u(churn_rng_) < keep) {
        std::uniform_int_distribution<std::size_t> pick(0, online_.size() - 1);
        std::bernoulli_distribution abrupt(cfg_.kill_fraction);
        const auto victim = online_[pick(churn_rng_)];
        const bool kill = abrupt(churn_rng_);
        leave(victim, now, kill);
    }
    std::exponential_distribution<double> gap(static_cast<double>(cfg_.n_target) / cfg_.s_avg);
    push(now + secs(gap(churn_rng_)), Ev::churn);
}

void Simulator::handle_lookup(Time now) {
    if (now >= meas_end_ || cfg_.lookup_rate <= 0)
        return;
    if (!online_.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, online_.size() - 1);
        const auto s = online_[pick(lookup_rng_)];
        PeerId key;
        for (auto& b : key.bytes)
            b = static_cast<std::uint8_t>(lookup_rng_());
        const auto o = oracle();
        auto& slot = slots_[s];
        if (slot.state == State::member) {
            const auto res = slot.node->lookup(key, o, now);
            ++m_.lookups;
            hops_ += res.hops;
            if (res.hops == 1)
                ++m_.one_hop;
            if (res.routing_failure)
                ++m_.routing_failures;
            if (res.via_bootstrap)
                ++m_.bootstrap_fallbacks;
            reschedule(s, now);
        } else if (slot.state == State::quarantined) {
            auto live = [this](const PeerAddr& a) -> Node* {
                auto it = by_addr_.find(a);
                if (it == by_addr_.end() || slots_[it->second].state != State::member)
                    return nullptr;
                return slots_[it->second].node.get();
            };
            auto limiter = [this](const PeerAddr& a) -> quarantine::GatewayLimiter& { return limiters_[by_addr_.at(a)]; };
            const auto res = quarantine::quarantined_lookup(slot.q, slot.addr, key, live, limiter, o, now);
            ++m_.gateway_lookups;
            gateway_hops_ += res.hops;
        }
    }
    const double rate = cfg_.lookup_rate * std::max<double>(1.0, static_cast<double>(online_.size()));
    std::exponential_distribution<double> gap(rate);
    push(now + secs(gap(lookup_rng_)), Ev::lookup);
}

void Simulator::handle_sample(Time now) {
    if (now >= meas_end_)
        return;
    if (!live_.empty()) {
        const auto truth = truth_.entries();
        std::uniform_int_distribution<std::size_t> pick(0, live_.size() - 1);
        double acc = 0;
        for (std::size_t i = 0; i < cfg_.stale_sample_peers; ++i) {
            const auto s = live_[pick(misc_rng_)];
            const auto mine = slots_[s].node->table().entries();
            std::size_t common = 0;
            auto a = mine.begin();
            auto b = truth.begin();
            while (a != mine.end() && b != truth.end()) {
                if (a->id < b->id)
                    ++a;
                else if (b->id < a->id)
                    ++b;
                else {
                    ++common;
                    ++a;
                    ++b;
                }
            }
            const auto stale = (mine.size() - common) + (truth.size() - common);
            acc += static_cast<double>(stale) / static_cast<double>(truth.size());
            if (auto* p = dynamic_cast<edra::Peer*>(slots_[s].node.get())) {
                theta_sum_ += to_seconds(p->theta());
                ++theta_n_;
            }
        }
        m_.stale_series.emplace_back(to_seconds(now - meas_start_), acc / static_cast<double>(cfg_.stale_sample_peers));
    }
    push(now + secs(cfg_.stale_sample_period), Ev::sample);
}

void Simulator::handle_finalize(std::uint32_t id, Time now) {
    Track& t = tracks_[id];
    const Time since = t.detected != kNever ? t.detected : t.generated;
    std::uint64_t expected = 0, missing = 0;
    for (auto s : live_) {
        if (s == t.subject_slot || slots_[s].member_since > since)
            continue;
        ++expected;
        if (s >= t.acked.size() || !t.acked[s]) {
            ++missing;
        }
    }
    // The detector is a live member that acknowledged as origin; it is not an expected receiver.
    m_.expected_acks += expected;
    if (missing == 0) {
        ++m_.events_complete;
    } else if (t.carrier_lost) {
        ++m_.events_with_carrier_loss;
        m_.missing_acks_carrier += missing;
    } else if (t.broken_chain) {
        ++m_.events_with_broken_chain;
        m_.missing_acks_broken_chain += missing;
    } else {
        m_.missing_acks_unattributed += missing;
    }
    if (t.detected != kNever && t.acks > 0) {
        const double mean = t.latency_sum / t.acks;
        latency_sum_ += mean;
        last_sum_ += to_seconds(t.last_ack - t.detected);
        total_sum_ += mean + to_seconds(t.detected - t.generated);
        last_ack_samples_.push_back(to_seconds(t.last_ack - t.detected));
        ++latency_n_;
        if (t.ev.kind == EventKind::leave) {
            detect_sum_ += to_seconds(t.detected - t.generated);
            ++detect_n_;
        }
    }
    if (trace_ != nullptr) {
        *trace_ << to_seconds(t.generated) << ' ' << (t.ev.kind == EventKind::join ? "join" : "leave") << ' '
                << t.ev.subject.str() << " detected=" << (t.detected != kNever ? to_seconds(t.detected) : -1.0)
                << " acks=" << t.acks << " expected=" << expected << " missing=" << missing
                << " mean_ack=" << (t.acks > 0 ? t.latency_sum / t.acks : 0.0)
                << " last_ack=" << (t.acks > 0 && t.detected != kNever ? to_seconds(t.last_ack - t.detected) : 0.0)
                << " carrier_lost=" << t.carrier_lost << " broken_chain=" << t.broken_chain << '\n';
    }
    auto it = current_.find(t.ev);
    if (it != current_.end() && it->second == id)
        current_.erase(it);
    std::vector<bool>().swap(t.acked);
    (void)now;
}

void Simulator::start_measurement(Time now) {
    meas_start_ = now;
    meas_end_ = now + secs(cfg_.duration);
    drain_end_ = meas_end_ + finalize_after_;
    for (auto s : online_) {
        slots_[s].member_acct = std::max(slots_[s].member_acct, now);
        slots_[s].online_acct = std::max(slots_[s].online_acct, now);
    }
    push(meas_end_, Ev::phase_end);
    if (cfg_.lookup_rate > 0)
        push(now, Ev::lookup);
    push(now, Ev::sample);
}

Metrics Simulator::run() {
    const Time t0{};
    std::vector<PeerAddr> seeds;
    for (std::size_t i = 0; i < cfg_.warmup_start; ++i)
        seeds.push_back(slots_[new_slot()].addr);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    for (std::uint32_t s = 0; s < slots_.size(); ++s) {
        auto& slot = slots_[s];
        slot.node = make_node(slot.addr, seeds, t0);
        if (auto* p = dynamic_cast<edra::Peer*>(slot.node.get()))
            p->set_next_close(t0 + from_seconds(phase(misc_rng_) * to_seconds(p->theta())));
        else if (auto* c = dynamic_cast<calot::Peer*>(slot.node.get()))
            c->set_next_heartbeat(t0 + from_seconds(phase(misc_rng_) * to_seconds(ecfg_.heartbeat_period)));
        slot.state = State::member;
        slot.member_since = t0;
        slot.online_since = t0;
        by_addr_[slot.addr] = s;
        truth_.insert(slot.addr);
        add_live(s);
        add_online(s);
        if (cfg_.churn == ChurnModel::sessions)
            push(t0 + secs(session_length()), Ev::session_end, s, slot.session);
        reschedule(s, t0);
    }
    if (cfg_.churn == ChurnModel::poisson)
        push(t0 + secs(std::exponential_distribution<double>(static_cast<double>(cfg_.n_target) / cfg_.s_avg)(churn_rng_)),
             Ev::churn);
    if (slots_.size() < cfg_.n_target)
        push(t0 + secs(1.0 / cfg_.warmup_join_rate), Ev::grow);
    else
        start_measurement(t0);

    while (!q_.empty()) {
        const QItem it = q_.top();
        if (it.t > drain_end_)
            break;
        q_.pop();
        const Time now = it.t;
        switch (it.kind) {
        case Ev::deliver:
            handle_deliver(it, now);
            break;
        case Ev::wake:
            handle_wake(it, now);
            break;
        case Ev::churn:
            handle_churn(now);
            break;
        case Ev::rejoin: {
            auto& slot = slots_[it.a];
            if (slot.epoch != it.b || slot.state != State::offline)
                break;
            if (!cfg_.reuse_ids)
                slot.addr = fresh_addr();
            request(it.a, now);
            break;
        }
        case Ev::grow: {
            const auto s = new_slot();
            request(s, now);
            if (slots_.size() < cfg_.n_target)
                push(now + secs(1.0 / cfg_.warmup_join_rate), Ev::grow);
            else
                start_measurement(now);
            break;
        }
        case Ev::lookup:
            handle_lookup(now);
            break;
        case Ev::sample:
            handle_sample(now);
            break;
        case Ev::promote: {
            auto& slot = slots_[it.a];
            if (slot.epoch != it.b || slot.state != State::quarantined)
                break;
            account(slot, now);
            member_join(it.a, now);
            break;
        }
        case Ev::session_end: {
            auto& slot = slots_[it.a];
            if (slot.session != it.b || slot.state == State::offline)
                break;
            std::bernoulli_distribution abrupt(cfg_.kill_fraction);
            leave(it.a, now, abrupt(churn_rng_));
            break;
        }
        case Ev::finalize:
            handle_finalize(it.a, now);
            break;
        case Ev::phase_end:
            for (auto s : online_)
                account(slots_[s], now);
            m_.live_at_end = live_.size();
            break;
        }
    }
    return collect();
}

Metrics Simulator::collect() {
    Metrics m = std::move(m_);
    m.sim_seconds = to_seconds(std::min(drain_end_, q_.empty() ? drain_end_ : q_.top().t));
    m.one_hop_fraction = m.lookups > 0 ? static_cast<double>(m.one_hop) / static_cast<double>(m.lookups) : 0.0;
    m.mean_hops = m.lookups > 0 ? hops_ / static_cast<double>(m.lookups) : 0.0;
    m.gateway_mean_hops = m.gateway_lookups > 0 ? gateway_hops_ / static_cast<double>(m.gateway_lookups) : 0.0;

    double member_secs = 0, online_secs = 0;
    std::vector<double> per_peer;
    for (const auto& s : slots_) {
        member_secs += s.member_secs;
        online_secs += s.online_secs;
        if (s.member_secs >= cfg_.duration / 2)
            per_peer.push_back(s.bits / s.member_secs);
    }
    m.mean_live = member_secs / cfg_.duration;
    m.member_session_fraction = online_secs > 0 ? member_secs / online_secs : 0.0;
    if (member_secs > 0) {
        m.mean_bps = total_bits_ / member_secs;
        m.maintenance_bps = maint_bits_ / member_secs;
    }
    if (!per_peer.empty()) {
        std::sort(per_peer.begin(), per_peer.end());
        auto pct = [&](double q) {
            const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(per_peer.size() - 1)));
            return per_peer[i];
        };
        m.p50_bps = pct(0.5);
        m.p99_bps = pct(0.99);
    }
    std::uint64_t intervals = 0, msgs = 0;
    for (std::size_t k = 0; k < m.msgs_per_interval.size(); ++k) {
        intervals += m.msgs_per_interval[k];
        msgs += k * m.msgs_per_interval[k];
    }
    m.mean_msgs_per_interval = intervals > 0 ? static_cast<double>(msgs) / static_cast<double>(intervals) : 0.0;
    m.mean_theta = theta_n_ > 0 ? theta_sum_ / static_cast<double>(theta_n_) : 0.0;
    double stale = 0;
    for (const auto& [t, v] : m.stale_series)
        stale += v;
    m.stale_fraction = m.stale_series.empty() ? 0.0 : stale / static_cast<double>(m.stale_series.size());
    m.event_rate = static_cast<double>(m.events_generated) / cfg_.duration;
    if (latency_n_ > 0) {
        m.mean_ack_latency = latency_sum_ / static_cast<double>(latency_n_);
        m.mean_last_ack = last_sum_ / static_cast<double>(latency_n_);
        m.mean_total_time = total_sum_ / static_cast<double>(latency_n_);
        std::sort(last_ack_samples_.begin(), last_ack_samples_.end());
        m.p95_last_ack = last_ack_samples_[static_cast<std::size_t>(
            std::floor(0.95 * static_cast<double>(last_ack_samples_.size() - 1)))];
    }
    m.broken_chain_loss_rate = m.expected_acks > 0 ? static_cast<double>(m.missing_acks_broken_chain) /
                                                         static_cast<double>(m.expected_acks)
                                                   : 0.0;
    m.mean_detect = detect_n_ > 0 ? detect_sum_ / static_cast<double>(detect_n_) : 0.0;
    return m;
}

}  // namespace

Metrics run(const SimConfig& cfg, std::ostream* trace) {
    Simulator sim(cfg, trace);
    return sim.run();
}

}  // namespace d1ht::sim
