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

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "d1ht/node.hpp"

namespace d1ht::calot {

/// 1h-Calot baseline peer: heartbeats to the successor, and every detected
/// event is sent unbuffered, one acknowledged datagram per table member.
class Peer final : public Node {
public:
    Peer(const EdraConfig& cfg, const PeerAddr& self, const std::vector<PeerAddr>& members, Time now);

    Effects on_receive(const Datagram& d, Time now) override;
    Effects on_timer(Time now) override;
    Time next_deadline() const override;
    Effects admit(const PeerAddr& joiner, Time now) override;
    std::unique_ptr<Node> make_joiner(const PeerAddr& joiner, Time now) const override;
    Effects leave(bool voluntary, Time now) override;
    std::size_t forwardable_buffered() const override { return 0; }

    /// Detector side: applies the event and notifies every other table member.
    Effects report(const Event& ev, Time now);

    void set_next_heartbeat(Time t) { next_heartbeat_ = t; }
    std::size_t pending_count() const { return pending_.size(); }

private:
    struct Pending {
        PeerAddr to;
        CalotMsg msg;
        unsigned tries = 1;
        Time deadline{};
    };
    struct Probe {
        bool active = false;
        PeerAddr target;
        std::uint16_t seq = 0;
        unsigned tries = 0;
        Time deadline{};
    };

    Header header();
    AckRecord record(const Event& ev, Time now, bool origin);
    void watch_predecessor(Time now);

    Time next_heartbeat_;
    std::optional<PeerAddr> watched_pred_;
    Time pred_watch_;
    std::uint16_t seq_ = 0;
    std::uint32_t origin_seq_ = 0;
    std::map<std::uint16_t, Pending> pending_;
    Probe probe_;
};

}  // namespace d1ht::calot
