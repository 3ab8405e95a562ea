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

// Randomized datagram generators shared by the unit and acceptance suites.

#include <random>
#include <stdexcept>
#include <vector>

#include "d1ht/wire.hpp"

namespace d1ht::testing {

inline constexpr std::uint16_t kPort = 7700;
inline const std::array<std::uint8_t, 4> kSource{10, 0, 0, 9};
// rho used when encoding random maintenance messages; TTLs stay below it
inline constexpr unsigned kFuzzRho = 20;

inline Event random_event(std::mt19937_64& rng) {
    Event e;
    e.kind = rng() % 2 ? EventKind::join : EventKind::leave;
    const auto port = rng() % 3 == 0 ? static_cast<std::uint16_t>(rng()) : kPort;
    e.subject = PeerAddr::from_u32(static_cast<std::uint32_t>(rng()), port);
    return e;
}

inline Datagram random_datagram(std::mt19937_64& rng) {
    const auto h = Header{PeerAddr{kSource, static_cast<std::uint16_t>(rng())}, static_cast<std::uint8_t>(rng()),
                          static_cast<std::uint16_t>(rng())};
    switch (rng() % 6) {
    case 0:
        return AckMsg{h};
    case 1:
        return HeartbeatMsg{h};
    case 2:
        return ProbeMsg{h};
    case 3:
        return ProbeReplyMsg{h};
    case 4:
        return CalotMsg{h, random_event(rng), static_cast<std::uint32_t>(rng())};
    default: {
        MaintenanceMsg m;
        m.hdr = h;
        m.ttl = static_cast<std::uint8_t>(rng() % kFuzzRho);
        const auto count = rng() % 4 == 0 ? rng() % 40 : rng() % 4;
        for (std::uint64_t i = 0; i < count; ++i)
            m.events.push_back(random_event(rng));
        return m;
    }
    }
}

/// Encodes a datagram that fits one piece.
inline std::vector<std::uint8_t> encode_one(const Datagram& d) {
    return std::visit(
        [](const auto& m) -> std::vector<std::uint8_t> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MaintenanceMsg>) {
                auto out = wire::encode_maintenance(m, kPort, kFuzzRho);
                if (out.size() != 1)
                    throw std::logic_error("maintenance message split into several pieces");
                return out.front().bytes;
            } else if constexpr (std::is_same_v<T, AckMsg>) {
                return wire::encode_ack(m).bytes;
            } else if constexpr (std::is_same_v<T, HeartbeatMsg>) {
                return wire::encode_heartbeat(m).bytes;
            } else if constexpr (std::is_same_v<T, ProbeMsg>) {
                return wire::encode_probe(m).bytes;
            } else if constexpr (std::is_same_v<T, ProbeReplyMsg>) {
                return wire::encode_probe_reply(m).bytes;
            } else {
                return wire::encode_calot(m).bytes;
            }
        },
        d);
}

inline Datagram canonical(Datagram d) {
    if (auto* m = std::get_if<MaintenanceMsg>(&d))
        *m = wire::canonical(*m, kPort);
    return d;
}

/// Encode, decode and compare; also checks the accounted size.
inline std::size_t roundtrip_failures(std::uint64_t seed, std::size_t cases) {
    std::mt19937_64 rng(seed);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        const auto d = random_datagram(rng);
        const auto bytes = encode_one(d);
        if (wire::decode(bytes, kPort, kSource) != canonical(d))
            ++failures;
        if (bytes.size() * 8 + wire::WireCosts::kNetOverheadBits != wire::accounted_bits(d, kPort))
            ++failures;
    }
    return failures;
}

/// Every strict prefix of a valid datagram must be rejected with WireError.
inline std::size_t truncation_failures(std::uint64_t seed, std::size_t cases) {
    std::mt19937_64 rng(seed);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        auto bytes = encode_one(random_datagram(rng));
        bytes.resize(rng() % bytes.size());
        try {
            (void)wire::decode(bytes, kPort, kSource);
            ++failures;
        } catch (const wire::WireError&) {
        }
    }
    return failures;
}

/// Arbitrary bytes either throw WireError or decode to a datagram that re-encodes to itself.
inline std::size_t random_bytes_failures(std::uint64_t seed, std::size_t cases) {
    std::mt19937_64 rng(seed);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        std::vector<std::uint8_t> bytes(rng() % 48);
        for (auto& b : bytes)
            b = static_cast<std::uint8_t>(rng());
        if (!bytes.empty() && rng() % 2)
            bytes[0] = static_cast<std::uint8_t>(1 + rng() % 6);
        try {
            const auto d = wire::decode(bytes, kPort, kSource);
            if (const auto* m = std::get_if<MaintenanceMsg>(&d); m && m->ttl >= kFuzzRho)
                continue;
            if (wire::decode(encode_one(d), kPort, kSource) != canonical(d))
                ++failures;
        } catch (const wire::WireError&) {
        }
    }
    return failures;
}

}  // namespace d1ht::testing
