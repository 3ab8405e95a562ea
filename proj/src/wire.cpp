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

#include "d1ht/wire.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace d1ht::wire {

namespace {

constexpr std::size_t kCommonBytes = 6;  // Type, SeqNo, PortNo, SystemID

enum EventClass { kJoinDefault = 0, kLeaveDefault = 1, kJoinAlt = 2, kLeaveAlt = 3 };

EventClass class_of(const Event& e, std::uint16_t default_port) {
    const bool def = e.subject.default_port(default_port);
    if (e.kind == EventKind::join)
        return def ? kJoinDefault : kJoinAlt;
    return def ? kLeaveDefault : kLeaveAlt;
}

class Writer {
public:
    explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void ip(const std::array<std::uint8_t, 4>& a) { buf_.insert(buf_.end(), a.begin(), a.end()); }
    void common(MsgType type, const Header& h) {
        u8(static_cast<std::uint8_t>(type));
        u16(h.seq);
        u16(h.sender.port);
        u8(h.system_id);
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    std::array<std::uint8_t, 4> ip() {
        need(4);
        std::array<std::uint8_t, 4> a{b_[pos_], b_[pos_ + 1], b_[pos_ + 2], b_[pos_ + 3]};
        pos_ += 4;
        return a;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n)
            throw WireError("truncated datagram: need " + std::to_string(n) + " more byte(s) at offset " +
                            std::to_string(pos_));
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

EncodedDatagram finish(std::vector<std::uint8_t> bytes) {
    EncodedDatagram d;
    d.accounted_bits = static_cast<std::uint32_t>(bytes.size() * 8 + WireCosts::kNetOverheadBits);
    d.bytes = std::move(bytes);
    return d;
}

EncodedDatagram encode_short(MsgType type, const Header& h) {
    Writer w(WireCosts::kAckPayload);
    w.common(type, h);
    w.u16(0);
    return finish(w.take());
}

std::array<std::vector<const Event*>, 4> group(const MaintenanceMsg& msg, std::uint16_t default_port) {
    std::array<std::vector<const Event*>, 4> groups;
    for (const auto& e : msg.events)
        groups[class_of(e, default_port)].push_back(&e);
    return groups;
}

}  // namespace

std::vector<EncodedDatagram> encode_maintenance(const MaintenanceMsg& msg, std::uint16_t default_port, unsigned rho) {
    if (msg.flags == 0 && msg.ttl >= rho)
        throw WireError("TTL " + std::to_string(msg.ttl) + " out of range for rho " + std::to_string(rho));
    const auto groups = group(msg, default_port);
    std::size_t pieces = 1;
    for (const auto& g : groups)
        pieces = std::max(pieces, (g.size() + kMaxClassCount - 1) / kMaxClassCount);

    std::vector<EncodedDatagram> out;
    out.reserve(pieces);
    for (std::size_t p = 0; p < pieces; ++p) {
        std::array<std::size_t, 4> lo{}, hi{};
        for (int c = 0; c < 4; ++c) {
            lo[c] = std::min(groups[c].size(), p * kMaxClassCount);
            hi[c] = std::min(groups[c].size(), (p + 1) * kMaxClassCount);
        }
        Header h = msg.hdr;
        h.seq = static_cast<std::uint16_t>(msg.hdr.seq + p);
        Writer w(WireCosts::kMaintenanceFixedPayload + 6 * msg.events.size());
        w.common(MsgType::maintenance, h);
        w.u8(msg.ttl);
        w.u8(msg.flags);
        for (int c = 0; c < 4; ++c)
            w.u8(static_cast<std::uint8_t>(hi[c] - lo[c]));
        for (int c = 0; c < 4; ++c) {
            for (std::size_t i = lo[c]; i < hi[c]; ++i) {
                const auto& s = groups[c][i]->subject;
                w.ip(s.ip);
                if (c >= kJoinAlt)
                    w.u16(s.port);
            }
        }
        out.push_back(finish(w.take()));
    }
    return out;
}

EncodedDatagram encode_ack(const AckMsg& msg) { return encode_short(MsgType::ack, msg.hdr); }
EncodedDatagram encode_heartbeat(const HeartbeatMsg& msg) { return encode_short(MsgType::heartbeat, msg.hdr); }
EncodedDatagram encode_probe(const ProbeMsg& msg) { return encode_short(MsgType::probe, msg.hdr); }
EncodedDatagram encode_probe_reply(const ProbeReplyMsg& msg) { return encode_short(MsgType::probe_reply, msg.hdr); }

EncodedDatagram encode_calot(const CalotMsg& msg) {
    Writer w(WireCosts::kCalotPayload);
    w.common(MsgType::calot, msg.hdr);
    w.u8(static_cast<std::uint8_t>(msg.event.kind));
    w.u8(0);
    w.ip(msg.event.subject.ip);
    w.u16(msg.event.subject.port);
    w.u32(msg.origin_seq);
    w.u16(0);
    return finish(w.take());
}

EncodedDatagram encode_calot(const std::vector<Event>& events, const Header& hdr, std::uint32_t origin_seq) {
    if (events.size() != 1)
        throw std::invalid_argument("a 1h-Calot message carries exactly one event, got " +
                                    std::to_string(events.size()));
    return encode_calot(CalotMsg{hdr, events.front(), origin_seq});
}

Datagram decode(std::span<const std::uint8_t> bytes, std::uint16_t default_port, std::array<std::uint8_t, 4> source_ip) {
    Reader r(bytes);
    const auto type = r.u8();
    Header h;
    h.seq = r.u16();
    h.sender.port = r.u16();
    h.sender.ip = source_ip;
    h.system_id = r.u8();

    auto short_tail = [&] {
        r.skip(2);
        if (r.remaining() != 0)
            throw WireError("trailing bytes after short datagram");
    };

    switch (static_cast<MsgType>(type)) {
    case MsgType::maintenance: {
        MaintenanceMsg m;
        m.hdr = h;
        m.ttl = r.u8();
        m.flags = r.u8();
        std::array<std::size_t, 4> counts{};
        for (auto& c : counts)
            c = r.u8();
        const std::size_t expected = 4 * (counts[0] + counts[1]) + 6 * (counts[2] + counts[3]);
        if (r.remaining() < expected)
            throw WireError("truncated maintenance datagram: " + std::to_string(r.remaining()) + " of " +
                            std::to_string(expected) + " event bytes");
        if (r.remaining() > expected)
            throw WireError("trailing bytes after maintenance datagram");
        for (int c = 0; c < 4; ++c) {
            for (std::size_t i = 0; i < counts[c]; ++i) {
                Event e;
                e.kind = (c == kJoinDefault || c == kJoinAlt) ? EventKind::join : EventKind::leave;
                e.subject.ip = r.ip();
                e.subject.port = c >= kJoinAlt ? r.u16() : default_port;
                m.events.push_back(e);
            }
        }
        return m;
    }
    case MsgType::ack:
        short_tail();
        return AckMsg{h};
    case MsgType::heartbeat:
        short_tail();
        return HeartbeatMsg{h};
    case MsgType::probe:
        short_tail();
        return ProbeMsg{h};
    case MsgType::probe_reply:
        short_tail();
        return ProbeReplyMsg{h};
    case MsgType::calot: {
        CalotMsg m;
        m.hdr = h;
        const auto kind = r.u8();
        if (kind > 1)
            throw WireError("unknown event kind " + std::to_string(kind));
        m.event.kind = static_cast<EventKind>(kind);
        r.skip(1);
        m.event.subject.ip = r.ip();
        m.event.subject.port = r.u16();
        m.origin_seq = r.u32();
        r.skip(2);
        if (r.remaining() != 0)
            throw WireError("trailing bytes after calot datagram");
        return m;
    }
    }
    throw WireError("unknown datagram type " + std::to_string(type));
}

MaintenanceMsg canonical(MaintenanceMsg msg, std::uint16_t default_port) {
    std::stable_sort(msg.events.begin(), msg.events.end(), [&](const Event& a, const Event& b) {
        return class_of(a, default_port) < class_of(b, default_port);
    });
    return msg;
}

std::uint64_t accounted_bits(const Datagram& d, std::uint16_t default_port) {
    if (const auto* m = std::get_if<MaintenanceMsg>(&d)) {
        std::array<std::size_t, 4> counts{};
        for (const auto& e : m->events)
            ++counts[class_of(e, default_port)];
        std::size_t pieces = 1;
        for (auto c : counts)
            pieces = std::max(pieces, (c + kMaxClassCount - 1) / kMaxClassCount);
        return std::uint64_t{pieces} * WireCosts::v_m + std::uint64_t{WireCosts::m_default} * (counts[0] + counts[1]) +
               std::uint64_t{WireCosts::m_alt} * (counts[2] + counts[3]);
    }
    if (std::holds_alternative<CalotMsg>(d))
        return WireCosts::v_c;
    if (std::holds_alternative<AckMsg>(d) || std::holds_alternative<ProbeReplyMsg>(d))
        return WireCosts::v_a;
    return WireCosts::v_h;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
    std::vector<std::uint8_t> out;
    int pending = -1;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch)))
            continue;
        int v;
        if (ch >= '0' && ch <= '9')
            v = ch - '0';
        else if (ch >= 'a' && ch <= 'f')
            v = ch - 'a' + 10;
        else if (ch >= 'A' && ch <= 'F')
            v = ch - 'A' + 10;
        else
            throw WireError(std::string("invalid hex character '") + ch + "'");
        if (pending < 0) {
            pending = v;
        } else {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
            pending = -1;
        }
    }
    if (pending >= 0)
        throw WireError("odd number of hex digits");
    return out;
}

std::string describe(const Datagram& d, std::uint16_t default_port) {
    std::ostringstream os;
    const auto& h = header_of(d);
    auto common = [&](const char* type) {
        os << "type      " << type << "\n"
           << "seq       " << h.seq << "\n"
           << "port      " << h.sender.port << "\n"
           << "system_id " << unsigned{h.system_id} << "\n";
    };
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MaintenanceMsg>) {
                common("maintenance");
                os << "ttl       " << unsigned{m.ttl} << "\n"
                   << "flags     0x" << std::hex << unsigned{m.flags} << std::dec << "\n"
                   << "events    " << m.events.size() << "\n";
                for (const auto& e : m.events) {
                    os << "  " << (e.kind == EventKind::join ? "join  " : "leave ");
                    if (e.subject.default_port(default_port))
                        os << unsigned{e.subject.ip[0]} << '.' << unsigned{e.subject.ip[1]} << '.'
                           << unsigned{e.subject.ip[2]} << '.' << unsigned{e.subject.ip[3]} << " (default port)\n";
                    else
                        os << e.subject.str() << "\n";
                }
            } else if constexpr (std::is_same_v<T, AckMsg>) {
                common("ack");
            } else if constexpr (std::is_same_v<T, HeartbeatMsg>) {
                common("heartbeat");
            } else if constexpr (std::is_same_v<T, ProbeMsg>) {
                common("probe");
            } else if constexpr (std::is_same_v<T, ProbeReplyMsg>) {
                common("probe_reply");
            } else {
                common("calot");
                os << "event     " << (m.event.kind == EventKind::join ? "join " : "leave ") << m.event.subject.str()
                   << "\n"
                   << "origin    " << m.origin_seq << "\n";
            }
        },
        d);
    os << "accounted " << accounted_bits(d, default_port) << " bits\n";
    return os.str();
}

}  // namespace d1ht::wire
