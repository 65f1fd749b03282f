// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/wire.hpp"

#include <cstring>

namespace pigpaxos::wire {

namespace {

class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v >> 8));
        buf_.push_back(static_cast<uint8_t>(v));
    }
    void u32(uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
    }
    void u64(uint64_t v) {
        for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
    }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }

    void ballot(const Ballot& b) {
        u32(b.round);
        u16(b.proposer);
    }
    void bytes(const std::string& s) {
        if (s.size() > 0xFFFF) throw MalformedFrame("byte string too long to encode");
        u16(static_cast<uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void node_list(const std::vector<NodeId>& ids) {
        u16(static_cast<uint16_t>(ids.size()));
        for (NodeId id : ids) u16(id);
    }
    void opt_ballot(const std::optional<Ballot>& b) {
        u8(b ? 1 : 0);
        if (b) ballot(*b);
    }
    void pig_id(const PigMsgId& id) {
        u16(id.initiator);
        u64(id.sequence);
    }
    void opt_pig(const std::optional<PigMsgId>& id) {
        u8(id ? 1 : 0);
        if (id) pig_id(*id);
    }
    void command(const Command& c) {
        u8(static_cast<uint8_t>(c.op));
        bytes(c.key);
        bytes(c.value);
        u64(c.client_id);
        u64(c.request_seq);
    }
    void entries(const std::vector<RecoveredEntry>& es) {
        u32(static_cast<uint32_t>(es.size()));
        for (const auto& e : es) {
            i64(e.slot);
            ballot(e.ballot);
            u8(e.committed ? 1 : 0);
            command(e.command);
        }
    }

    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

class Reader {
public:
    Reader(const uint8_t* data, size_t len) : data_(data), len_(len) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = (static_cast<uint16_t>(data_[pos_]) << 8) | data_[pos_ + 1];
        pos_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 8;
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }

    Ballot ballot() {
        Ballot b;
        b.round = u32();
        b.proposer = u16();
        return b;
    }
    std::string bytes() {
        uint16_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<NodeId> node_list() {
        uint16_t n = u16();
        std::vector<NodeId> ids(n);
        for (auto& id : ids) id = u16();
        return ids;
    }
    std::optional<Ballot> opt_ballot() {
        if (flag()) return ballot();
        return std::nullopt;
    }
    PigMsgId pig_id() {
        PigMsgId id;
        id.initiator = u16();
        id.sequence = u64();
        return id;
    }
    std::optional<PigMsgId> opt_pig() {
        if (flag()) return pig_id();
        return std::nullopt;
    }
    Command command() {
        Command c;
        uint8_t op = u8();
        if (op > 2) throw MalformedFrame("unknown command op");
        c.op = static_cast<OpType>(op);
        c.key = bytes();
        c.value = bytes();
        c.client_id = u64();
        c.request_seq = u64();
        return c;
    }
    std::vector<RecoveredEntry> entries() {
        uint32_t n = u32();
        if (n > len_)  // cheap sanity bound: each entry is > 1 byte
            throw MalformedFrame("entry count exceeds frame size");
        std::vector<RecoveredEntry> es(n);
        for (auto& e : es) {
            e.slot = i64();
            e.ballot = ballot();
            e.committed = flag();
            e.command = command();
        }
        return es;
    }

    bool flag() {
        uint8_t v = u8();
        if (v > 1) throw MalformedFrame("presence flag must be 0 or 1");
        return v == 1;
    }
    void expect_end() const {
        if (pos_ != len_) throw MalformedFrame("trailing bytes after message body");
    }

private:
    void need(size_t n) const {
        if (pos_ + n > len_) throw MalformedFrame("truncated frame");
    }
    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
};

void encode_body(Writer& w, const Message& msg) {
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, P1a>) {
                w.ballot(m.ballot);
            } else if constexpr (std::is_same_v<T, P1b>) {
                w.ballot(m.ballot);
                w.u16(m.voter);
                w.opt_pig(m.pig);
                w.entries(m.accepted);
            } else if constexpr (std::is_same_v<T, P2a>) {
                w.ballot(m.ballot);
                w.i64(m.slot);
                w.i64(m.commit_up_to);
                w.command(m.command);
            } else if constexpr (std::is_same_v<T, P2b>) {
                w.ballot(m.ballot);
                w.i64(m.slot);
                w.u16(m.voter);
                w.opt_ballot(m.reject_ballot);
                w.opt_pig(m.pig);
            } else if constexpr (std::is_same_v<T, P3>) {
                w.i64(m.slot);
                w.command(m.command);
            } else if constexpr (std::is_same_v<T, PigEnvelope>) {
                w.pig_id(m.pig_id);
                w.u16(m.relay);
                w.node_list(m.group);
                w.u32(static_cast<uint32_t>(m.payload.size()));
                for (uint8_t b : m.payload) w.u8(b);
            } else if constexpr (std::is_same_v<T, AggregatedReply>) {
                w.pig_id(m.pig_id);
                w.ballot(m.ballot);
                w.i64(m.slot);
                w.u16(m.ack_count);
                w.node_list(m.missing_voters);
                w.opt_ballot(m.reject_ballot);
                w.entries(m.recovered);
            } else if constexpr (std::is_same_v<T, ClientRequest>) {
                w.command(m.command);
            } else if constexpr (std::is_same_v<T, ClientReply>) {
                w.u64(m.client_id);
                w.u64(m.request_seq);
                w.u8(static_cast<uint8_t>(m.status));
                w.u8(m.found ? 1 : 0);
                w.bytes(m.value);
                w.u16(m.leader_hint);
            }
        },
        msg);
}

}  // namespace

MsgType type_of(const Message& m) {
    return static_cast<MsgType>(m.index() + 1);
}

const char* type_name(MsgType t) {
    switch (t) {
        case MsgType::P1a: return "P1a";
        case MsgType::P1b: return "P1b";
        case MsgType::P2a: return "P2a";
        case MsgType::P2b: return "P2b";
        case MsgType::P3: return "P3";
        case MsgType::PigEnvelope: return "PigEnvelope";
        case MsgType::AggregatedReply: return "AggregatedReply";
        case MsgType::ClientRequest: return "ClientRequest";
        case MsgType::ClientReply: return "ClientReply";
    }
    return "unknown";
}

std::vector<uint8_t> encode(const Message& msg) {
    Writer body;
    body.u8(static_cast<uint8_t>(type_of(msg)));
    encode_body(body, msg);
    std::vector<uint8_t> inner = body.take();

    Writer framed;
    framed.u32(static_cast<uint32_t>(inner.size()));
    std::vector<uint8_t> out = framed.take();
    out.insert(out.end(), inner.begin(), inner.end());
    return out;
}

size_t encoded_size(const Message& msg) {
    // Message sizes are small; encoding to measure keeps one source of truth.
    return encode(msg).size();
}

Message decode(const uint8_t* data, size_t len) {
    Reader header(data, len);
    uint32_t body_len = header.u32();
    if (body_len == 0) throw MalformedFrame("empty frame body");
    if (body_len + 4 != len) throw MalformedFrame("frame length mismatch");

    Reader r(data + 4, body_len);
    uint8_t t = r.u8();
    Message msg;
    switch (static_cast<MsgType>(t)) {
        case MsgType::P1a: {
            P1a m;
            m.ballot = r.ballot();
            msg = m;
            break;
        }
        case MsgType::P1b: {
            P1b m;
            m.ballot = r.ballot();
            m.voter = r.u16();
            m.pig = r.opt_pig();
            m.accepted = r.entries();
            msg = m;
            break;
        }
        case MsgType::P2a: {
            P2a m;
            m.ballot = r.ballot();
            m.slot = r.i64();
            m.commit_up_to = r.i64();
            m.command = r.command();
            msg = m;
            break;
        }
        case MsgType::P2b: {
            P2b m;
            m.ballot = r.ballot();
            m.slot = r.i64();
            m.voter = r.u16();
            m.reject_ballot = r.opt_ballot();
            m.pig = r.opt_pig();
            msg = m;
            break;
        }
        case MsgType::P3: {
            P3 m;
            m.slot = r.i64();
            m.command = r.command();
            msg = m;
            break;
        }
        case MsgType::PigEnvelope: {
            PigEnvelope m;
            m.pig_id = r.pig_id();
            m.relay = r.u16();
            m.group = r.node_list();
            uint32_t n = r.u32();
            m.payload.reserve(n);
            for (uint32_t i = 0; i < n; ++i) m.payload.push_back(r.u8());
            msg = m;
            break;
        }
        case MsgType::AggregatedReply: {
            AggregatedReply m;
            m.pig_id = r.pig_id();
            m.ballot = r.ballot();
            m.slot = r.i64();
            m.ack_count = r.u16();
            m.missing_voters = r.node_list();
            m.reject_ballot = r.opt_ballot();
            m.recovered = r.entries();
            msg = m;
            break;
        }
        case MsgType::ClientRequest: {
            ClientRequest m;
            m.command = r.command();
            msg = m;
            break;
        }
        case MsgType::ClientReply: {
            ClientReply m;
            m.client_id = r.u64();
            m.request_seq = r.u64();
            uint8_t st = r.u8();
            if (st > 2) throw MalformedFrame("unknown reply status");
            m.status = static_cast<ReplyStatus>(st);
            m.found = r.flag();
            m.value = r.bytes();
            m.leader_hint = r.u16();
            msg = m;
            break;
        }
        default:
            throw MalformedFrame("unknown message type " + std::to_string(t));
    }
    r.expect_end();
    return msg;
}

Message decode(const std::vector<uint8_t>& frame) {
    return decode(frame.data(), frame.size());
}

}  // namespace pigpaxos::wire
