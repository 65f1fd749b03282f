// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "pigpaxos/socket_transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

#include "pigpaxos/rng.hpp"
#include "pigpaxos/wire.hpp"

namespace pigpaxos::net {

namespace {

// Connection handshake: magic, endpoint kind, 64-bit endpoint id.
constexpr char kMagic[4] = {'P', 'G', 'X', '1'};
constexpr uint8_t kKindNode = 0;
constexpr uint8_t kKindClient = 1;
constexpr size_t kHelloSize = 13;
constexpr size_t kMaxSendQueue = 4096;  // frames buffered per dead/slow peer

TimeUs mono_now() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Addr {
    std::string host;
    uint16_t port = 0;
};

Addr parse_addr(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) throw ConfigError("address missing port: " + s);
    Addr a;
    a.host = s.substr(0, colon);
    a.port = static_cast<uint16_t>(std::stoi(s.substr(colon + 1)));
    return a;
}

int make_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

std::vector<uint8_t> hello_frame(uint8_t kind, uint64_t id) {
    std::vector<uint8_t> buf(kHelloSize);
    memcpy(buf.data(), kMagic, 4);
    buf[4] = kind;
    for (int i = 0; i < 8; ++i) buf[5 + i] = static_cast<uint8_t>(id >> (8 * (7 - i)));
    return buf;
}

// Accumulates bytes and yields complete frames.
struct FrameReader {
    std::vector<uint8_t> buf;

    // Returns one frame (length prefix included) or empty when incomplete.
    std::vector<uint8_t> next() {
        if (buf.size() < 4) return {};
        uint32_t body = (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) |
                        (uint32_t(buf[2]) << 8) | uint32_t(buf[3]);
        if (body > (1u << 26)) throw wire::MalformedFrame("frame too large");
        if (buf.size() < 4 + body) return {};
        std::vector<uint8_t> frame(buf.begin(), buf.begin() + 4 + body);
        buf.erase(buf.begin(), buf.begin() + 4 + body);
        return frame;
    }
};

struct Conn {
    int fd = -1;
    bool connected = false;   // outbound three-way done
    bool hello_done = false;  // inbound identity known
    uint8_t peer_kind = kKindNode;
    uint64_t peer_id = 0;
    FrameReader reader;
    std::deque<std::vector<uint8_t>> outbox;
    size_t out_offset = 0;
};

}  // namespace

struct SocketNode::Impl : Host {
    ClusterConfig cfg;
    NodeId id;
    std::unique_ptr<Replica> replica;

    int listen_fd = -1;
    int wake_pipe[2] = {-1, -1};
    std::atomic<bool> stopping{false};

    std::map<int, Conn> conns;                  // fd -> connection
    std::map<NodeId, int> peer_out;             // node -> outbound fd
    std::map<NodeId, TimeUs> reconnect_after;   // backoff per peer
    std::map<NodeId, TimeUs> backoff;           // current backoff per peer
    std::map<uint64_t, int> client_conn;        // client handle -> fd

    using TimerEntry = std::pair<TimeUs, uint64_t>;
    std::priority_queue<TimerEntry, std::vector<TimerEntry>, std::greater<>> timers;

    TimeUs start_time = 0;

    Impl(const ClusterConfig& c, NodeId i) : cfg(c), id(i) {
        if (cfg.peer_addrs.size() != static_cast<size_t>(cfg.n))
            throw ConfigError("socket mode needs a peers map covering every node");
        replica = std::make_unique<Replica>(cfg, id, *this);
    }

    // ---- Host ------------------------------------------------------------------

    TimeUs now() const override { return mono_now() - start_time; }

    void send(NodeId to, const Message& msg) override {
        if (to == id || to >= cfg.n) return;
        int fd = ensure_peer(to);
        if (fd < 0) return;  // dead peer, backoff pending
        enqueue(fd, wire::encode(msg));
    }

    void reply_client(uint64_t client, const ClientReply& reply) override {
        auto it = client_conn.find(client);
        if (it == client_conn.end()) return;
        enqueue(it->second, wire::encode(Message{reply}));
    }

    void set_timer(TimeUs at, uint64_t token) override { timers.emplace(at, token); }

    // ---- sockets -----------------------------------------------------------------

    void enqueue(int fd, std::vector<uint8_t> frame) {
        auto it = conns.find(fd);
        if (it == conns.end()) return;
        if (it->second.outbox.size() >= kMaxSendQueue) return;  // bounded buffering
        it->second.outbox.push_back(std::move(frame));
        try_flush(fd);
    }

    void try_flush(int fd) {
        auto it = conns.find(fd);
        if (it == conns.end()) return;
        Conn& c = it->second;
        if (!c.connected) return;
        while (!c.outbox.empty()) {
            const auto& frame = c.outbox.front();
            ssize_t n = ::send(fd, frame.data() + c.out_offset,
                               frame.size() - c.out_offset, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK) return;
                drop_conn(fd);
                return;
            }
            c.out_offset += static_cast<size_t>(n);
            if (c.out_offset == frame.size()) {
                c.outbox.pop_front();
                c.out_offset = 0;
            }
        }
    }

    int ensure_peer(NodeId to) {
        auto it = peer_out.find(to);
        if (it != peer_out.end()) return it->second;

        const TimeUs t = now();
        auto ra = reconnect_after.find(to);
        if (ra != reconnect_after.end() && t < ra->second) return -1;

        Addr addr = parse_addr(cfg.peer_addrs[to]);
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) return -1;
        make_nonblocking(fd);
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(addr.port);
        if (inet_pton(AF_INET, addr.host == "localhost" ? "127.0.0.1" : addr.host.c_str(),
                      &sa.sin_addr) != 1) {
            ::close(fd);
            return -1;
        }
        int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
        Conn c;
        c.fd = fd;
        c.connected = rc == 0;
        c.peer_kind = kKindNode;
        c.peer_id = to;
        c.hello_done = true;  // outbound: we know who we dialed
        c.outbox.push_back(hello_frame(kKindNode, id));
        conns[fd] = std::move(c);
        peer_out[to] = fd;
        if (rc == 0) try_flush(fd);
        else if (errno != EINPROGRESS) {
            drop_conn(fd);
            return -1;
        }
        return fd;
    }

    void drop_conn(int fd) {
        auto it = conns.find(fd);
        if (it == conns.end()) return;
        const Conn& c = it->second;
        if (c.peer_kind == kKindNode) {
            auto po = peer_out.find(static_cast<NodeId>(c.peer_id));
            if (po != peer_out.end() && po->second == fd) {
                peer_out.erase(po);
                TimeUs& b = backoff[static_cast<NodeId>(c.peer_id)];
                b = std::min<TimeUs>(b == 0 ? 100'000 : b * 2, 2'000'000);
                reconnect_after[static_cast<NodeId>(c.peer_id)] = now() + b;
            }
        } else {
            auto cc = client_conn.find(c.peer_id);
            if (cc != client_conn.end() && cc->second == fd) client_conn.erase(cc);
        }
        ::close(fd);
        conns.erase(it);
    }

    void accept_pending() {
        for (;;) {
            int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) return;
            make_nonblocking(fd);
            Conn c;
            c.fd = fd;
            c.connected = true;
            c.hello_done = false;
            conns[fd] = std::move(c);
        }
    }

    void read_conn(int fd) {
        auto it = conns.find(fd);
        if (it == conns.end()) return;
        Conn& c = it->second;
        char buf[16384];
        for (;;) {
            ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n > 0) {
                c.reader.buf.insert(c.reader.buf.end(), buf, buf + n);
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
            drop_conn(fd);
            return;
        }

        // Inbound identity handshake precedes framed traffic.
        if (!c.hello_done) {
            if (c.reader.buf.size() < kHelloSize) return;
            if (memcmp(c.reader.buf.data(), kMagic, 4) != 0) {
                drop_conn(fd);
                return;
            }
            c.peer_kind = c.reader.buf[4];
            uint64_t pid = 0;
            for (int i = 0; i < 8; ++i) pid = (pid << 8) | c.reader.buf[5 + i];
            c.peer_id = pid;
            c.reader.buf.erase(c.reader.buf.begin(), c.reader.buf.begin() + kHelloSize);
            c.hello_done = true;
            if (c.peer_kind == kKindClient) client_conn[pid] = fd;
        }

        for (;;) {
            std::vector<uint8_t> frame;
            try {
                frame = c.reader.next();
            } catch (const wire::MalformedFrame&) {
                drop_conn(fd);
                return;
            }
            if (frame.empty()) break;
            Message msg;
            try {
                msg = wire::decode(frame);
            } catch (const wire::MalformedFrame&) {
                continue;  // skip the bad frame, keep the connection
            }
            if (const ClientRequest* req = std::get_if<ClientRequest>(&msg)) {
                client_conn[req->command.client_id] = fd;
                replica->on_client_request(req->command.client_id, *req);
            } else if (c.peer_kind == kKindNode) {
                replica->on_message(static_cast<NodeId>(c.peer_id), msg);
            }
            if (conns.find(fd) == conns.end()) return;  // handler dropped us
        }
    }

    void run_timers() {
        const TimeUs t = now();
        while (!timers.empty() && timers.top().first <= t) {
            uint64_t token = timers.top().second;
            timers.pop();
            replica->on_timer(token);
        }
    }

    void serve() {
        Addr addr = parse_addr(cfg.peer_addrs[id]);
        listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
        int one = 1;
        setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(addr.port);
        sa.sin_addr.s_addr = htonl(INADDR_ANY);
        if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
            ::close(listen_fd);
            throw ConfigError("cannot bind " + cfg.peer_addrs[id] + ": " +
                              strerror(errno) + " (node id already running?)");
        }
        if (::listen(listen_fd, 64) != 0) {
            ::close(listen_fd);
            throw ConfigError("listen failed on " + cfg.peer_addrs[id]);
        }
        make_nonblocking(listen_fd);
        if (pipe(wake_pipe) != 0) throw ConfigError("pipe failed");
        make_nonblocking(wake_pipe[0]);

        start_time = mono_now();
        replica->start();

        std::vector<pollfd> fds;
        while (!stopping.load(std::memory_order_relaxed)) {
            fds.clear();
            fds.push_back(pollfd{listen_fd, POLLIN, 0});
            fds.push_back(pollfd{wake_pipe[0], POLLIN, 0});
            for (auto& [fd, c] : conns) {
                short ev = POLLIN;
                if (!c.connected || !c.outbox.empty()) ev |= POLLOUT;
                fds.push_back(pollfd{fd, ev, 0});
            }

            TimeUs timeout_us = 50'000;
            if (!timers.empty())
                timeout_us = std::clamp<TimeUs>(timers.top().first - now(), 0, 50'000);
            ::poll(fds.data(), fds.size(), static_cast<int>(timeout_us / 1000 + 1));

            if (fds[0].revents & POLLIN) accept_pending();
            if (fds[1].revents & POLLIN) {
                char drain[64];
                while (::read(wake_pipe[0], drain, sizeof drain) > 0) {}
            }
            for (size_t i = 2; i < fds.size(); ++i) {
                const int fd = fds[i].fd;
                auto it = conns.find(fd);
                if (it == conns.end()) continue;
                if (fds[i].revents & (POLLERR | POLLHUP)) {
                    drop_conn(fd);
                    continue;
                }
                if (fds[i].revents & POLLOUT) {
                    if (!it->second.connected) {
                        int err = 0;
                        socklen_t len = sizeof err;
                        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                        if (err != 0) {
                            drop_conn(fd);
                            continue;
                        }
                        it->second.connected = true;
                        backoff[static_cast<NodeId>(it->second.peer_id)] = 0;
                    }
                    try_flush(fd);
                }
                if (conns.count(fd) && (fds[i].revents & POLLIN)) read_conn(fd);
            }
            run_timers();
        }

        ::close(listen_fd);
        for (auto& [fd, c] : conns) ::close(fd);
        conns.clear();
        ::close(wake_pipe[0]);
        ::close(wake_pipe[1]);
    }
};

SocketNode::SocketNode(const ClusterConfig& cfg, NodeId id)
    : impl_(std::make_unique<Impl>(cfg, id)) {}

SocketNode::~SocketNode() = default;

void SocketNode::run() { impl_->serve(); }

void SocketNode::stop() {
    impl_->stopping.store(true);
    if (impl_->wake_pipe[1] >= 0) {
        char b = 1;
        ssize_t rc = ::write(impl_->wake_pipe[1], &b, 1);
        (void)rc;
    }
}

const Replica& SocketNode::replica() const { return *impl_->replica; }

// ---- closed-loop TCP clients -----------------------------------------------------

namespace {

struct BlockingClient {
    ClusterConfig cfg;
    sim::WorkloadSpec workload;
    uint64_t client_id;
    std::mt19937_64 rng;
    NodeId target = 0;
    int fd = -1;
    FrameReader reader;

    std::vector<TimeUs> latencies;
    std::map<int64_t, int64_t> windows;
    int64_t completed = 0;

    bool connect_target() {
        close_fd();
        Addr addr = parse_addr(cfg.peer_addrs[target]);
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        timeval tv{0, 200'000};
        setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_port = htons(addr.port);
        inet_pton(AF_INET, addr.host == "localhost" ? "127.0.0.1" : addr.host.c_str(),
                  &sa.sin_addr);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
            close_fd();
            return false;
        }
        auto hello = hello_frame(kKindClient, client_id);
        return ::send(fd, hello.data(), hello.size(), MSG_NOSIGNAL) ==
               static_cast<ssize_t>(hello.size());
    }

    void close_fd() {
        if (fd >= 0) ::close(fd);
        fd = -1;
        reader.buf.clear();
    }

    void rotate() { target = static_cast<NodeId>((target + 1) % cfg.n); }

    bool send_request(const Command& cmd) {
        if (fd < 0 && !connect_target()) return false;
        auto frame = wire::encode(Message{ClientRequest{cmd}});
        if (::send(fd, frame.data(), frame.size(), MSG_NOSIGNAL) !=
            static_cast<ssize_t>(frame.size())) {
            close_fd();
            return false;
        }
        return true;
    }

    // Blocks until a reply for (client_id, seq) or timeout/disconnect.
    std::optional<ClientReply> await_reply(uint64_t seq, TimeUs deadline) {
        while (mono_now() < deadline) {
            std::vector<uint8_t> frame;
            try {
                frame = reader.next();
            } catch (const wire::MalformedFrame&) {
                close_fd();
                return std::nullopt;
            }
            if (!frame.empty()) {
                try {
                    Message msg = wire::decode(frame);
                    if (const ClientReply* r = std::get_if<ClientReply>(&msg))
                        if (r->request_seq == seq) return *r;
                } catch (const wire::MalformedFrame&) {
                }
                continue;
            }
            char buf[8192];
            ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n > 0) {
                reader.buf.insert(reader.buf.end(), buf, buf + n);
            } else if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) {
                close_fd();
                return std::nullopt;
            }
        }
        return std::nullopt;
    }

    void run(TimeUs start, std::atomic<int64_t>* issued, int64_t quota) {
        uint64_t seq = 0;
        const TimeUs deadline_run =
            workload.duration_us > 0 ? start + workload.duration_us : INT64_MAX;
        while (mono_now() < deadline_run) {
            if (quota > 0 && issued->fetch_add(1) >= quota) break;
            ++seq;
            Command cmd;
            cmd.client_id = client_id;
            cmd.request_seq = seq;
            char keybuf[16];
            snprintf(keybuf, sizeof keybuf, "k%06llu",
                     static_cast<unsigned long long>(
                         rng_below(rng, static_cast<uint64_t>(workload.key_space))));
            cmd.key = keybuf;
            if (rng_unit(rng) < workload.read_fraction) {
                cmd.op = OpType::Get;
            } else {
                cmd.op = OpType::Put;
                cmd.value.assign(std::max(8, workload.payload_bytes), 'v');
            }

            const TimeUs issue = mono_now();
            for (;;) {
                if (mono_now() >= deadline_run) return;
                if (!send_request(cmd)) {
                    rotate();
                    std::this_thread::sleep_for(std::chrono::milliseconds(50));
                    continue;
                }
                auto reply = await_reply(seq, mono_now() + workload.client_timeout_us);
                if (!reply) {
                    rotate();
                    continue;
                }
                if (reply->status == ReplyStatus::NotLeader) {
                    target = reply->leader_hint != kNoNode && reply->leader_hint < cfg.n
                                 ? reply->leader_hint
                                 : static_cast<NodeId>((target + 1) % cfg.n);
                    close_fd();
                    continue;
                }
                if (reply->status == ReplyStatus::Ok) {
                    const TimeUs done = mono_now();
                    latencies.push_back(done - issue);
                    windows[(done - start) / 1'000'000]++;
                    ++completed;
                }
                break;
            }
        }
        close_fd();
    }
};

}  // namespace

bench::MetricsReport run_socket_clients(const ClusterConfig& cfg,
                                        const sim::WorkloadSpec& workload,
                                        uint64_t client_id_base) {
    workload.validate();
    std::vector<std::unique_ptr<BlockingClient>> clients;
    for (int k = 0; k < workload.client_count; ++k) {
        auto c = std::make_unique<BlockingClient>();
        c->cfg = cfg;
        c->workload = workload;
        c->client_id = client_id_base + k;
        c->rng.seed(derive_seed(cfg.seed, 0xC000 + k));
        c->target = cfg.bootstrap_leader != kNoNode ? cfg.bootstrap_leader : 0;
        clients.push_back(std::move(c));
    }

    std::atomic<int64_t> issued{0};
    const TimeUs start = mono_now();
    std::vector<std::thread> threads;
    threads.reserve(clients.size());
    for (auto& c : clients)
        threads.emplace_back(
            [&issued, &c, start, quota = workload.total_commands]() {
                c->run(start, &issued, quota);
            });
    for (auto& t : threads) t.join();
    const TimeUs end = mono_now();

    bench::MetricsReport m;
    std::vector<TimeUs> all;
    for (auto& c : clients) {
        m.total_ops += c->completed;
        for (auto [sec, n] : c->windows) m.windows[sec] += n;
        all.insert(all.end(), c->latencies.begin(), c->latencies.end());
    }
    std::sort(all.begin(), all.end());
    auto pct = [&all](double p) -> TimeUs {
        if (all.empty()) return 0;
        size_t rank = static_cast<size_t>(p * (all.size() - 1) + 0.5);
        return all[std::min(rank, all.size() - 1)];
    };
    m.median_us = pct(0.50);
    m.p25_us = pct(0.25);
    m.p75_us = pct(0.75);
    m.p99_us = pct(0.99);
    const double secs = std::max<double>(1e-6, (end - start) / 1e6);
    m.throughput = m.total_ops / secs;
    return m;
}

}  // namespace pigpaxos::net
