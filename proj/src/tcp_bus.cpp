#include "triad/tcp_bus.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace triad {

std::string frame_payload(std::string_view payload) {
    const std::uint32_t size = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((size >> 24) & 0xff));
    out.push_back(static_cast<char>((size >> 16) & 0xff));
    out.push_back(static_cast<char>((size >> 8) & 0xff));
    out.push_back(static_cast<char>(size & 0xff));
    out.append(payload);
    return out;
}

std::string frame(const Envelope& envelope) { return frame_payload(serialize(envelope)); }

void FrameReader::feed(const char* data, std::size_t size) { buffer_.append(data, size); }

std::optional<std::string> FrameReader::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto* b = reinterpret_cast<const unsigned char*>(buffer_.data());
    const std::size_t length = (std::size_t(b[0]) << 24) | (std::size_t(b[1]) << 16) |
                               (std::size_t(b[2]) << 8) | std::size_t(b[3]);
    if (length > kMaxFrame) throw TransportError("frame length exceeds limit");
    if (buffer_.size() < 4 + length) return std::nullopt;
    std::string payload = buffer_.substr(4, length);
    buffer_.erase(0, 4 + length);
    return payload;
}

namespace {

void write_all(int fd, const std::string& bytes) {
    std::size_t written = 0;
    while (written < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + written, bytes.size() - written, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos)
        throw TransportError("address '" + address + "' is not host:port");
    const std::string host = address.substr(0, colon);
    const int port = std::stoi(address.substr(colon + 1));
    if (port <= 0 || port > 65535) throw TransportError("bad port in '" + address + "'");
    return {host, static_cast<std::uint16_t>(port)};
}

int connect_to(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad host '" + host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw TransportError("connect to " + host + ":" + std::to_string(port) + " failed: " +
                             std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

}  // namespace

TcpBus::TcpBus(TcpBusConfig config) : config_(std::move(config)) {}

TcpBus::~TcpBus() { stop(); }

void TcpBus::start() {
    if (running_.exchange(true)) return;
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config_.listen_port);
    if (::inet_pton(AF_INET, config_.listen_host.c_str(), &addr.sin_addr) != 1)
        throw TransportError("bad listen host '" + config_.listen_host + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw TransportError(std::string("bind failed: ") + std::strerror(errno));
    if (::listen(listen_fd_, 16) != 0)
        throw TransportError(std::string("listen failed: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpBus::stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        std::lock_guard lock(peers_mutex_);
        for (auto& [id, fd] : peer_fds_) ::close(fd);
        peer_fds_.clear();
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard lock(readers_mutex_);
        for (int fd : reader_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& reader : readers_) {
        if (reader.joinable()) reader.join();
    }
    readers_.clear();
    {
        std::lock_guard lock(readers_mutex_);
        for (int fd : reader_fds_) ::close(fd);
        reader_fds_.clear();
    }
}

void TcpBus::accept_loop() {
    while (running_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (running_.load() && errno == EINTR) continue;
            return;
        }
        {
            std::lock_guard lock(readers_mutex_);
            reader_fds_.push_back(fd);
        }
        readers_.emplace_back([this, fd] { reader_loop(fd); });
    }
}

void TcpBus::reader_loop(int fd) {
    FrameReader reader;
    char chunk[4096];
    while (true) {
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        reader.feed(chunk, static_cast<std::size_t>(n));
        try {
            while (auto payload = reader.next()) enqueue(std::move(*payload));
        } catch (const TransportError&) {
            break;  // poisoned stream; drop the connection
        }
    }
    // The fd stays open until stop() closes it; reader threads never race
    // the process-wide fd table.
}

void TcpBus::enqueue(std::string payload) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(std::move(payload));
}

void TcpBus::register_agent(Agent& agent) {
    const AgentId id = agent.id();
    if (agents_.count(id))
        throw DuplicateAgentError("agent " + id.str() + " is already registered");
    agents_[id] = &agent;
    lamport_.fetch_add(1);
    agent.on_start(*this);
}

void TcpBus::unregister_agent(const AgentId& agent) { agents_.erase(agent); }

std::string TcpBus::next_message_id(const AgentId& sender) {
    return sender.str() + ":" + std::to_string(++id_counters_[sender]);
}

int TcpBus::peer_socket(const AgentId& recipient, const std::string& address) {
    std::lock_guard lock(peers_mutex_);
    auto it = peer_fds_.find(recipient);
    if (it != peer_fds_.end()) return it->second;
    const auto [host, port] = split_address(address);
    const int fd = connect_to(host, port);
    peer_fds_[recipient] = fd;
    return fd;
}

void TcpBus::send(const Envelope& envelope) {
    const std::string payload = serialize(envelope);
    lamport_.fetch_add(1);

    if (agents_.count(envelope.header.recipient)) {
        enqueue(payload);  // loopback still flows through the inbox for FIFO
        return;
    }
    auto peer = config_.peers.find(envelope.header.recipient);
    if (peer == config_.peers.end())
        throw TransportError("no route to agent " + envelope.header.recipient.str());
    const std::string framed = frame_payload(payload);
    try {
        write_all(peer_socket(envelope.header.recipient, peer->second), framed);
    } catch (const TransportError&) {
        // One reconnect-and-retry; receiver-side dedup absorbs any duplicate.
        {
            std::lock_guard lock(peers_mutex_);
            auto it = peer_fds_.find(envelope.header.recipient);
            if (it != peer_fds_.end()) {
                ::close(it->second);
                peer_fds_.erase(it);
            }
        }
        write_all(peer_socket(envelope.header.recipient, peer->second), framed);
    }
}

void TcpBus::schedule_timer(const AgentId& agent, const std::string& timer_id, Tick delay) {
    PendingTimer timer;
    timer.due = std::chrono::steady_clock::now() +
                std::chrono::milliseconds(std::max<Tick>(delay, 1));
    timer.agent = agent;
    timer.timer_id = timer_id;
    std::lock_guard lock(timers_mutex_);
    timers_.push_back(std::move(timer));
}

void TcpBus::advance(Tick) {
    throw ModeError("advance() is only available on the simulated bus");
}

std::size_t TcpBus::poll() {
    std::size_t handled = 0;

    std::deque<std::string> batch;
    {
        std::lock_guard lock(inbox_mutex_);
        batch.swap(inbox_);
    }
    for (const std::string& payload : batch) {
        Envelope envelope;
        try {
            envelope = deserialize(payload);
        } catch (const Error&) {
            continue;  // unparseable frame; nothing to route
        }
        const Tick seen_tick = envelope.header.timestamp;
        Tick current = lamport_.load();
        while (current < seen_tick + 1 &&
               !lamport_.compare_exchange_weak(current, seen_tick + 1)) {
        }
        lamport_.fetch_add(1);
        auto it = agents_.find(envelope.header.recipient);
        if (it == agents_.end()) continue;
        if (!seen_[envelope.header.recipient].insert(envelope.header.message_id).second)
            continue;
        it->second->on_envelope(*this, envelope);
        ++handled;
    }

    std::vector<PendingTimer> due;
    {
        const auto now_tp = std::chrono::steady_clock::now();
        std::lock_guard lock(timers_mutex_);
        auto split = std::stable_partition(timers_.begin(), timers_.end(),
                                           [&](const PendingTimer& t) { return t.due > now_tp; });
        due.assign(std::make_move_iterator(split), std::make_move_iterator(timers_.end()));
        timers_.erase(split, timers_.end());
    }
    for (const PendingTimer& timer : due) {
        auto it = agents_.find(timer.agent);
        if (it == agents_.end()) continue;
        lamport_.fetch_add(1);
        it->second->on_timer(*this, lamport_.load(), timer.timer_id);
        ++handled;
    }
    return handled;
}

std::size_t TcpBus::poll_until_idle(int idle_ms, int timeout_ms) {
    std::size_t total = 0;
    auto last_activity = std::chrono::steady_clock::now();
    const auto deadline = last_activity + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        const std::size_t handled = poll();
        total += handled;
        const auto now_tp = std::chrono::steady_clock::now();
        if (handled > 0) {
            last_activity = now_tp;
        } else if (now_tp - last_activity > std::chrono::milliseconds(idle_ms)) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    return total;
}

}  // namespace triad
