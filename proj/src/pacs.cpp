#include "ctforge/pacs.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <sstream>

#include "ctforge/error.hpp"
#include "ctforge/hash.hpp"

namespace ctforge {

namespace {

constexpr char kMagic[4] = {'P', 'X', 'F', '1'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kDigestSize = 32;
constexpr std::size_t kMaxSeriesId = 4096;

std::uint64_t mono_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

// RAII socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { close_fd(); }
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        const int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void close_fd() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n =
            ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n <= 0) throw NetError("socket write failed");
        sent += static_cast<std::size_t>(n);
    }
}

void write_all(int fd, const std::vector<std::uint8_t>& bytes) {
    write_all(fd, bytes.data(), bytes.size());
}

// Returns false on clean EOF at the first byte; throws on mid-read failure.
bool read_exact(int fd, std::uint8_t* out, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, out + got, len - got, 0);
        if (n == 0) {
            if (got == 0) return false;
            throw NetError("peer closed mid-frame");
        }
        if (n < 0) throw NetError("socket read failed");
        got += static_cast<std::size_t>(n);
    }
    return true;
}

Socket connect_to(const std::string& host, std::uint16_t port) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw NetError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw NetError("bad address: " + host);
    }
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
        0) {
        throw NetError("connect to " + host + ":" + std::to_string(port) +
                       " failed");
    }
    return sock;
}

Socket listen_on(std::uint16_t port, std::uint16_t* bound_port) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw NetError("socket() failed");
    const int one = 1;
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw NetError("bind failed");
    }
    if (::listen(sock.fd(), 16) != 0) throw NetError("listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(sock.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
    return sock;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        v >>= 8;
    }
}

bool valid_type(std::uint8_t t) { return t >= 1 && t <= 5; }

// Streaming frame read with bounds checking; never trusts declared lengths
// beyond the caps. Returns false on clean EOF before a frame starts.
bool read_frame(int fd, Frame* frame, std::size_t max_payload) {
    std::uint8_t head[7];
    if (!read_exact(fd, head, sizeof(head))) return false;
    if (std::memcmp(head, kMagic, 4) != 0) throw NetError("bad frame magic");
    if (head[4] != kVersion) throw NetError("bad frame version");
    if (!valid_type(head[5])) throw NetError("bad frame type");
    frame->type = static_cast<FrameType>(head[5]);
    frame->flags = head[6];

    std::uint8_t len16[2];
    if (!read_exact(fd, len16, 2)) throw NetError("truncated frame");
    const std::uint16_t series_len =
        static_cast<std::uint16_t>(len16[0] | (len16[1] << 8));
    if (series_len > kMaxSeriesId) throw NetError("series id too long");
    frame->series_id.resize(series_len);
    if (series_len > 0 &&
        !read_exact(fd, reinterpret_cast<std::uint8_t*>(frame->series_id.data()),
                    series_len)) {
        throw NetError("truncated frame");
    }

    std::uint8_t len64[8];
    if (!read_exact(fd, len64, 8)) throw NetError("truncated frame");
    std::uint64_t payload_len = 0;
    for (int i = 7; i >= 0; --i) payload_len = (payload_len << 8) | len64[i];
    if (payload_len > max_payload) throw NetError("payload too large");
    frame->payload.resize(static_cast<std::size_t>(payload_len));
    if (payload_len > 0 &&
        !read_exact(fd, frame->payload.data(), frame->payload.size())) {
        throw NetError("truncated frame");
    }

    std::uint8_t digest[kDigestSize];
    if (!read_exact(fd, digest, kDigestSize)) throw NetError("truncated frame");
    const auto expected = sha256(frame->payload.data(), frame->payload.size());
    if (std::memcmp(digest, expected.data(), kDigestSize) != 0) {
        throw NetError("payload digest mismatch");
    }
    return true;
}

Frame error_frame(const std::string& message) {
    Frame f;
    f.type = FrameType::error;
    f.payload.assign(message.begin(), message.end());
    return f;
}

std::vector<std::uint8_t> psk_bytes(const std::string& psk_hex) {
    if (psk_hex.size() != 2 * crypto_secretbox_KEYBYTES) {
        throw Error("PSK must be 64 hex characters");
    }
    std::vector<std::uint8_t> key(crypto_secretbox_KEYBYTES);
    for (std::size_t i = 0; i < key.size(); ++i) {
        const auto digit = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw Error("bad hex digit in PSK");
        };
        key[i] = static_cast<std::uint8_t>((digit(psk_hex[2 * i]) << 4) |
                                           digit(psk_hex[2 * i + 1]));
    }
    return key;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(frame.payload.size() + frame.series_id.size() + 64);
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(frame.type));
    out.push_back(frame.flags);
    if (frame.series_id.size() > kMaxSeriesId) {
        throw NetError("series id too long");
    }
    put_u16(out, static_cast<std::uint16_t>(frame.series_id.size()));
    out.insert(out.end(), frame.series_id.begin(), frame.series_id.end());
    put_u64(out, frame.payload.size());
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    const auto digest = sha256(frame.payload.data(), frame.payload.size());
    out.insert(out.end(), digest.begin(), digest.end());
    return out;
}

Frame decode_frame(const std::vector<std::uint8_t>& bytes) {
    // Feed through a socketpair-free path: reuse the streaming parser over a
    // memory cursor.
    std::size_t pos = 0;
    const auto take = [&](std::uint8_t* out, std::size_t n) {
        if (bytes.size() - pos < n) throw NetError("truncated frame");
        std::memcpy(out, bytes.data() + pos, n);
        pos += n;
    };
    Frame frame;
    std::uint8_t head[7];
    take(head, sizeof(head));
    if (std::memcmp(head, kMagic, 4) != 0) throw NetError("bad frame magic");
    if (head[4] != kVersion) throw NetError("bad frame version");
    if (!valid_type(head[5])) throw NetError("bad frame type");
    frame.type = static_cast<FrameType>(head[5]);
    frame.flags = head[6];
    std::uint8_t len16[2];
    take(len16, 2);
    const std::uint16_t series_len =
        static_cast<std::uint16_t>(len16[0] | (len16[1] << 8));
    if (series_len > kMaxSeriesId) throw NetError("series id too long");
    frame.series_id.resize(series_len);
    if (series_len > 0) {
        take(reinterpret_cast<std::uint8_t*>(frame.series_id.data()), series_len);
    }
    std::uint8_t len64[8];
    take(len64, 8);
    std::uint64_t payload_len = 0;
    for (int i = 7; i >= 0; --i) payload_len = (payload_len << 8) | len64[i];
    if (payload_len > bytes.size()) throw NetError("payload too large");
    frame.payload.resize(static_cast<std::size_t>(payload_len));
    if (payload_len > 0) take(frame.payload.data(), frame.payload.size());
    std::uint8_t digest[kDigestSize];
    take(digest, kDigestSize);
    const auto expected = sha256(frame.payload.data(), frame.payload.size());
    if (std::memcmp(digest, expected.data(), kDigestSize) != 0) {
        throw NetError("payload digest mismatch");
    }
    if (pos != bytes.size()) throw NetError("trailing bytes after frame");
    return frame;
}

std::vector<std::uint8_t> encrypt_payload(const std::vector<std::uint8_t>& plain,
                                          const std::string& psk_hex) {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
    const auto key = psk_bytes(psk_hex);
    std::vector<std::uint8_t> out(crypto_secretbox_NONCEBYTES +
                                  plain.size() + crypto_secretbox_MACBYTES);
    randombytes_buf(out.data(), crypto_secretbox_NONCEBYTES);
    crypto_secretbox_easy(out.data() + crypto_secretbox_NONCEBYTES, plain.data(),
                          plain.size(), out.data(), key.data());
    return out;
}

std::vector<std::uint8_t> decrypt_payload(const std::vector<std::uint8_t>& cipher,
                                          const std::string& psk_hex) {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
    const auto key = psk_bytes(psk_hex);
    if (cipher.size() < crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES) {
        throw NetError("ciphertext too short");
    }
    std::vector<std::uint8_t> plain(cipher.size() - crypto_secretbox_NONCEBYTES -
                                    crypto_secretbox_MACBYTES);
    if (crypto_secretbox_open_easy(
            plain.data(), cipher.data() + crypto_secretbox_NONCEBYTES,
            cipher.size() - crypto_secretbox_NONCEBYTES, cipher.data(),
            key.data()) != 0) {
        throw NetError("payload decryption failed (bad key or tampered data)");
    }
    return plain;
}

std::string random_psk_hex() {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
    std::uint8_t key[crypto_secretbox_KEYBYTES];
    randombytes_buf(key, sizeof(key));
    return to_hex(key, sizeof(key));
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

PacsServer::PacsServer(PacsServerConfig config) : config_(std::move(config)) {}

PacsServer::~PacsServer() { stop(); }

void PacsServer::start(std::uint16_t port) {
    if (running_) throw Error("server already running");
    Socket sock = listen_on(port, &port_);
    listen_fd_ = sock.release();
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void PacsServer::stop() {
    if (!running_) return;
    running_ = false;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
    workers_.clear();
}

std::size_t PacsServer::stored_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return store_.size();
}

std::vector<std::uint8_t> PacsServer::stored(const std::string& series_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = store_.find(series_id);
    if (it == store_.end()) throw Error("series not stored: " + series_id);
    return it->second;
}

void PacsServer::accept_loop() {
    for (;;) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) return;  // listener closed
        std::lock_guard<std::mutex> lock(mutex_);
        workers_.emplace_back([this, fd] { handle_connection(fd); });
    }
}

Frame PacsServer::handle_frame(const Frame& frame) {
    switch (frame.type) {
        case FrameType::store: {
            if (frame.series_id.empty()) {
                return error_frame("store requires a series id");
            }
            std::vector<std::uint8_t> payload = frame.payload;
            if ((frame.flags & kFrameFlagEncrypted) != 0) {
                if (config_.psk_hex.empty()) {
                    return error_frame("server does not accept encrypted frames");
                }
                try {
                    payload = decrypt_payload(payload, config_.psk_hex);
                } catch (const std::exception& e) {
                    return error_frame(e.what());
                }
            } else if (!config_.psk_hex.empty()) {
                return error_frame("server requires encrypted frames");
            }
            {
                std::lock_guard<std::mutex> lock(mutex_);
                store_[frame.series_id] = std::move(payload);
            }
            Frame ack;
            ack.type = FrameType::ack;
            ack.series_id = frame.series_id;
            return ack;
        }
        case FrameType::retrieve: {
            std::vector<std::uint8_t> payload;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                const auto it = store_.find(frame.series_id);
                if (it == store_.end()) {
                    return error_frame("unknown series: " + frame.series_id);
                }
                payload = it->second;
            }
            Frame data;
            data.type = FrameType::data;
            data.series_id = frame.series_id;
            if (!config_.psk_hex.empty()) {
                data.payload = encrypt_payload(payload, config_.psk_hex);
                data.flags = kFrameFlagEncrypted;
            } else {
                data.payload = std::move(payload);
            }
            return data;
        }
        default:
            return error_frame("unexpected frame type");
    }
}

void PacsServer::handle_connection(int raw_fd) {
    Socket sock(raw_fd);
    for (;;) {
        Frame frame;
        try {
            if (!read_frame(sock.fd(), &frame, config_.max_payload)) {
                return;  // clean EOF
            }
        } catch (const std::exception& e) {
            // Malformed input: answer with an error frame (best effort) and
            // drop the connection.
            try {
                write_all(sock.fd(), encode_frame(error_frame(e.what())));
            } catch (...) {
            }
            return;
        }
        Frame response;
        try {
            response = handle_frame(frame);
        } catch (const std::exception& e) {
            response = error_frame(e.what());
        }
        try {
            write_all(sock.fd(), encode_frame(response));
        } catch (...) {
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

namespace {

Frame client_roundtrip(const Frame& request, const PacsClientConfig& config) {
    Socket sock = connect_to(config.host, config.port);
    write_all(sock.fd(), encode_frame(request));
    Frame response;
    if (!read_frame(sock.fd(), &response, std::size_t(1) << 30)) {
        throw NetError("server closed without a response");
    }
    return response;
}

}  // namespace

void client_store(const std::vector<std::uint8_t>& payload,
                  const std::string& series_id, const PacsClientConfig& config) {
    Frame request;
    request.type = FrameType::store;
    request.series_id = series_id;
    if (!config.psk_hex.empty()) {
        request.payload = encrypt_payload(payload, config.psk_hex);
        request.flags = kFrameFlagEncrypted;
    } else {
        request.payload = payload;
    }
    const Frame response = client_roundtrip(request, config);
    if (response.type == FrameType::error) {
        throw NetError("store rejected: " + std::string(response.payload.begin(),
                                                        response.payload.end()));
    }
    if (response.type != FrameType::ack) {
        throw NetError("unexpected response frame type");
    }
}

std::vector<std::uint8_t> client_retrieve(const std::string& series_id,
                                          const PacsClientConfig& config) {
    Frame request;
    request.type = FrameType::retrieve;
    request.series_id = series_id;
    const Frame response = client_roundtrip(request, config);
    if (response.type == FrameType::error) {
        throw NetError("retrieve failed: " + std::string(response.payload.begin(),
                                                         response.payload.end()));
    }
    if (response.type != FrameType::data) {
        throw NetError("unexpected response frame type");
    }
    if ((response.flags & kFrameFlagEncrypted) != 0) {
        if (config.psk_hex.empty()) {
            throw NetError("received encrypted payload without a PSK");
        }
        return decrypt_payload(response.payload, config.psk_hex);
    }
    return response.payload;
}

// ---------------------------------------------------------------------------
// Bridge
// ---------------------------------------------------------------------------

std::string transcript_to_text(const std::vector<BridgeLogEntry>& entries) {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << "seq=" << e.seq << " dir=" << e.direction
           << " type=" << static_cast<int>(e.type) << " series=" << e.series_id
           << " payload=" << e.payload_size << " hook=" << (e.hook_applied ? 1 : 0)
           << " t_ns=" << e.mono_ns << "\n";
    }
    return os.str();
}

PacsBridge::PacsBridge(std::string upstream_host, std::uint16_t upstream_port,
                       TamperHook hook)
    : upstream_host_(std::move(upstream_host)), upstream_port_(upstream_port),
      hook_(std::move(hook)) {}

PacsBridge::~PacsBridge() { stop(); }

void PacsBridge::start(std::uint16_t port) {
    if (running_) throw Error("bridge already running");
    Socket sock = listen_on(port, &port_);
    listen_fd_ = sock.release();
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void PacsBridge::stop() {
    if (!running_) return;
    running_ = false;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
    workers_.clear();
}

std::vector<BridgeLogEntry> PacsBridge::transcript() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
}

void PacsBridge::accept_loop() {
    for (;;) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) return;
        std::lock_guard<std::mutex> lock(mutex_);
        workers_.emplace_back([this, fd] { handle_connection(fd); });
    }
}

void PacsBridge::log_frame(const std::string& direction, const Frame& frame,
                           bool hook_applied) {
    std::lock_guard<std::mutex> lock(mutex_);
    BridgeLogEntry e;
    e.seq = next_seq_++;
    e.direction = direction;
    e.type = static_cast<std::uint8_t>(frame.type);
    e.series_id = frame.series_id;
    e.payload_size = frame.payload.size();
    e.hook_applied = hook_applied;
    e.mono_ns = mono_ns();
    log_.push_back(std::move(e));
}

void PacsBridge::handle_connection(int client_raw) {
    Socket client(client_raw);
    Socket upstream;
    try {
        upstream = connect_to(upstream_host_, upstream_port_);
    } catch (const std::exception& e) {
        try {
            write_all(client.fd(),
                      encode_frame(error_frame(std::string("upstream unreachable: ") +
                                               e.what())));
        } catch (...) {
        }
        return;
    }

    for (;;) {
        Frame frame;
        try {
            if (!read_frame(client.fd(), &frame, std::size_t(1) << 30)) return;
        } catch (const std::exception&) {
            return;  // malformed client traffic: drop
        }

        bool hook_applied = false;
        if (frame.type == FrameType::store && hook_ &&
            (frame.flags & kFrameFlagEncrypted) == 0) {
            // Rewrite the scan in flight and recompute the transport digest
            // (encode_frame always recomputes it). Encrypted payloads cannot
            // be decoded here, which is the point of the countermeasure.
            try {
                frame.payload = hook_(frame.payload);
                hook_applied = true;
            } catch (const std::exception&) {
                hook_applied = false;  // undecodable payload passes through
            }
        }
        log_frame("c2s", frame, hook_applied);

        Frame response;
        try {
            write_all(upstream.fd(), encode_frame(frame));
            if (!read_frame(upstream.fd(), &response, std::size_t(1) << 30)) {
                return;
            }
        } catch (const std::exception& e) {
            try {
                write_all(client.fd(), encode_frame(error_frame(
                                           std::string("upstream error: ") +
                                           e.what())));
            } catch (...) {
            }
            return;
        }
        log_frame("s2c", response, false);
        try {
            write_all(client.fd(), encode_frame(response));
        } catch (...) {
            return;
        }
    }
}

}  // namespace ctforge
