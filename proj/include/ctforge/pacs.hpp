#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ctforge {

// ---------------------------------------------------------------------------
// Wire format, little-endian:
//   magic "PXF1" | version u8 | type u8 | flags u8 | series u16-len + bytes |
//   payload u64-len + bytes | digest 32 bytes (SHA-256 of the payload bytes
//   as transmitted).
// The digest is a transport checksum, not integrity: anyone who can rewrite
// the frame can recompute it.
// ---------------------------------------------------------------------------

enum class FrameType : std::uint8_t {
    store = 1,
    retrieve = 2,
    ack = 3,
    error = 4,
    data = 5,
};

constexpr std::uint8_t kFrameFlagEncrypted = 0x01;

struct Frame {
    FrameType type = FrameType::ack;
    std::uint8_t flags = 0;
    std::string series_id;
    std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
// Strict decode of a complete buffer; throws NetError on any malformation.
Frame decode_frame(const std::vector<std::uint8_t>& bytes);

// Pre-shared-key payload encryption (XSalsa20-Poly1305; payload becomes
// nonce || box). Key is 32 bytes, hex-encoded in configs.
std::vector<std::uint8_t> encrypt_payload(const std::vector<std::uint8_t>& plain,
                                          const std::string& psk_hex);
std::vector<std::uint8_t> decrypt_payload(const std::vector<std::uint8_t>& cipher,
                                          const std::string& psk_hex);
std::string random_psk_hex();

// ---------------------------------------------------------------------------
// Storage server
// ---------------------------------------------------------------------------

struct PacsServerConfig {
    std::string psk_hex;  // empty = cleartext operation
    std::size_t max_payload = std::size_t(1) << 30;
};

class PacsServer {
public:
    explicit PacsServer(PacsServerConfig config = {});
    ~PacsServer();
    PacsServer(const PacsServer&) = delete;
    PacsServer& operator=(const PacsServer&) = delete;

    // Binds 127.0.0.1; port 0 picks an ephemeral port.
    void start(std::uint16_t port = 0);
    void stop();
    std::uint16_t port() const noexcept { return port_; }

    std::size_t stored_count() const;
    // Stored payload bytes (decrypted if the server runs with a PSK).
    std::vector<std::uint8_t> stored(const std::string& series_id) const;

private:
    void accept_loop();
    void handle_connection(int fd);
    Frame handle_frame(const Frame& frame);

    PacsServerConfig config_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::thread accept_thread_;
    mutable std::mutex mutex_;
    std::map<std::string, std::vector<std::uint8_t>> store_;
    std::vector<std::thread> workers_;
    bool running_ = false;
};

// ---------------------------------------------------------------------------
// Modality client
// ---------------------------------------------------------------------------

struct PacsClientConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    std::string psk_hex;  // must match the server's to interoperate
};

// Stores payload bytes under a series id; throws NetError if the transfer
// fails or the server answers with an error frame.
void client_store(const std::vector<std::uint8_t>& payload,
                  const std::string& series_id, const PacsClientConfig& config);

std::vector<std::uint8_t> client_retrieve(const std::string& series_id,
                                          const PacsClientConfig& config);

// ---------------------------------------------------------------------------
// Man-in-the-middle bridge
// ---------------------------------------------------------------------------

// Maps volume bytes to volume bytes; identity is allowed.
using TamperHook =
    std::function<std::vector<std::uint8_t>(const std::vector<std::uint8_t>&)>;

struct BridgeLogEntry {
    std::uint64_t seq = 0;
    std::string direction;  // "c2s" or "s2c"
    std::uint8_t type = 0;
    std::string series_id;
    std::size_t payload_size = 0;
    bool hook_applied = false;
    std::uint64_t mono_ns = 0;
};

std::string transcript_to_text(const std::vector<BridgeLogEntry>& entries);

class PacsBridge {
public:
    PacsBridge(std::string upstream_host, std::uint16_t upstream_port,
               TamperHook hook);
    ~PacsBridge();
    PacsBridge(const PacsBridge&) = delete;
    PacsBridge& operator=(const PacsBridge&) = delete;

    void start(std::uint16_t port = 0);
    void stop();
    std::uint16_t port() const noexcept { return port_; }

    std::vector<BridgeLogEntry> transcript() const;

private:
    void accept_loop();
    void handle_connection(int client_fd);
    void log_frame(const std::string& direction, const Frame& frame,
                   bool hook_applied);

    std::string upstream_host_;
    std::uint16_t upstream_port_;
    TamperHook hook_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    mutable std::mutex mutex_;
    std::vector<BridgeLogEntry> log_;
    std::uint64_t next_seq_ = 1;
    bool running_ = false;
};

}  // namespace ctforge
