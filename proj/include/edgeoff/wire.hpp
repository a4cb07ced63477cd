#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "edgeoff/sim.hpp"

namespace edgeoff::wire {

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hello {
  std::uint32_t device = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct StateReport {
  std::uint64_t t = 0;
  std::uint32_t device = 0;
  std::uint32_t o_level = 0;
  std::uint32_t h_level = 0;
  std::uint32_t w_level = 0;
  bool has_task = false;
  bool decision = false;
  double lambda = 0.0;
  double d_local = 0.0;
  double phi = 0.0;
  friend bool operator==(const StateReport&, const StateReport&) = default;
};

/// t = 0 is the start signal. counts holds the recipient's nonzero state
/// counts as (state index, count) pairs, ascending.
struct BroadcastMsg {
  std::uint64_t t = 0;
  bool served = false;
  double mu = 0.0;
  double link = 0.0;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> counts;
  std::uint64_t total_offloads = 0;
  friend bool operator==(const BroadcastMsg&, const BroadcastMsg&) = default;
};

using Message = std::variant<Hello, StateReport, BroadcastMsg>;

constexpr std::size_t kHeaderBytes = 4;
constexpr std::uint32_t kMaxPayload = 64u << 20;

std::vector<std::uint8_t> encode_frame(const Message& m);

struct Decoded {
  enum class Status { message, need_more, error };
  Status status = Status::need_more;
  Message message;
  std::size_t consumed = 0;      // bytes of the frame when status == message
  std::size_t error_offset = 0;  // into the input buffer
  std::string error;
};

/// Never throws on malformed input.
Decoded decode_frame(std::span<const std::uint8_t> bytes);

StateReport to_message(const DeviceReport& r);
BroadcastMsg to_message(const Broadcast& b);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};
Endpoint parse_endpoint(const std::string& s);

/// Blocking TCP stream carrying frames.
class Connection {
 public:
  explicit Connection(int fd);
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  static Connection connect(const Endpoint& ep, std::chrono::milliseconds timeout);

  void send(const Message& m);
  /// Throws TransportError on EOF, ProtocolError on a malformed frame.
  Message receive();
  void close();

 private:
  int fd_ = -1;
  std::vector<std::uint8_t> buffer_;
};

class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();

  std::uint16_t port() const { return port_; }
  /// Throws TransportError on timeout.
  Connection accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct WireOptions {
  std::chrono::milliseconds join_timeout{30000};
};

/// Accepts one connection per device, starts slot 1 once every device has
/// said HELLO, then runs the slot barrier. A lost device ends the run with
/// trajectory.partial set.
Trajectory run_cloudlet(Listener& listener, const Scenario& scenario, const PolicyConfig& policy,
                        std::uint64_t T, const WireOptions& options = {});

/// Returns 0 after T slots, nonzero if the cloudlet went away.
int run_device(const Endpoint& cloudlet, const Scenario& scenario, const PolicyConfig& policy,
               std::uint64_t T, std::uint64_t seed, std::size_t device,
               const WireOptions& options = {});

}  // namespace edgeoff::wire
