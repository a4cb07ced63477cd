#include "edgeoff/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include <json.hpp>

namespace edgeoff::wire {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

double finite(double x, const char* field) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string("encode_frame: non-finite ") + field);
  return x;
}

ojson to_json(const Hello& m) {
  ojson j;
  j["kind"] = "HELLO";
  j["device"] = m.device;
  return j;
}

ojson to_json(const StateReport& m) {
  ojson j;
  j["kind"] = "STATE_REPORT";
  j["t"] = m.t;
  j["device"] = m.device;
  j["o_level"] = m.o_level;
  j["h_level"] = m.h_level;
  j["w_level"] = m.w_level;
  j["has_task"] = m.has_task;
  j["decision"] = m.decision;
  j["lambda"] = finite(m.lambda, "lambda");
  j["d_local"] = finite(m.d_local, "d_local");
  j["phi"] = finite(m.phi, "phi");
  return j;
}

ojson to_json(const BroadcastMsg& m) {
  ojson j;
  j["kind"] = "BROADCAST";
  j["t"] = m.t;
  j["served"] = m.served;
  j["mu"] = finite(m.mu, "mu");
  j["link"] = finite(m.link, "link");
  ojson c = ojson::array();
  for (const auto& [idx, n] : m.counts) c.push_back(ojson::array({idx, n}));
  j["counts"] = std::move(c);
  j["total_offloads"] = m.total_offloads;
  return j;
}

struct Bad {
  std::string what;
};

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Bad{std::string("missing field '") + key + "'"};
  return *it;
}

std::uint64_t u64(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned()) throw Bad{std::string("field '") + key + "' must be an unsigned integer"};
  return v.get<std::uint64_t>();
}

std::uint32_t u32(const json& j, const char* key) {
  const std::uint64_t v = u64(j, key);
  if (v > UINT32_MAX) throw Bad{std::string("field '") + key + "' out of range"};
  return static_cast<std::uint32_t>(v);
}

bool boolean(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) throw Bad{std::string("field '") + key + "' must be a boolean"};
  return v.get<bool>();
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw Bad{std::string("field '") + key + "' must be a number"};
  return v.get<double>();
}

void exact_keys(const json& j, std::size_t n) {
  if (j.size() != n) throw Bad{"unexpected fields"};
}

Message from_json(const json& j) {
  if (!j.is_object()) throw Bad{"payload is not an object"};
  const json& kind = field(j, "kind");
  if (!kind.is_string()) throw Bad{"field 'kind' must be a string"};
  const auto k = kind.get<std::string>();
  if (k == "HELLO") {
    exact_keys(j, 2);
    return Hello{u32(j, "device")};
  }
  if (k == "STATE_REPORT") {
    exact_keys(j, 11);
    StateReport m;
    m.t = u64(j, "t");
    m.device = u32(j, "device");
    m.o_level = u32(j, "o_level");
    m.h_level = u32(j, "h_level");
    m.w_level = u32(j, "w_level");
    m.has_task = boolean(j, "has_task");
    m.decision = boolean(j, "decision");
    m.lambda = number(j, "lambda");
    m.d_local = number(j, "d_local");
    m.phi = number(j, "phi");
    return m;
  }
  if (k == "BROADCAST") {
    exact_keys(j, 7);
    BroadcastMsg m;
    m.t = u64(j, "t");
    m.served = boolean(j, "served");
    m.mu = number(j, "mu");
    m.link = number(j, "link");
    const json& c = field(j, "counts");
    if (!c.is_array()) throw Bad{"field 'counts' must be an array"};
    for (const auto& e : c) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned() ||
          e[0].get<std::uint64_t>() > UINT32_MAX)
        throw Bad{"malformed counts entry"};
      m.counts.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint64_t>());
    }
    m.total_offloads = u64(j, "total_offloads");
    return m;
  }
  throw Bad{"unknown message kind '" + k + "'"};
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Message& m) {
  const std::string payload = std::visit([](const auto& x) { return to_json(x).dump(); }, m);
  if (payload.size() > UINT32_MAX) throw std::length_error("encode_frame: payload exceeds 2^32-1 bytes");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> out(kHeaderBytes + payload.size());
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
  std::memcpy(out.data() + kHeaderBytes, payload.data(), payload.size());
  return out;
}

Decoded decode_frame(std::span<const std::uint8_t> bytes) {
  Decoded d;
  if (bytes.size() < kHeaderBytes) return d;
  const std::uint32_t n = (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
                          (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
  auto fail = [&](std::size_t offset, std::string what) {
    d.status = Decoded::Status::error;
    d.error_offset = offset;
    d.error = std::move(what);
    return d;
  };
  if (n == 0) return fail(0, "empty payload");
  if (n > kMaxPayload) return fail(0, "declared length exceeds limit");
  if (bytes.size() < kHeaderBytes + n) return d;
  const auto* begin = bytes.data() + kHeaderBytes;
  json j;
  try {
    j = json::parse(begin, begin + n);
  } catch (const json::parse_error& e) {
    return fail(kHeaderBytes + (e.byte > 0 ? e.byte - 1 : 0), "malformed payload");
  } catch (const json::exception&) {
    return fail(kHeaderBytes, "malformed payload");
  }
  try {
    d.message = from_json(j);
  } catch (const Bad& b) {
    return fail(kHeaderBytes, b.what);
  } catch (const json::exception&) {
    return fail(kHeaderBytes, "malformed payload");
  }
  d.status = Decoded::Status::message;
  d.consumed = kHeaderBytes + n;
  return d;
}

StateReport to_message(const DeviceReport& r) {
  StateReport m;
  m.t = r.t;
  m.device = static_cast<std::uint32_t>(r.device);
  m.o_level = static_cast<std::uint32_t>(r.state.o_level);
  m.h_level = static_cast<std::uint32_t>(r.state.h_level);
  m.w_level = static_cast<std::uint32_t>(r.state.w_level);
  m.has_task = r.state.has_task;
  m.decision = r.decision;
  m.lambda = r.lambda;
  m.d_local = r.d_local;
  m.phi = r.phi;
  return m;
}

BroadcastMsg to_message(const Broadcast& b) {
  BroadcastMsg m;
  m.t = b.t;
  m.served = b.served;
  m.mu = b.mu_next;
  m.link = b.link_next;
  for (std::size_t j = 0; j < b.counts.size(); ++j)
    if (b.counts[j] != 0) m.counts.emplace_back(static_cast<std::uint32_t>(j), b.counts[j]);
  m.total_offloads = b.total_offloads;
  return m;
}

Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw std::invalid_argument("endpoint must be host:port, got '" + s + "'");
  Endpoint ep;
  ep.host = s.substr(0, colon);
  if (ep.host.size() > 2 && ep.host.front() == '[' && ep.host.back() == ']')
    ep.host = ep.host.substr(1, ep.host.size() - 2);
  const std::string port = s.substr(colon + 1);
  unsigned long p = 0;
  try {
    std::size_t used = 0;
    p = std::stoul(port, &used);
    if (used != port.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("endpoint port is not a number: '" + port + "'");
  }
  if (p > 65535) throw std::invalid_argument("endpoint port out of range: " + port);
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

struct AddrInfo {
  addrinfo* head = nullptr;
  AddrInfo(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    const std::string port = std::to_string(ep.port);
    const int rc = getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &head);
    if (rc != 0)
      throw TransportError("cannot resolve " + ep.host + ": " + gai_strerror(rc));
  }
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void no_delay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Connection::Connection(int fd) : fd_(fd) {}

Connection::Connection(Connection&& o) noexcept : fd_(o.fd_), buffer_(std::move(o.buffer_)) {
  o.fd_ = -1;
}

Connection& Connection::operator=(Connection&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    buffer_ = std::move(o.buffer_);
    o.fd_ = -1;
  }
  return *this;
}

Connection::~Connection() { close(); }

void Connection::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Connection Connection::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string last = "no address";
  // the cloudlet may not be listening yet
  while (true) {
    AddrInfo ai(ep, false);
    for (addrinfo* a = ai.head; a; a = a->ai_next) {
      const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) {
        last = sys_error("socket");
        continue;
      }
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
        no_delay(fd);
        return Connection(fd);
      }
      last = sys_error("connect");
      ::close(fd);
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw TransportError("cannot connect to " + ep.host + ":" + std::to_string(ep.port) + " (" + last + ")");
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void Connection::send(const Message& m) {
  if (fd_ < 0) throw TransportError("send on closed connection");
  const auto frame = encode_frame(m);
  std::size_t off = 0;
  while (off < frame.size()) {
    const ssize_t k = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("send"));
    }
    off += static_cast<std::size_t>(k);
  }
}

Message Connection::receive() {
  if (fd_ < 0) throw TransportError("receive on closed connection");
  while (true) {
    const Decoded d = decode_frame(buffer_);
    if (d.status == Decoded::Status::message) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(d.consumed));
      return d.message;
    }
    if (d.status == Decoded::Status::error) throw ProtocolError(d.error, d.error_offset);
    std::uint8_t chunk[8192];
    const ssize_t k = ::recv(fd_, chunk, sizeof chunk, 0);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("recv"));
    }
    if (k == 0) throw TransportError("peer closed the connection");
    buffer_.insert(buffer_.end(), chunk, chunk + k);
  }
}

Listener::Listener(const Endpoint& ep) {
  AddrInfo ai(ep, true);
  std::string last = "no address";
  for (addrinfo* a = ai.head; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      fd_ = fd;
      break;
    }
    last = sys_error("bind");
    ::close(fd);
  }
  if (fd_ < 0) throw TransportError("cannot listen on " + ep.host + ":" + std::to_string(ep.port) + " (" + last + ")");
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET)
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  else
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

Connection Listener::accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  while (true) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw TransportError(sys_error("poll"));
    if (rc == 0) throw TransportError("timed out waiting for devices to join");
    break;
  }
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw TransportError(sys_error("accept"));
  no_delay(fd);
  return Connection(fd);
}

Trajectory run_cloudlet(Listener& listener, const Scenario& scenario, const PolicyConfig& policy,
                        std::uint64_t T, const WireOptions& options) {
  const std::size_t N = scenario.num_devices();
  const ScenarioModel model = ScenarioModel::build(scenario);
  CloudletNode cloudlet(scenario, model, policy, T);

  // slot 1 starts only after every device has joined
  std::vector<std::optional<Connection>> conns(N);
  std::size_t joined = 0;
  const auto deadline = std::chrono::steady_clock::now() + options.join_timeout;
  while (joined < N) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TransportError("timed out waiting for devices to join");
    Connection c = listener.accept(left);
    const Message m = c.receive();
    const auto* hello = std::get_if<Hello>(&m);
    if (!hello) throw ProtocolError("expected HELLO", 0);
    if (hello->device >= N || conns[hello->device])
      throw ProtocolError("unexpected device id " + std::to_string(hello->device), 0);
    conns[hello->device].emplace(std::move(c));
    ++joined;
  }
  for (auto& c : conns) c->send(BroadcastMsg{});

  std::vector<DeviceReport> reports(N);
  const auto& grids = scenario.table;
  try {
    for (std::uint64_t t = 1; t <= T; ++t) {
      for (std::size_t n = 0; n < N; ++n) {
        const Message m = conns[n]->receive();
        const auto* r = std::get_if<StateReport>(&m);
        if (!r) throw ProtocolError("expected STATE_REPORT from device " + std::to_string(n), 0);
        if (r->t != t || r->device != n)
          throw ProtocolError("report out of order from device " + std::to_string(n), 0);
        DeviceReport& d = reports[n];
        d.t = r->t;
        d.device = r->device;
        d.state = DeviceState{r->o_level, r->h_level, r->w_level, r->has_task};
        const auto& g = grids.device(n);
        if (r->o_level >= g.power.size() || r->h_level >= g.cycles.size() || r->w_level >= g.gain.size())
          throw ProtocolError("level outside grid from device " + std::to_string(n), 0);
        d.index = static_cast<std::uint32_t>(g.index_of(d.state));
        d.decision = r->decision;
        d.lambda = r->lambda;
        d.d_local = r->d_local;
        d.phi = r->phi;
      }
      cloudlet.process(reports);
      for (std::size_t n = 0; n < N; ++n) conns[n]->send(to_message(cloudlet.broadcast_for(n)));
    }
  } catch (const TransportError&) {
    for (auto& c : conns) c->close();
    Trajectory tr = cloudlet.finish();
    tr.partial = true;
    return tr;
  }
  return cloudlet.finish();
}

int run_device(const Endpoint& ep, const Scenario& scenario, const PolicyConfig& policy,
               std::uint64_t T, std::uint64_t seed, std::size_t device, const WireOptions& options) {
  if (device >= scenario.num_devices()) throw std::invalid_argument("device id out of range");
  const ScenarioModel model = ScenarioModel::build(scenario);
  DeviceNode node(scenario, model, policy, device, seed);
  std::vector<std::uint64_t> counts(model.states[device].size(), 0);
  try {
    Connection c = Connection::connect(ep, options.join_timeout);
    c.send(Hello{static_cast<std::uint32_t>(device)});
    {
      const Message m = c.receive();
      const auto* b = std::get_if<BroadcastMsg>(&m);
      if (!b || b->t != 0) throw ProtocolError("expected start signal", 0);
    }
    for (std::uint64_t t = 1; t <= T; ++t) {
      c.send(to_message(node.step(t)));
      const Message m = c.receive();
      const auto* b = std::get_if<BroadcastMsg>(&m);
      if (!b || b->t != t) throw ProtocolError("expected BROADCAST for slot " + std::to_string(t), 0);
      std::fill(counts.begin(), counts.end(), 0);
      for (const auto& [j, k] : b->counts) {
        if (j >= counts.size()) throw ProtocolError("count index outside state space", 0);
        counts[j] = k;
      }
      Broadcast in;
      in.t = b->t;
      in.served = b->served;
      in.mu_next = b->mu;
      in.link_next = b->link;
      in.counts = counts;
      in.total_offloads = b->total_offloads;
      node.receive(in);
    }
  } catch (const TransportError&) {
    return 2;
  }
  return 0;
}

}  // namespace edgeoff::wire
