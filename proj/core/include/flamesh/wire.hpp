#pragma once

// Wire format shared by every backend:
//
//   +----------------------+-------------------------------+
//   | length L (u32, BE)   | L bytes of UTF-8 JSON text    |
//   +----------------------+-------------------------------+
//
// The body is always a two-element array ["<kind>", <payload>]:
//
//   init  [id, "ip", port]
//   book  [[id, "ip", port], ...]            sorted strictly by id
//   cent  <data>
//   dec   [iteration, phase, ["ip", port], <data>]
//   tdm   [slot, nodeId, <data>]
//
// <data> is null, a number, or an array of <data>. Numbers are written in
// the shortest form that round-trips the double, laid out the way Python's
// float repr does it, so other implementations can produce identical bytes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flamesh {

inline constexpr int kBasePort = 6000;
inline constexpr std::size_t kMaxFrameBody = std::size_t{1} << 20;
inline constexpr std::size_t kFramePrefix = 4;

constexpr int port_for(int node_id) { return kBasePort + node_id; }

/// Network location of a listener.
struct Endpoint {
  std::string ip;
  int port = 0;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

std::string to_string(const Endpoint& ep);

/// A node's identity triple. port is always 6000 + node_id.
struct NodeAddress {
  int node_id = 0;
  std::string ip;
  int port = 0;

  static NodeAddress make(int node_id, std::string ip);

  Endpoint endpoint() const { return {ip, port}; }

  friend bool operator==(const NodeAddress&, const NodeAddress&) = default;
};

/// Application data exchanged through the callbacks: absent, a scalar, or
/// a (possibly nested) list.
class FlData {
 public:
  struct Absent {
    friend bool operator==(Absent, Absent) = default;
  };
  using List = std::vector<FlData>;

  FlData() = default;
  FlData(double scalar) : value_(scalar) {}  // NOLINT(google-explicit-constructor)
  FlData(List list) : value_(std::move(list)) {}  // NOLINT(google-explicit-constructor)
  FlData(std::initializer_list<double> values);

  static FlData absent() { return FlData(); }

  bool is_absent() const { return std::holds_alternative<Absent>(value_); }
  bool is_scalar() const { return std::holds_alternative<double>(value_); }
  bool is_list() const { return std::holds_alternative<List>(value_); }

  /// Throws Error(MalformedPayload) when the shape does not match.
  double scalar() const;
  const List& list() const;

  /// Scalar value, or the first element of a list (recursively). Handy for
  /// the single-coefficient models the bundled apps use.
  double head() const;

  friend bool operator==(const FlData&, const FlData&) = default;

 private:
  std::variant<Absent, double, List> value_;
};

enum class MessageKind { kInit, kBook, kCent, kDec, kTdm };

std::string_view to_string(MessageKind kind);

struct InitMsg {
  NodeAddress sender;
  friend bool operator==(const InitMsg&, const InitMsg&) = default;
};

struct BookMsg {
  std::vector<NodeAddress> book;
  friend bool operator==(const BookMsg&, const BookMsg&) = default;
};

struct CentMsg {
  FlData data;
  friend bool operator==(const CentMsg&, const CentMsg&) = default;
};

struct DecMsg {
  std::int64_t iteration = 0;
  int phase = 1;
  Endpoint source;
  FlData data;
  friend bool operator==(const DecMsg&, const DecMsg&) = default;
};

struct TdmMsg {
  std::int64_t slot = 0;
  int node_id = 0;
  FlData data;
  friend bool operator==(const TdmMsg&, const TdmMsg&) = default;
};

struct Envelope {
  std::variant<InitMsg, BookMsg, CentMsg, DecMsg, TdmMsg> payload;

  MessageKind kind() const { return static_cast<MessageKind>(payload.index()); }

  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(payload);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(payload);
  }

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// Formats a finite double the way Python's repr() does (shortest
/// round-trip digits, exponent form outside [1e-4, 1e16)).
std::string format_double(double value);

std::string encode_body(const Envelope& env);
Envelope decode_body(std::string_view body);

/// Full frame: 4-byte big-endian length followed by the body.
std::vector<std::uint8_t> encode(const Envelope& env);

/// Decodes exactly one frame; trailing bytes are rejected.
Envelope decode(std::span<const std::uint8_t> frame);

/// Total size (prefix + body) of the frame at the start of bytes.
/// Throws TruncatedFrame if the prefix itself is incomplete.
std::size_t frame_size(std::span<const std::uint8_t> bytes);

/// Splits a concatenation of frames and decodes each in order.
std::vector<Envelope> decode_all(std::span<const std::uint8_t> bytes);

/// One-line human description, used by logs.
std::string describe(const Envelope& env);

}  // namespace flamesh
