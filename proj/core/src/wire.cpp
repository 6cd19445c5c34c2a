#include "flamesh/wire.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "flamesh/error.hpp"
#include "json.hpp"

namespace flamesh {

using json = nlohmann::json;

std::string to_string(const Endpoint& ep) { return ep.ip + ":" + std::to_string(ep.port); }

NodeAddress NodeAddress::make(int node_id, std::string ip) {
  return NodeAddress{node_id, std::move(ip), port_for(node_id)};
}

FlData::FlData(std::initializer_list<double> values) {
  List list;
  list.reserve(values.size());
  for (double v : values) list.emplace_back(v);
  value_ = std::move(list);
}

double FlData::scalar() const {
  if (const auto* v = std::get_if<double>(&value_)) return *v;
  throw Error(ErrorCode::kMalformedPayload, "expected scalar data");
}

const FlData::List& FlData::list() const {
  if (const auto* v = std::get_if<List>(&value_)) return *v;
  throw Error(ErrorCode::kMalformedPayload, "expected list data");
}

double FlData::head() const {
  if (is_scalar()) return scalar();
  if (is_list() && !list().empty()) return list().front().head();
  throw Error(ErrorCode::kMalformedPayload, "data has no leading value");
}

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kInit: return "init";
    case MessageKind::kBook: return "book";
    case MessageKind::kCent: return "cent";
    case MessageKind::kDec: return "dec";
    case MessageKind::kTdm: return "tdm";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Encoding

std::string format_double(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::kNonFiniteValue, "cannot encode NaN/Inf");

  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
  std::string_view sci(buf, static_cast<std::size_t>(res.ptr - buf));

  std::string out;
  if (sci.front() == '-') {
    out.push_back('-');
    sci.remove_prefix(1);
  }
  auto e_pos = sci.find('e');
  std::string digits;
  for (char c : sci.substr(0, e_pos))
    if (c != '.') digits.push_back(c);
  int exp = std::atoi(std::string(sci.substr(e_pos + 1)).c_str());

  if (exp >= -4 && exp < 16) {
    if (exp >= 0) {
      auto int_len = static_cast<std::size_t>(exp) + 1;
      if (digits.size() <= int_len) {
        out += digits;
        out.append(int_len - digits.size(), '0');
        out += ".0";
      } else {
        out += digits.substr(0, int_len);
        out.push_back('.');
        out += digits.substr(int_len);
      }
    } else {
      out += "0.";
      out.append(static_cast<std::size_t>(-exp - 1), '0');
      out += digits;
    }
  } else {
    out.push_back(digits.front());
    if (digits.size() > 1) {
      out.push_back('.');
      out += digits.substr(1);
    }
    out.push_back('e');
    out.push_back(exp < 0 ? '-' : '+');
    auto mag = std::to_string(std::abs(exp));
    if (mag.size() < 2) out.push_back('0');
    out += mag;
  }
  return out;
}

namespace {

void append_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out.push_back('"');
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
}

void append_data(std::string& out, const FlData& d) {
  if (d.is_absent()) {
    out += "null";
  } else if (d.is_scalar()) {
    out += format_double(d.scalar());
  } else {
    out.push_back('[');
    bool first = true;
    for (const auto& item : d.list()) {
      if (!first) out.push_back(',');
      first = false;
      append_data(out, item);
    }
    out.push_back(']');
  }
}

void append_address(std::string& out, const NodeAddress& a) {
  out.push_back('[');
  out += std::to_string(a.node_id);
  out.push_back(',');
  append_string(out, a.ip);
  out.push_back(',');
  out += std::to_string(a.port);
  out.push_back(']');
}

void check_address(const NodeAddress& a) {
  if (a.node_id < 0) throw Error(ErrorCode::kMalformedPayload, "negative node id");
  if (a.ip.empty()) throw Error(ErrorCode::kMalformedPayload, "empty ip");
  if (a.port != port_for(a.node_id))
    throw Error(ErrorCode::kMalformedPayload,
                "port " + std::to_string(a.port) + " does not match node id " + std::to_string(a.node_id));
}

void check_book(const std::vector<NodeAddress>& book) {
  for (std::size_t i = 0; i < book.size(); ++i) {
    check_address(book[i]);
    if (i > 0 && book[i - 1].node_id >= book[i].node_id)
      throw Error(ErrorCode::kMalformedPayload, "book not sorted strictly by node id");
  }
}

void check_phase(int phase) {
  if (phase != 1 && phase != 2) throw Error(ErrorCode::kMalformedPayload, "dec phase must be 1 or 2");
}

struct BodyWriter {
  std::string& out;

  void operator()(const InitMsg& m) {
    check_address(m.sender);
    append_address(out, m.sender);
  }
  void operator()(const BookMsg& m) {
    check_book(m.book);
    out.push_back('[');
    for (std::size_t i = 0; i < m.book.size(); ++i) {
      if (i) out.push_back(',');
      append_address(out, m.book[i]);
    }
    out.push_back(']');
  }
  void operator()(const CentMsg& m) { append_data(out, m.data); }
  void operator()(const DecMsg& m) {
    if (m.iteration < 0) throw Error(ErrorCode::kMalformedPayload, "negative iteration");
    check_phase(m.phase);
    out.push_back('[');
    out += std::to_string(m.iteration);
    out.push_back(',');
    out += std::to_string(m.phase);
    out += ",[";
    append_string(out, m.source.ip);
    out.push_back(',');
    out += std::to_string(m.source.port);
    out += "],";
    append_data(out, m.data);
    out.push_back(']');
  }
  void operator()(const TdmMsg& m) {
    if (m.slot < 0) throw Error(ErrorCode::kMalformedPayload, "negative slot");
    out.push_back('[');
    out += std::to_string(m.slot);
    out.push_back(',');
    out += std::to_string(m.node_id);
    out.push_back(',');
    append_data(out, m.data);
    out.push_back(']');
  }
};

}  // namespace

std::string encode_body(const Envelope& env) {
  std::string out = "[";
  append_string(out, to_string(env.kind()));
  out.push_back(',');
  std::visit(BodyWriter{out}, env.payload);
  out.push_back(']');
  if (out.size() > kMaxFrameBody)
    throw Error(ErrorCode::kOversizeFrame, "body of " + std::to_string(out.size()) + " bytes exceeds cap");
  return out;
}

std::vector<std::uint8_t> encode(const Envelope& env) {
  auto body = encode_body(env);
  auto len = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> frame;
  frame.reserve(kFramePrefix + body.size());
  frame.push_back(static_cast<std::uint8_t>(len >> 24));
  frame.push_back(static_cast<std::uint8_t>(len >> 16));
  frame.push_back(static_cast<std::uint8_t>(len >> 8));
  frame.push_back(static_cast<std::uint8_t>(len));
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::kMalformedPayload, what); }

const json& expect_array(const json& j, std::size_t arity, const char* what) {
  if (!j.is_array() || j.size() != arity)
    malformed(std::string(what) + ": expected array of " + std::to_string(arity));
  return j;
}

std::int64_t read_int(const json& j, std::int64_t lo, std::int64_t hi, const char* what) {
  if (!j.is_number_integer()) malformed(std::string(what) + ": expected integer");
  std::int64_t v = 0;
  if (j.is_number_unsigned()) {
    auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      malformed(std::string(what) + ": out of range");
    v = static_cast<std::int64_t>(u);
  } else {
    v = j.get<std::int64_t>();
  }
  if (v < lo || v > hi) malformed(std::string(what) + ": out of range");
  return v;
}

std::string read_string(const json& j, const char* what) {
  if (!j.is_string()) malformed(std::string(what) + ": expected string");
  auto s = j.get<std::string>();
  if (s.empty()) malformed(std::string(what) + ": empty");
  return s;
}

constexpr std::int64_t kIntMax = std::numeric_limits<int>::max();
constexpr std::int64_t kI64Max = std::numeric_limits<std::int64_t>::max();

FlData read_data(const json& j, int depth = 0) {
  if (depth > 64) malformed("data nested too deeply");
  if (j.is_null()) return FlData::absent();
  if (j.is_number()) {
    double v = j.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteValue, "non-finite number in payload");
    return FlData(v);
  }
  if (j.is_array()) {
    FlData::List items;
    items.reserve(j.size());
    for (const auto& item : j) items.push_back(read_data(item, depth + 1));
    return FlData(std::move(items));
  }
  malformed("data must be null, a number or an array");
}

NodeAddress read_address(const json& j) {
  expect_array(j, 3, "address");
  NodeAddress a;
  a.node_id = static_cast<int>(read_int(j[0], 0, kIntMax - kBasePort, "node id"));
  a.ip = read_string(j[1], "ip");
  a.port = static_cast<int>(read_int(j[2], 1, 65535, "port"));
  check_address(a);
  return a;
}

}  // namespace

Envelope decode_body(std::string_view body) {
  if (body.size() > kMaxFrameBody) throw Error(ErrorCode::kOversizeFrame, "body exceeds cap");
  json root = json::parse(body.begin(), body.end(), nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) malformed("body is not valid JSON");
  expect_array(root, 2, "envelope");
  if (!root[0].is_string()) malformed("kind tag must be a string");
  const auto kind = root[0].get<std::string>();
  const json& p = root[1];

  if (kind == "init") return Envelope{InitMsg{read_address(p)}};
  if (kind == "book") {
    if (!p.is_array()) malformed("book: expected array");
    BookMsg m;
    for (const auto& a : p) m.book.push_back(read_address(a));
    check_book(m.book);
    return Envelope{std::move(m)};
  }
  if (kind == "cent") return Envelope{CentMsg{read_data(p)}};
  if (kind == "dec") {
    expect_array(p, 4, "dec");
    DecMsg m;
    m.iteration = read_int(p[0], 0, kI64Max, "iteration");
    m.phase = static_cast<int>(read_int(p[1], 1, 2, "phase"));
    expect_array(p[2], 2, "source");
    m.source.ip = read_string(p[2][0], "source ip");
    m.source.port = static_cast<int>(read_int(p[2][1], 1, 65535, "source port"));
    m.data = read_data(p[3]);
    return Envelope{std::move(m)};
  }
  if (kind == "tdm") {
    expect_array(p, 3, "tdm");
    TdmMsg m;
    m.slot = read_int(p[0], 0, kI64Max, "slot");
    m.node_id = static_cast<int>(read_int(p[1], 0, kIntMax, "node id"));
    m.data = read_data(p[2]);
    return Envelope{std::move(m)};
  }
  malformed("unknown kind tag");
}

std::size_t frame_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFramePrefix) throw Error(ErrorCode::kTruncatedFrame, "incomplete length prefix");
  std::uint32_t len = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                      (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  if (len > kMaxFrameBody)
    throw Error(ErrorCode::kOversizeFrame, "declared length " + std::to_string(len) + " exceeds cap");
  return kFramePrefix + len;
}

Envelope decode(std::span<const std::uint8_t> frame) {
  auto total = frame_size(frame);
  if (frame.size() < total)
    throw Error(ErrorCode::kTruncatedFrame, "expected " + std::to_string(total - kFramePrefix) +
                                                " body bytes, got " + std::to_string(frame.size() - kFramePrefix));
  if (frame.size() > total) malformed("trailing bytes after frame");
  auto body = frame.subspan(kFramePrefix);
  return decode_body(std::string_view(reinterpret_cast<const char*>(body.data()), body.size()));
}

std::vector<Envelope> decode_all(std::span<const std::uint8_t> bytes) {
  std::vector<Envelope> out;
  while (!bytes.empty()) {
    auto n = frame_size(bytes);
    if (bytes.size() < n) throw Error(ErrorCode::kTruncatedFrame, "last frame is incomplete");
    out.push_back(decode(bytes.first(n)));
    bytes = bytes.subspan(n);
  }
  return out;
}

std::string describe(const Envelope& env) {
  std::string s(to_string(env.kind()));
  if (env.is<DecMsg>()) {
    const auto& m = env.as<DecMsg>();
    s += " iter=" + std::to_string(m.iteration) + " phase=" + std::to_string(m.phase);
  } else if (env.is<TdmMsg>()) {
    s += " slot=" + std::to_string(env.as<TdmMsg>().slot);
  }
  return s;
}

}  // namespace flamesh
