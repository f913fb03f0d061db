#pragma once

// Binary framing between the plant interface and the controller.
//
//   [type:1][seq:8, big-endian][payload_len:4, big-endian][payload]
//
// Batch payloads are concatenated fixed-width ciphertexts (Montgomery form,
// values below 2N²). Hello carries the session parameters and the modulus N.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cipherloop/big_uint.hpp"
#include "cipherloop/enc_controller.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/paillier.hpp"

namespace cipherloop::wire {

enum class MessageType : std::uint8_t {
  measurement = 0x01,
  control = 0x02,
  setpoint = 0x03,
  hello = 0x04,
  shutdown = 0x05,
};

inline constexpr std::size_t kHeaderBytes = 13;
/// Upper bound on a payload; a 1024-bit key with 64 ciphertexts is ~33 KiB.
inline constexpr std::uint32_t kMaxPayloadBytes = 1u << 24;

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::measurement: return "MeasurementBatch";
    case MessageType::control: return "ControlBatch";
    case MessageType::setpoint: return "SetpointBatch";
    case MessageType::hello: return "Hello";
    case MessageType::shutdown: return "Shutdown";
  }
  return "unknown";
}

struct Frame {
  MessageType type = MessageType::hello;
  std::uint64_t seq = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Frame&, const Frame&) = default;
};

namespace detail {

inline void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t bytes) {
  for (std::size_t i = bytes; i-- > 0;) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t bytes) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bytes; ++i) v = (v << 8) | in[i];
  return v;
}

/// Sequential big-endian reader over a payload.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t uint(std::size_t bytes) {
    need(bytes);
    const auto v = get_be(data_.subspan(pos_, bytes), bytes);
    pos_ += bytes;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t count) {
    need(count);
    const auto out = data_.subspan(pos_, count);
    pos_ += count;
    return out;
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t count) const {
    if (data_.size() - pos_ < count) throw ProtocolError("truncated payload");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline bool is_known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x05; }

struct FrameHeader {
  MessageType type;
  std::uint64_t seq;
  std::uint32_t payload_len;
};

inline FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw ProtocolError("truncated frame header");
  if (!is_known_type(bytes[0])) throw ProtocolError("unknown message type " + std::to_string(bytes[0]));
  const auto len = static_cast<std::uint32_t>(detail::get_be(bytes.subspan(9, 4), 4));
  if (len > kMaxPayloadBytes) throw ProtocolError("payload length " + std::to_string(len) + " exceeds the limit");
  return {static_cast<MessageType>(bytes[0]), detail::get_be(bytes.subspan(1, 8), 8), len};
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayloadBytes) throw ProtocolError("payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + f.payload.size());
  out.push_back(static_cast<std::uint8_t>(f.type));
  detail::put_be(out, f.seq, 8);
  detail::put_be(out, f.payload.size(), 4);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

/// Decodes exactly one frame occupying all of `bytes`.
inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes);
  if (bytes.size() != kHeaderBytes + h.payload_len) throw ProtocolError("frame length does not match its header");
  const auto payload = bytes.subspan(kHeaderBytes);
  return {h.type, h.seq, {payload.begin(), payload.end()}};
}

/// Splits complete frames off the front of a receive buffer.
class FrameAssembler {
 public:
  void append(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

  std::optional<Frame> next() {
    if (buffer_.size() < kHeaderBytes) return std::nullopt;
    const FrameHeader h = decode_header(buffer_);
    const std::size_t total = kHeaderBytes + h.payload_len;
    if (buffer_.size() < total) return std::nullopt;
    Frame f{h.type, h.seq, {buffer_.begin() + kHeaderBytes, buffer_.begin() + static_cast<std::ptrdiff_t>(total)}};
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
    return f;
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

// ---------------------------------------------------------------------------
// Ciphertext batches

inline Frame batch_frame(MessageType type, std::uint64_t seq, const paillier::PublicKey& pk,
                         std::span<const paillier::Ciphertext> batch) {
  Frame f{type, seq, {}};
  f.payload.reserve(batch.size() * pk.ciphertext_bytes());
  for (const auto& c : batch) {
    const auto bytes = paillier::serialize(pk, c);
    f.payload.insert(f.payload.end(), bytes.begin(), bytes.end());
  }
  return f;
}

inline CipherVector batch_ciphertexts(const Frame& f, const paillier::PublicKey& pk, std::size_t expected_count) {
  const std::size_t width = pk.ciphertext_bytes();
  if (f.payload.size() != expected_count * width) {
    throw ProtocolError(std::string(to_string(f.type)) + " carries " + std::to_string(f.payload.size()) +
                        " bytes, expected " + std::to_string(expected_count) + " x " + std::to_string(width));
  }
  CipherVector out;
  out.reserve(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    out.push_back(paillier::deserialize(pk, std::span(f.payload).subspan(i * width, width)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session parameters

enum class SetpointMode : std::uint32_t {
  randomized = 0,     ///< plant encrypts setpoints with fresh randomizers each step
  deterministic = 1,  ///< controller encrypts its configured setpoints with r = 1
};

struct SessionParams {
  std::uint32_t key_bits = 0;
  std::uint32_t w = 0;
  std::uint32_t n_prime = 0;
  std::uint32_t m = 0;
  std::uint32_t n_x = 0;
  std::uint32_t n_y = 0;
  std::uint32_t n_u = 0;
  std::uint32_t period = 0;  ///< reset period T; 0 means never reset
  std::uint32_t sample_period_us = 0;
  SetpointMode setpoint_mode = SetpointMode::randomized;
  BigUint n;  ///< public modulus

  friend bool operator==(const SessionParams&, const SessionParams&) = default;
};

inline Frame hello_frame(const SessionParams& p) {
  Frame f{MessageType::hello, 0, {}};
  for (const std::uint32_t v : {p.key_bits, p.w, p.n_prime, p.m, p.n_x, p.n_y, p.n_u, p.period, p.sample_period_us,
                                static_cast<std::uint32_t>(p.setpoint_mode)}) {
    detail::put_be(f.payload, v, 4);
  }
  const auto n = p.n.to_bytes_be((p.n.bit_length() + 7) / 8);
  detail::put_be(f.payload, n.size(), 4);
  f.payload.insert(f.payload.end(), n.begin(), n.end());
  return f;
}

inline SessionParams parse_hello(const Frame& f) {
  if (f.type != MessageType::hello) throw ProtocolError("expected Hello, got " + std::string(to_string(f.type)));
  detail::Reader r(f.payload);
  SessionParams p;
  for (std::uint32_t* field : {&p.key_bits, &p.w, &p.n_prime, &p.m, &p.n_x, &p.n_y, &p.n_u, &p.period, &p.sample_period_us}) {
    *field = static_cast<std::uint32_t>(r.uint(4));
  }
  const auto mode = r.uint(4);
  if (mode > 1) throw ProtocolError("unknown setpoint mode " + std::to_string(mode));
  p.setpoint_mode = static_cast<SetpointMode>(mode);
  const auto n_len = r.uint(4);
  p.n = BigUint::from_bytes_be(r.bytes(n_len));
  if (!r.done()) throw ProtocolError("trailing bytes in Hello");
  return p;
}

/// Name of the first field that differs, or nullopt when the sessions agree.
inline std::optional<std::string> first_mismatch(const SessionParams& a, const SessionParams& b) {
  if (a.key_bits != b.key_bits) return "key_bits";
  if (a.w != b.w) return "w";
  if (a.n_prime != b.n_prime) return "n_prime";
  if (a.m != b.m) return "m";
  if (a.n_x != b.n_x || a.n_y != b.n_y || a.n_u != b.n_u) return "dimensions";
  if (a.period != b.period) return "T";
  if (a.sample_period_us != b.sample_period_us) return "sample_period_us";
  if (a.setpoint_mode != b.setpoint_mode) return "setpoint_mode";
  if (a.n != b.n) return "public key";
  return std::nullopt;
}

inline SessionParams session_params(const ControllerSpec& spec, const paillier::PublicKey& pk, std::uint32_t sample_period_us,
                                    SetpointMode mode) {
  SessionParams p;
  p.key_bits = static_cast<std::uint32_t>(pk.key_bits());
  p.w = static_cast<std::uint32_t>(pk.word_count());
  p.n_prime = spec.codec.n_prime;
  p.m = spec.codec.m;
  p.n_x = static_cast<std::uint32_t>(spec.n_x);
  p.n_y = static_cast<std::uint32_t>(spec.n_y);
  p.n_u = static_cast<std::uint32_t>(spec.n_u);
  p.period = spec.period.is_infinite() ? 0 : static_cast<std::uint32_t>(*spec.period.steps);
  p.sample_period_us = sample_period_us;
  p.setpoint_mode = mode;
  p.n = pk.n();
  return p;
}

inline Frame shutdown_frame(std::uint64_t seq, std::string_view reason = {}) {
  return {MessageType::shutdown, seq, {reason.begin(), reason.end()}};
}

inline std::string shutdown_reason(const Frame& f) { return {f.payload.begin(), f.payload.end()}; }

}  // namespace cipherloop::wire
