// Copyright 2026 The Strata Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "strata/wire.hpp"

#include <limits>
#include <string>

#include "strata/bytes.hpp"

namespace strata {

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::kPushFull: return "PushFull";
    case MsgType::kPushSF: return "PushSF";
    case MsgType::kPullRequest: return "PullRequest";
    case MsgType::kPullResponse: return "PullResponse";
    case MsgType::kSFBroadcast: return "SFBroadcast";
    case MsgType::kClockAdvance: return "ClockAdvance";
    case MsgType::kAck: return "Ack";
    case MsgType::kCheckpoint: return "Checkpoint";
  }
  return "?";
}

namespace {

constexpr std::uint8_t kMagic0 = 0x50;
constexpr std::uint8_t kMagic1 = 0x44;

template <Real T>
void write_matrix(ByteWriter& w, const Matrix<T>& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.scalars<T>(m.data());
}

template <Real T>
Matrix<T> read_matrix(ByteReader& r) {
  const std::size_t rows = r.u32(), cols = r.u32();
  if (rows == 0 || cols == 0) throw ProtocolError("matrix payload with zero dimension");
  if (r.remaining() / sizeof(T) / rows < cols) throw ProtocolError("matrix payload truncated");
  return Matrix<T>(rows, cols, r.scalars<T>(rows * cols));
}

template <Real T>
void write_factors(ByteWriter& w, const SufficientFactorSet<T>& s) {
  w.u32(static_cast<std::uint32_t>(s.m()));
  w.u32(static_cast<std::uint32_t>(s.n()));
  w.u32(static_cast<std::uint32_t>(s.pairs()));
  w.u8(s.has_bias() ? 1 : 0);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.f64(s.scale);
  w.scalars<T>(s.u.data());
  w.scalars<T>(s.v.data());
  if (s.has_bias()) {
    w.scalars<T>(s.bias_u.data());
    w.scalars<T>(s.bias_v.data());
  }
}

template <Real T>
SufficientFactorSet<T> read_factors(ByteReader& r, const FrameHeader& h) {
  SufficientFactorSet<T> s;
  const std::size_t m = r.u32(), n = r.u32(), k = r.u32();
  const std::uint8_t bias = r.u8();
  r.bytes(3);
  s.scale = r.f64();
  if (m == 0 || n == 0 || k == 0) throw ProtocolError("factor payload with zero dimension");
  if (bias > 1) throw ProtocolError("bad bias flag in factor payload");
  const std::size_t expect = k * (m + n) + (bias ? m + 1 : 0);
  if (r.remaining() != expect * sizeof(T))
    throw ProtocolError("factor payload length does not match its dimensions");
  s.u = Matrix<T>(k, m, r.scalars<T>(k * m));
  s.v = Matrix<T>(k, n, r.scalars<T>(k * n));
  if (bias) {
    s.bias_u = Vector<T>(r.scalars<T>(m));
    s.bias_v = Vector<T>(r.scalars<T>(1));
  }
  s.layer_id = h.layer_id;
  s.clock = h.clock;
  s.worker_id = h.worker_id;
  return s;
}

template <Real T>
[[noreturn]] void payload_mismatch(const UpdateMessage<T>& msg) {
  throw EncodingError(std::string("payload does not match message type ") +
                      std::string(to_string(msg.type)));
}

}  // namespace

FrameHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw ProtocolError("frame header truncated");
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) throw ProtocolError("bad frame magic");
  if ((bytes[2] & ~kWide) != kWireVersion)
    throw ProtocolError("unsupported wire version " + std::to_string(bytes[2] & ~kWide));
  ByteReader r(bytes.subspan(3, kFrameHeaderSize - 3));
  FrameHeader h;
  h.wide = (bytes[2] & kWide) != 0;
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 8) throw ProtocolError("unknown message type " + std::to_string(type));
  h.type = static_cast<MsgType>(type);
  h.worker_id = r.u16();
  h.layer_id = r.u16();
  h.clock = r.u32();
  h.payload_len = r.u64();
  if (h.payload_len > (std::numeric_limits<std::uint64_t>::max() >> 1))
    throw ProtocolError("payload length out of range");
  return h;
}

template <Real T>
std::size_t float_count(const UpdateMessage<T>& msg) {
  if (const auto* m = std::get_if<Matrix<T>>(&msg.payload)) return m->size();
  if (const auto* s = std::get_if<SufficientFactorSet<T>>(&msg.payload)) return s->float_count();
  if (const auto* p = std::get_if<PullPayload<T>>(&msg.payload)) return p->params.size();
  return 0;
}

template <Real T>
std::vector<std::uint8_t> encode(const UpdateMessage<T>& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + float_count(msg) * sizeof(T) + 64);
  ByteWriter w(out);
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(static_cast<std::uint8_t>(kWireVersion | (sizeof(T) == 8 ? kWide : 0)));
  w.u8(static_cast<std::uint8_t>(msg.type));
  w.u16(msg.worker_id);
  w.u16(msg.layer_id);
  w.u32(msg.clock);
  w.u64(0);  // patched below

  switch (msg.type) {
    case MsgType::kPushFull: {
      const auto* m = std::get_if<Matrix<T>>(&msg.payload);
      if (!m || m->empty()) payload_mismatch(msg);
      write_matrix(w, *m);
      break;
    }
    case MsgType::kPushSF:
    case MsgType::kSFBroadcast: {
      const auto* s = std::get_if<SufficientFactorSet<T>>(&msg.payload);
      if (!s || s->u.empty() || s->v.empty() || s->u.rows() != s->v.rows()) payload_mismatch(msg);
      write_factors(w, *s);
      break;
    }
    case MsgType::kPullResponse: {
      const auto* p = std::get_if<PullPayload<T>>(&msg.payload);
      if (!p || p->params.empty() || p->stamps.size() > 0xffff) payload_mismatch(msg);
      w.u16(static_cast<std::uint16_t>(p->stamps.size()));
      w.u16(0);
      for (auto s : p->stamps) w.u32(s);
      write_matrix(w, p->params);
      break;
    }
    case MsgType::kPullRequest:
    case MsgType::kClockAdvance:
      if (!std::holds_alternative<std::monostate>(msg.payload)) payload_mismatch(msg);
      break;
    case MsgType::kAck: {
      const auto* a = std::get_if<AckStatus>(&msg.payload);
      if (!a) payload_mismatch(msg);
      w.u8(static_cast<std::uint8_t>(*a));
      break;
    }
    case MsgType::kCheckpoint: {
      const auto* b = std::get_if<std::vector<std::uint8_t>>(&msg.payload);
      if (!b) payload_mismatch(msg);
      w.bytes(*b);
      break;
    }
    default:
      throw EncodingError("unknown message type");
  }

  const std::uint64_t len = out.size() - kFrameHeaderSize;
  if (len > (std::uint64_t{1} << 63)) throw EncodingError("payload exceeds 2^63 bytes");
  for (int i = 0; i < 8; ++i) out[12 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  return out;
}

template <Real T>
std::optional<Decoded<T>> try_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) {
    // Reject garbage as early as the magic allows.
    if (!bytes.empty() && bytes[0] != kMagic0) throw ProtocolError("bad frame magic");
    if (bytes.size() > 1 && bytes[1] != kMagic1) throw ProtocolError("bad frame magic");
    return std::nullopt;
  }
  const FrameHeader h = parse_header(bytes);
  if (h.wide != (sizeof(T) == 8))
    throw ProtocolError(std::string("frame carries ") + (h.wide ? "64" : "32") +
                        "-bit scalars, expected " + (sizeof(T) == 8 ? "64" : "32"));
  if (bytes.size() - kFrameHeaderSize < h.payload_len) return std::nullopt;

  ByteReader r(bytes.subspan(kFrameHeaderSize, h.payload_len));
  UpdateMessage<T> msg{h.type, h.worker_id, h.layer_id, h.clock, {}};
  try {
    switch (h.type) {
      case MsgType::kPushFull:
        msg.payload = read_matrix<T>(r);
        break;
      case MsgType::kPushSF:
      case MsgType::kSFBroadcast:
        msg.payload = read_factors<T>(r, h);
        break;
      case MsgType::kPullResponse: {
        PullPayload<T> p;
        const std::size_t n = r.u16();
        r.u16();
        p.stamps.resize(n);
        for (auto& s : p.stamps) s = r.u32();
        p.params = read_matrix<T>(r);
        msg.payload = std::move(p);
        break;
      }
      case MsgType::kPullRequest:
      case MsgType::kClockAdvance:
        break;
      case MsgType::kAck: {
        const std::uint8_t s = r.u8();
        if (s > static_cast<std::uint8_t>(AckStatus::kHello))
          throw ProtocolError("unknown ack status");
        msg.payload = static_cast<AckStatus>(s);
        break;
      }
      case MsgType::kCheckpoint: {
        auto b = r.bytes(r.remaining());
        msg.payload = std::vector<std::uint8_t>(b.begin(), b.end());
        break;
      }
    }
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed payload: ") + e.what());
  } catch (const ShapeError& e) {
    throw ProtocolError(std::string("malformed payload: ") + e.what());
  }
  if (r.remaining() != 0) throw ProtocolError("trailing bytes in payload");
  return Decoded<T>{std::move(msg), static_cast<std::size_t>(h.frame_size())};
}

template <Real T>
UpdateMessage<T> decode(std::span<const std::uint8_t> bytes) {
  auto d = try_decode<T>(bytes);
  if (!d) throw ProtocolError("truncated frame");
  return std::move(d->message);
}

#define STRATA_INSTANTIATE(T)                                                          \
  template std::size_t float_count(const UpdateMessage<T>&);                           \
  template std::vector<std::uint8_t> encode(const UpdateMessage<T>&);                  \
  template std::optional<Decoded<T>> try_decode<T>(std::span<const std::uint8_t>);     \
  template UpdateMessage<T> decode<T>(std::span<const std::uint8_t>);

STRATA_INSTANTIATE(float)
STRATA_INSTANTIATE(double)

#undef STRATA_INSTANTIATE

}  // namespace strata
