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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "strata/sufficient_factor.hpp"
#include "strata/tensor.hpp"

namespace strata {

/// Frame layout (all integers little-endian):
///
///   offset size field
///        0    2 magic 0x50 0x44 ("PD")
///        2    1 version: 0x01, high bit set when scalars are 64-bit
///        3    1 msg_type
///        4    2 worker_id
///        6    2 layer_id
///        8    4 clock
///       12    8 payload length
///       20    . payload
///
/// Payload layouts are listed in docs/wire-format.md.
inline constexpr std::size_t kFrameHeaderSize = 20;
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::uint8_t kWide = 0x80;

enum class MsgType : std::uint8_t {
  kPushFull = 1,
  kPushSF = 2,
  kPullRequest = 3,
  kPullResponse = 4,
  kSFBroadcast = 5,
  kClockAdvance = 6,
  kAck = 7,
  kCheckpoint = 8,
};

std::string_view to_string(MsgType t);

enum class AckStatus : std::uint8_t {
  kOk = 0,
  kDuplicate = 1,  // update already applied; discarded
  kStale = 2,      // clock older than the last push; rejected
  kHello = 3,      // first frame on a fresh connection, identifies the sender
};

/// Parameters served to a worker, with the last applied clock of every worker
/// for that layer.
template <Real T>
struct PullPayload {
  std::vector<std::uint32_t> stamps;  // index p-1
  Matrix<T> params;
  friend bool operator==(const PullPayload&, const PullPayload&) = default;
};

template <Real T>
using Payload = std::variant<std::monostate,            // PullRequest, ClockAdvance
                             Matrix<T>,                 // PushFull
                             SufficientFactorSet<T>,    // PushSF, SFBroadcast
                             PullPayload<T>,            // PullResponse
                             AckStatus,                 // Ack
                             std::vector<std::uint8_t>  // Checkpoint
                             >;

template <Real T>
struct UpdateMessage {
  MsgType type = MsgType::kAck;
  std::uint16_t worker_id = 0;
  std::uint16_t layer_id = 0;
  std::uint32_t clock = 0;
  Payload<T> payload;

  friend bool operator==(const UpdateMessage&, const UpdateMessage&) = default;
};

struct FrameHeader {
  bool wide = false;
  MsgType type = MsgType::kAck;
  std::uint16_t worker_id = 0;
  std::uint16_t layer_id = 0;
  std::uint32_t clock = 0;
  std::uint64_t payload_len = 0;

  std::uint64_t frame_size() const { return kFrameHeaderSize + payload_len; }
};

/// Parses the fixed header. Throws ProtocolError on bad magic, version or type.
FrameHeader parse_header(std::span<const std::uint8_t> bytes);

/// Scalars carried by the message's matrix or factor payload.
template <Real T>
std::size_t float_count(const UpdateMessage<T>& msg);

/// Throws EncodingError when the payload does not match the message type.
template <Real T>
std::vector<std::uint8_t> encode(const UpdateMessage<T>& msg);

template <Real T>
struct Decoded {
  UpdateMessage<T> message;
  std::size_t consumed = 0;
};

/// Decodes the first frame in `bytes`. Returns nullopt when more bytes are
/// needed; throws ProtocolError on malformed input or a precision mismatch.
template <Real T>
std::optional<Decoded<T>> try_decode(std::span<const std::uint8_t> bytes);

/// Decodes one complete frame; throws ProtocolError if it is truncated.
template <Real T>
UpdateMessage<T> decode(std::span<const std::uint8_t> bytes);

// Message builders.
template <Real T>
UpdateMessage<T> make_clock_advance(int worker, std::uint32_t clock) {
  return {MsgType::kClockAdvance, static_cast<std::uint16_t>(worker), 0, clock, {}};
}

template <Real T>
UpdateMessage<T> make_ack(int worker, int layer, std::uint32_t clock, AckStatus status) {
  return {MsgType::kAck, static_cast<std::uint16_t>(worker), static_cast<std::uint16_t>(layer),
          clock, status};
}

/// Node id 0 is the server; workers are 1..P.
inline constexpr int kServerNode = 0;

/// A message together with the node it is addressed to.
template <Real T>
struct Outgoing {
  int dest = kServerNode;
  UpdateMessage<T> msg;
};

}  // namespace strata
