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
#include <filesystem>
#include <span>
#include <vector>

#include "strata/cluster.hpp"

namespace strata {

/// Binary layout, little-endian:
///   "STRATACK" | u32 version | u8 scalar bytes | 3 reserved | u64 model
///   fingerprint | i64 iteration | u64 data cursor | u32 workers |
///   server section | worker sections | u32 CRC-32 of everything before.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint32_t version = 0;
  std::uint8_t scalar_bytes = 0;
  std::uint64_t fingerprint = 0;
  std::int64_t iteration = 0;
  std::uint64_t data_cursor = 0;
  std::uint32_t workers = 0;
  std::size_t file_bytes = 0;
};

template <Real T>
std::vector<std::uint8_t> encode_checkpoint(const ClusterSnapshot<T>& snap,
                                            std::uint64_t fingerprint);

/// Throws ChecksumError on a CRC mismatch and FormatError on any other
/// inconsistency, including a fingerprint or precision that differs from
/// the caller's.
template <Real T>
ClusterSnapshot<T> decode_checkpoint(std::span<const std::uint8_t> bytes,
                                     std::uint64_t fingerprint);

/// Validates the checksum and header only.
CheckpointInfo inspect_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace strata
