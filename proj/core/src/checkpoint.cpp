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

#include "strata/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <string>

#include "strata/bytes.hpp"
#include "strata/errors.hpp"

namespace strata {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'R', 'A', 'T', 'A', 'C', 'K'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8 + 8 + 8 + 4;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

template <Real T>
void put_matrix(ByteWriter& w, const Matrix<T>& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.scalars<T>(m.data());
}

template <Real T>
Matrix<T> get_matrix(ByteReader& r) {
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if ((rows == 0) != (cols == 0)) throw FormatError("checkpoint: malformed matrix shape");
  if (rows == 0) return {};
  if (rows * cols > r.remaining() / sizeof(T)) throw FormatError("checkpoint: truncated matrix");
  return Matrix<T>(rows, cols, r.scalars<T>(rows * cols));
}

template <Real T>
void put_matrices(ByteWriter& w, const std::vector<Matrix<T>>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& m : v) put_matrix(w, m);
}

template <Real T>
std::vector<Matrix<T>> get_matrices(ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated layer list");
  std::vector<Matrix<T>> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(get_matrix<T>(r));
  return out;
}

void put_ints(ByteWriter& w, const std::vector<std::int64_t>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (auto x : v) w.i64(x);
}

std::vector<std::int64_t> get_ints(ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated integer list");
  std::vector<std::int64_t> out(n);
  for (auto& x : out) x = r.i64();
  return out;
}

CheckpointInfo read_header(ByteReader& r, std::size_t file_bytes) {
  auto magic = r.bytes(8);
  if (std::memcmp(magic.data(), kMagic, 8) != 0) throw FormatError("not a strata checkpoint");
  CheckpointInfo info;
  info.file_bytes = file_bytes;
  info.version = r.u32();
  if (info.version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(info.version));
  info.scalar_bytes = r.u8();
  r.bytes(3);
  info.fingerprint = r.u64();
  info.iteration = r.i64();
  info.data_cursor = r.u64();
  info.workers = r.u32();
  return info;
}

std::span<const std::uint8_t> verified_body(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + 4) throw FormatError("checkpoint: file too short");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  if (tail.u32() != crc32_of(body)) throw ChecksumError("checkpoint: CRC-32 mismatch");
  return body;
}

}  // namespace

template <Real T>
std::vector<std::uint8_t> encode_checkpoint(const ClusterSnapshot<T>& snap,
                                            std::uint64_t fingerprint) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 8});
  w.u32(kCheckpointVersion);
  w.u8(sizeof(T));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u64(fingerprint);
  w.i64(snap.iteration);
  w.u64(snap.data_cursor);
  w.u32(static_cast<std::uint32_t>(snap.workers.size()));

  put_matrices(w, snap.server.model.params);
  put_matrices(w, snap.server.solver.velocity);
  w.i64(snap.server.solver.iteration);
  put_ints(w, snap.server.clocks);
  put_ints(w, snap.server.applied);
  for (const auto& ws : snap.workers) {
    w.i64(ws.iteration);
    put_matrices(w, ws.model.params);
    put_matrices(w, ws.solver.velocity);
    w.i64(ws.solver.iteration);
    put_ints(w, ws.peer_clocks);
    put_ints(w, ws.applied);
    put_ints(w, ws.fresh_for);
  }
  w.u32(crc32_of(out));
  return out;
}

template <Real T>
ClusterSnapshot<T> decode_checkpoint(std::span<const std::uint8_t> bytes,
                                     std::uint64_t fingerprint) {
  ByteReader r(verified_body(bytes));
  const CheckpointInfo info = read_header(r, bytes.size());
  if (info.scalar_bytes != sizeof(T))
    throw FormatError("checkpoint holds " + std::to_string(info.scalar_bytes * 8) +
                      "-bit parameters, expected " + std::to_string(sizeof(T) * 8));
  if (info.fingerprint != fingerprint)
    throw FormatError("checkpoint was written for a different model");

  ClusterSnapshot<T> s;
  s.iteration = info.iteration;
  s.data_cursor = info.data_cursor;
  s.server.model.params = get_matrices<T>(r);
  s.server.solver.velocity = get_matrices<T>(r);
  s.server.solver.iteration = r.i64();
  s.server.clocks = get_ints(r);
  s.server.applied = get_ints(r);
  for (std::uint32_t i = 0; i < info.workers; ++i) {
    WorkerSnapshot<T> ws;
    ws.iteration = r.i64();
    ws.model.params = get_matrices<T>(r);
    ws.solver.velocity = get_matrices<T>(r);
    ws.solver.iteration = r.i64();
    ws.peer_clocks = get_ints(r);
    ws.applied = get_ints(r);
    ws.fresh_for = get_ints(r);
    s.workers.push_back(std::move(ws));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return s;
}

CheckpointInfo inspect_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(verified_body(bytes));
  return read_header(r, bytes.size());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template std::vector<std::uint8_t> encode_checkpoint(const ClusterSnapshot<float>&, std::uint64_t);
template std::vector<std::uint8_t> encode_checkpoint(const ClusterSnapshot<double>&, std::uint64_t);
template ClusterSnapshot<float> decode_checkpoint(std::span<const std::uint8_t>, std::uint64_t);
template ClusterSnapshot<double> decode_checkpoint(std::span<const std::uint8_t>, std::uint64_t);

}  // namespace strata
