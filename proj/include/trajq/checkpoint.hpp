// Copyright 2026 The trajq Authors. All rights reserved.
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

// Binary checkpoint container.
//
//   "TQDQN1"                         6 bytes
//   format version                   u32
//   tensor count                     u32
//   per tensor:
//     name length, name              u32, UTF-8 bytes
//     rank, dims                     u32, u32 x rank
//     payload                        f32 x prod(dims), row-major
//   global step                      u64
//   rng state words                  u64 until end of file
//
// All integers and reals are little-endian. The encoding is canonical, so
// save -> load -> save reproduces the same bytes.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trajq/tensor.hpp"

namespace trajq {

inline constexpr char kCheckpointMagic[6] = {'T', 'Q', 'D', 'Q', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
  bool operator==(const NamedTensor& o) const {
    return name == o.name && tensor.shape == o.tensor.shape && tensor.data == o.tensor.data;
  }
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::uint64_t global_step = 0;
  std::vector<std::uint64_t> rng_state;

  const Tensor<float>* find(std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t.tensor;
    return nullptr;
  }

  const Tensor<float>& at(std::string_view name) const {
    const auto* t = find(name);
    if (!t) throw CheckpointError("checkpoint has no tensor '" + std::string(name) + "'");
    return *t;
  }

  void put(std::string name, Tensor<float> t) {
    tensors.push_back(NamedTensor{std::move(name), std::move(t)});
  }

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::string_view take(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw CheckpointError(std::string("corrupt checkpoint: truncated while reading ") + what);
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(s[i]);
    return v;
  }

  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::uint8_t(s[i]);
    return v;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, std::uint32_t(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    if (t.data.size() != numel(t.shape)) {
      throw ShapeError("checkpoint tensor '" + name + "' has inconsistent shape");
    }
    detail::put_u32(out, std::uint32_t(name.size()));
    out += name;
    detail::put_u32(out, std::uint32_t(t.shape.size()));
    for (auto d : t.shape) detail::put_u32(out, std::uint32_t(d));
    for (float v : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  detail::put_u64(out, ck.global_step);
  for (auto w : ck.rng_state) detail::put_u64(out, w);
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  detail::Reader in(bytes);
  auto magic = in.take(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint: magic mismatch");
  }
  auto version = in.u32("format version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto count = in.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    auto len = in.u32("tensor name length");
    nt.name = std::string(in.take(len, "tensor name"));
    auto rank = in.u32("tensor rank");
    if (rank > 8) throw CheckpointError("corrupt checkpoint: tensor '" + nt.name + "' rank");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(in.u32("tensor dims"));
      n *= shape.back();
    }
    if (n * 4 > in.remaining()) {
      throw CheckpointError("corrupt checkpoint: truncated payload of '" + nt.name + "'");
    }
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(in.u32("tensor payload"));
    nt.tensor = Tensor<float>(std::move(shape), std::move(data));
    ck.tensors.push_back(std::move(nt));
  }
  ck.global_step = in.u64("global step");
  // The writer always stores a full mt19937_64 state, so any other length
  // means the file was cut short or padded.
  constexpr std::size_t kRngBytes = (std::mt19937_64::state_size + 1) * 8;
  if (in.remaining() != kRngBytes) {
    throw CheckpointError("corrupt checkpoint: rng state is " + std::to_string(in.remaining()) +
                          " bytes, expected " + std::to_string(kRngBytes));
  }
  while (in.remaining() > 0) ck.rng_state.push_back(in.u64("rng state"));
  return ck;
}

// Writes to a sibling temp file, then renames over `path`.
inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = serialize_checkpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw CheckpointError("short write to checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

// mt19937_64 state as 312 words plus the position index.
inline std::vector<std::uint64_t> rng_words(const std::mt19937_64& rng) {
  std::stringstream ss;
  ss << rng;
  std::vector<std::uint64_t> out;
  std::uint64_t w;
  while (ss >> w) out.push_back(w);
  return out;
}

inline void restore_rng(std::mt19937_64& rng, const std::vector<std::uint64_t>& words) {
  if (words.size() != std::mt19937_64::state_size + 1) {
    throw CheckpointError("checkpoint rng state has " + std::to_string(words.size()) +
                          " words, expected " +
                          std::to_string(std::mt19937_64::state_size + 1));
  }
  std::stringstream ss;
  for (auto w : words) ss << w << ' ';
  ss >> rng;
  if (!ss) throw CheckpointError("checkpoint rng state does not parse");
}

}  // namespace trajq
