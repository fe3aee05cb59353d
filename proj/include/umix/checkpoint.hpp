/*
 * Copyright 2026 The umix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Binary checkpoint container.
//
//   "UMIX" | u32 version | u64 header length | header (UTF-8 JSON)
//   | u64 tensor count | per tensor: u32 name length, name, u32 rank,
//     u64 dims[rank], f64 payload[numel]
//
// All integers and doubles are little-endian.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/train.hpp"

namespace umix {

inline constexpr char kCheckpointMagic[4] = {'U', 'M', 'I', 'X'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kMalformed };

  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t.value;
    return nullptr;
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated while reading ") +
                                what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic, 4);
  detail::put(out, kCheckpointVersion);
  const std::string header = ck.header.dump();
  detail::put(out, static_cast<std::uint64_t>(header.size()));
  out += header;
  detail::put(out, static_cast<std::uint64_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    detail::put(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape().dims())
      detail::put(out, static_cast<std::uint64_t>(d));
    for (double v : t.value.data()) detail::put(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  using Kind = CheckpointError::Kind;
  detail::Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError(Kind::kBadMagic, "not a umix checkpoint (bad magic)");
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::kBadVersion,
                          "unsupported checkpoint version " +
                              std::to_string(version));
  Checkpoint ck;
  const auto header_len = r.get<std::uint64_t>("header length");
  if (header_len > r.remaining())
    throw CheckpointError(Kind::kTruncated, "checkpoint truncated in header");
  const auto header = r.take(static_cast<std::size_t>(header_len), "header");
  try {
    ck.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed,
                          std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    NamedTensor t;
    t.name = std::string(r.take(name_len, "tensor name"));
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank < 1 || rank > 4)
      throw CheckpointError(Kind::kMalformed, "tensor '" + t.name +
                                                  "' has rank " +
                                                  std::to_string(rank));
    std::vector<std::size_t> dims;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto v = r.get<std::uint64_t>("tensor dims");
      if (v == 0 || v > r.remaining())
        throw CheckpointError(v == 0 ? Kind::kMalformed : Kind::kTruncated,
                              "tensor '" + t.name + "' has invalid dimension " +
                                  std::to_string(v));
      numel *= v;
      if (numel > r.remaining())
        throw CheckpointError(Kind::kTruncated,
                              "checkpoint truncated in tensor '" + t.name + "'");
      dims.push_back(static_cast<std::size_t>(v));
    }
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (auto& v : values) v = r.get<double>("tensor payload");
    t.value = Tensor(Shape(dims), std::move(values));
    ck.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0)
    throw CheckpointError(Kind::kMalformed,
                          "trailing bytes after checkpoint tensor table");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f)
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Checkpoint make_checkpoint(const TrainState& s) {
  Checkpoint ck;
  ck.header["model"] = to_json(s.model.config());
  ck.header["train_state"] = {{"step", s.step},
                              {"epochs_done", s.epochs_done},
                              {"rng", rng_state(s.rng)}};
  const auto params = s.model.parameters();
  for (const Parameter* p : params) ck.tensors.push_back({p->name, p->value});
  for (std::size_t k = 0; k < params.size(); ++k)
    ck.tensors.push_back({"adam.m/" + params[k]->name, s.adam_m[k]});
  for (std::size_t k = 0; k < params.size(); ++k)
    ck.tensors.push_back({"adam.v/" + params[k]->name, s.adam_v[k]});
  return ck;
}

/// Rebuilds a training state; every parameter and moment must be present with
/// the shape implied by the stored model config.
inline TrainState restore_train_state(const Checkpoint& ck) {
  using Kind = CheckpointError::Kind;
  if (!ck.header.contains("model"))
    throw CheckpointError(Kind::kMalformed, "checkpoint header lacks 'model'");
  ModelConfig config;
  try {
    config = config_from_json(ck.header.at("model"));
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kMalformed,
                          std::string("checkpoint model config: ") + e.what());
  }
  TrainState s = init_train_state(config, 0);

  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : ck.tensors)
    if (!by_name.emplace(t.name, &t.value).second)
      throw CheckpointError(Kind::kMalformed,
                            "duplicate tensor '" + t.name + "'");
  auto fetch = [&](const std::string& name, Tensor& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CheckpointError(Kind::kMalformed, "missing tensor '" + name + "'");
    if (!(it->second->shape() == dst.shape()))
      throw CheckpointError(Kind::kMalformed,
                            "tensor '" + name + "' has shape " +
                                it->second->shape().to_string() + ", expected " +
                                dst.shape().to_string());
    dst = *it->second;
    by_name.erase(it);
  };
  auto params = s.model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    fetch(params[k]->name, params[k]->value);
    fetch("adam.m/" + params[k]->name, s.adam_m[k]);
    fetch("adam.v/" + params[k]->name, s.adam_v[k]);
  }
  if (!by_name.empty())
    throw CheckpointError(Kind::kMalformed,
                          "unexpected tensor '" + by_name.begin()->first + "'");

  try {
    const auto& ts = ck.header.at("train_state");
    s.step = ts.at("step").get<std::uint64_t>();
    s.epochs_done = ts.at("epochs_done").get<std::size_t>();
    std::istringstream is(ts.at("rng").get<std::string>());
    is >> s.rng;
    if (!is)
      throw CheckpointError(Kind::kMalformed, "unreadable rng state");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed,
                          std::string("checkpoint train_state: ") + e.what());
  }
  return s;
}

}  // namespace umix
