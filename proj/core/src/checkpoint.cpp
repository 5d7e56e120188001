// Copyright 2026 The aflm Authors. All Rights Reserved.
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


#include "aflm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "aflm/config.hpp"
#include "aflm/errors.hpp"
#include "json_convert.hpp"

namespace aflm {

using detail::json;

namespace {

constexpr char kMagic[8] = {'A', 'F', 'L', 'M', 'C', 'K', 'P', 'T'};

template <typename U>
U to_little(U v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    U out{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return out;
  } else {
    return v;
  }
}

class Writer {
 public:
  template <typename U>
  void put(U v) {
    v = to_little(v);
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out_.append(buf, sizeof(U));
  }
  void bytes(std::string_view s) { out_.append(s); }
  std::size_t size() const noexcept { return out_.size(); }
  std::string_view view(std::size_t from) const { return std::string_view(out_).substr(from); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return to_little(v);
  }
  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t offset() const noexcept { return pos_; }
  std::string_view since(std::size_t from) const { return data_.substr(from, pos_ - from); }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw IntegrityError("checkpoint " + msg + " at offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) fail(std::string("truncated while reading ") + what, pos_);
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Matrix<float>& m) {
  const std::size_t start = w.size();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.put<std::uint32_t>(2);
  w.put<std::uint64_t>(m.rows);
  w.put<std::uint64_t>(m.cols);
  for (const float f : m.data) w.put<std::uint32_t>(std::bit_cast<std::uint32_t>(f));
  w.put<std::uint32_t>(crc32_of(w.view(start)));
}

void read_tensor(Reader& r, const std::string& expected_name, Matrix<float>& m) {
  const std::size_t start = r.offset();
  const auto name_len = r.get<std::uint32_t>("tensor name length");
  const auto name = r.bytes(name_len, "tensor name");
  if (name != expected_name) {
    r.fail("expected tensor '" + expected_name + "' but found '" + std::string(name) + "'", start);
  }
  const auto ndim = r.get<std::uint32_t>("tensor rank");
  if (ndim != 2) r.fail("unsupported rank for tensor " + expected_name, start);
  const auto rows = r.get<std::uint64_t>("tensor shape");
  const auto cols = r.get<std::uint64_t>("tensor shape");
  if (rows != m.rows || cols != m.cols) {
    r.fail("shape mismatch for tensor " + expected_name, start);
  }
  const auto payload = r.bytes(rows * cols * sizeof(float), "tensor data");
  for (std::size_t k = 0; k < m.data.size(); ++k) {
    std::uint32_t bits;
    std::memcpy(&bits, payload.data() + k * sizeof(float), sizeof bits);
    m.data[k] = std::bit_cast<float>(to_little(bits));
  }
  const auto body = r.since(start);
  const std::size_t crc_at = r.offset();
  if (r.get<std::uint32_t>("tensor checksum") != crc32_of(body)) {
    r.fail("checksum mismatch for tensor " + expected_name, crc_at);
  }
}

json manifest_json(const CheckpointManifest& m) {
  json j;
  j["format_version"] = json::array({m.format_major, m.format_minor});
  j["model"] = detail::model_config_json(m.model);
  j["tokenizer_hash"] = m.tokenizer_hash;
  j["tokenizer_file"] = m.tokenizer_file;
  j["stage"] = std::string(to_string(m.stage));
  j["step"] = m.step;
  j["reset_count"] = m.reset_count;
  j["rng_state"] = m.rng_state;
  j["schedule"] = m.schedule_json.empty() ? json(nullptr) : json::parse(m.schedule_json);
  j["seed"] = m.seed;
  j["variant"] = m.variant;
  j["arm"] = m.arm;
  j["lineage"] = m.lineage;
  return j;
}

CheckpointManifest manifest_from(const json& j) {
  CheckpointManifest m;
  const auto version = j.at("format_version");
  m.format_major = version.at(0).get<std::uint32_t>();
  m.format_minor = version.at(1).get<std::uint32_t>();
  std::vector<std::string> problems;
  detail::FieldReader mr(j.at("model"), "model.", problems);
  detail::read_model_config(mr, m.model);
  mr.finish();
  if (!problems.empty()) throw json::other_error::create(501, problems.front(), nullptr);
  m.tokenizer_hash = j.at("tokenizer_hash").get<std::string>();
  m.tokenizer_file = j.at("tokenizer_file").get<std::string>();
  m.stage = parse_stage(j.at("stage").get<std::string>());
  m.step = j.at("step").get<std::int64_t>();
  m.reset_count = j.at("reset_count").get<std::int64_t>();
  m.rng_state = j.at("rng_state").get<std::string>();
  m.schedule_json = j.at("schedule").is_null() ? std::string() : j.at("schedule").dump();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.variant = j.at("variant").get<std::string>();
  m.arm = j.at("arm").get<std::string>();
  m.lineage = j.at("lineage").get<std::vector<std::string>>();
  return m;
}

}  // namespace

std::uint32_t crc32_of(std::string_view bytes) noexcept {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  if (!(ck.params.config == ck.manifest.model)) {
    throw ConfigError("checkpoint manifest model config does not match the parameters");
  }
  Writer w;
  w.bytes(std::string_view(kMagic, sizeof kMagic));
  w.put<std::uint32_t>(ck.manifest.format_major);
  w.put<std::uint32_t>(ck.manifest.format_minor);
  const std::string manifest = manifest_json(ck.manifest).dump();
  w.put<std::uint64_t>(manifest.size());
  w.bytes(manifest);
  w.put<std::uint32_t>(crc32_of(manifest));

  const auto tensors = ck.params.tensors();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) write_tensor(w, t.name, *t.tensor);

  if (ck.optimizer) {
    const auto& opt = *ck.optimizer;
    if (opt.m.size() != tensors.size() || opt.v.size() != tensors.size()) {
      throw ConfigError("optimizer state layout does not match the parameters");
    }
    w.put<std::uint8_t>(1);
    w.put<std::int64_t>(opt.t);
    for (std::size_t i = 0; i < tensors.size(); ++i) write_tensor(w, "m." + tensors[i].name, opt.m[i]);
    for (std::size_t i = 0; i < tensors.size(); ++i) write_tensor(w, "v." + tensors[i].name, opt.v[i]);
  } else {
    w.put<std::uint8_t>(0);
  }
  w.put<std::uint32_t>(crc32_of(w.view(0)));
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes,
                                  const std::optional<std::string>& expected_tokenizer_hash) {
  Reader r(bytes);
  if (bytes.size() < 4) r.fail("is too short", 0);
  if (r.bytes(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic)) {
    r.fail("has a bad magic number", 0);
  }
  const auto major = r.get<std::uint32_t>("format version");
  const auto minor = r.get<std::uint32_t>("format version");
  if (major != kCheckpointMajor) {
    throw VersionError("unsupported checkpoint format version " + std::to_string(major) + "." +
                       std::to_string(minor) + " (this build reads " +
                       std::to_string(kCheckpointMajor) + ".x)");
  }
  const auto manifest_len = r.get<std::uint64_t>("manifest length");
  const std::size_t manifest_at = r.offset();
  const auto manifest_text = r.bytes(manifest_len, "manifest");
  const std::size_t crc_at = r.offset();
  if (r.get<std::uint32_t>("manifest checksum") != crc32_of(manifest_text)) {
    r.fail("manifest checksum mismatch", crc_at);
  }
  Checkpoint ck;
  try {
    ck.manifest = manifest_from(json::parse(manifest_text));
  } catch (const std::exception& e) {
    r.fail(std::string("manifest is malformed (") + e.what() + ")", manifest_at);
  }
  if (ck.manifest.format_major != major || ck.manifest.format_minor != minor) {
    r.fail("manifest version disagrees with the header", manifest_at);
  }
  if (expected_tokenizer_hash && *expected_tokenizer_hash != ck.manifest.tokenizer_hash) {
    throw TokenizerMismatchError("tokenizer hash " + *expected_tokenizer_hash +
                                 " does not match the checkpoint's " + ck.manifest.tokenizer_hash);
  }
  try {
    ck.manifest.model.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("manifest has an invalid model config (") + e.what() + ")", manifest_at);
  }

  ck.params = ModelParameters::zeros(ck.manifest.model);
  auto tensors = ck.params.tensors();
  const std::size_t count_at = r.offset();
  if (r.get<std::uint32_t>("tensor count") != tensors.size()) r.fail("tensor count mismatch", count_at);
  for (auto& t : tensors) read_tensor(r, t.name, *t.tensor);

  const std::size_t flag_at = r.offset();
  const auto flag = r.get<std::uint8_t>("optimizer flag");
  if (flag == 1) {
    OptimizerState opt = OptimizerState::zeros_like(ck.params);
    opt.t = r.get<std::int64_t>("optimizer step");
    for (std::size_t i = 0; i < tensors.size(); ++i) read_tensor(r, "m." + tensors[i].name, opt.m[i]);
    for (std::size_t i = 0; i < tensors.size(); ++i) read_tensor(r, "v." + tensors[i].name, opt.v[i]);
    ck.optimizer = std::move(opt);
  } else if (flag != 0) {
    r.fail("bad optimizer flag", flag_at);
  }
  const std::size_t body_end = r.offset();
  if (r.get<std::uint32_t>("file checksum") != crc32_of(bytes.substr(0, body_end))) {
    r.fail("file checksum mismatch", body_end);
  }
  if (r.offset() != bytes.size()) r.fail("has trailing bytes", r.offset());
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_tokenizer_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str(), expected_tokenizer_hash);
}

}  // namespace aflm
