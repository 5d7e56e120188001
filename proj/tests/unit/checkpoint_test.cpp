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


#include <gtest/gtest.h>

#include <string>

#include "aflm/checkpoint.hpp"
#include "aflm/errors.hpp"
#include "aflm/random.hpp"
#include "test_util.hpp"

namespace {

using namespace aflm;

Checkpoint sample_checkpoint(bool with_optimizer) {
  auto cfg = ModelConfig::preset("tiny");
  cfg.vocab_size = 40;
  Checkpoint c;
  c.params = init_model<float>(cfg, 3);
  c.manifest.model = cfg;
  c.manifest.tokenizer_hash = "0123456789abcdef";
  c.manifest.tokenizer_file = "tokenizer.base.txt";
  c.manifest.stage = Stage::adapt;
  c.manifest.step = 17;
  c.manifest.reset_count = 2;
  Rng rng(5);
  rng.normal();  // leaves a cached spare in the state
  c.manifest.rng_state = rng.state();
  c.manifest.schedule_json = R"({"peak_lr":0.001})";
  c.manifest.seed = 99;
  c.manifest.variant = "active_forgetting";
  c.manifest.arm = "AFA";
  c.manifest.lineage = {"pretrain", "adapt"};
  if (with_optimizer) {
    auto opt = OptimizerState::zeros_like(c.params);
    Rng fill(1);
    for (auto& m : opt.m) {
      for (auto& x : m.data) x = static_cast<float>(fill.normal());
    }
    for (auto& v : opt.v) {
      for (auto& x : v.data) x = static_cast<float>(fill.uniform());
    }
    opt.t = 17;
    c.optimizer = opt;
  }
  return c;
}

void expect_same(const Checkpoint& a, const Checkpoint& b) {
  EXPECT_EQ(a.manifest, b.manifest);
  const auto ra = a.params.tensors(), rb = b.params.tensors();
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].name, rb[i].name);
    EXPECT_TRUE(bitwise_equal(*ra[i].tensor, *rb[i].tensor)) << ra[i].name;
  }
  ASSERT_EQ(a.optimizer.has_value(), b.optimizer.has_value());
  if (a.optimizer) {
    EXPECT_EQ(a.optimizer->t, b.optimizer->t);
    for (std::size_t i = 0; i < a.optimizer->m.size(); ++i) {
      EXPECT_TRUE(bitwise_equal(a.optimizer->m[i], b.optimizer->m[i]));
      EXPECT_TRUE(bitwise_equal(a.optimizer->v[i], b.optimizer->v[i]));
    }
  }
}

TEST(Checkpoint, RoundTripBitExact) {
  for (bool opt : {false, true}) {
    const auto c = sample_checkpoint(opt);
    const auto bytes = serialize_checkpoint(c);
    const auto back = deserialize_checkpoint(bytes);
    expect_same(c, back);
    EXPECT_EQ(serialize_checkpoint(back), bytes);
    Rng a(0), b(0);
    b.set_state(back.manifest.rng_state);
    a.set_state(c.manifest.rng_state);
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(Checkpoint, SaveLoadSaveByteIdentical) {
  aflm::testing::TempDir dir;
  const auto c = sample_checkpoint(true);
  save_checkpoint(c, dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(loaded, dir / "b.ckpt");
  EXPECT_EQ(aflm::testing::read_file(dir / "a.ckpt"), aflm::testing::read_file(dir / "b.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = serialize_checkpoint(sample_checkpoint(false));
  EXPECT_EQ(bytes.substr(0, 8), "AFLMCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kCheckpointMajor);
  EXPECT_EQ(bytes[9], 0);
}

TEST(Checkpoint, EverySingleByteCorruptionDetected) {
  const auto bytes = serialize_checkpoint(sample_checkpoint(true));
  // All header/manifest bytes plus a stride through the payload.
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < 600 && i < bytes.size(); ++i) positions.push_back(i);
  for (std::size_t i = 600; i < bytes.size(); i += 997) positions.push_back(i);
  positions.push_back(bytes.size() - 1);
  for (const auto pos : positions) {
    auto bad = bytes;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
    EXPECT_THROW(deserialize_checkpoint(bad), IntegrityError) << "offset " << pos;
  }
}

TEST(Checkpoint, ErrorsCarryOffset) {
  auto bytes = serialize_checkpoint(sample_checkpoint(false));
  bytes[bytes.size() / 2] ^= 1;
  try {
    deserialize_checkpoint(bytes);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, TruncationDetected) {
  const auto bytes = serialize_checkpoint(sample_checkpoint(false));
  for (std::size_t len : {std::size_t{0}, std::size_t{5}, std::size_t{30}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, len)), IntegrityError) << len;
  }
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), IntegrityError);
}

TEST(Checkpoint, UnknownMajorVersion) {
  auto bytes = serialize_checkpoint(sample_checkpoint(false));
  bytes[8] = 2;
  EXPECT_THROW(deserialize_checkpoint(bytes), VersionError);
}

TEST(Checkpoint, TokenizerHashMismatch) {
  const auto bytes = serialize_checkpoint(sample_checkpoint(false));
  EXPECT_NO_THROW(deserialize_checkpoint(bytes, std::string("0123456789abcdef")));
  EXPECT_THROW(deserialize_checkpoint(bytes, std::string("ffffffffffffffff")), TokenizerMismatchError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  aflm::testing::TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "nope.ckpt"), IoError);
}

TEST(Crc32, KnownVector) { EXPECT_EQ(crc32_of("123456789"), 0xCBF43926u); }

}  // namespace
