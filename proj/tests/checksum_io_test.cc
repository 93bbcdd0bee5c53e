// Copyright 2026-present the vecserve project
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
#include <cstring>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vecserve/checksum.h"
#include "vecserve/io.h"
#include "vecserve/vectors.h"

using namespace vecserve;
using vecserve::testing::TempDir;

namespace {

uint64_t hash_string(const std::string& s, uint64_t seed = 0) {
  return xxh64({reinterpret_cast<const std::byte*>(s.data()), s.size()}, seed);
}

}  // namespace

TEST(Xxh64Test, PublishedVectors) {
  EXPECT_EQ(hash_string(""), 0xEF46DB3751D8E999ULL);
  EXPECT_EQ(hash_string("a"), 0xD24EC4F1A98C6E5BULL);
  EXPECT_EQ(hash_string("abc"), 0x44BC2CF5AD770999ULL);
}

TEST(Xxh64Test, StreamingMatchesOneShot) {
  std::string data;
  for (int i = 0; i < 1000; ++i) data.push_back(static_cast<char>(i * 31 + 7));
  for (std::size_t chunk : {1u, 3u, 31u, 32u, 33u, 500u}) {
    Xxh64 h(99);
    for (std::size_t off = 0; off < data.size(); off += chunk) {
      h.update(data.data() + off, std::min(chunk, data.size() - off));
    }
    EXPECT_EQ(h.digest(), hash_string(data, 99)) << "chunk " << chunk;
  }
}

TEST(ByteReaderTest, OverrunIsCorruptIndex) {
  std::byte buf[6]{};
  ByteReader r(buf);
  r.read<uint32_t>();
  try {
    r.read<uint32_t>();
    FAIL() << "expected CorruptIndex";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptIndex);
  }
}

TEST(IoTest, AtomicWriteReplacesContents) {
  TempDir dir;
  write_file_atomic(dir / "f", "first");
  write_file_atomic(dir / "f", "second");
  EXPECT_EQ(read_file(dir / "f"), "second");
  EXPECT_FALSE(std::filesystem::exists(dir / "f.tmp"));
}

TEST(VectorsTest, SimilarityExamples) {
  const float v[2] = {0.6f, 0.8f};
  const float w[2] = {1.0f, 0.0f};
  EXPECT_NEAR(similarity(VectorView(v, 2), VectorView(w, 2)), 0.6f, 1e-7);
  EXPECT_NEAR(similarity(VectorView(v, 2), VectorView(v, 2)), 1.0f, 1e-6);
  const float e1[3] = {1, 0, 0};
  const float e2[3] = {0, 1, 0};
  EXPECT_EQ(similarity(VectorView(e1, 3), VectorView(e2, 3)), 0.0f);
}

TEST(VectorsTest, DimensionMismatchThrows) {
  const float a[2] = {1, 0};
  const float b[3] = {1, 0, 0};
  try {
    similarity(VectorView(a, 2), VectorView(b, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimension);
  }
}

TEST(VectorsTest, SymmetricAndBounded) {
  auto m = vecserve::testing::random_unit_vectors(200, 37, 5);
  for (std::size_t i = 0; i + 1 < m.rows(); ++i) {
    float ab = similarity(m.row(i), m.row(i + 1));
    EXPECT_EQ(ab, similarity(m.row(i + 1), m.row(i)));
    EXPECT_LE(std::abs(ab), 1.0f + 1e-6f);
    EXPECT_NEAR(ab, vecserve::testing::oracle_dot(m.row(i).data(), m.row(i + 1).data(), 37), 1e-5);
  }
}

TEST(VectorsTest, NormalizeRejectsZeroAndNonFinite) {
  float z[4] = {0, 0, 0, 0};
  EXPECT_FALSE(normalize(z));
  float n[2] = {std::numeric_limits<float>::infinity(), 1.0f};
  EXPECT_FALSE(normalize(n));
  float ok[2] = {3, 4};
  EXPECT_TRUE(normalize(ok));
  EXPECT_FLOAT_EQ(ok[0], 0.6f);
}

TEST(VectorFileTest, RoundTripAndHeader) {
  TempDir dir;
  auto m = vecserve::testing::random_unit_vectors(17, 9, 1);
  write_vector_file(dir / "v.f32", m);
  VectorFile f(dir / "v.f32");
  EXPECT_EQ(f.count(), 17u);
  EXPECT_EQ(f.dim(), 9u);
  EXPECT_EQ(f.load(), m);
  auto h = read_vector_file_header(dir / "v.f32");
  EXPECT_EQ(h.count, 17u);
  EXPECT_EQ(std::filesystem::file_size(dir / "v.f32"), VectorFileHeader::kSize + 17 * 9 * sizeof(float));
}

TEST(VectorFileTest, TruncatedFileRejected) {
  TempDir dir;
  write_vector_file(dir / "v.f32", vecserve::testing::random_unit_vectors(4, 4, 1));
  std::filesystem::resize_file(dir / "v.f32", VectorFileHeader::kSize + 10);
  EXPECT_THROW(VectorFile(dir / "v.f32"), Error);
}
