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
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixture.h"
#include "vecserve/io.h"

using namespace vecserve;
using vecserve::testing::SwitchableEncoder;
using vecserve::testing::TempDir;

namespace {

class EmbedJobTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ingest(vecserve::testing::documents_from(synthetic_documents(80, 30, 2)), {8, 2, false}, dir_ / "store");
    store_ = std::make_unique<ChunkStore>(dir_ / "store");
    ASSERT_GT(store_->size(), 300u);
  }
  EmbedJobConfig config(std::size_t batch = 32) const {
    EmbedJobConfig cfg;
    cfg.batch_size = batch;
    return cfg;
  }

  TempDir dir_;
  std::unique_ptr<ChunkStore> store_;
};

// Fails after a fixed number of encode calls.
class FailingAfter final : public Encoder {
 public:
  FailingAfter(uint32_t dim, int ok_calls) : inner_(dim), ok_calls_(ok_calls) {}
  const EncoderDescriptor& descriptor() const override { return inner_.descriptor(); }
  Matrix encode(const std::vector<std::string>& texts) const override {
    if (calls_++ >= ok_calls_) throw RemoteEncoderError("connection reset", 0, 1, true);
    return inner_.encode(texts);
  }

 private:
  ReferenceEncoder inner_;
  int ok_calls_;
  mutable int calls_ = 0;
};

}  // namespace

TEST_F(EmbedJobTest, RowsAreEncodedChunks) {
  ReferenceEncoder enc(24);
  auto report = run_embed_job(*store_, enc, dir_ / "v.bin", config());
  EXPECT_TRUE(report.complete);
  EXPECT_EQ(report.checksum, file_checksum(dir_ / "v.bin"));
  VectorFile vf(dir_ / "v.bin");
  ASSERT_EQ(vf.count(), store_->size());
  ASSERT_EQ(vf.dim(), 24u);
  for (ChunkId id = 0; id < store_->size(); id += 13) {
    auto expected = enc.encode_one(store_->text(id));
    auto row = vf.row(id);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), expected.begin()));
  }
  EXPECT_FALSE(std::filesystem::exists(embed_partial_path(dir_ / "v.bin")));
}

TEST_F(EmbedJobTest, KilledProcessResumesToIdenticalBytes) {
  ReferenceEncoder enc(24);
  run_embed_job(*store_, enc, dir_ / "clean.bin", config());

  const auto out = dir_ / "killed.bin";
  pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    auto cfg = config();
    cfg.progress = [](std::size_t done, std::size_t total) {
      if (done * 2 >= total) ::_exit(0);
    };
    run_embed_job(*store_, enc, out, cfg);
    ::_exit(3);  // the job must not finish
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 0);
  ASSERT_FALSE(std::filesystem::exists(out));
  ASSERT_TRUE(std::filesystem::exists(embed_partial_path(out)));

  auto report = run_embed_job(*store_, enc, out, config());
  EXPECT_TRUE(report.complete);
  EXPECT_GT(report.resumed_from, 0u);
  EXPECT_EQ(report.resumed_from + report.encoded, report.total_batches);
  EXPECT_EQ(read_file(out), read_file(dir_ / "clean.bin"));
}

TEST_F(EmbedJobTest, TornBatchIsDiscardedOnResume) {
  ReferenceEncoder enc(24);
  run_embed_job(*store_, enc, dir_ / "clean.bin", config());
  const auto out = dir_ / "torn.bin";
  auto cfg = config();
  cfg.max_batches = 3;
  auto partial = run_embed_job(*store_, enc, out, cfg);
  EXPECT_FALSE(partial.complete);
  EXPECT_EQ(partial.checksum, 0u);
  {
    // Half-written next batch that the manifest never recorded.
    std::ofstream f(embed_partial_path(out), std::ios::binary | std::ios::app);
    f << std::string(24 * 4 * 5 + 3, '\x7f');
  }
  auto report = run_embed_job(*store_, enc, out, config());
  EXPECT_EQ(report.resumed_from, 3u);
  EXPECT_EQ(read_file(out), read_file(dir_ / "clean.bin"));
}

TEST_F(EmbedJobTest, EncoderFailureLeavesResumableState) {
  ReferenceEncoder enc(24);
  run_embed_job(*store_, enc, dir_ / "clean.bin", config());
  const auto out = dir_ / "fail.bin";
  FailingAfter failing(24, 4);
  EXPECT_THROW(run_embed_job(*store_, failing, out, config()), RemoteEncoderError);
  auto report = run_embed_job(*store_, enc, out, config());
  EXPECT_EQ(report.resumed_from, 4u);
  EXPECT_EQ(read_file(out), read_file(dir_ / "clean.bin"));
}

TEST_F(EmbedJobTest, FinishedJobRerunIsNoOp) {
  SwitchableEncoder enc(24, "reference");
  const auto out = dir_ / "v.bin";
  auto first = run_embed_job(*store_, enc, out, config());
  const int calls = enc.calls_.load();
  const auto mtime = std::filesystem::last_write_time(out);
  auto second = run_embed_job(*store_, enc, out, config());
  EXPECT_EQ(enc.calls_.load(), calls);
  EXPECT_EQ(second.encoded, 0u);
  EXPECT_TRUE(second.complete);
  EXPECT_EQ(second.checksum, first.checksum);
  EXPECT_EQ(std::filesystem::last_write_time(out), mtime);
}

TEST_F(EmbedJobTest, MismatchedResumeRejected) {
  ReferenceEncoder enc(24);
  const auto out = dir_ / "v.bin";
  auto cfg = config();
  cfg.max_batches = 2;
  run_embed_job(*store_, enc, out, cfg);

  auto code = [&](const Encoder& e, std::size_t batch) {
    try {
      run_embed_job(*store_, e, out, config(batch));
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::kIo;
  };
  EXPECT_EQ(code(ReferenceEncoder(16), 32), ErrorCode::kDimension);
  EXPECT_EQ(code(enc, 64), ErrorCode::kConfig);
  EXPECT_EQ(code(SwitchableEncoder(24, "other"), 32), ErrorCode::kConfig);

  // The partial file is untouched; the original settings still resume.
  auto report = run_embed_job(*store_, enc, out, config());
  EXPECT_EQ(report.resumed_from, 2u);
  EXPECT_TRUE(report.complete);
}

TEST_F(EmbedJobTest, ManifestRecordsProgress) {
  ReferenceEncoder enc(24);
  const auto out = dir_ / "v.bin";
  auto cfg = config();
  cfg.max_batches = 2;
  run_embed_job(*store_, enc, out, cfg);
  auto manifest = nlohmann::json::parse(read_file(embed_manifest_path(out)));
  EXPECT_EQ(manifest["completed_batches"], 2);
  EXPECT_EQ(manifest["complete"], false);
  EXPECT_EQ(manifest["count"], store_->size());
  EXPECT_EQ(manifest["dim"], 24);
  run_embed_job(*store_, enc, out, config());
  manifest = nlohmann::json::parse(read_file(embed_manifest_path(out)));
  EXPECT_EQ(manifest["complete"], true);
  EXPECT_EQ(manifest["checksum"].get<uint64_t>(), file_checksum(out));
}
