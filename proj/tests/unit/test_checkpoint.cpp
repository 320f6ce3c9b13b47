#include <gtest/gtest.h>

#include <fstream>

#include "patcnn/checkpoint.hpp"
#include "test_support.hpp"

using namespace patcnn;
using patcnn::testing::TempDir;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.channels = {2, 4, 4, 8};
  c.bottleneck = 8;
  return c;
}

Checkpoint sample_checkpoint() {
  ResUNet<float> model(tiny(), 5);
  Checkpoint ck;
  ck.model = tiny();
  ck.weights = export_weights(model);
  ck.meta.epochs_run = 3;
  ck.meta.seed = 5;
  ck.meta.train_losses = {0.9, 0.8, 0.7};
  ck.meta.val_losses = {0.95, 0.85, 0.86};
  ck.meta.best_epoch = 2;
  ck.meta.best_val_loss = 0.85;
  ck.meta.train_ids = {"case_000", "case_001"};
  ck.meta.val_ids = {"case_002"};
  ck.meta.train_config.set("train.batch_size", "2");
  return ck;
}

}  // namespace

TEST(Checkpoint, RoundTrip) {
  TempDir dir("ckpt");
  const auto ck = sample_checkpoint();
  save_checkpoint(ck, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.model, ck.model);
  EXPECT_EQ(back.meta.epochs_run, 3u);
  EXPECT_EQ(back.meta.val_losses, ck.meta.val_losses);
  EXPECT_EQ(back.meta.best_epoch, 2u);
  EXPECT_EQ(back.meta.train_ids, ck.meta.train_ids);
  EXPECT_EQ(back.meta.val_ids, ck.meta.val_ids);
  EXPECT_EQ(back.meta.train_config.get_int("train.batch_size", 0), 2);
  ASSERT_EQ(back.weights.size(), ck.weights.size());
  for (std::size_t i = 0; i < ck.weights.size(); ++i) {
    EXPECT_EQ(back.weights[i].name, ck.weights[i].name);
    EXPECT_EQ(back.weights[i].values, ck.weights[i].values);
  }
  // Saving the reloaded checkpoint reproduces the file byte for byte.
  save_checkpoint(back, dir / "m2.ckpt");
  EXPECT_EQ(patcnn::testing::slurp(dir / "m.ckpt"), patcnn::testing::slurp(dir / "m2.ckpt"));
}

TEST(Checkpoint, RebuiltModelGivesSameOutput) {
  ResUNet<float> model(tiny(), 8);
  Checkpoint ck;
  ck.model = tiny();
  ck.weights = export_weights(model);
  auto rebuilt = build_model(ck);
  nn::Tensor<float> x(1, 1, {16, 16, 16});
  for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = float(i % 13) / 13.0f;
  EXPECT_EQ(model.forward(x, false).values(), rebuilt.forward(x, false).values());
}

TEST(Checkpoint, MissingFileIsIoError) {
  TempDir dir("ckmiss");
  EXPECT_THROW(load_checkpoint(dir / "none.ckpt"), IoError);
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  TempDir dir("ckbad");
  save_checkpoint(sample_checkpoint(), dir / "good.ckpt");
  const std::string good = patcnn::testing::slurp(dir / "good.ckpt");

  auto write = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(dir / name, std::ios::binary) << bytes;
    return dir / name;
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.ckpt", bad_magic)), FormatError);

  std::string bad_version = good;
  bad_version[8] = 9;
  EXPECT_THROW(load_checkpoint(write("version.ckpt", bad_version)), FormatError);

  EXPECT_THROW(load_checkpoint(write("trunc.ckpt", good.substr(0, good.size() - 10))), FormatError);
  EXPECT_THROW(load_checkpoint(write("empty.ckpt", "")), FormatError);
}

TEST(Checkpoint, IncompatibleWeightsAreFormatErrors) {
  auto ck = sample_checkpoint();
  ModelConfig wider = tiny();
  wider.channels[0] = 3;
  ResUNet<float> other(wider);
  EXPECT_THROW(import_weights(other, ck.weights), FormatError);

  ResUNet<float> same(tiny());
  auto missing = ck.weights;
  missing.pop_back();
  EXPECT_THROW(import_weights(same, missing), FormatError);
  auto extra = ck.weights;
  extra.push_back({"stray", {1.0f}});
  EXPECT_THROW(import_weights(same, extra), FormatError);
  auto dup = ck.weights;
  dup.push_back(dup.front());
  EXPECT_THROW(import_weights(same, dup), FormatError);
}
