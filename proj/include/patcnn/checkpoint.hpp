#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "patcnn/kv.hpp"
#include "patcnn/network.hpp"

namespace patcnn {

struct TrainingMeta {
  std::size_t epochs_run = 0;
  std::uint64_t seed = 0;
  std::vector<double> train_losses;  // per epoch, augmented batches
  std::vector<double> val_losses;    // per epoch, augmentation off
  std::size_t best_epoch = 0;        // 1-based epoch whose weights are kept
  double best_val_loss = 0;
  bool validated_on_training = false;  // no held-out validation cases
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  KeyValueDoc train_config;  // the training settings that produced this
};

struct NamedTensor {
  std::string name;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig model;
  TrainingMeta meta;
  std::vector<NamedTensor> weights;  // parameters then batch-norm buffers
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary file: magic "PATCNNCK", u32 version, u64 length + embedded
// key-value text (model.*, meta.*, train.*), u32 tensor count, then per
// tensor u32 name length, name, u64 count, little-endian float32 values.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies weights out of / into a model. Loading requires the exact set of
// names and sizes the model defines; anything else is a FormatError.
std::vector<NamedTensor> export_weights(ResUNet<float>& model);
void import_weights(ResUNet<float>& model, const std::vector<NamedTensor>& weights);
ResUNet<float> build_model(const Checkpoint& ckpt);

}  // namespace patcnn
