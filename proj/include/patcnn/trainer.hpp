#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "patcnn/augmentation.hpp"
#include "patcnn/checkpoint.hpp"
#include "patcnn/loss.hpp"
#include "patcnn/network.hpp"
#include "patcnn/volume.hpp"

namespace patcnn {

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;  // Adam
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
  double validation_fraction = 1.0 / 6.0;  // of the cases handed to train()
  double test_fraction = 1.0 / 7.0;        // used by split_dataset in the CLI
  // Initial foreground probability written into the output bias; 0 keeps
  // the random initialisation. PAT is a small fraction of each volume, so
  // starting near 0.5 wastes the early epochs pushing background down.
  double output_prior = 0.01;
  AugmentPolicy augment;
  LossConfig loss;
  ModelConfig model;

  void validate() const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kForegroundThreshold = 0.5;  // p >= 0.5 is foreground

struct DatasetSplit {
  std::vector<std::string> train_val;
  std::vector<std::string> test;
};

// Deterministic shuffle under seed; |test| = max(1, round(f * n)), never
// all of the cases.
DatasetSplit split_dataset(const std::vector<std::string>& case_ids, double test_fraction, std::uint64_t seed);

struct TrainingCase {
  std::string id;
  ImageVolume image;
  LabelMask mask;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  bool improved = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam on the combined loss, averaged over the samples of each batch.
// Validation loss is computed in evaluation mode without augmentation;
// the returned weights are those of the best validation epoch. When the
// validation fraction leaves no held-out case, validation runs on the
// training cases instead and the checkpoint records that.
Checkpoint train(const std::vector<TrainingCase>& cases, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Min-max to [0, 1]; a constant volume maps to all zeros.
ImageVolume normalize_minmax(const ImageVolume& v);

// Reflection padding to the next multiple of `multiple` per axis, split
// as evenly as possible with the extra voxel after.
struct PadPlan {
  Dims padded;
  Index3 before;
};
PadPlan plan_padding(const Dims& d, std::size_t multiple);
template <typename T>
Grid3<T> reflect_pad(const Grid3<T>& g, const PadPlan& plan);
template <typename T>
Grid3<T> crop_padding(const Grid3<T>& g, const Dims& original, const PadPlan& plan);

class Predictor {
 public:
  explicit Predictor(const Checkpoint& ckpt);
  // Foreground probability per voxel, same dims and spacing as the input.
  ImageVolume probabilities(const ImageVolume& volume);
  LabelMask predict(const ImageVolume& volume);

 private:
  ResUNet<float> model_;
};

LabelMask predict(const Checkpoint& ckpt, const ImageVolume& volume);

// Mean combined loss of the model (evaluation mode) over the cases.
double evaluate_loss(ResUNet<float>& model, const std::vector<TrainingCase>& cases, const LossConfig& loss);

}  // namespace patcnn
