#pragma once

#include <cstdint>
#include <string>

#include "patcnn/augmentation.hpp"
#include "patcnn/groundtruth.hpp"
#include "patcnn/kv.hpp"
#include "patcnn/loss.hpp"
#include "patcnn/network.hpp"
#include "patcnn/phantom.hpp"
#include "patcnn/trainer.hpp"

namespace patcnn {

// Every setting the CLI can take from a config file. Keys are dotted:
// paths.*, seed, model.*, loss.*, augment.*, train.*, phantom.*,
// effects.*, groundtruth.*.
struct PipelineConfig {
  std::string data_root = ".";
  std::string output_root = ".";
  std::uint64_t seed = 0;
  std::size_t phantom_count = 16;
  TrainConfig train;  // carries model, loss and augment
  PhantomSpec phantom;
  EffectSpec effects;
  CandidateOptions groundtruth;
};

// Section readers take missing keys from the current value of `out`.
void read_section(const KeyValueDoc& doc, ModelConfig& out);
void read_section(const KeyValueDoc& doc, LossConfig& out);
void read_section(const KeyValueDoc& doc, AugmentPolicy& out);
void read_section(const KeyValueDoc& doc, TrainConfig& out);
void read_section(const KeyValueDoc& doc, PhantomSpec& out);
void read_section(const KeyValueDoc& doc, EffectSpec& out);
void read_section(const KeyValueDoc& doc, CandidateOptions& out);

void write_section(KeyValueDoc& doc, const ModelConfig& c);
void write_section(KeyValueDoc& doc, const LossConfig& c);
void write_section(KeyValueDoc& doc, const AugmentPolicy& c);
// Writes train.*, loss.* and augment.* (the model is stored separately).
void write_section(KeyValueDoc& doc, const TrainConfig& c);
void write_section(KeyValueDoc& doc, const PhantomSpec& c);
void write_section(KeyValueDoc& doc, const EffectSpec& c);
void write_section(KeyValueDoc& doc, const CandidateOptions& c);

// The global seed feeds train.seed, augment.seed and phantom.seed unless
// those are given explicitly. Unknown keys are a DomainError.
PipelineConfig read_pipeline_config(const KeyValueDoc& doc);
KeyValueDoc to_doc(const PipelineConfig& cfg);

}  // namespace patcnn
