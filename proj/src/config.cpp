#include "patcnn/config.hpp"

#include <cmath>

namespace patcnn {
namespace {

constexpr std::pair<TransformBit, const char*> kTransformNames[] = {
    {kRotate, "rotate"}, {kCrop, "crop"}, {kFlip, "flip"}, {kBlur, "blur"}, {kRayleighNoise, "noise"}};

std::size_t to_size(long long v, const char* key) {
  if (v < 0) throw DomainError(std::string("config key '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> sizes(const std::vector<double>& v, const char* key) {
  std::vector<std::size_t> out;
  for (double d : v) {
    if (d < 0 || d != std::floor(d)) throw DomainError(std::string("config key '") + key + "' needs integers");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

}  // namespace

void read_section(const KeyValueDoc& doc, ModelConfig& out) {
  const auto& c = out.channels;
  const auto ch = sizes(doc.get_doubles("model.channels", {double(c[0]), double(c[1]), double(c[2]), double(c[3])}),
                        "model.channels");
  if (ch.size() != ModelConfig::kLevels) throw DomainError("model.channels needs exactly 4 widths");
  for (std::size_t i = 0; i < ch.size(); ++i) out.channels[i] = ch[i];
  out.bottleneck = to_size(doc.get_int("model.bottleneck", static_cast<long long>(out.bottleneck)), "model.bottleneck");
  out.residual = doc.get_bool("model.residual", out.residual);
  out.validate();
}

void read_section(const KeyValueDoc& doc, LossConfig& out) {
  out.epsilon = doc.get_double("loss.epsilon", out.epsilon);
  if (doc.has("loss.variant")) out.variant = parse_loss_variant(doc.get_string("loss.variant", ""));
  if (!(out.epsilon > 0)) throw DomainError("loss.epsilon must be positive");
}

void read_section(const KeyValueDoc& doc, AugmentPolicy& out) {
  out.p_each = doc.get_double("augment.p_each", out.p_each);
  out.rotation_max_deg = doc.get_double("augment.rotation_max_deg", out.rotation_max_deg);
  out.crop_fraction = doc.get_double("augment.crop_fraction", out.crop_fraction);
  out.blur_sigma_mm = doc.get_double("augment.blur_sigma_mm", out.blur_sigma_mm);
  out.rayleigh_scale = doc.get_double("augment.rayleigh_scale", out.rayleigh_scale);
  out.seed = doc.get_u64("augment.seed", out.seed);
  if (doc.has("augment.transforms")) {
    unsigned bits = 0;
    for (const auto& name : split_list(doc.get_string("augment.transforms", ""))) {
      bool found = false;
      for (const auto& [bit, n] : kTransformNames)
        if (name == n) {
          bits |= bit;
          found = true;
        }
      if (name == "none") found = true;
      if (!found) throw DomainError("augment.transforms: unknown transform '" + name + "'");
    }
    out.transforms = bits;
  }
  if (doc.has("augment.flip_axes")) {
    out.flip_axes = {false, false, false};
    for (const auto& a : split_list(doc.get_string("augment.flip_axes", ""))) {
      if (a == "x") out.flip_axes[0] = true;
      else if (a == "y") out.flip_axes[1] = true;
      else if (a == "z") out.flip_axes[2] = true;
      else throw DomainError("augment.flip_axes: expected x, y or z, got '" + a + "'");
    }
  }
  out.validate();
}

void read_section(const KeyValueDoc& doc, TrainConfig& out) {
  out.batch_size = to_size(doc.get_int("train.batch_size", static_cast<long long>(out.batch_size)), "train.batch_size");
  out.learning_rate = doc.get_double("train.learning_rate", out.learning_rate);
  out.epochs = to_size(doc.get_int("train.epochs", static_cast<long long>(out.epochs)), "train.epochs");
  out.seed = doc.get_u64("train.seed", out.seed);
  out.validation_fraction = doc.get_double("train.validation_fraction", out.validation_fraction);
  out.test_fraction = doc.get_double("train.test_fraction", out.test_fraction);
  out.output_prior = doc.get_double("train.output_prior", out.output_prior);
  read_section(doc, out.augment);
  read_section(doc, out.loss);
  read_section(doc, out.model);
  out.validate();
}

void read_section(const KeyValueDoc& doc, PhantomSpec& out) {
  const auto dims = sizes(doc.get_doubles("phantom.dims", {double(out.dims.nx), double(out.dims.ny), double(out.dims.nz)}),
                          "phantom.dims");
  const auto sp = doc.get_doubles("phantom.spacing", {out.spacing.x, out.spacing.y, out.spacing.z});
  if (dims.size() != 3 || sp.size() != 3) throw DomainError("phantom.dims and phantom.spacing need 3 values");
  out.dims = {dims[0], dims[1], dims[2]};
  out.spacing = {sp[0], sp[1], sp[2]};
  out.fat_fraction = doc.get_double("phantom.fat_fraction", out.fat_fraction);
  out.fluid_present = doc.get_bool("phantom.fluid_present", out.fluid_present);
  out.noise_sigma = doc.get_double("phantom.noise_sigma", out.noise_sigma);
  out.seed = doc.get_u64("phantom.seed", out.seed);
  auto& l = out.levels;
  l.background = doc.get_double("phantom.level.background", l.background);
  l.chamber = doc.get_double("phantom.level.chamber", l.chamber);
  l.myocardium = doc.get_double("phantom.level.myocardium", l.myocardium);
  l.fat = doc.get_double("phantom.level.fat", l.fat);
  l.fluid = doc.get_double("phantom.level.fluid", l.fluid);
  out.validate();
}

#define PATCNN_EFFECT_FIELDS(X)                                                                          \
  X(patv_mean) X(patv_sex) X(patv_age) X(patv_bmi) X(patv_sd) X(patv_min) X(deceased_b0) X(deceased_patv) \
  X(deceased_age) X(deceased_sex) X(deceased_bmi) X(cvd_b0) X(cvd_age) X(cvd_patv) X(cvd_sex) X(cvd_bmi) X(cvd_sd)

void read_section(const KeyValueDoc& doc, EffectSpec& out) {
  if (doc.get_bool("effects.null", false)) out = EffectSpec::null_effects();
#define X(f) out.f = doc.get_double("effects." #f, out.f);
  PATCNN_EFFECT_FIELDS(X)
#undef X
}

void read_section(const KeyValueDoc& doc, CandidateOptions& out) {
  out.margin_mm = doc.get_double("groundtruth.margin_mm", out.margin_mm);
  out.bins = to_size(doc.get_int("groundtruth.bins", static_cast<long long>(out.bins)), "groundtruth.bins");
  if (!(out.margin_mm >= 0)) throw DomainError("groundtruth.margin_mm must be >= 0");
}

void write_section(KeyValueDoc& doc, const ModelConfig& c) {
  doc.set_doubles("model.channels", {double(c.channels[0]), double(c.channels[1]), double(c.channels[2]),
                                     double(c.channels[3])});
  doc.set_int("model.bottleneck", static_cast<long long>(c.bottleneck));
  doc.set_bool("model.residual", c.residual);
}

void write_section(KeyValueDoc& doc, const LossConfig& c) {
  doc.set_double("loss.epsilon", c.epsilon);
  doc.set("loss.variant", std::string(to_string(c.variant)));
}

void write_section(KeyValueDoc& doc, const AugmentPolicy& c) {
  doc.set_double("augment.p_each", c.p_each);
  doc.set_double("augment.rotation_max_deg", c.rotation_max_deg);
  doc.set_double("augment.crop_fraction", c.crop_fraction);
  doc.set_double("augment.blur_sigma_mm", c.blur_sigma_mm);
  doc.set_double("augment.rayleigh_scale", c.rayleigh_scale);
  doc.set_u64("augment.seed", c.seed);
  std::string t;
  for (const auto& [bit, name] : kTransformNames)
    if (c.transforms & bit) t += (t.empty() ? "" : ",") + std::string(name);
  doc.set("augment.transforms", t.empty() ? "none" : t);
  std::string axes;
  for (int a = 0; a < 3; ++a)
    if (c.flip_axes[a]) axes += (axes.empty() ? "" : ",") + std::string(1, "xyz"[a]);
  doc.set("augment.flip_axes", axes);
}

void write_section(KeyValueDoc& doc, const TrainConfig& c) {
  doc.set_int("train.batch_size", static_cast<long long>(c.batch_size));
  doc.set_double("train.learning_rate", c.learning_rate);
  doc.set_int("train.epochs", static_cast<long long>(c.epochs));
  doc.set_u64("train.seed", c.seed);
  doc.set_double("train.validation_fraction", c.validation_fraction);
  doc.set_double("train.test_fraction", c.test_fraction);
  doc.set_double("train.output_prior", c.output_prior);
  write_section(doc, c.augment);
  write_section(doc, c.loss);
}

void write_section(KeyValueDoc& doc, const PhantomSpec& c) {
  doc.set_doubles("phantom.dims", {double(c.dims.nx), double(c.dims.ny), double(c.dims.nz)});
  doc.set_doubles("phantom.spacing", {c.spacing.x, c.spacing.y, c.spacing.z});
  doc.set_double("phantom.fat_fraction", c.fat_fraction);
  doc.set_bool("phantom.fluid_present", c.fluid_present);
  doc.set_double("phantom.noise_sigma", c.noise_sigma);
  doc.set_u64("phantom.seed", c.seed);
  doc.set_double("phantom.level.background", c.levels.background);
  doc.set_double("phantom.level.chamber", c.levels.chamber);
  doc.set_double("phantom.level.myocardium", c.levels.myocardium);
  doc.set_double("phantom.level.fat", c.levels.fat);
  doc.set_double("phantom.level.fluid", c.levels.fluid);
}

void write_section(KeyValueDoc& doc, const EffectSpec& c) {
#define X(f) doc.set_double("effects." #f, c.f);
  PATCNN_EFFECT_FIELDS(X)
#undef X
}

void write_section(KeyValueDoc& doc, const CandidateOptions& c) {
  doc.set_double("groundtruth.margin_mm", c.margin_mm);
  doc.set_int("groundtruth.bins", static_cast<long long>(c.bins));
}

PipelineConfig read_pipeline_config(const KeyValueDoc& doc) {
  PipelineConfig cfg;
  cfg.data_root = doc.get_string("paths.data_root", cfg.data_root);
  cfg.output_root = doc.get_string("paths.output_root", cfg.output_root);
  cfg.seed = doc.get_u64("seed", cfg.seed);
  cfg.phantom_count = to_size(doc.get_int("phantom.n", static_cast<long long>(cfg.phantom_count)), "phantom.n");
  cfg.train.seed = cfg.seed;
  cfg.train.augment.seed = cfg.seed;
  cfg.phantom.seed = cfg.seed;
  read_section(doc, cfg.train);
  read_section(doc, cfg.phantom);
  read_section(doc, cfg.effects);
  read_section(doc, cfg.groundtruth);
  const auto unknown = doc.unused_keys();
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw DomainError("unknown config key(s): " + list);
  }
  return cfg;
}

KeyValueDoc to_doc(const PipelineConfig& cfg) {
  KeyValueDoc doc;
  doc.set("paths.data_root", cfg.data_root);
  doc.set("paths.output_root", cfg.output_root);
  doc.set_u64("seed", cfg.seed);
  doc.set_int("phantom.n", static_cast<long long>(cfg.phantom_count));
  write_section(doc, cfg.train);
  write_section(doc, cfg.train.model);
  write_section(doc, cfg.phantom);
  write_section(doc, cfg.effects);
  write_section(doc, cfg.groundtruth);
  return doc;
}

}  // namespace patcnn
