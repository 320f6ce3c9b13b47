#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patcnn/stats.hpp"
#include "patcnn/volume.hpp"

namespace patcnn {

struct IntensityLevels {
  double background = 0.1;
  double chamber = 0.3;
  double myocardium = 0.4;
  double fat = 0.9;
  double fluid = 0.85;
  bool operator==(const IntensityLevels&) const = default;
};

struct PhantomSpec {
  Dims dims{64, 64, 32};
  Spacing spacing{1.4, 1.4, 6.0};
  double fat_fraction = 0.2;  // PAT voxels / heart (chambers + myocardium) voxels
  bool fluid_present = false;
  double noise_sigma = 0.0;  // Gaussian, as a fraction of the clean intensity range
  IntensityLevels levels;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhantomCase {
  ImageVolume image;
  LabelMask chambers;  // chambers plus myocardium, the "heart" handed to ground truth
  LabelMask pat;
  LabelMask fluid;
};

// Body: elliptic cylinder of background tissue with a bright subcutaneous
// rim; air outside is 0. Heart: 2-4 dark chamber ellipsoids wrapped in a
// 3 mm myocardial shell. PAT: noncontiguous patches hugging the heart
// within 9 mm, chosen as the top-scoring voxels of a smooth random field
// so the count hits fat_fraction exactly. Optional fluid sits in the same
// band at a fat-like intensity.
PhantomCase generate_case(const PhantomSpec& spec);

// Generative model for the synthetic cohort. Continuous covariates are
// centred at the cohort means before the slopes apply.
struct EffectSpec {
  // patv (cm3) = patv_mean + sex*(sex - p_female) + age*(age - age_mean)
  //              + bmi*(bmi - bmi_mean) + N(0, patv_sd), floored at patv_min
  double patv_mean = 139.6;
  double patv_sex = -50.2;
  double patv_age = 1.70;
  double patv_bmi = 3.92;
  double patv_sd = 66.0;
  double patv_min = 5.0;
  // logit P(deceased) = b0 + patv*PATV + age*AGE + sex*SEX + bmi*BMI (raw units)
  double deceased_b0 = -3.0;
  double deceased_patv = 0.01;
  double deceased_age = 0.03;
  double deceased_sex = 0.0;
  double deceased_bmi = 0.0;
  // cvd_diagnosis = clamp(round(b0 + age*AGE + patv*PATV + sex*SEX + bmi*BMI + N(0, sd)), 0, 73)
  double cvd_b0 = 0.4;
  double cvd_age = 0.02;
  double cvd_patv = 0.01;
  double cvd_sex = 0.0;
  double cvd_bmi = 0.0;
  double cvd_sd = 1.5;

  // Every slope zero: outcomes independent of all regressors.
  static EffectSpec null_effects();
};

inline constexpr double kAgeMean = 55.0, kAgeSd = 18.0;
inline constexpr double kFemaleFraction = 0.42;
inline constexpr double kBmiMean = 27.7, kBmiSd = 5.9;

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<PhantomCase> cases;  // empty unless images were requested
  EffectSpec effects;
};

// With images, each case's fat fraction follows its latent PATV and the
// recorded patv (and the outcomes drawn from it) is the measured mask
// volume. Without images the latent PATV is recorded directly.
Cohort generate_cohort(std::size_t n, std::uint64_t seed, const EffectSpec& effects, bool with_images = false,
                       const PhantomSpec& base = {});

std::string case_id(std::size_t index);

}  // namespace patcnn
