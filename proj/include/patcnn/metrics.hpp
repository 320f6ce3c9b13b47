#pragma once

#include <string>
#include <vector>

#include "patcnn/volume.hpp"

namespace patcnn {

struct EvalResult {
  double dice = 0;
  double hausdorff_mm = 0;  // NaN when either mask is empty
  double patv_pred_cm3 = 0;
  double patv_true_cm3 = 0;
};

// 2|a & b| / (|a| + |b|); 1.0 when both are empty.
double dice_score(const LabelMask& a, const LabelMask& b);

// Squared Euclidean distance (mm^2) from every voxel centre to the nearest
// foreground voxel centre, +inf everywhere if the mask is empty.
//
// Separable and exact: each 1D pass takes the true minimum of
// f(q) + (d * s)^2, so the result is bit-identical to a brute-force
// minimum of ((dx*sx)^2 + (dy*sy)^2) + (dz*sz)^2 summed in that order.
std::vector<double> squared_distance_map(const LabelMask& mask, const Spacing& spacing);

// Classical (max) symmetric Hausdorff distance over all foreground voxels,
// in mm. Throws DomainError when either mask is empty.
double hausdorff_mm(const LabelMask& a, const LabelMask& b, const Spacing& spacing);

// Foreground count times voxel volume, in cm^3.
double patv_cm3(const LabelMask& mask, const Spacing& spacing);

EvalResult evaluate_case(const LabelMask& predicted, const LabelMask& truth);

struct EvalRow {
  std::string case_id;
  EvalResult result;
};

// case_id,dice,hausdorff_mm,patv_pred_cm3,patv_true_cm3
std::string format_eval_csv(const std::vector<EvalRow>& rows);

}  // namespace patcnn
