#include "patcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace patcnn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// In-place exact 1D lower envelope along one axis. For each position p the
// search widens until (d*s)^2 alone exceeds the best value found, which is
// a valid cut-off because every f(q) is non-negative.
void distance_pass(std::vector<double>& f, const Dims& dims, int axis, double s) {
  const std::size_t n = dims[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims.nx : dims.nx * dims.ny;
  const std::size_t lines = dims.count() / n;

  std::vector<double> line(n), out(n);
  for (std::size_t l = 0; l < lines; ++l) {
    std::size_t base;
    if (axis == 0) {
      base = l * dims.nx;
    } else if (axis == 1) {
      base = (l % dims.nx) + (l / dims.nx) * dims.nx * dims.ny;
    } else {
      base = l;
    }
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      line[i] = f[base + i * stride];
      any = any || line[i] < kInf;
    }
    if (!any) continue;

    for (std::size_t p = 0; p < n; ++p) {
      double best = line[p];
      for (std::size_t d = 1; d < n; ++d) {
        const double step = static_cast<double>(d) * s;
        const double t = step * step;
        if (t > best) break;
        if (p >= d) best = std::min(best, line[p - d] + t);
        if (p + d < n) best = std::min(best, line[p + d] + t);
      }
      out[p] = best;
    }
    for (std::size_t i = 0; i < n; ++i) f[base + i * stride] = out[i];
  }
}

double directed_sq(const LabelMask& from, const std::vector<double>& dist_to) {
  double worst = 0;
  const auto d = from.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i]) worst = std::max(worst, dist_to[i]);
  return worst;
}

}  // namespace

double dice_score(const LabelMask& a, const LabelMask& b) {
  require_aligned(a, b, "dice_score");
  std::size_t na = 0, nb = 0, both = 0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    na += da[i];
    nb += db[i];
    both += da[i] & db[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> squared_distance_map(const LabelMask& mask, const Spacing& spacing) {
  voxel_volume_mm3(spacing);  // validates
  std::vector<double> f(mask.size());
  const auto d = mask.data();
  for (std::size_t i = 0; i < d.size(); ++i) f[i] = d[i] ? 0.0 : kInf;
  distance_pass(f, mask.dims(), 0, spacing.x);
  distance_pass(f, mask.dims(), 1, spacing.y);
  distance_pass(f, mask.dims(), 2, spacing.z);
  return f;
}

double hausdorff_mm(const LabelMask& a, const LabelMask& b, const Spacing& spacing) {
  require_aligned(a, b, "hausdorff_mm");
  if (foreground_count(a) == 0 || foreground_count(b) == 0)
    throw DomainError("hausdorff_mm: undefined Hausdorff distance for an empty mask");
  const double ab = directed_sq(a, squared_distance_map(b, spacing));
  const double ba = directed_sq(b, squared_distance_map(a, spacing));
  return std::sqrt(std::max(ab, ba));
}

double patv_cm3(const LabelMask& mask, const Spacing& spacing) {
  return static_cast<double>(foreground_count(mask)) * voxel_volume_mm3(spacing) / 1000.0;
}

EvalResult evaluate_case(const LabelMask& predicted, const LabelMask& truth) {
  require_aligned(predicted, truth, "evaluate_case");
  EvalResult r;
  r.dice = dice_score(predicted, truth);
  r.patv_pred_cm3 = patv_cm3(predicted, predicted.spacing());
  r.patv_true_cm3 = patv_cm3(truth, truth.spacing());
  r.hausdorff_mm = (foreground_count(predicted) && foreground_count(truth))
                       ? hausdorff_mm(predicted, truth, truth.spacing())
                       : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::string format_eval_csv(const std::vector<EvalRow>& rows) {
  std::string out = "case_id,dice,hausdorff_mm,patv_pred_cm3,patv_true_cm3\n";
  char buf[256];
  for (const auto& row : rows) {
    const auto& r = row.result;
    std::snprintf(buf, sizeof buf, ",%.6f,%.4f,%.4f,%.4f\n", r.dice, r.hausdorff_mm, r.patv_pred_cm3,
                  r.patv_true_cm3);
    out += row.case_id;
    out += buf;
  }
  return out;
}

}  // namespace patcnn
