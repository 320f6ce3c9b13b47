#include "patcnn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "patcnn/metrics.hpp"
#include "patcnn/seed.hpp"

namespace patcnn {
namespace {

constexpr double kRefFovInplane = 89.6;  // 64 * 1.4 mm
constexpr double kRefFovZ = 192.0;       // 32 * 6 mm
constexpr double kMyocardiumMm = 3.0;
constexpr double kPatBandMm = 9.0;
constexpr double kFluidBandMm = 4.5;
constexpr double kRimMm = 4.0;
constexpr double kFluidFraction = 0.05;

struct Ellipsoid {
  double cx, cy, cz, ax, ay, az;
  bool contains(double x, double y, double z) const {
    const double u = (x - cx) / ax, v = (y - cy) / ay, w = (z - cz) / az;
    return u * u + v * v + w * w <= 1.0;
  }
};

struct Harmonic {
  double amp, freq, phase;
};

// Picks the k highest-scoring candidates; ties go to the lower voxel index.
std::vector<std::size_t> top_k(std::vector<std::pair<double, std::size_t>> scored, std::size_t k) {
  auto better = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  if (k < scored.size()) std::nth_element(scored.begin(), scored.begin() + static_cast<long>(k), scored.end(), better);
  scored.resize(std::min(k, scored.size()));
  std::vector<std::size_t> idx;
  idx.reserve(scored.size());
  for (const auto& s : scored) idx.push_back(s.second);
  return idx;
}

}  // namespace

void PhantomSpec::validate() const {
  detail::check_geometry(dims, spacing, dims.count());
  if (!(fat_fraction >= 0)) throw DomainError("PhantomSpec: fat_fraction must be >= 0");
  if (fat_fraction > 0.8) throw DomainError("PhantomSpec: fat_fraction above 0.8 is infeasible");
  if (!(noise_sigma >= 0)) throw DomainError("PhantomSpec: noise_sigma must be >= 0");
  const double l[] = {levels.background, levels.chamber, levels.myocardium, levels.fat, levels.fluid};
  for (double v : l)
    if (!std::isfinite(v)) throw DomainError("PhantomSpec: intensity levels must be finite");
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      if (l[i] == l[j]) throw DomainError("PhantomSpec: intensity levels must be distinct");
  if (fluid_present && std::abs(levels.fat - levels.fluid) > 0.1 * std::abs(levels.fat))
    throw DomainError("PhantomSpec: fluid level must lie within 10% of the fat level");
}

PhantomCase generate_case(const PhantomSpec& spec) {
  spec.validate();
  const Dims d = spec.dims;
  const Spacing sp = spec.spacing;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double fov_x = static_cast<double>(d.nx) * sp.x, fov_y = static_cast<double>(d.ny) * sp.y;
  const double s = std::min(1.0, std::min(fov_x, fov_y) / kRefFovInplane);
  const double sz = std::min(1.0, static_cast<double>(d.nz) * sp.z / kRefFovZ);

  // Heart geometry, in mm relative to the grid centre.
  const double hx = uni(-3, 3) * s, hy = uni(-3, 3) * s, hz = uni(-6, 6) * sz;
  const int chambers = 2 + static_cast<int>(unit(rng) * 3) % 3;
  std::vector<Ellipsoid> ell;
  for (int k = 0; k < chambers; ++k) {
    const double r = uni(0, 6) * s, a = uni(0, 2 * std::numbers::pi);
    ell.push_back({hx + r * std::cos(a), hy + r * std::sin(a), hz + uni(-6, 6) * sz, uni(5, 8) * s, uni(5, 8) * s,
                   uni(20, 35) * sz});
  }
  std::vector<Harmonic> angular(3), axial(2), fluid_angular(2);
  for (std::size_t k = 0; k < angular.size(); ++k)
    angular[k] = {uni(0.5, 1.0) / static_cast<double>(k + 1), static_cast<double>(k + 2), uni(0, 2 * std::numbers::pi)};
  for (auto& h : axial) h = {uni(0.3, 0.7), 2 * std::numbers::pi / (uni(40, 90) * sz), uni(0, 2 * std::numbers::pi)};
  for (std::size_t k = 0; k < fluid_angular.size(); ++k)
    fluid_angular[k] = {uni(0.5, 1.0), static_cast<double>(k + 1), uni(0, 2 * std::numbers::pi)};

  const double cx = (static_cast<double>(d.nx) - 1) / 2, cy = (static_cast<double>(d.ny) - 1) / 2,
               cz = (static_cast<double>(d.nz) - 1) / 2;
  auto mm = [&](std::size_t x, std::size_t y, std::size_t z) {
    return std::array<double, 3>{(static_cast<double>(x) - cx) * sp.x, (static_cast<double>(y) - cy) * sp.y,
                                 (static_cast<double>(z) - cz) * sp.z};
  };

  PhantomCase out{ImageVolume(d, sp), LabelMask(d, sp), LabelMask(d, sp), LabelMask(d, sp)};
  LabelMask chamber_only(d, sp);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const auto p = mm(x, y, z);
        for (const auto& e : ell)
          if (e.contains(p[0], p[1], p[2])) {
            chamber_only(x, y, z) = 1;
            break;
          }
      }
  if (foreground_count(chamber_only) == 0) throw DomainError("generate_case: grid too small to hold a heart");

  const auto d_chamber = squared_distance_map(chamber_only, sp);
  const double myo2 = std::pow(kMyocardiumMm * s, 2);
  for (std::size_t i = 0; i < d.count(); ++i) out.chambers[i] = d_chamber[i] <= myo2 ? 1 : 0;
  const std::size_t heart_voxels = foreground_count(out.chambers);

  // Body outline: elliptic cylinder, rim of subcutaneous fat.
  const double bx = 0.48 * fov_x, by = 0.48 * fov_y;
  const double rim_inner = 1.0 - kRimMm * s / std::min(bx, by);
  auto body_radius = [&](const std::array<double, 3>& p) {
    return std::sqrt((p[0] / bx) * (p[0] / bx) + (p[1] / by) * (p[1] / by));
  };

  const auto d_heart = squared_distance_map(out.chambers, sp);
  const double band2 = std::pow(kPatBandMm * s, 2);
  const double fluid2 = std::pow(kFluidBandMm * s, 2);
  std::vector<std::pair<double, std::size_t>> band;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = out.image.offset(x, y, z);
        if (out.chambers[i] || d_heart[i] > band2) continue;
        const auto p = mm(x, y, z);
        if (body_radius(p) >= rim_inner) continue;
        const double theta = std::atan2(p[1] - hy, p[0] - hx);
        double score = 0;
        for (const auto& h : angular) score += h.amp * std::cos(h.freq * theta + h.phase);
        for (const auto& h : axial) score += h.amp * std::cos(h.freq * (p[2] - hz) + h.phase);
        score -= 1.5 * std::sqrt(d_heart[i]) / (kPatBandMm * s);
        band.push_back({score, i});
      }

  const auto target = static_cast<std::size_t>(std::llround(spec.fat_fraction * static_cast<double>(heart_voxels)));
  if (target > band.size())
    throw DomainError("generate_case: fat_fraction needs more voxels than the pericardial band holds");
  for (std::size_t i : top_k(band, target)) out.pat[i] = 1;

  if (spec.fluid_present) {
    std::vector<std::pair<double, std::size_t>> fluid_band;
    for (const auto& [score, i] : band) {
      if (out.pat[i] || d_heart[i] > fluid2) continue;
      const auto [x, y, z] = out.image.index_of(i);
      const auto p = mm(x, y, z);
      const double theta = std::atan2(p[1] - hy, p[0] - hx);
      double f = 0;
      for (const auto& h : fluid_angular) f += h.amp * std::cos(h.freq * theta + h.phase);
      fluid_band.push_back({f - std::sqrt(d_heart[i]) / (kFluidBandMm * s), i});
    }
    const auto m = static_cast<std::size_t>(std::llround(kFluidFraction * static_cast<double>(heart_voxels)));
    for (std::size_t i : top_k(std::move(fluid_band), m)) out.fluid[i] = 1;
  }

  const auto& lv = spec.levels;
  auto& img = out.image;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = img.offset(x, y, z);
        double v;
        const double r = body_radius(mm(x, y, z));
        if (r >= 1.0) v = 0.0;
        else if (r >= rim_inner) v = lv.fat;
        else v = lv.background;
        if (out.chambers[i]) v = chamber_only[i] ? lv.chamber : lv.myocardium;
        if (out.pat[i]) v = lv.fat;
        if (out.fluid[i]) v = lv.fluid;
        img[i] = static_cast<float>(v);
      }

  if (spec.noise_sigma > 0) {
    const auto data = img.data();
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    std::normal_distribution<double> noise(0.0, spec.noise_sigma * static_cast<double>(*hi - *lo));
    for (auto& v : img.data()) v = static_cast<float>(v + noise(rng));
  }
  return out;
}

EffectSpec EffectSpec::null_effects() {
  EffectSpec e;
  e.patv_sex = e.patv_age = e.patv_bmi = 0;
  e.deceased_patv = e.deceased_age = e.deceased_sex = e.deceased_bmi = 0;
  e.cvd_age = e.cvd_patv = e.cvd_sex = e.cvd_bmi = 0;
  return e;
}

std::string case_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03zu", index);
  return buf;
}

Cohort generate_cohort(std::size_t n, std::uint64_t seed, const EffectSpec& e, bool with_images,
                       const PhantomSpec& base) {
  if (n < 10) throw DomainError("generate_cohort: need at least 10 cases");
  if (with_images) base.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Cohort cohort;
  cohort.effects = e;
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord r;
    r.case_id = case_id(i);
    r.age = std::clamp(kAgeMean + kAgeSd * normal(rng), 18.0, 95.0);
    r.sex = unit(rng) < kFemaleFraction ? 1 : 0;
    r.bmi = std::clamp(kBmiMean + kBmiSd * normal(rng), 15.0, 60.0);
    const double latent = std::max(e.patv_min, e.patv_mean + e.patv_sex * (r.sex - kFemaleFraction) +
                                                   e.patv_age * (r.age - kAgeMean) +
                                                   e.patv_bmi * (r.bmi - kBmiMean) + e.patv_sd * normal(rng));
    const double u_dead = unit(rng);
    const double cvd_noise = normal(rng);
    if (with_images) {
      PhantomSpec spec = base;
      spec.seed = derive_seed(seed, {i});
      spec.fat_fraction = std::clamp(base.fat_fraction * latent / e.patv_mean, 0.02, 0.6);
      cohort.cases.push_back(generate_case(spec));
      r.patv = patv_cm3(cohort.cases.back().pat, spec.spacing);
    } else {
      r.patv = latent;
    }
    const double eta = e.deceased_b0 + e.deceased_patv * r.patv + e.deceased_age * r.age + e.deceased_sex * r.sex +
                       e.deceased_bmi * r.bmi;
    r.deceased = u_dead < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
    const double cvd = e.cvd_b0 + e.cvd_age * r.age + e.cvd_patv * r.patv + e.cvd_sex * r.sex + e.cvd_bmi * r.bmi +
                       e.cvd_sd * cvd_noise;
    r.cvd_diagnosis = static_cast<int>(std::clamp(std::round(cvd), 0.0, 73.0));
    cohort.records.push_back(r);
  }
  return cohort;
}

}  // namespace patcnn
