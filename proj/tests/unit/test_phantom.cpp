#include <gtest/gtest.h>

#include <cmath>

#include "patcnn/csv.hpp"
#include "patcnn/groundtruth.hpp"
#include "patcnn/metrics.hpp"
#include "patcnn/phantom.hpp"

using namespace patcnn;

namespace {

PhantomSpec small(std::uint64_t seed) {
  PhantomSpec s;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Phantom, DeterministicUnderSeed) {
  const auto a = generate_case(small(4)), b = generate_case(small(4));
  EXPECT_TRUE(a.image == b.image);
  EXPECT_TRUE(a.pat == b.pat);
  EXPECT_TRUE(a.chambers == b.chambers);
  const auto c = generate_case(small(5));
  EXPECT_FALSE(a.image == c.image);
}

TEST(Phantom, PatDisjointFromChambers) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    PhantomSpec s = small(seed);
    s.fluid_present = seed % 2;
    s.noise_sigma = 0.03;
    const auto c = generate_case(s);
    for (std::size_t i = 0; i < c.pat.size(); ++i) {
      ASSERT_FALSE(c.pat[i] && c.chambers[i]);
      ASSERT_FALSE(c.fluid[i] && (c.pat[i] || c.chambers[i]));
    }
    EXPECT_EQ(c.image.dims(), s.dims);
    EXPECT_EQ(c.image.spacing(), s.spacing);
  }
}

TEST(Phantom, FatFractionWithinTenPercent) {
  for (double f : {0.05, 0.2, 0.4}) {
    PhantomSpec s = small(7);
    s.fat_fraction = f;
    const auto c = generate_case(s);
    const double want = f * double(foreground_count(c.chambers));
    EXPECT_NEAR(double(foreground_count(c.pat)), want, 0.1 * want);
  }
}

TEST(Phantom, ZeroFatFractionGivesEmptyMask) {
  PhantomSpec s = small(1);
  s.fat_fraction = 0;
  EXPECT_EQ(foreground_count(generate_case(s).pat), 0u);
}

TEST(Phantom, InfeasibleFatFraction) {
  PhantomSpec s = small(1);
  s.fat_fraction = 0.81;
  EXPECT_THROW(generate_case(s), DomainError);
}

TEST(Phantom, SpecValidation) {
  PhantomSpec s;
  s.levels.fat = s.levels.chamber;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.fluid_present = true;
  s.levels.fluid = 0.5;  // not within 10% of fat
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.spacing.z = 0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(Phantom, FluidLooksLikeFat) {
  PhantomSpec s = small(3);
  s.fluid_present = true;
  const auto c = generate_case(s);
  ASSERT_GT(foreground_count(c.fluid), 0u);
  for (std::size_t i = 0; i < c.fluid.size(); ++i)
    if (c.fluid[i]) ASSERT_NEAR(c.image[i], s.levels.fluid, 1e-6);
}

TEST(Phantom, CleanCandidateRecoversTruth) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto c = generate_case(small(seed));
    EXPECT_GE(dice_score(candidate_pat_mask(c.image, c.chambers), c.pat), 0.95) << seed;
  }
}

TEST(Cohort, MinimalCohortCsv) {
  const auto cohort = generate_cohort(10, 1, EffectSpec{});
  ASSERT_EQ(cohort.records.size(), 10u);
  const auto csv = format_records_csv(cohort.records);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 11u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "case_id,age,sex,bmi,deceased,cvd_diagnosis");
  for (const auto& r : cohort.records) EXPECT_NO_THROW(r.validate());
}

TEST(Cohort, TooSmall) { EXPECT_THROW(generate_cohort(9, 1, EffectSpec{}), DomainError); }

TEST(Cohort, Reproducible) {
  const auto a = generate_cohort(40, 9, EffectSpec{}), b = generate_cohort(40, 9, EffectSpec{});
  EXPECT_EQ(format_records_csv(a.records), format_records_csv(b.records));
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].patv, b.records[i].patv);
}

TEST(Cohort, ImagesCarryMeasuredPatv) {
  PhantomSpec base;
  base.dims = {48, 48, 16};
  const auto c = generate_cohort(10, 2, EffectSpec{}, true, base);
  ASSERT_EQ(c.cases.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(c.records[i].patv, patv_cm3(c.cases[i].pat, base.spacing));
}

TEST(Cohort, LatentPatvFollowsSexEffect) {
  const auto c = generate_cohort(4000, 3, EffectSpec{});
  double f = 0, m = 0;
  std::size_t nf = 0, nm = 0;
  for (const auto& r : c.records) (r.sex ? (f += r.patv, ++nf) : (m += r.patv, ++nm));
  EXPECT_NEAR(f / nf - m / nm, -50.2, 8.0);
}
