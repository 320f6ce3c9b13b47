#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "patcnn/groundtruth.hpp"
#include "patcnn/phantom.hpp"
#include "patcnn/metrics.hpp"
#include "test_support.hpp"

using namespace patcnn;

namespace {

const Spacing kSp{1.4, 1.4, 6.0};

// Samples placed at bin centres of [0, bins], so bin membership is
// unambiguous; the two extremes pin the range.
std::vector<double> samples_for(const std::vector<long long>& hist) {
  const std::size_t bins = hist.size();
  std::vector<double> s{0.0, double(bins)};
  for (std::size_t b = 0; b < bins; ++b)
    for (long long i = 0; i < hist[b]; ++i) s.push_back(double(b) + 0.5);
  return s;
}

std::vector<long long> with_extremes(std::vector<long long> h) {
  ++h.front();
  ++h.back();
  return h;
}

}  // namespace

TEST(BoundingBox, PointMask) {
  LabelMask m({10, 10, 10}, kSp);
  m(5, 5, 5) = 1;
  EXPECT_EQ(bounding_box(m, 0), (BoxRegion{{5, 5, 5}, {6, 6, 6}}));
}

TEST(BoundingBox, TwoVoxels) {
  LabelMask m({12, 12, 12}, kSp);
  m(2, 2, 2) = 1;
  m(8, 9, 10) = 1;
  EXPECT_EQ(bounding_box(m, 0), (BoxRegion{{2, 2, 2}, {9, 10, 11}}));
}

TEST(BoundingBox, MarginDilatesPerAxisAndClamps) {
  LabelMask m({20, 20, 12}, kSp);
  m(2, 2, 2) = 1;
  m(8, 9, 10) = 1;
  // ceil(6 / 1.4) = 5 in-plane, ceil(6 / 6) = 1 through-plane.
  EXPECT_EQ(bounding_box(m, 6.0), (BoxRegion{{0, 0, 1}, {14, 15, 12}}));
}

TEST(BoundingBox, EmptyMaskIsDomainError) {
  EXPECT_THROW(bounding_box(LabelMask({4, 4, 4}, kSp), 0), DomainError);
}

TEST(BoundingBox, MatchesMinMaxScan) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    auto m = patcnn::testing::random_mask({9, 7, 5}, kSp, 0.05, rng);
    if (foreground_count(m) == 0) continue;
    std::size_t lo[3] = {99, 99, 99}, hi[3] = {0, 0, 0};
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) {
        const auto p = m.index_of(i);
        const std::size_t c[3] = {p.x, p.y, p.z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a] + 1);
        }
      }
    EXPECT_EQ(bounding_box(m, 0), (BoxRegion{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}}));
  }
}

TEST(Otsu, TwoGroupsSeparated) {
  const std::vector<double> v{0, 0, 0, 10, 10, 10};
  const auto r = otsu_threshold(v, 256);
  EXPECT_FALSE(r.is_high(0.0));
  EXPECT_TRUE(r.is_high(10.0));
  EXPECT_EQ(r.low_mean, 0.0);
  EXPECT_EQ(r.high_mean, 10.0);
  EXPECT_LE(r.low_mean, r.threshold);
  EXPECT_LE(r.threshold, r.high_mean);
  EXPECT_NEAR(r.between_class_variance, 25.0, 1e-12);
}

TEST(Otsu, TwoPoints) {
  const std::vector<double> v{0, 1};
  const auto r = otsu_threshold(v);
  EXPECT_FALSE(r.is_high(0));
  EXPECT_TRUE(r.is_high(1));
}

TEST(Otsu, ConstantIsDegenerate) {
  const std::vector<double> v{5, 5, 5, 5};
  EXPECT_THROW(otsu_threshold(v), DegenerateInputError);
}

TEST(Otsu, EmptyIsDomainError) {
  EXPECT_THROW(otsu_threshold(std::vector<double>{}), DomainError);
}

TEST(Otsu, MatchesRationalOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t bins = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
    std::vector<long long> h(bins);
    std::uniform_int_distribution<int> c(0, 6);
    for (auto& x : h) x = c(rng);
    const auto s = samples_for(h);
    EXPECT_EQ(otsu_threshold(s, bins).split_bin, oracle::otsu_split(with_extremes(h), 0, double(bins)));
  }
}

TEST(Otsu, SymmetricHistogramTieGoesLow) {
  // Mirror-symmetric histograms score the same at k and bins - 2 - k.
  const std::vector<long long> h{3, 0, 1, 0, 0, 1, 0, 3};
  const auto s = samples_for(h);
  const auto r = otsu_threshold(s, h.size());
  EXPECT_EQ(r.split_bin, oracle::otsu_split(with_extremes(h), 0, double(h.size())));
  // Empty bins 3 and 4 give equal scores for splits 2, 3 and 4.
  EXPECT_EQ(r.split_bin, 2u);
}

TEST(Otsu, AffineInvariantPartition) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(300);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = g(rng) + (i % 3 == 0 ? 4 : 0);
    const auto r = otsu_threshold(v, 64);
    // Power-of-two scale and an exact shift keep bin arithmetic exact.
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = 4.0 * v[i] + 16.0;
    const auto q = otsu_threshold(w, 64);
    EXPECT_EQ(q.split_bin, r.split_bin);
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(r.is_high(v[i]), q.is_high(w[i]));
  }
}

TEST(Candidate, ZeroOnChambersAndOutsideBox) {
  PhantomSpec spec;
  spec.dims = {40, 40, 12};
  spec.noise_sigma = 0.05;
  spec.fluid_present = true;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    spec.seed = seed;
    const auto c = generate_case(spec);
    const auto mask = candidate_pat_mask(c.image, c.chambers);
    const auto box = bounding_box(c.chambers, CandidateOptions{}.margin_mm);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const auto p = mask.index_of(i);
      EXPECT_FALSE(c.chambers[i]);
      EXPECT_TRUE(box.contains(p.x, p.y, p.z));
    }
  }
}

TEST(Candidate, RecoversCleanPhantomFat) {
  PhantomSpec spec;
  spec.seed = 3;
  const auto c = generate_case(spec);
  const auto mask = candidate_pat_mask(c.image, c.chambers);
  std::size_t hit = 0, on_chambers = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    hit += mask[i] && c.pat[i];
    on_chambers += mask[i] && c.chambers[i];
  }
  EXPECT_GE(double(hit), 0.9 * double(foreground_count(c.pat)));
  EXPECT_EQ(on_chambers, 0u);
  EXPECT_GE(dice_score(mask, c.pat), 0.95);
}

TEST(Candidate, FlatBoxIsDegenerate) {
  ImageVolume v({8, 8, 8}, kSp, 0.5f);
  LabelMask ch({8, 8, 8}, kSp);
  ch(4, 4, 4) = 1;
  EXPECT_THROW(candidate_pat_mask(v, ch), DegenerateInputError);
}

TEST(Candidate, ChambersFillingBoxGiveEmptyMask) {
  ImageVolume v({6, 6, 6}, kSp);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i % 7);
  LabelMask ch({6, 6, 6}, kSp, 1);
  EXPECT_EQ(foreground_count(candidate_pat_mask(v, ch, {0.0, 256})), 0u);
}

TEST(Candidate, MisalignedIsDomainError) {
  ImageVolume v({6, 6, 6}, kSp);
  LabelMask ch({6, 6, 5}, kSp, 1);
  EXPECT_THROW(candidate_pat_mask(v, ch), DomainError);
}
