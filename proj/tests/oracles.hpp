#pragma once

// Reference implementations used only by the tests. Each one is written
// the slow, obvious way so it shares no code path with the library.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "patcnn/volume.hpp"

namespace patcnn::oracle {

using Rational = boost::multiprecision::cpp_rational;
using BigFloat = boost::multiprecision::cpp_bin_float_50;

// Exhaustive Otsu over an explicit histogram. Class value of bin b is its
// centre lo + (b + 1/2) * width, kept exact as a rational. Returns the
// lowest split k maximising w0 * w1 * (mu0 - mu1)^2 with classes
// [0, k] and [k + 1, bins).
inline std::size_t otsu_split(const std::vector<long long>& hist, double lo, double hi) {
  const std::size_t bins = hist.size();
  const Rational width = (Rational(hi) - Rational(lo)) / Rational(static_cast<long long>(bins));
  std::vector<Rational> centre(bins);
  for (std::size_t b = 0; b < bins; ++b)
    centre[b] = Rational(lo) + (Rational(static_cast<long long>(b)) + Rational(1, 2)) * width;

  Rational best = -1;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    Rational w0 = 0, w1 = 0, s0 = 0, s1 = 0;
    for (std::size_t b = 0; b < bins; ++b) {
      if (b <= k) {
        w0 += hist[b];
        s0 += centre[b] * hist[b];
      } else {
        w1 += hist[b];
        s1 += centre[b] * hist[b];
      }
    }
    Rational sigma = 0;
    if (w0 > 0 && w1 > 0) {
      const Rational d = s0 / w0 - s1 / w1;
      sigma = w0 * w1 * d * d;
    }
    if (sigma > best) {
      best = sigma;
      best_k = k;
    }
  }
  return best_k;
}

// All-pairs Hausdorff. Squared distances are summed in the same order the
// library documents so that the comparison can be exact.
inline double hausdorff(const LabelMask& a, const LabelMask& b, const Spacing& s) {
  auto points = [](const LabelMask& m) {
    std::vector<Index3> p;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) p.push_back(m.index_of(i));
    return p;
  };
  const auto pa = points(a), pb = points(b);
  auto directed = [&](const std::vector<Index3>& from, const std::vector<Index3>& to) {
    double worst = 0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = (double(p.x) - double(q.x)) * s.x;
        const double dy = (double(p.y) - double(q.y)) * s.y;
        const double dz = (double(p.z) - double(q.z)) * s.z;
        best = std::min(best, (dx * dx + dy * dy) + dz * dz);
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(pa, pb), directed(pb, pa)));
}

inline double dice_sets(const LabelMask& a, const LabelMask& b) {
  std::set<std::size_t> sa, sb, both;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) sa.insert(i);
    if (b[i]) sb.insert(i);
  }
  for (auto i : sa)
    if (sb.count(i)) both.insert(i);
  if (sa.empty() && sb.empty()) return 1.0;
  return 2.0 * double(both.size()) / double(sa.size() + sb.size());
}

// Loss evaluated at 50 significant digits.
inline BigFloat combined_loss(std::span<const double> y, std::span<const double> x, double eps, bool full_bce) {
  using boost::multiprecision::log;
  const BigFloat lo("1e-7"), hi = BigFloat(1) - lo;
  BigFloat sxy = 0, sx = 0, sy = 0, ce = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const BigFloat yi = y[i], xi = x[i];
    sxy += xi * yi;
    sx += xi;
    sy += yi;
    BigFloat yc = yi < lo ? lo : (yi > hi ? hi : yi);
    ce += xi * log(yc);
    if (full_bce) ce += (BigFloat(1) - xi) * log(BigFloat(1) - yc);
  }
  const BigFloat e = eps;
  return BigFloat(1) - (2 * sxy + e) / (sx + sy + e) - ce / BigFloat(y.size());
}

// Solves X'X b = X'y by Gaussian elimination with partial pivoting at 50
// digits.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
  const std::size_t n = X.size(), p = X[0].size();
  std::vector<std::vector<BigFloat>> A(p, std::vector<BigFloat>(p + 1, BigFloat(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < p; ++k) A[j][k] += BigFloat(X[i][j]) * X[i][k];
      A[j][p] += BigFloat(X[i][j]) * y[i];
    }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (abs(A[r][c]) > abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const BigFloat f = A[r][c] / A[c][c];
      for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
    }
  }
  std::vector<double> beta(p);
  for (std::size_t j = 0; j < p; ++j) beta[j] = static_cast<double>(A[j][p] / A[j][j]);
  return beta;
}

// Bernoulli log-likelihood of a logistic model, at 50 digits.
inline double logistic_loglik(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                              const std::vector<double>& beta) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  BigFloat ll = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    BigFloat eta = 0;
    for (std::size_t j = 0; j < beta.size(); ++j) eta += BigFloat(X[i][j]) * beta[j];
    ll += BigFloat(y[i]) * eta - log(BigFloat(1) + exp(eta));
  }
  return static_cast<double>(ll);
}

}  // namespace patcnn::oracle
