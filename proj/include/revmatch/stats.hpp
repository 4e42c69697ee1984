// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Summary statistics: mean, percentile bootstrap interval, Pearson r with a permutation p-value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/random.hpp"

namespace revmatch {

inline double mean(std::span<double const> values)
{
  if (values.empty())
    throw PreconditionError("mean of an empty sample");
  double sum = 0;
  for (double v : values)
    sum += v;
  return sum / static_cast<double>(values.size());
}

/// Percentile of sorted data with linear interpolation between closest ranks.
inline double percentile_sorted(std::span<double const> sorted, double pct)
{
  if (sorted.empty())
    throw PreconditionError("percentile of an empty sample");
  double const      pos  = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  auto const        low  = static_cast<std::size_t>(std::floor(pos));
  std::size_t const high = std::min(low + 1, sorted.size() - 1);
  double const      frac = pos - static_cast<double>(low);
  return sorted[low] + frac * (sorted[high] - sorted[low]);
}

struct Interval
{
  double lo = 0;
  double hi = 0;
};

/// 95% percentile-bootstrap interval of the mean. Each resample draws n indices with
/// SeededRng::below(n). The interval is widened, if needed, to contain the sample mean.
inline Interval bootstrap_ci(std::span<double const> values, std::uint64_t seed, int resamples = 1000)
{
  if (values.empty())
    throw PreconditionError("bootstrap_ci needs at least one value");
  if (resamples < 1)
    throw PreconditionError("bootstrap_ci needs at least one resample");
  SeededRng           rng(seed);
  std::size_t const   n = values.size();
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b)
  {
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i)
      sum += values[static_cast<std::size_t>(rng.below(n))];
    means.push_back(sum / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  Interval     ci{percentile_sorted(means, 2.5), percentile_sorted(means, 97.5)};
  double const m = mean(values);
  ci.lo          = std::min(ci.lo, m);
  ci.hi          = std::max(ci.hi, m);
  return ci;
}

struct Correlation
{
  double r = 0;
  double p = 1;
};

namespace detail {

inline double pearson_only(std::span<double const> xs, std::span<double const> ys)
{
  double const mx = mean(xs);
  double const my = mean(ys);
  double       sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    double const dx = xs[i] - mx;
    double const dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Product-moment correlation; two-sided p from `permutations` seeded shuffles of ys:
/// p = (1 + #{|r_perm| >= |r|}) / (1 + permutations).
inline Correlation pearson_r(std::span<double const> xs, std::span<double const> ys, std::uint64_t seed,
                             int permutations = 10000)
{
  if (xs.size() != ys.size())
    throw PreconditionError("pearson_r needs series of equal length");
  if (xs.size() < 3)
    throw PreconditionError("pearson_r needs at least 3 points");
  auto constant = [](std::span<double const> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(xs) || constant(ys))
    throw PreconditionError("pearson_r is undefined for a constant series");

  Correlation out;
  out.r = std::clamp(detail::pearson_only(xs, ys), -1.0, 1.0);

  SeededRng           rng(seed);
  std::vector<double> shuffled(ys.begin(), ys.end());
  int                 extreme = 0;
  double const        bar     = std::abs(out.r) - 1e-12;
  for (int k = 0; k < permutations; ++k)
  {
    rng.shuffle(std::span<double>(shuffled));
    if (std::abs(detail::pearson_only(xs, shuffled)) >= bar)
      ++extreme;
  }
  out.p = (1.0 + extreme) / (1.0 + permutations);
  return out;
}

}  // namespace revmatch
