// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pmchar/samples.hpp"

namespace pmchar::stats {

// Mean / spread of a sample set.  sigma uses the n-1 denominator; a single
// value yields sigma 0 with sigma_defined=false so reports can mark it.
struct Summary {
  double mean = 0;
  double sigma = 0;
  double min = 0;
  double max = 0;
  size_t n = 0;
  bool sigma_defined = false;
};

Summary summarize(std::span<const double> xs);

double median(std::vector<double> xs);  // by value: sorts its copy

// Fixed-width histogram.  Bin k covers [origin + k*w, origin + (k+1)*w); a
// sample exactly on an edge lands in the upper bin (standard floor indexing).
// Empty input produces an empty histogram with total 0.
struct Histogram {
  double bin_width = 0;
  double origin = 0;                            // lower edge of bin 0
  std::vector<uint64_t> counts;
  uint64_t total = 0;
  double lower_edge(size_t k) const { return origin + static_cast<double>(k) * bin_width; }
};

Histogram make_histogram(std::span<const double> xs, double bin_width = 25.0);

// Uniform-window fit for transition delays.  Samples below d_floor_us are
// excluded first (they belong to the shortcut subpopulation, not the window).
// For X ~ U[d, d+T] the order statistics give the unbiased estimators
//   T_hat = (max - min) * (n+1)/(n-1),   d_hat = min - (max - min)/(n-1).
// Requires >= 100 surviving samples; throws "no window detected" when the
// surviving range is degenerate.
struct UniformFit {
  double d_hat_us = 0;
  double t_hat_us = 0;
  double ks_stat = 0;   // one-sample KS vs U[d_hat, d_hat + t_hat]
  size_t n_used = 0;
  size_t n_excluded = 0;
};

UniformFit fit_uniform_window(std::span<const double> delays_us, double d_floor_us = 100.0);

// One-sample Kolmogorov-Smirnov statistic against U[a, b].
double ks_uniform(std::span<const double> xs, double a, double b);

// Two-sample KS statistic; 1.0 means the empirical supports do not overlap.
double ks_two_sample(std::span<const double> xs, std::span<const double> ys);

// Dvoretzky-Kiefer-Wolfowitz band: with probability >= 1-alpha the ECDF of m
// iid samples lies within sqrt(ln(2/alpha)/(2m)) of the true CDF, so two
// disjoint subsets of the same distribution stay within twice that.
double dkw_bound(size_t m, double alpha = 0.01);

// Empirical CDF over sorted values; evaluation is right-continuous.
struct EcdfSeries {
  std::string label;
  int subset = -1;              // -1: full set
  std::vector<double> values;   // sorted ascending
  double at(double x) const;
};

EcdfSeries make_ecdf(std::span<const double> xs, std::string label, int subset = -1);

// Splits each labeled group into k equal-size random subsets (seeded shuffle;
// the subsets partition the group, remainders spread over the first subsets)
// and returns an ECDF per (label, subset) plus one per full group (subset -1).
// Throws if k exceeds a group's sample count.
std::vector<EcdfSeries> ecdf_with_subsets(const std::map<std::string, std::vector<double>>& groups,
                                          int k, uint64_t seed);

// |mean(a) - mean(b)| / mean(a).  Throws on an empty group.
double mean_gap(std::span<const double> a, std::span<const double> b);

// Least squares y = slope*x + intercept.  max_rel_residual is the largest
// |fit - y| / |y|; recovers exact coefficients on noise-free lines.
struct AffineFit {
  double slope = 0;
  double intercept = 0;
  double residual_sigma = 0;
  double max_rel_residual = 0;
};

AffineFit fit_affine(std::span<const double> xs, std::span<const double> ys);

// Incremental-cost fit over one segment of an idle-power sweep: least squares
// of mean_w against the chosen occupancy count, restricted to order indices
// [first_index, last_index].  Pass the segment after any structural jump
// (e.g. skip the first point that carries the wake-up offset).
AffineFit fit_linear_increments(std::span<const CStatePowerPoint> points,
                                const std::string& sweep, int first_index, int last_index,
                                bool x_is_active);

}  // namespace pmchar::stats
