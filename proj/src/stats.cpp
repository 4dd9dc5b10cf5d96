// SPDX-License-Identifier: Apache-2.0
#include "pmchar/stats.hpp"

#include <algorithm>
#include <cmath>

#include "pmchar/rng.hpp"
#include "pmchar/util.hpp"

namespace pmchar::stats {

Summary summarize(std::span<const double> xs) {
  if (xs.empty()) fail("summarize: empty sample set");
  Summary s;
  s.n = xs.size();
  s.min = xs[0];
  s.max = xs[0];
  double sum = 0;
  for (double x : xs) {
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sigma = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.sigma_defined = true;
  }
  return s;
}

double median(std::vector<double> xs) {
  if (xs.empty()) fail("median: empty sample set");
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Histogram make_histogram(std::span<const double> xs, double bin_width) {
  if (bin_width <= 0) fail("histogram: bin width must be > 0");
  Histogram h;
  h.bin_width = bin_width;
  if (xs.empty()) return h;
  double mn = *std::min_element(xs.begin(), xs.end());
  double mx = *std::max_element(xs.begin(), xs.end());
  h.origin = std::floor(mn / bin_width) * bin_width;
  size_t nbins = static_cast<size_t>(std::floor((mx - h.origin) / bin_width)) + 1;
  h.counts.assign(nbins, 0);
  for (double x : xs) {
    size_t k = static_cast<size_t>(std::floor((x - h.origin) / bin_width));
    if (k >= nbins) k = nbins - 1;  // guards fp round-up at the top edge
    ++h.counts[k];
    ++h.total;
  }
  return h;
}

double ks_uniform(std::span<const double> xs, double a, double b) {
  if (xs.empty()) fail("ks_uniform: empty sample set");
  if (b <= a) fail("ks_uniform: degenerate interval");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  double n = static_cast<double>(s.size());
  double d = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    double cdf = std::clamp((s[i] - a) / (b - a), 0.0, 1.0);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(cdf - lo), std::abs(cdf - hi)));
  }
  return d;
}

double ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) fail("ks_two_sample: empty sample set");
  std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double dkw_bound(size_t m, double alpha) {
  if (m == 0) fail("dkw_bound: m must be > 0");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(m)));
}

UniformFit fit_uniform_window(std::span<const double> delays_us, double d_floor_us) {
  UniformFit f;
  std::vector<double> kept;
  kept.reserve(delays_us.size());
  for (double d : delays_us) {
    if (d < d_floor_us)
      ++f.n_excluded;
    else
      kept.push_back(d);
  }
  if (kept.size() < 100)
    fail(strf("uniform fit: need >= 100 samples above the %.0f us floor, have %zu", d_floor_us,
              kept.size()));
  double mn = *std::min_element(kept.begin(), kept.end());
  double mx = *std::max_element(kept.begin(), kept.end());
  if (mx - mn <= 0) fail("uniform fit: no window detected (degenerate sample range)");
  double n = static_cast<double>(kept.size());
  double range = mx - mn;
  f.t_hat_us = range * (n + 1.0) / (n - 1.0);
  f.d_hat_us = mn - range / (n - 1.0);
  f.n_used = kept.size();
  f.ks_stat = ks_uniform(kept, f.d_hat_us, f.d_hat_us + f.t_hat_us);
  return f;
}

double EcdfSeries::at(double x) const {
  if (values.empty()) return 0;
  auto it = std::upper_bound(values.begin(), values.end(), x);
  return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
}

EcdfSeries make_ecdf(std::span<const double> xs, std::string label, int subset) {
  if (xs.empty()) fail("ecdf: empty sample set for label '" + label + "'");
  EcdfSeries e;
  e.label = std::move(label);
  e.subset = subset;
  e.values.assign(xs.begin(), xs.end());
  std::sort(e.values.begin(), e.values.end());
  return e;
}

std::vector<EcdfSeries> ecdf_with_subsets(const std::map<std::string, std::vector<double>>& groups,
                                          int k, uint64_t seed) {
  if (k < 1) fail("ecdf subsets: k must be >= 1");
  std::vector<EcdfSeries> out;
  for (const auto& [label, vals] : groups) {
    if (static_cast<size_t>(k) > vals.size())
      fail(strf("ecdf subsets: k=%d exceeds %zu samples in group '%s'", k, vals.size(),
                label.c_str()));
    out.push_back(make_ecdf(vals, label));
    std::vector<double> shuffled = vals;
    Rng rng(derive_seed(seed, "ecdf-subsets", fnv1a(label)));
    rng.shuffle(shuffled);
    size_t base = shuffled.size() / static_cast<size_t>(k);
    size_t rem = shuffled.size() % static_cast<size_t>(k);
    size_t pos = 0;
    for (int s = 0; s < k; ++s) {
      size_t take = base + (static_cast<size_t>(s) < rem ? 1 : 0);
      std::span<const double> part(shuffled.data() + pos, take);
      out.push_back(make_ecdf(part, label, s));
      pos += take;
    }
  }
  return out;
}

double mean_gap(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail("mean_gap: empty group");
  double ma = summarize(a).mean;
  double mb = summarize(b).mean;
  if (ma == 0) fail("mean_gap: reference mean is zero");
  return std::abs(ma - mb) / std::abs(ma);
}

AffineFit fit_affine(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail("affine fit: size mismatch");
  if (xs.size() < 2) fail("affine fit: need >= 2 points");
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double det = n * sxx - sx * sx;
  if (det == 0) fail("affine fit: degenerate x values");
  AffineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double fit = f.slope * xs[i] + f.intercept;
    double r = fit - ys[i];
    ss += r * r;
    if (ys[i] != 0) f.max_rel_residual = std::max(f.max_rel_residual, std::abs(r / ys[i]));
  }
  f.residual_sigma = xs.size() > 2 ? std::sqrt(ss / (n - 2.0)) : 0.0;
  return f;
}

AffineFit fit_linear_increments(std::span<const CStatePowerPoint> points, const std::string& sweep,
                                int first_index, int last_index, bool x_is_active) {
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    if (p.sweep != sweep) continue;
    if (p.order_index < first_index || p.order_index > last_index) continue;
    xs.push_back(static_cast<double>(x_is_active ? p.n_active : p.n_c1));
    ys.push_back(p.mean_w);
  }
  if (xs.size() < 2)
    fail(strf("increment fit: segment '%s' [%d..%d] has %zu points", sweep.c_str(), first_index,
              last_index, xs.size()));
  return fit_affine(xs, ys);
}

}  // namespace pmchar::stats

namespace pmchar {

const char* to_string(DiscardReason r) {
  switch (r) {
    case DiscardReason::validation_failed: return "validation_failed";
    case DiscardReason::follows_failure: return "follows_failure";
  }
  return "?";
}

}  // namespace pmchar
