// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate for the simulated backend: ten end-to-end criteria, each
// checked at its stated tolerance against the reference behaviour this suite
// is built to reproduce.  Prints one pass/fail line per criterion and exits
// with the number of failures, so it slots straight into ctest.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmchar/probes.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/runner.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/stats.hpp"
#include "pmchar/util.hpp"

using namespace pmchar;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!cond) {
      detail += " [FAILED]";
      ok = false;
    }
  }
};

struct Gate {
  int failures = 0;

  void report(int id, const char* label, const Criterion& c) {
    std::printf("[%s] %2d %-28s %s\n", c.ok ? "PASS" : "FAIL", id, label, c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) failures++;
  }
};

SimCpu make_sim(uint64_t seed) { return SimCpu(default_sim_model(), seed); }

probes::Context make_ctx(Platform& p, uint64_t seed) {
  return probes::Context{p, seed, "", "auto"};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> valid_delays(const probes::TransitionResult& r) {
  std::vector<double> out;
  for (const TransitionSample& s : r.samples)
    if (s.valid) out.push_back(s.delay_us);
  return out;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }
bool within_rel(double x, double target, double rel) {
  return std::abs(x - target) <= rel * std::abs(target);
}

bool is_compute_class(const std::string& w) {
  static const std::set<std::string> k = {"pause_loop", "busy_loop",   "scalar_add",
                                          "wide_mul",   "wide_fma",    "sqrt_chain"};
  return k.count(w) > 0;
}

bool is_memory_class(const std::string& w) {
  static const std::set<std::string> k = {"memory_read", "memory_write", "triad"};
  return k.count(w) > 0;
}

const CStatePowerPoint* sweep_point(const std::vector<CStatePowerPoint>& pts,
                                    const std::string& sweep, int order) {
  for (const CStatePowerPoint& p : pts)
    if (p.sweep == sweep && p.order_index == order) return &p;
  return nullptr;
}

double wakeup_median(Platform& p, uint64_t seed, int cstate, double freq_hz, bool remote,
                     std::vector<double>* raw = nullptr) {
  probes::Context ctx = make_ctx(p, seed);
  probes::WakeupParams wp;
  wp.n = 200;
  wp.cstate = cstate;
  wp.freq_hz = freq_hz;
  wp.remote = remote;
  probes::WakeupResult r = run_cstate_latency(ctx, wp);
  std::vector<double> xs;
  for (const WakeupSample& s : r.samples) xs.push_back(s.latency_us);
  if (raw) *raw = xs;
  return stats::median(xs);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> tree(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  std::sort(out.begin(), out.end());
  return out;
}

bool snapshots_equal(const ControlSnapshot& a, const ControlSnapshot& b) {
  return a.set_hz == b.set_hz && a.cstate_enabled == b.cstate_enabled && a.online == b.online &&
         a.governor == b.governor;
}

// --------------------------------------------------------------------------
// 1. Down-transition delays fill a uniform window: request->completion delays
//    for 2.2 -> 1.5 GHz form U[d, d+T] with T = 1000 us +/- 2% and
//    d = 390 us +/- 3%, from 10000 samples, in under 30 s of wall time.
Criterion transition_window() {
  Criterion c;
  SimCpu sim = make_sim(71);
  probes::Context ctx = make_ctx(sim, 71);
  probes::TransitionParams p;
  p.from_hz = 2.2e9;
  p.to_hz = 1.5e9;
  p.n = 10000;
  auto t0 = std::chrono::steady_clock::now();
  probes::TransitionResult r = run_freq_transition(ctx, p);
  double wall = seconds_since(t0);
  stats::UniformFit fit = stats::fit_uniform_window(valid_delays(r));
  c.require(within_rel(fit.t_hat_us, 1000.0, 0.02),
            strf("T=%.2fus (1000 +/- 2%%)", fit.t_hat_us));
  c.require(within_rel(fit.d_hat_us, 390.0, 0.03), strf("d=%.2fus (390 +/- 3%%)", fit.d_hat_us));
  c.require(wall < 30.0, strf("wall=%.1fs (<30s)", wall));
  return c;
}

// 2. Up-transitions raced against the revert window: back-to-back reversals
//    with gaps under the window produce a sub-100us shortcut population
//    (>= 1% of samples); keeping every gap at or above 5 ms eliminates it.
Criterion revert_shortcut() {
  Criterion c;
  {
    SimCpu sim = make_sim(72);
    probes::Context ctx = make_ctx(sim, 72);
    probes::TransitionParams p;
    p.from_hz = 2.2e9;
    p.to_hz = 2.5e9;
    p.n = 2000;
    p.wait_max_ms = 4.0;
    probes::TransitionResult r = run_freq_transition(ctx, p);
    size_t below = 0;
    for (const TransitionSample& s : r.samples) below += s.delay_us < 100.0;
    double frac = static_cast<double>(below) / static_cast<double>(r.samples.size());
    c.require(frac >= 0.01, strf("gap<5ms: %.1f%% below 100us (>=1%%)", 100.0 * frac));
  }
  {
    SimCpu sim = make_sim(73);
    probes::Context ctx = make_ctx(sim, 73);
    probes::TransitionParams p;
    p.from_hz = 2.2e9;
    p.to_hz = 2.5e9;
    p.n = 1000;
    p.wait_max_ms = 5.0;
    probes::TransitionResult r = run_freq_transition(ctx, p);
    size_t below = 0;
    for (const TransitionSample& s : r.samples) below += s.delay_us < 100.0;
    c.require(below == 0, strf("gap>=5ms: %zu below 100us (=0)", below));
  }
  return c;
}

// 3. Mixed set points inside one CCX land on the 3x3 coupling table, every
//    cell within 1 MHz.
Criterion coupling_table() {
  Criterion c;
  SimCpu sim = make_sim(74);
  probes::Context ctx = make_ctx(sim, 74);
  probes::MixedFreqParams p;
  p.duration_s = 4;
  probes::MixedFreqResult r = run_mixed_freq(ctx, p);
  static const double expect[3][3] = {{1.499e9, 1.466e9, 1.428e9},
                                      {2.200e9, 2.199e9, 2.000e9},
                                      {2.497e9, 2.499e9, 2.499e9}};
  double worst = 0;
  bool all_ok = r.cells.size() == 9;
  for (int i = 0; i < 3 && all_ok; i++)
    for (int j = 0; j < 3; j++) {
      double err = std::abs(r.cells[static_cast<size_t>(3 * i + j)].mean_hz - expect[i][j]);
      worst = std::max(worst, err);
      all_ok = all_ok && err <= 1e6;
    }
  c.require(all_ok, strf("9 cells, worst |err|=%.3f MHz (<=1 MHz)", worst / 1e6));
  return c;
}

// 4. Idle-power sweep structure: deep-idle baseline 99.1 +/- 0.5 W; the first
//    C1-capped thread costs a core-wake step to 180.3 +/- 0.5 W; beyond it the
//    per-core increments are 0.09 +/- 0.01 W (C1), 0.33 +/- 0.02 W (pause
//    loop per core) and 0.05 +/- 0.01 W (pause loop on the sibling thread).
Criterion idle_sweep() {
  Criterion c;
  SimCpu sim = make_sim(75);
  probes::Context ctx = make_ctx(sim, 75);
  probes::CStateSweepResult r = run_cstate_power_sweep(ctx, probes::CStateSweepParams{});
  if (!r.measured) {
    c.require(false, "sweep not measured");
    return c;
  }
  const Topology& topo = sim.topology();
  int nc = topo.n_cores(), ncpu = topo.n_cpus();
  const CStatePowerPoint* base = sweep_point(r.points, "baseline", 0);
  const CStatePowerPoint* first = sweep_point(r.points, "c1", 1);
  c.require(base && within(base->mean_w, 99.1, 0.5), strf("baseline=%.2fW (99.1 +/- 0.5)",
                                                          base ? base->mean_w : -1.0));
  c.require(first && within(first->mean_w, 180.3, 0.5), strf("first C1=%.2fW (180.3 +/- 0.5)",
                                                             first ? first->mean_w : -1.0));
  stats::AffineFit c1 = stats::fit_linear_increments(r.points, "c1", 2, nc, false);
  stats::AffineFit act = stats::fit_linear_increments(r.points, "active", 2, nc, true);
  stats::AffineFit sib = stats::fit_linear_increments(r.points, "active", nc + 1, ncpu, true);
  c.require(within(c1.slope, 0.09, 0.01), strf("C1/core=%.4fW (0.09 +/- 0.01)", c1.slope));
  c.require(within(act.slope, 0.33, 0.02), strf("active/core=%.4fW (0.33 +/- 0.02)", act.slope));
  c.require(within(sib.slope, 0.05, 0.01), strf("active/sibling=%.4fW (0.05 +/- 0.01)",
                                                sib.slope));
  return c;
}

// 5. Wake-up latency matrix, 200 samples per combination: shallow-state
//    medians 1.0/1.0/1.5 us at 2.5/2.2/1.5 GHz (+/- 10%); every deep-state
//    sample inside [20, 25] us; waking from the other package adds
//    1.0 +/- 0.5 us to the median.
Criterion wakeup_matrix() {
  Criterion c;
  SimCpu sim = make_sim(76);
  double m25 = wakeup_median(sim, 761, 1, 2.5e9, false);
  double m22 = wakeup_median(sim, 762, 1, 2.2e9, false);
  double m15 = wakeup_median(sim, 763, 1, 1.5e9, false);
  std::vector<double> deep;
  double mdeep = wakeup_median(sim, 764, 2, 0, false, &deep);
  double mrem = wakeup_median(sim, 765, 1, 0, true);
  c.require(within_rel(m25, 1.0, 0.10), strf("C1@2.5GHz med=%.3fus (1.0 +/- 10%%)", m25));
  c.require(within_rel(m22, 1.0, 0.10), strf("C1@2.2GHz med=%.3fus (1.0 +/- 10%%)", m22));
  c.require(within_rel(m15, 1.5, 0.10), strf("C1@1.5GHz med=%.3fus (1.5 +/- 10%%)", m15));
  double dmin = *std::min_element(deep.begin(), deep.end());
  double dmax = *std::max_element(deep.begin(), deep.end());
  c.require(dmin >= 20.0 && dmax <= 25.0,
            strf("C2 range=[%.2f, %.2f]us (within [20, 25]), med=%.2fus", dmin, dmax, mdeep));
  c.require(within(mrem - m25, 1.0, 0.5),
            strf("remote-local=%.3fus (1.0 +/- 0.5)", mrem - m25));
  return c;
}

// 6. Sustained full-load saturation: one thread per core settles at 2.1 GHz /
//    IPC 3.23 / 489 W system power; two threads per core at 2.0 GHz / 3.56 /
//    509 W; the package energy counters pin to 170 W per socket.  All means
//    within 1%; spreads reported alongside.
Criterion saturation() {
  Criterion c;
  SimCpu sim = make_sim(77);
  probes::Context ctx = make_ctx(sim, 77);
  struct Want {
    int tpc;
    double hz, ipc, sys;
  };
  for (const Want& w : {Want{1, 2.1e9, 3.23, 489.0}, Want{2, 2.0e9, 3.56, 509.0}}) {
    probes::ThrottleParams p;
    p.threads_per_core = w.tpc;
    p.duration_s = 120;
    probes::ThrottleResult r = run_throttle(ctx, p);
    bool pkgs_ok = !r.rapl_pkg_w.empty();
    double pkg_worst = 0;
    for (double pw : r.rapl_pkg_w) {
      pkgs_ok = pkgs_ok && within_rel(pw, 170.0, 0.01);
      pkg_worst = std::max(pkg_worst, std::abs(pw - 170.0));
    }
    c.require(within_rel(r.freq_hz.mean, w.hz, 0.01),
              strf("%dT f=%.4fGHz sd=%.1fMHz (%.1f +/- 1%%)", w.tpc, r.freq_hz.mean / 1e9,
                   r.freq_hz.sigma / 1e6, w.hz / 1e9));
    c.require(within_rel(r.ipc.mean, w.ipc, 0.01),
              strf("ipc=%.3f sd=%.3f (%.2f +/- 1%%)", r.ipc.mean, r.ipc.sigma, w.ipc));
    c.require(within_rel(r.sys_power_w, w.sys, 0.01),
              strf("sys=%.1fW (%.0f +/- 1%%)", r.sys_power_w, w.sys));
    c.require(pkgs_ok, strf("pkg caps |err|<=%.2fW of 170 (+/- 1%%)", pkg_worst));
  }
  return c;
}

// 7. Energy-counter fidelity: (a) for memory-bound classes the reference
//    power sits >= 20% above what the package counters imply under the
//    compute-class power map; (b) one affine map takes the core counters to
//    the package counters across every compute-class cell, max relative
//    residual under 2%.
Criterion counter_fidelity() {
  Criterion c;
  SimCpu sim = make_sim(78);
  probes::Context ctx = make_ctx(sim, 78);
  probes::RaplAccuracyResult r = run_rapl_accuracy(ctx, probes::RaplAccuracyParams{});
  double nominal = sim.nominal_hz();

  std::vector<double> xs, ys;
  for (const probes::RaplConfigRecord& rec : r.records)
    if (rec.placement == "all_cores" && rec.freq_hz == nominal && is_compute_class(rec.workload)) {
      xs.push_back(rec.rapl_pkg_w);
      ys.push_back(rec.sys_w);
    }
  stats::AffineFit sys_map = stats::fit_affine(xs, ys);
  double min_excess = 1e300;
  int n_mem = 0;
  for (const probes::RaplConfigRecord& rec : r.records)
    if (rec.placement == "all_cores" && rec.freq_hz == nominal && is_memory_class(rec.workload)) {
      double predicted = sys_map.slope * rec.rapl_pkg_w + sys_map.intercept;
      min_excess = std::min(min_excess, rec.sys_w / predicted - 1.0);
      n_mem++;
    }
  c.require(n_mem == 3 && min_excess >= 0.20,
            strf("memory-class excess min=%.1f%% over %d classes (>=20%%)", 100.0 * min_excess,
                 n_mem));

  std::vector<double> cx, cy;
  for (const probes::RaplConfigRecord& rec : r.records)
    if (is_compute_class(rec.workload)) {
      cx.push_back(rec.rapl_core_w);
      cy.push_back(rec.rapl_pkg_w);
    }
  stats::AffineFit core_map = stats::fit_affine(cx, cy);
  c.require(core_map.max_rel_residual < 0.02,
            strf("core->pkg map over %zu cells: max resid=%.3f%% (<2%%)", cx.size(),
                 100.0 * core_map.max_rel_residual));
  return c;
}

// 8. Operand-data power signature, 300 blocks per instruction: the wide-XOR
//    system-power gap between all-zero and all-one operands is 7.6% +/- 0.5pp
//    with fully separated distributions, while the core counters move by at
//    most 0.1%; the shift-based variant stays under 0.9% at the wall.
Criterion data_signature() {
  Criterion c;
  auto gaps = [&](WorkloadClass instr, uint64_t seed, std::vector<double>* core_gap) {
    SimCpu sim = make_sim(seed);
    probes::Context ctx = make_ctx(sim, seed);
    probes::RaplDataParams p;
    p.instruction = instr;
    p.n_blocks = 300;
    probes::RaplDataResult r = run_rapl_data(ctx, p);
    std::vector<double> sys0, sys1, core0, core1;
    for (const BlockRecord& b : r.blocks) {
      if (b.weight == 0.0) {
        sys0.push_back(b.sys_power_w);
        core0.push_back(b.core_power_w());
      } else if (b.weight == 1.0) {
        sys1.push_back(b.sys_power_w);
        core1.push_back(b.core_power_w());
      }
    }
    if (core_gap) *core_gap = {stats::mean_gap(core0, core1)};
    return std::pair<double, double>{stats::mean_gap(sys0, sys1),
                                     stats::ks_two_sample(sys0, sys1)};
  };
  std::vector<double> core_gap;
  auto [xor_gap, xor_ks] = gaps(WorkloadClass::wide_xor, 81, &core_gap);
  auto [shr_gap, shr_ks] = gaps(WorkloadClass::shift_right, 82, nullptr);
  (void)shr_ks;
  c.require(within(xor_gap, 0.076, 0.005), strf("xor sys gap=%.4f (0.076 +/- 0.005)", xor_gap));
  c.require(xor_ks == 1.0, strf("xor distributions disjoint (ks=%.3f)", xor_ks));
  c.require(core_gap[0] <= 0.001, strf("xor core gap=%.5f (<=0.001)", core_gap[0]));
  c.require(shr_gap <= 0.009, strf("shift sys gap=%.4f (<=0.009)", shr_gap));
  return c;
}

// 9. Estimator properties on synthetic data: the uniform-window fit recovers
//    d and T within 1% at n=1e5; random subset ECDFs of one distribution stay
//    inside twice the DKW band; histograms preserve counts across bin widths;
//    ECDFs are monotone in [0, 1]; the affine fit is exact on a clean line.
Criterion estimator_properties() {
  Criterion c;
  Rng rng(derive_seed(9, "acceptance/estimators"));

  std::vector<double> window(100000);
  for (double& x : window) x = rng.uniform(390.0, 1390.0);
  stats::UniformFit fit = stats::fit_uniform_window(window);
  c.require(within_rel(fit.d_hat_us, 390.0, 0.01) && within_rel(fit.t_hat_us, 1000.0, 0.01),
            strf("uniform fit d=%.2f T=%.2f (390/1000 +/- 1%%)", fit.d_hat_us, fit.t_hat_us));

  std::map<std::string, std::vector<double>> groups;
  for (int i = 0; i < 2000; i++) groups["g"].push_back(rng.normal(50.0, 7.0));
  std::vector<stats::EcdfSeries> series =
      stats::ecdf_with_subsets(groups, 10, derive_seed(9, "acceptance/subsets"));
  std::vector<const stats::EcdfSeries*> subsets;
  for (const stats::EcdfSeries& s : series)
    if (s.subset >= 0) subsets.push_back(&s);
  double worst = 0;
  for (size_t i = 0; i < subsets.size(); i++)
    for (size_t j = i + 1; j < subsets.size(); j++)
      worst = std::max(worst, stats::ks_two_sample(subsets[i]->values, subsets[j]->values));
  double band = 2.0 * stats::dkw_bound(200);
  c.require(subsets.size() == 10 && worst <= band,
            strf("subset ECDF spread=%.3f (<= 2*DKW=%.3f)", worst, band));

  bool hist_ok = true;
  for (double w : {25.0, 7.0, 1000.0}) {
    stats::Histogram h = stats::make_histogram(window, w);
    uint64_t sum = 0;
    for (uint64_t k : h.counts) sum += k;
    hist_ok = hist_ok && h.total == window.size() && sum == h.total;
  }
  c.require(hist_ok, "histogram totals preserved at widths 25/7/1000");

  stats::EcdfSeries e = stats::make_ecdf(groups["g"], "g");
  bool mono = true;
  double prev = -1.0;
  for (double x = 20.0; x <= 80.0; x += 0.25) {
    double v = e.at(x);
    mono = mono && v >= prev && v >= 0.0 && v <= 1.0;
    prev = v;
  }
  mono = mono && e.at(e.values.front() - 1.0) == 0.0 && e.at(e.values.back()) == 1.0;
  c.require(mono, "ECDF monotone, 0 below support, 1 at max");

  std::vector<double> lx = {-3.0, -1.0, 0.0, 2.0, 5.0, 10.0}, ly;
  for (double x : lx) ly.push_back(3.5 * x - 2.0);
  stats::AffineFit lf = stats::fit_affine(lx, ly);
  c.require(std::abs(lf.slope - 3.5) < 1e-9 && std::abs(lf.intercept + 2.0) < 1e-9,
            strf("line recovered: slope=%.6f intercept=%.6f", lf.slope, lf.intercept));
  return c;
}

// 10. Run discipline: the full simulated suite at reference sample counts is
//     byte-deterministic under a fixed config+seed, finishes in under five
//     minutes, and hands the control state back exactly as it found it.
Criterion run_discipline() {
  Criterion c;
  fs::path da = "acceptance_det_a", db = "acceptance_det_b", dr = "acceptance_restore";
  fs::remove_all(da);
  fs::remove_all(db);
  fs::remove_all(dr);

  runner::RunConfig cfg;
  cfg.preset = "reference";
  cfg.seed = 424242;
  cfg.out_dir = da.string();
  auto t0 = std::chrono::steady_clock::now();
  runner::RunResult ra = runner::run(cfg);
  double wall = seconds_since(t0);
  cfg.out_dir = db.string();
  runner::RunResult rb = runner::run(cfg);

  c.require(ra.exit_status == 0 && rb.exit_status == 0 && ra.probes.size() == 8,
            strf("full suite: %zu probes, status %d/%d", ra.probes.size(), ra.exit_status,
                 rb.exit_status));
  std::vector<std::string> fa = tree(da), fb = tree(db);
  size_t mismatches = fa == fb ? 0 : 1;
  if (fa == fb)
    for (const std::string& rel : fa) {
      if (rel == "manifest.json") continue;  // carries wall-clock timings
      if (slurp(da / rel) != slurp(db / rel)) mismatches++;
    }
  c.require(mismatches == 0,
            strf("repeat run byte-identical over %zu files", fa.empty() ? 0 : fa.size() - 1));
  c.require(wall < 300.0, strf("wall=%.1fs (<300s)", wall));

  SimCpu sim = make_sim(99);
  ControlSnapshot before = sim.snapshot_control_state();
  runner::RunConfig rc;
  rc.preset = "desk";
  rc.seed = 99;
  rc.out_dir = dr.string();
  runner::RunResult rres = runner::run(rc, sim);
  ControlSnapshot after = sim.snapshot_control_state();
  c.require(rres.exit_status == 0 && snapshots_equal(before, after),
            "control state restored to the startup snapshot");

  fs::remove_all(da);
  fs::remove_all(db);
  fs::remove_all(dr);
  return c;
}

}  // namespace

int main() {
  Gate g;
  std::printf("acceptance gate: simulated backend, %s\n", kVersion);
  g.report(1, "transition window timing", transition_window());
  g.report(2, "revert-window shortcuts", revert_shortcut());
  g.report(3, "coupling table", coupling_table());
  g.report(4, "idle-power sweep", idle_sweep());
  g.report(5, "wake-up latency matrix", wakeup_matrix());
  g.report(6, "full-load saturation", saturation());
  g.report(7, "counter fidelity maps", counter_fidelity());
  g.report(8, "operand-data signature", data_signature());
  g.report(9, "estimator properties", estimator_properties());
  g.report(10, "determinism and restore", run_discipline());
  if (g.failures == 0)
    std::printf("acceptance: 10/10 criteria passed\n");
  else
    std::printf("acceptance: %d of 10 criteria FAILED\n", g.failures);
  return g.failures;
}
