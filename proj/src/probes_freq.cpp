// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "pmchar/kernels.hpp"
#include "pmchar/probes.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/stats.hpp"
#include "pmchar/util.hpp"
#include "probe_util.hpp"

namespace pmchar::probes {

namespace {

// 97.5% Student-t quantile via the normal quantile with a small-sample
// correction; within ~2% of the exact table for df >= 5 (1.984 at df = 99).
double student_t975(int df) {
  double z = 1.959963985;
  return df > 0 ? z * (1.0 + (z * z + 1.0) / (4.0 * df)) : z;
}

// Mean busy-chain runtime over `runs` chains at the current operating point.
stats::Summary chain_summary(Platform& p, int cpu, double cycles, int runs) {
  std::vector<double> ns(static_cast<size_t>(runs));
  for (double& v : ns) v = static_cast<double>(timed_cycles(p, cpu, cycles));
  return stats::summarize(ns);
}

}  // namespace

void apply_validation_outcome(TransitionSample& s, bool ok, bool& prev_failed) {
  if (!ok) {
    s.valid = false;
    s.discard_reason = DiscardReason::validation_failed;
  } else if (prev_failed) {
    s.valid = false;
    s.discard_reason = DiscardReason::follows_failure;
  }
  prev_failed = !ok;
}

TransitionResult run_freq_transition(const Context& ctx, const TransitionParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  topo.require_cpu(p.cpu);
  pf.require_valid_frequency(p.from_hz);
  pf.require_valid_frequency(p.to_hz);
  if (p.n < 0) fail("transition probe: n must be >= 0");
  if (p.wait_max_ms <= 0) fail("transition probe: wait_max_ms must be > 0");
  if (p.detect_cycles <= 0) fail("transition probe: detect_cycles must be > 0");
  if (!(p.detect_band > 0) || p.detect_band >= 0.5)
    fail("transition probe: detect_band must be in (0, 0.5)");
  if (p.validate_runs < 2) fail("transition probe: validate_runs must be >= 2");

  int core = topo.core_of(p.cpu);
  // Park every other core at the slowest point so the worker core's own set
  // point is the one its effective frequency follows.
  double floor_hz = pf.available_frequencies().front();
  for (int c = 0; c < topo.n_cores(); c++) set_core_hz(pf, c, c == core ? p.from_hz : floor_hz);
  settle(pf);

  // Keep the worker busy for the whole probe so chains run back to back.
  ScopedWorkload busy(pf, p.cpu, WorkloadClass::minimal_timed);

  TransitionResult r;
  r.params = p;

  auto calibrate = [&](double hz) {
    set_core_hz(pf, core, hz);
    settle(pf);
    return chain_summary(pf, p.cpu, p.detect_cycles, p.validate_runs);
  };
  stats::Summary cal_to = calibrate(p.to_hz);
  stats::Summary cal_from = calibrate(p.from_hz);  // iterations start at `from`
  r.chain_ns_to = cal_to.mean;
  r.chain_sigma_to = cal_to.sigma;
  r.chain_ns_from = cal_from.mean;
  r.chain_sigma_from = cal_from.sigma;

  if (p.from_hz != p.to_hz) {
    double lo = std::min(cal_from.mean, cal_to.mean);
    double hi = std::max(cal_from.mean, cal_to.mean);
    if (lo * (1.0 + p.detect_band) >= hi * (1.0 - p.detect_band))
      fail(strf("transition probe: chains at %.4g Hz and %.4g Hz run %.0f ns vs %.0f ns; the "
                "±%.0f%% accept bands overlap, transitions cannot be told apart",
                p.from_hz, p.to_hz, cal_from.mean, cal_to.mean, p.detect_band * 100.0));
  }

  double t_q = student_t975(p.validate_runs - 1);
  auto ci_width = [&](const stats::Summary& cal) {
    // Relative floor so an exact (zero-variance) calibration still accepts.
    return std::max(t_q * cal.sigma / std::sqrt(static_cast<double>(p.validate_runs)),
                    1e-4 * cal.mean);
  };
  double ci_to = ci_width(cal_to);
  double ci_from = ci_width(cal_from);
  int64_t timeout_ns = static_cast<int64_t>(p.detect_timeout_ms * 1e6);

  // Runs chains until one lands inside the accept band around `target_ns`.
  auto detect = [&](int64_t t_req, double target_ns) {
    for (;;) {
      double ns = static_cast<double>(timed_cycles(pf, p.cpu, p.detect_cycles));
      if (std::fabs(ns - target_ns) <= p.detect_band * target_ns) return;
      if (pf.now_ns() - t_req > timeout_ns)
        fail(strf("transition probe: no chain matched %.0f ns within %.0f ms of the request; "
                  "is the set point honoured?",
                  target_ns, p.detect_timeout_ms));
    }
  };
  auto validate = [&](const stats::Summary& cal, double width) {
    stats::Summary v = chain_summary(pf, p.cpu, p.detect_cycles, p.validate_runs);
    return std::fabs(v.mean - cal.mean) <= width;
  };

  Rng wait_rng(derive_seed(ctx.seed, "freq_transition.wait", static_cast<uint64_t>(p.cpu)));
  double sleep_lo_ms = p.wait_max_ms >= p.guard_ms ? p.guard_ms : 0.0;
  bool prev_failed = false;

  for (int i = 0; i < p.n; i++) {
    TransitionSample s;
    s.from_hz = p.from_hz;
    s.to_hz = p.to_hz;

    int64_t t_req = pf.now_ns();
    set_core_hz(pf, core, p.to_hz);
    detect(t_req, cal_to.mean);
    // The chain that proved the new frequency is not part of the delay.
    s.delay_us = std::max(0.0, static_cast<double>(pf.now_ns() - t_req) - cal_to.mean) / 1000.0;
    bool ok = validate(cal_to, ci_to);

    // Return leg: restore the starting point and prove it the same way.
    int64_t t_back = pf.now_ns();
    set_core_hz(pf, core, p.from_hz);
    detect(t_back, cal_from.mean);
    ok = validate(cal_from, ci_from) && ok;

    apply_validation_outcome(s, ok, prev_failed);
    (s.valid ? r.n_valid : r.n_discarded)++;
    r.samples.push_back(s);

    pf.sleep_ns(static_cast<int64_t>(wait_rng.uniform(sleep_lo_ms, p.wait_max_ms) * 1e6));
  }

  csv::Table t = new_report(ctx, "freq_transition");
  t.set_meta("cpu", strf("%d", p.cpu));
  t.set_meta("from_hz", num(p.from_hz));
  t.set_meta("to_hz", num(p.to_hz));
  t.set_meta("n", strf("%d", p.n));
  t.set_meta("wait_max_ms", num(p.wait_max_ms));
  t.set_meta("guard_ms", num(p.guard_ms));
  t.set_meta("detect_cycles", num(p.detect_cycles));
  t.set_meta("detect_band", num(p.detect_band));
  t.set_meta("validate_runs", strf("%d", p.validate_runs));
  t.set_meta("chain_ns_from", num(r.chain_ns_from));
  t.set_meta("chain_ns_to", num(r.chain_ns_to));
  t.set_meta("n_valid", strf("%d", r.n_valid));
  t.set_meta("n_discarded", strf("%d", r.n_discarded));
  t.columns = {"index", "delay_us", "valid", "discard_reason"};
  for (size_t i = 0; i < r.samples.size(); i++) {
    const TransitionSample& s = r.samples[i];
    t.rows.push_back({strf("%zu", i), num(s.delay_us), s.valid ? "1" : "0",
                      s.discard_reason ? to_string(*s.discard_reason) : ""});
  }
  write_report(ctx, t,
               strf("freq_transition_%lld_%lld.csv", llround(p.from_hz / 1e6),
                    llround(p.to_hz / 1e6)));
  return r;
}

SiblingResult run_sibling_freq(const Context& ctx, const SiblingParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  std::vector<double> freqs = pf.available_frequencies();
  double low = p.low_hz > 0 ? p.low_hz : freqs.front();
  double high = p.high_hz > 0 ? p.high_hz : freqs.back();
  pf.require_valid_frequency(low);
  pf.require_valid_frequency(high);
  if (p.core < 0 || p.core >= topo.n_cores()) fail(strf("sibling probe: no core %d", p.core));
  std::vector<int> threads = topo.core_cpus(p.core);
  if (threads.size() < 2) fail("sibling probe: needs a two-thread core");
  int busy_cpu = threads[0];
  int sibling = threads[1];
  if (p.chains < 1 || p.chain_cycles <= 0) fail("sibling probe: bad chain parameters");

  // Everything else parks at the low point so only this core's set matters.
  set_all_cores_hz(pf, low);
  settle(pf);
  ScopedWorkload busy(pf, busy_cpu, WorkloadClass::busy_loop);

  auto measure = [&]() {
    stats::Summary s = chain_summary(pf, busy_cpu, p.chain_cycles, p.chains);
    return p.chain_cycles / (s.mean * 1e-9);
  };

  SiblingResult r;
  r.params = p;
  r.params.low_hz = low;
  r.params.high_hz = high;

  auto scenario = [&](const std::string& name, double sib_hz, bool online) {
    settle(pf);
    r.rows.push_back(SiblingScenario{name, sib_hz, online, measure()});
  };

  // Busy thread asks for `low` throughout; only the sibling's state varies.
  scenario("sibling_idle_low", low, true);

  pf.set_frequency({sibling, high});
  scenario("sibling_idle_high", high, true);

  pf.set_online(sibling, false);  // the stale high set point stays in force
  scenario("sibling_offline_high", high, false);

  pf.set_online(sibling, true);
  pf.set_frequency({sibling, low});

  csv::Table t = new_report(ctx, "sibling_freq");
  t.set_meta("core", strf("%d", p.core));
  t.set_meta("busy_set_hz", num(low));
  t.columns = {"scenario", "sibling_set_hz", "sibling_online", "measured_hz"};
  for (const SiblingScenario& s : r.rows)
    t.rows.push_back({s.name, num(s.sibling_set_hz), s.sibling_online ? "1" : "0",
                      num(s.measured_hz)});
  write_report(ctx, t, "sibling_freq.csv");
  return r;
}

MixedFreqResult run_mixed_freq(const Context& ctx, const MixedFreqParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.ccx < 0 || p.ccx >= topo.n_ccx()) fail(strf("mixed probe: no ccx %d", p.ccx));
  if (p.duration_s < 2) fail("mixed probe: duration_s must be >= 2");
  if (p.chase_reps < 1) fail("mixed probe: chase_reps must be >= 1");
  std::vector<double> freqs = p.freqs_hz.empty() ? pf.available_frequencies() : p.freqs_hz;
  for (double f : freqs) pf.require_valid_frequency(f);

  std::vector<int> cores = ccx_cores(topo, p.ccx);
  if (cores.size() < 2) fail("mixed probe: the CCX needs at least two cores");
  int obs_core = cores[0];
  int obs_cpu = topo.core_cpus(obs_core)[0];

  // One busy thread per core for the whole scan.
  std::vector<ScopedWorkload> loads;
  for (int c : cores) loads.emplace_back(pf, topo.core_cpus(c)[0], WorkloadClass::busy_loop);

  double nominal = pf.nominal_hz();
  int n_windows = static_cast<int>(p.duration_s);

  MixedFreqResult r;
  r.params = p;
  r.params.freqs_hz = freqs;
  for (double f_self : freqs) {
    for (double f_others : freqs) {
      set_core_hz(pf, obs_core, f_self);
      for (size_t i = 1; i < cores.size(); i++) set_core_hz(pf, cores[i], f_others);
      settle(pf);

      std::vector<double> hz;
      hz.reserve(static_cast<size_t>(n_windows));
      CounterSnapshot prev = pf.read_counters(obs_cpu);
      for (int w = 0; w < n_windows; w++) {
        pf.sleep_ns(kSec);
        CounterSnapshot cur = pf.read_counters(obs_cpu);
        hz.push_back(effective_hz(prev, cur, nominal));
        prev = cur;
      }
      stats::Summary s = stats::summarize(hz);

      double l3 = 0;
      for (int rep = 0; rep < p.chase_reps; rep++) {
        double ns = run_pointer_chase(pf, obs_cpu, p.chase_bytes, p.chase_loads, ctx.mem_label);
        l3 = rep == 0 ? ns : std::min(l3, ns);
      }

      r.cells.push_back(MixedFreqCell{f_self, f_others, s.mean, s.sigma,
                                      static_cast<int>(s.n), l3});
    }
  }

  csv::Table t = new_report(ctx, "mixed_freq");
  t.set_meta("ccx", strf("%d", p.ccx));
  t.set_meta("duration_s", num(p.duration_s));
  t.set_meta("chase_bytes", strf("%lld", static_cast<long long>(p.chase_bytes)));
  t.columns = {"self_set_hz", "others_set_hz", "mean_hz", "sigma_hz", "n_samples", "l3_ns"};
  for (const MixedFreqCell& c : r.cells)
    t.rows.push_back({num(c.self_set_hz), num(c.others_set_hz), num(c.mean_hz), num(c.sigma_hz),
                      strf("%d", c.n_samples), num(c.l3_ns)});
  write_report(ctx, t, "mixed_freq.csv");
  return r;
}

MemPerfResult run_mem_perf(const Context& ctx, const MemPerfParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.ccx < 0 || p.ccx >= topo.n_ccx()) fail(strf("memory probe: no ccx %d", p.ccx));
  if (p.triad_seconds <= 0) fail("memory probe: triad_seconds must be > 0");
  std::vector<int> cores = ccx_cores(topo, p.ccx);

  set_all_cores_hz(pf, pf.nominal_hz());
  settle(pf);

  MemPerfResult r;
  r.params = p;
  r.label = ctx.mem_label;

  for (int k : p.core_counts) {
    if (k < 1 || k > static_cast<int>(cores.size()))
      fail(strf("memory probe: core count %d does not fit the CCX", k));
    std::vector<int> cpus;
    for (int i = 0; i < k; i++) cpus.push_back(topo.core_cpus(cores[static_cast<size_t>(i)])[0]);
    double bps = run_triad(pf, cpus, p.triad_seconds, ctx.mem_label);
    r.triad.push_back(TriadPoint{k, bps / 1e9});
  }

  int chase_cpu = topo.core_cpus(cores[0])[0];
  for (int64_t bytes : p.chase_sizes)
    r.chase.push_back(
        ChasePoint{bytes, run_pointer_chase(pf, chase_cpu, bytes, p.chase_loads, ctx.mem_label)});

  csv::Table tt = new_report(ctx, "mem_perf");
  tt.set_meta("kind", "triad");
  tt.set_meta("mem_label", r.label);
  tt.set_meta("ccx", strf("%d", p.ccx));
  tt.columns = {"cores", "gb_per_s"};
  for (const TriadPoint& tp : r.triad) tt.rows.push_back({strf("%d", tp.cores), num(tp.gb_per_s)});
  write_report(ctx, tt, "mem_triad.csv");

  csv::Table tc = new_report(ctx, "mem_perf");
  tc.set_meta("kind", "pointer_chase");
  tc.set_meta("mem_label", r.label);
  tc.columns = {"bytes", "ns_per_load"};
  for (const ChasePoint& cp : r.chase)
    tc.rows.push_back({strf("%lld", static_cast<long long>(cp.bytes)), num(cp.ns)});
  write_report(ctx, tc, "mem_chase.csv");
  return r;
}

ThrottleResult run_throttle(const Context& ctx, const ThrottleParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.threads_per_core != 1 && p.threads_per_core != 2)
    fail("throttle probe: threads_per_core must be 1 or 2");
  int steady = static_cast<int>(p.duration_s - p.head_skip_s - p.tail_skip_s);
  if (steady < 1) fail("throttle probe: duration too short for the head/tail exclusions");

  std::vector<int> cpus;
  std::vector<int> lead;  // first loaded thread of each core
  for (int core = 0; core < topo.n_cores(); core++) {
    std::vector<int> tc = topo.core_cpus(core);
    if (static_cast<int>(tc.size()) < p.threads_per_core)
      fail(strf("throttle probe: core %d has no second thread", core));
    lead.push_back(tc[0]);
    for (int i = 0; i < p.threads_per_core; i++) cpus.push_back(tc[static_cast<size_t>(i)]);
  }

  set_all_cores_hz(pf, pf.nominal_hz());
  settle(pf);

  std::vector<ScopedWorkload> loads;
  loads.reserve(cpus.size());
  for (int cpu : cpus) loads.emplace_back(pf, cpu, WorkloadClass::fma_saturate);

  if (p.warmup_s > 0) pf.sleep_ns(static_cast<int64_t>(p.warmup_s * 1e9));
  // Align measurement windows to whole seconds and discard the ramp-in.
  int64_t now = pf.now_ns();
  pf.sleep_ns((now / kSec + 1) * kSec - now);
  pf.sleep_ns(static_cast<int64_t>(p.head_skip_s) * kSec);

  ThrottleResult r;
  r.params = p;
  double nominal = pf.nominal_hz();
  int64_t t0 = pf.now_ns();
  SysPowerCapture capture(pf, p.capture_rate_hz);
  std::vector<EnergyReading> e0;
  for (int pkg = 0; pkg < topo.n_packages(); pkg++)
    e0.push_back(pf.read_energy(Domain::package, pkg));
  std::map<int, CounterSnapshot> prev_lead;
  std::map<int, CounterSnapshot> prev_all;
  for (int cpu : lead) prev_lead[cpu] = pf.read_counters(cpu);
  for (int cpu : cpus) prev_all[cpu] = pf.read_counters(cpu);

  for (int w = 0; w < steady; w++) {
    pf.sleep_ns(kSec);
    SaturationInterval iv;
    iv.t0_ns = pf.now_ns() - kSec;
    iv.t1_ns = pf.now_ns();
    double hz_sum = 0;
    double cycles = 0;
    double instr = 0;
    for (int cpu : lead) {
      CounterSnapshot cur = pf.read_counters(cpu);
      hz_sum += effective_hz(prev_lead[cpu], cur, nominal);
      cycles += static_cast<double>(cur.cycles - prev_lead[cpu].cycles);
      prev_lead[cpu] = cur;
    }
    for (int cpu : cpus) {
      CounterSnapshot cur = pf.read_counters(cpu);
      instr += static_cast<double>(cur.instr - prev_all[cpu].instr);
      prev_all[cpu] = cur;
    }
    iv.freq_hz = hz_sum / static_cast<double>(lead.size());
    iv.ipc = cycles > 0 ? instr / cycles : 0;
    r.intervals.push_back(iv);
  }

  int64_t t1 = pf.now_ns();
  for (int pkg = 0; pkg < topo.n_packages(); pkg++) {
    EnergyReading e1 = pf.read_energy(Domain::package, pkg);
    r.rapl_pkg_w.push_back(energy_delta_joules(e0[static_cast<size_t>(pkg)], e1) /
                           (static_cast<double>(t1 - t0) * 1e-9));
  }
  PowerTrace trace = capture.finish();
  if (!trace.samples.empty()) {
    r.sys_measured = true;
    r.sys_power_w = mean_in_window(trace, t0, t1, &r.sys_samples);
  }
  pf.sleep_ns(static_cast<int64_t>(p.tail_skip_s) * kSec);
  loads.clear();

  std::vector<double> fs, is;
  for (const SaturationInterval& iv : r.intervals) {
    fs.push_back(iv.freq_hz);
    is.push_back(iv.ipc);
  }
  r.freq_hz = stats::summarize(fs);
  r.ipc = stats::summarize(is);

  csv::Table t = new_report(ctx, "throttle");
  t.set_meta("threads_per_core", strf("%d", p.threads_per_core));
  t.set_meta("duration_s", num(p.duration_s));
  t.set_meta("warmup_s", num(p.warmup_s));
  t.set_meta("steady_t0_ns", strf("%lld", static_cast<long long>(t0)));
  t.set_meta("steady_t1_ns", strf("%lld", static_cast<long long>(t1)));
  t.set_meta("mean_freq_hz", num(r.freq_hz.mean));
  t.set_meta("sigma_freq_hz", num(r.freq_hz.sigma));
  t.set_meta("mean_ipc", num(r.ipc.mean));
  t.set_meta("sys_power_w", r.sys_measured ? num(r.sys_power_w) : "");
  for (size_t pkg = 0; pkg < r.rapl_pkg_w.size(); pkg++)
    t.set_meta(strf("rapl_pkg%zu_w", pkg), num(r.rapl_pkg_w[pkg]));
  t.columns = {"t0_ns", "t1_ns", "freq_hz", "ipc"};
  for (const SaturationInterval& iv : r.intervals)
    t.rows.push_back({strf("%lld", static_cast<long long>(iv.t0_ns)),
                      strf("%lld", static_cast<long long>(iv.t1_ns)), num(iv.freq_hz),
                      num(iv.ipc)});
  write_report(ctx, t, strf("throttle_%dt.csv", p.threads_per_core));
  write_trace(ctx, trace, strf("throttle_%dt_trace.csv", p.threads_per_core));
  return r;
}

}  // namespace pmchar::probes
