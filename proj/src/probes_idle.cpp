// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "pmchar/kernels.hpp"
#include "pmchar/probes.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/util.hpp"
#include "probe_util.hpp"

namespace pmchar::probes {

namespace {

// Trimmed trace merging expects holds of this nominal length; catching a bad
// parameter here beats discovering it after an hour-long sweep.
void require_mergeable_hold(double hold_s) {
  if (hold_s < 9.5 || hold_s > 10.5)
    fail(strf("hold_s = %g; configuration holds must stay 10 s ± 5%% so the power trace can "
              "be merged",
              hold_s));
}

void enable_all_idle_states(Platform& p) {
  for (int cpu = 0; cpu < p.topology().n_cpus(); cpu++) {
    if (!p.is_online(cpu)) continue;
    p.set_cstate({cpu, 1, true});
    p.set_cstate({cpu, 2, true});
  }
}

}  // namespace

CStateSweepResult run_cstate_power_sweep(const Context& ctx, const CStateSweepParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  require_mergeable_hold(p.hold_s);
  int64_t hold_ns = static_cast<int64_t>(p.hold_s * 1e9);

  enable_all_idle_states(pf);
  settle(pf);

  CStateSweepResult r;
  r.params = p;
  SysPowerCapture capture(pf, p.capture_rate_hz);

  auto hold_config = [&](const char* sweep, int order, int n_c1, int n_active) {
    CStatePowerPoint pt;
    pt.sweep = sweep;
    pt.order_index = order;
    pt.n_c1 = n_c1;
    pt.n_active = n_active;
    int64_t t0 = pf.now_ns();
    pf.sleep_ns(hold_ns);
    r.schedule.push_back(ScheduleEntry{encode_sweep_config(pt), t0, pf.now_ns()});
    r.points.push_back(pt);
  };

  hold_config("baseline", 0, 0, 0);

  // Cap threads at the shallow state one CPU at a time, in logical order.
  for (int k = 1; k <= topo.n_cpus(); k++) {
    pf.set_cstate({k - 1, 2, false});
    hold_config("c1", k, k, 0);
  }

  // Then occupy one CPU at a time with the pause loop, same order.
  std::vector<ScopedWorkload> loads;
  loads.reserve(static_cast<size_t>(topo.n_cpus()));
  for (int k = 1; k <= topo.n_cpus(); k++) {
    loads.emplace_back(pf, k - 1, WorkloadClass::pause_loop);
    hold_config("active", k, topo.n_cpus(), k);
  }
  loads.clear();

  PowerTrace trace = capture.finish();
  if (!trace.samples.empty()) {
    std::vector<MergedWindow> merged = merge_trace(trace, r.schedule);
    for (size_t i = 0; i < merged.size(); i++) {
      if (merged[i].config != r.schedule[i].config)
        fail("sweep merge returned windows out of order");
      r.points[i].mean_w = merged[i].mean_w;
      r.points[i].sample_count = merged[i].sample_count;
      r.points[i].flagged = merged[i].flagged;
    }
    r.measured = true;
  }

  csv::Table t = new_report(ctx, "cstate_power_sweep");
  t.set_meta("hold_s", num(p.hold_s));
  t.set_meta("measured", r.measured ? "1" : "0");
  t.columns = {"sweep", "order_index", "n_c1", "n_active", "mean_w", "sample_count", "flagged"};
  for (const CStatePowerPoint& pt : r.points)
    t.rows.push_back({pt.sweep, strf("%d", pt.order_index), strf("%d", pt.n_c1),
                      strf("%d", pt.n_active), r.measured ? num(pt.mean_w) : "",
                      strf("%d", pt.sample_count), pt.flagged ? "1" : "0"});
  write_report(ctx, t, "cstate_power_sweep.csv");
  write_schedule(ctx, r.schedule, "cstate_power_sweep_schedule.csv");
  write_trace(ctx, trace, "cstate_power_sweep_trace.csv");
  return r;
}

WakeupResult run_cstate_latency(const Context& ctx, const WakeupParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.cstate != 1 && p.cstate != 2) fail("wakeup probe: cstate must be 1 or 2");
  if (p.n < 0) fail("wakeup probe: n must be >= 0");
  topo.require_cpu(p.callee_cpu);
  double freq = p.freq_hz > 0 ? p.freq_hz : pf.available_frequencies().back();
  pf.require_valid_frequency(freq);

  int callee = p.callee_cpu;
  int caller = p.caller_cpu;
  if (caller < 0) {
    if (p.remote) {
      int pkg = (topo.package_of(callee) + 1) % topo.n_packages();
      caller = topo.package_cpus(pkg).front();
    } else {
      for (int cpu : topo.ccx_cpus(topo.ccx_of(callee)))
        if (topo.core_of(cpu) != topo.core_of(callee)) {
          caller = cpu;
          break;
        }
    }
  }
  if (caller < 0 || topo.core_of(caller) == topo.core_of(callee))
    fail("wakeup probe: caller and callee must sit on different cores");
  bool remote = topo.package_of(caller) != topo.package_of(callee);
  if (remote != p.remote)
    fail(strf("wakeup probe: caller cpu %d is %s the callee's package but remote=%d was "
              "requested",
              caller, remote ? "outside" : "inside", p.remote ? 1 : 0));

  // The callee may only descend as deep as the probed state.
  set_core_hz(pf, topo.core_of(callee), freq);
  pf.set_cstate({callee, 1, true});
  pf.set_cstate({callee, 2, p.cstate >= 2});
  settle(pf);

  WakeupResult r;
  r.params = p;
  r.params.freq_hz = freq;
  r.params.caller_cpu = caller;

  if (SimCpu* s = pf.sim()) {
    Rng rng(derive_seed(ctx.seed,
                        strf("cstate_latency/%d/%lld/%d", p.cstate, llround(freq / 1e6),
                             p.remote ? 1 : 0)));
    for (int i = 0; i < p.n; i++) {
      pf.sleep_ns(200 * kUs);  // let the callee settle back into the state
      double lat = s->draw_wakeup_latency_us(p.cstate, freq, p.remote, rng);
      r.samples.push_back(WakeupSample{p.cstate, freq, p.remote, lat});
    }
  } else {
    std::atomic<uint32_t> go{0};
    std::atomic<int64_t> woke{0};
    std::atomic<bool> stop{false};
    std::thread callee_thread([&] {
      pf.pin_current_thread(callee);
      for (;;) {
        go.wait(0, std::memory_order_acquire);
        if (stop.load(std::memory_order_relaxed)) return;
        woke.store(pf.now_ns(), std::memory_order_release);
        go.store(0, std::memory_order_release);
      }
    });
    pf.pin_current_thread(caller);
    for (int i = 0; i < p.n; i++) {
      pf.sleep_ns(2 * kMs);  // give the callee time to reach the probed depth
      int64_t t0 = pf.now_ns();
      go.store(1, std::memory_order_release);
      go.notify_one();
      while (woke.load(std::memory_order_acquire) == 0) {
      }
      int64_t t1 = woke.exchange(0, std::memory_order_acq_rel);
      while (go.load(std::memory_order_acquire) != 0) {
      }  // callee has re-armed; safe to trigger again next round
      if (t1 <= t0) {  // non-monotone clock pairing: draw again, record nothing
        r.resampled++;
        i--;
        continue;
      }
      r.samples.push_back(
          WakeupSample{p.cstate, freq, p.remote, static_cast<double>(t1 - t0) / 1000.0});
    }
    stop.store(true);
    go.store(1, std::memory_order_release);
    go.notify_one();
    callee_thread.join();
  }

  csv::Table t = new_report(ctx, "cstate_latency");
  t.set_meta("cstate", strf("%d", p.cstate));
  t.set_meta("freq_hz", num(freq));
  t.set_meta("remote", p.remote ? "1" : "0");
  t.set_meta("caller_cpu", strf("%d", caller));
  t.set_meta("callee_cpu", strf("%d", callee));
  t.set_meta("n", strf("%d", p.n));
  t.set_meta("resampled", strf("%d", r.resampled));
  t.columns = {"index", "latency_us"};
  for (size_t i = 0; i < r.samples.size(); i++)
    t.rows.push_back({strf("%zu", i), num(r.samples[i].latency_us)});
  write_report(ctx, t,
               strf("cstate_latency_c%d_%lld_%s.csv", p.cstate, llround(freq / 1e6),
                    p.remote ? "remote" : "local"));
  return r;
}

OfflineAnomalyResult run_offline_anomaly(const Context& ctx, const OfflineAnomalyParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  require_mergeable_hold(p.hold_s);
  if (p.core < 0 || p.core >= topo.n_cores()) fail(strf("offline probe: no core %d", p.core));
  std::vector<int> threads = topo.core_cpus(p.core);
  if (threads.size() < 2) fail("offline probe: needs a two-thread core");
  int sibling = threads[1];
  int64_t hold_ns = static_cast<int64_t>(p.hold_s * 1e9);

  enable_all_idle_states(pf);
  settle(pf);

  OfflineAnomalyResult r;
  r.params = p;
  SysPowerCapture capture(pf, p.capture_rate_hz);

  auto hold_phase = [&](const char* phase) {
    int64_t t0 = pf.now_ns();
    pf.sleep_ns(hold_ns);
    r.schedule.push_back(ScheduleEntry{phase, t0, pf.now_ns()});
    r.phases.push_back(OfflinePhase{phase, 0, 0});
  };

  hold_phase("baseline");
  pf.set_online(sibling, false);
  hold_phase("sibling_offline");
  pf.set_online(sibling, true);
  hold_phase("reonlined");

  PowerTrace trace = capture.finish();
  if (!trace.samples.empty()) {
    std::vector<MergedWindow> merged = merge_trace(trace, r.schedule);
    for (size_t i = 0; i < merged.size(); i++) {
      r.phases[i].mean_w = merged[i].mean_w;
      r.phases[i].sample_count = merged[i].sample_count;
    }
    r.measured = true;
    r.anomaly_detected = r.phases[1].mean_w - r.phases[0].mean_w > p.step_threshold_w;
  }

  csv::Table t = new_report(ctx, "offline_anomaly");
  t.set_meta("core", strf("%d", p.core));
  t.set_meta("sibling_cpu", strf("%d", sibling));
  t.set_meta("measured", r.measured ? "1" : "0");
  t.set_meta("anomaly_detected", r.anomaly_detected ? "1" : "0");
  t.columns = {"phase", "mean_w", "sample_count"};
  for (const OfflinePhase& ph : r.phases)
    t.rows.push_back({ph.phase, r.measured ? num(ph.mean_w) : "", strf("%d", ph.sample_count)});
  write_report(ctx, t, "offline_anomaly.csv");
  write_schedule(ctx, r.schedule, "offline_anomaly_schedule.csv");
  write_trace(ctx, trace, "offline_anomaly_trace.csv");
  return r;
}

}  // namespace pmchar::probes
