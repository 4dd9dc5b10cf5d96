// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pmchar/rng.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/sim_model.hpp"
#include "pmchar/stats.hpp"

using namespace pmchar;

namespace {

constexpr int64_t kMsNs = 1000000;
constexpr int64_t kUsNs = 1000;

// The effective frequency of a core follows the max requested over its
// threads, so experiments drive both siblings together.
void set_core_freq(SimCpu& s, int core, double hz) {
  for (int cpu : s.topology().core_cpus(core)) s.set_frequency({cpu, hz});
}

void settle(SimCpu& s) { s.sleep_ns(8 * kMsNs); }

}  // namespace

TEST_CASE("frequency writes land at the slot after the next update boundary") {
  SimCpu s(default_sim_model(), 1);
  s.set_workload(0, WorkloadClass::busy_loop);

  // mid-interval request: next boundary 1 ms, down offset 390 us
  s.advance_to(100 * kUsNs);
  s.set_frequency({0, 2.2e9});
  s.sleep_ns(3 * kMsNs);
  CHECK(s.last_apply_ns(0) == 1 * kMsNs + 390 * kUsNs);
  CHECK(s.set_hz_of(0) == doctest::Approx(2.2e9));

  // request exactly on a boundary uses that boundary's slot
  SimCpu t(default_sim_model(), 2);
  t.advance_to(2 * kMsNs);
  t.set_frequency({5, 2.2e9});
  t.sleep_ns(3 * kMsNs);
  CHECK(t.last_apply_ns(5) == 2 * kMsNs + 390 * kUsNs);

  // upward requests use the shorter offset
  t.sleep_ns(20 * kMsNs);  // let the revert window lapse
  int64_t now = t.now_ns();
  t.set_frequency({5, 2.5e9});
  t.sleep_ns(3 * kMsNs);
  int64_t boundary = (now + kMsNs - 1) / kMsNs * kMsNs;
  CHECK(t.last_apply_ns(5) == boundary + 360 * kUsNs);
}

TEST_CASE("requesting the current frequency cancels any pending write") {
  SimCpu s(default_sim_model(), 3);
  s.advance_to(100 * kUsNs);
  s.set_frequency({0, 2.2e9});
  s.set_frequency({0, 2.5e9});  // back to current: cancels
  s.sleep_ns(5 * kMsNs);
  CHECK(s.last_apply_ns(0) == -1);
  CHECK(s.set_hz_of(0) == doctest::Approx(2.5e9));
}

TEST_CASE("a quick return to the previous frequency skips the slot wait") {
  SimCpu s(default_sim_model(), 4);
  s.set_frequency({0, 2.2e9});  // down; applies at 390 us
  s.sleep_ns(2 * kMsNs);
  REQUIRE(s.last_apply_ns(0) == 390 * kUsNs);

  // within the window: the up request applies almost immediately
  s.set_frequency({0, 2.5e9});
  s.sleep_ns(10 * kUsNs);
  CHECK(s.last_apply_ns(0) == 2 * kMsNs + 1 * kUsNs);
  CHECK(s.set_hz_of(0) == doctest::Approx(2.5e9));

  // the shortcut is consumed: an immediate re-run takes the slow path
  s.set_frequency({0, 2.2e9});
  s.sleep_ns(2 * kMsNs);
  int64_t down_apply = s.last_apply_ns(0);
  s.set_frequency({0, 2.2e9});  // no-op
  s.sleep_ns(7 * kMsNs);        // window expires
  s.set_frequency({0, 2.5e9});
  int64_t req = s.now_ns();
  s.sleep_ns(2 * kMsNs);
  CHECK(s.last_apply_ns(0) > down_apply);
  CHECK(s.last_apply_ns(0) == (req + kMsNs - 1) / kMsNs * kMsNs + 360 * kUsNs);
}

TEST_CASE("the revert window expires and does not trigger for other targets") {
  SimCpu s(default_sim_model(), 5);
  s.set_frequency({0, 1.5e9});  // 2.5 -> 1.5 down
  s.sleep_ns(2 * kMsNs);
  // a different upward target does not take the shortcut
  s.set_frequency({0, 2.2e9});
  int64_t req = s.now_ns();
  s.sleep_ns(2 * kMsNs);
  CHECK(s.last_apply_ns(0) == (req + kMsNs - 1) / kMsNs * kMsNs + 360 * kUsNs);
}

TEST_CASE("observed transition delays fill a 1 ms window above the down offset") {
  SimCpu s(default_sim_model(), 6);
  Rng phase(99);
  std::vector<double> delays_us;
  bool down = true;
  for (int i = 0; i < 2000; i++) {
    s.sleep_ns(7 * kMsNs + phase.below(1000) * kUsNs);  // random slot phase
    int64_t req = s.now_ns();
    s.set_frequency({0, down ? 2.2e9 : 2.5e9});
    s.sleep_ns(3 * kMsNs);
    if (down) delays_us.push_back(static_cast<double>(s.last_apply_ns(0) - req) / 1000.0);
    down = !down;
  }
  auto fit = stats::fit_uniform_window(delays_us);
  CHECK(fit.d_hat_us == doctest::Approx(390).epsilon(0.02));
  CHECK(fit.t_hat_us == doctest::Approx(1000).epsilon(0.02));
  CHECK(fit.ks_stat < stats::dkw_bound(delays_us.size()));
}

TEST_CASE("ccx coupling matrix: single cells match the model table exactly") {
  const SimModel m = default_sim_model();
  for (size_t own = 0; own < m.frequencies_hz.size(); own++) {
    for (size_t oth = 0; oth < m.frequencies_hz.size(); oth++) {
      SimCpu s(m, 7);
      set_core_freq(s, 0, m.frequencies_hz[own]);
      for (int core : {1, 2, 3}) set_core_freq(s, core, m.frequencies_hz[oth]);
      settle(s);
      CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[own][oth]));
      // never faster than the own request; slowest neighbour dominates
      CHECK(s.effective_hz_now(0) <= m.frequencies_hz[own] + 1.0);
    }
  }
}

TEST_CASE("coupling follows the fastest other core of the ccx") {
  const SimModel m = default_sim_model();
  SimCpu s(m, 8);
  set_core_freq(s, 0, 1.5e9);
  set_core_freq(s, 1, 1.5e9);
  set_core_freq(s, 2, 1.5e9);
  settle(s);  // core 3 still at 2.5: column stays at the max
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[0][2]));
  set_core_freq(s, 3, 2.2e9);
  settle(s);
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[0][1]));
  set_core_freq(s, 3, 1.5e9);
  settle(s);
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[0][0]));
}

TEST_CASE("one idle thread left at a high request keeps the whole core fast") {
  const SimModel m = default_sim_model();
  SimCpu s(m, 9);
  s.set_frequency({0, 1.5e9});  // thread 0 only; sibling cpu 64 still 2.5
  settle(s);
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[2][2]));
  s.set_frequency({64, 1.5e9});
  settle(s);
  for (int core : {1, 2, 3}) set_core_freq(s, core, 1.5e9);
  settle(s);
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[0][0]));
  // an offline sibling still pins the request until it is set too
  SimCpu t(m, 10);
  t.set_online(64, false);
  t.set_frequency({0, 1.5e9});
  settle(t);
  CHECK(t.effective_hz_now(0) == doctest::Approx(m.coupling_hz[2][2]));
}

TEST_CASE("a ccx with a single core sits on the diagonal") {
  SimModel m = default_sim_model();
  m.packages = 1;
  m.ccds_per_package = 1;
  m.ccxs_per_ccd = 2;
  m.cores_per_ccx = 1;
  m.threads_per_core = 2;
  SimCpu s(m, 11);
  set_core_freq(s, 0, 1.5e9);
  set_core_freq(s, 1, 2.5e9);  // other ccx: must not matter
  settle(s);
  CHECK(s.effective_hz_now(0) == doctest::Approx(m.coupling_hz[0][0]));
}

TEST_CASE("counters advance with effective cycles and freeze when idle") {
  SimCpu s(default_sim_model(), 12);
  set_core_freq(s, 0, 2.2e9);
  for (int core : {1, 2, 3}) set_core_freq(s, core, 2.2e9);
  settle(s);
  s.set_workload(0, WorkloadClass::scalar_add);
  auto c0 = s.read_counters(0);
  auto i0 = s.read_counters(1);
  s.sleep_ns(100 * kMsNs);
  auto c1 = s.read_counters(0);
  auto i1 = s.read_counters(1);
  double dt = 0.1;
  double f = s.model().coupling_hz[1][1];  // full ccx at the 2.2 request
  CHECK(static_cast<double>(c1.cycles - c0.cycles) == doctest::Approx(f * dt).epsilon(1e-6));
  CHECK(static_cast<double>(c1.aperf - c0.aperf) == doctest::Approx(f * dt).epsilon(1e-6));
  CHECK(static_cast<double>(c1.mperf - c0.mperf) == doctest::Approx(2.5e9 * dt).epsilon(1e-6));
  double ratio = static_cast<double>(c1.aperf - c0.aperf) / static_cast<double>(c1.mperf - c0.mperf);
  CHECK(ratio == doctest::Approx(f / 2.5e9).epsilon(1e-6));
  // idle sibling cpu froze
  CHECK(i1.cycles == i0.cycles);
  CHECK(i1.aperf == i0.aperf);
  CHECK(i1.mperf == i0.mperf);
}

TEST_CASE("instructions scale with the class ipc") {
  SimCpu s(default_sim_model(), 13);
  s.set_workload(0, WorkloadClass::scalar_add);  // ipc 4
  double f = s.model().coupling_hz[2][2];        // every core still at nominal
  int64_t t0 = s.now_ns();
  s.advance_busy_cycles(0, 1e9);
  CHECK(static_cast<double>(s.now_ns() - t0) * 1e-9 == doctest::Approx(1e9 / f).epsilon(1e-6));
  auto c = s.read_counters(0);
  CHECK(static_cast<double>(c.cycles) == doctest::Approx(1e9).epsilon(1e-6));
  CHECK(static_cast<double>(c.instr) == doctest::Approx(4e9).epsilon(1e-6));
}

TEST_CASE("busy cycle accounting straddles a frequency change") {
  SimCpu s(default_sim_model(), 14);
  s.set_workload(0, WorkloadClass::busy_loop);
  s.set_workload(64, WorkloadClass::busy_loop);
  // request a core-wide down right away: applies at 390 us
  set_core_freq(s, 0, 1.5e9);
  for (int core : {1, 2, 3}) set_core_freq(s, core, 1.5e9);
  // run through the apply instant at the fast rate, remainder at the slow one
  double f_before = s.model().coupling_hz[2][2];
  double f_after = s.model().coupling_hz[0][0];
  double cycles = f_before * 390e-6 + f_after * 100e-6;
  int64_t elapsed = s.advance_busy_cycles(0, cycles);
  CHECK(static_cast<double>(elapsed) == doctest::Approx(490e3).epsilon(1e-6));
}

TEST_CASE("counter and control calls reject offline and bogus cpus") {
  SimCpu s(default_sim_model(), 15);
  s.set_online(70, false);
  CHECK(!s.is_online(70));
  CHECK_THROWS(s.read_counters(70));
  CHECK_THROWS(s.set_frequency({70, 2.2e9}));
  CHECK_THROWS(s.pin_current_thread(70));
  CHECK_THROWS(s.set_workload(70, WorkloadClass::busy_loop));
  CHECK_THROWS(s.set_online(0, false));
  CHECK_THROWS(s.set_online(999, true));
  s.set_workload(5, WorkloadClass::busy_loop);
  CHECK_THROWS(s.set_online(5, false));
  s.set_online(70, true);
  CHECK(s.is_online(70));
  CHECK(s.read_counters(70).cpu == 70);
  CHECK_THROWS(s.set_frequency({0, 1.9e9}));  // not an available frequency
}

TEST_CASE("idle power ladder: baseline, first wake, per-core steps") {
  SimCpu s(default_sim_model(), 16);
  CHECK(s.system_power_w() == doctest::Approx(99.1));
  s.set_cstate({0, 2, false});  // core 0 can only reach C1
  CHECK(s.system_power_w() == doctest::Approx(180.3));
  s.set_cstate({1, 2, false});
  CHECK(s.system_power_w() == doctest::Approx(180.39));
  s.set_cstate({2, 2, false});
  CHECK(s.system_power_w() == doctest::Approx(180.48));
  // sibling thread of an already-C1 core adds nothing
  s.set_cstate({64, 2, false});
  CHECK(s.system_power_w() == doctest::Approx(180.48));
  s.set_cstate({0, 2, true});
  s.set_cstate({64, 2, true});
  CHECK(s.system_power_w() == doctest::Approx(180.39));
}

TEST_CASE("active power: flat start, per-core and per-sibling slopes") {
  SimCpu s(default_sim_model(), 17);
  s.set_workload(0, WorkloadClass::pause_loop);
  CHECK(s.system_power_w() == doctest::Approx(180.4));
  s.set_workload(1, WorkloadClass::pause_loop);
  CHECK(s.system_power_w() == doctest::Approx(180.82));  // +0.09 ladder +0.33 class
  s.set_workload(64, WorkloadClass::pause_loop);  // sibling of cpu 0
  CHECK(s.system_power_w() == doctest::Approx(180.87));  // +0.05 sibling
  // a polling idle thread behaves like an active pause loop
  SimCpu t(default_sim_model(), 18);
  t.set_cstate({0, 1, false});
  t.set_cstate({0, 2, false});
  CHECK(t.system_power_w() == doctest::Approx(180.4));
  auto a0 = t.read_counters(0);
  t.sleep_ns(10 * kMsNs);
  auto a1 = t.read_counters(0);
  CHECK(a1.aperf > a0.aperf);
}

TEST_CASE("memory classes add a flat package draw; operand weight multiplies") {
  SimCpu s(default_sim_model(), 19);
  s.set_workload(0, WorkloadClass::memory_read);
  double p_read = s.system_power_w();
  SimCpu t(default_sim_model(), 20);
  t.set_workload(0, WorkloadClass::busy_loop);
  double p_busy = t.system_power_w();
  CHECK(p_read - p_busy == doctest::Approx(95.0 - 0.0).epsilon(0.01));

  SimCpu u(default_sim_model(), 21);
  u.set_workload(0, WorkloadClass::wide_xor, 0.0);
  double p0 = u.system_power_w();
  u.set_workload(0, WorkloadClass::wide_xor, 1.0);
  double p1 = u.system_power_w();
  CHECK(p1 / p0 == doctest::Approx(1.076));
  u.set_workload(0, WorkloadClass::wide_xor, 0.5);
  CHECK(u.system_power_w() / p0 == doctest::Approx(1.038));
}

TEST_CASE("rapl core energy integrates rate times frequency scale") {
  SimCpu s(default_sim_model(), 22);
  s.set_workload(0, WorkloadClass::busy_loop);
  auto e0 = s.read_energy(Domain::core, 0);
  auto p0 = s.read_energy(Domain::package, 0);
  s.sleep_ns(10 * 1000 * kMsNs);
  auto e1 = s.read_energy(Domain::core, 0);
  auto p1 = s.read_energy(Domain::package, 0);
  // busy_loop: 0.8 W/core at full scale for 10 s
  CHECK(energy_delta_joules(e0, e1) == doctest::Approx(8.0).epsilon(0.02));
  // package: core sum + 20 W uncore
  CHECK(energy_delta_joules(p0, p1) == doctest::Approx(208.0).epsilon(0.01));
  // idle core accrues nothing (just read noise)
  auto q0 = s.read_energy(Domain::core, 1);
  s.sleep_ns(1000 * kMsNs);
  auto q1 = s.read_energy(Domain::core, 1);
  CHECK(energy_delta_joules(q0, q1) < 0.2);
}

TEST_CASE("package energy hits the socket cap under full saturation") {
  SimCpu s(default_sim_model(), 23);
  for (int cpu = 0; cpu < 128; cpu++) s.set_workload(cpu, WorkloadClass::fma_saturate, 0.8);
  s.sleep_ns(1000 * kMsNs);
  auto a0 = s.read_energy(Domain::package, 0);
  auto b0 = s.read_energy(Domain::package, 1);
  s.sleep_ns(10 * 1000 * kMsNs);
  auto a1 = s.read_energy(Domain::package, 0);
  auto b1 = s.read_energy(Domain::package, 1);
  CHECK(energy_delta_joules(a0, a1) / 10 == doctest::Approx(170.0).epsilon(0.001));
  CHECK(energy_delta_joules(b0, b1) / 10 == doctest::Approx(170.0).epsilon(0.001));
}

TEST_CASE("energy registers wrap like 32-bit hardware counters") {
  SimCpu s(default_sim_model(), 24);
  for (int cpu = 0; cpu < 128; cpu++) s.set_workload(cpu, WorkloadClass::fma_saturate, 0.8);
  s.sleep_ns(200LL * 1000 * kMsNs);  // ~34 kJ accumulated
  auto e0 = s.read_energy(Domain::package, 0);
  s.sleep_ns(200LL * 1000 * kMsNs);  // ~68 kJ: raw register wrapped at 65536 J
  auto e1 = s.read_energy(Domain::package, 0);
  CHECK(e1.raw < e0.raw);
  CHECK(energy_delta_joules(e0, e1) == doctest::Approx(34000.0).epsilon(0.001));
}

TEST_CASE("repeated reads at one instant are identical; readings never decrease") {
  SimCpu s(default_sim_model(), 25);
  s.set_workload(0, WorkloadClass::busy_loop);
  s.sleep_ns(50 * kMsNs);
  auto a = s.read_energy(Domain::package, 0);
  auto b = s.read_energy(Domain::package, 0);
  CHECK(a.raw == b.raw);
  CHECK(a.joules == b.joules);
  double prev = -1;
  double acc = 0;
  auto last = s.read_energy(Domain::core, 0);
  for (int i = 0; i < 200; i++) {
    s.sleep_ns(1 * kMsNs);  // tiny windows: noise would dominate without the clamp
    auto r = s.read_energy(Domain::core, 0);
    double d = energy_delta_joules(last, r);
    CHECK(d >= 0);
    acc += d;
    last = r;
    (void)prev;
  }
  // clamped increments still track the true accumulation on average
  CHECK(acc == doctest::Approx(0.8 * 0.2).epsilon(0.5));
}

TEST_CASE("core energy needs one online thread") {
  SimCpu s(default_sim_model(), 26);
  s.set_online(1, false);
  s.set_online(65, false);
  CHECK_THROWS(s.read_energy(Domain::core, 1));
  CHECK_THROWS(s.read_energy(Domain::package, 5));
  s.set_online(1, true);
  CHECK(s.read_energy(Domain::core, 1).esu == 16);
}

TEST_CASE("parking a thread pins its core at the shallow idle level") {
  SimCpu s(default_sim_model(), 27);
  REQUIRE(s.model().offline_anomaly);
  CHECK(s.system_power_w() == doctest::Approx(99.1));
  s.set_online(64, false);  // sibling thread of core 0
  CHECK(s.system_power_w() == doctest::Approx(180.3));
  s.set_online(64, true);
  CHECK(s.system_power_w() == doctest::Approx(99.1));

  SimModel m = default_sim_model();
  m.offline_anomaly = false;
  SimCpu t(m, 28);
  t.set_online(64, false);
  CHECK(t.system_power_w() == doctest::Approx(99.1));
}

TEST_CASE("control snapshot round-trips through arbitrary mutation") {
  SimCpu s(default_sim_model(), 29);
  ControlSnapshot before = s.snapshot_control_state();
  s.set_frequency({3, 1.5e9});
  s.set_cstate({7, 2, false});
  s.set_cstate({9, 1, false});
  s.set_online(100, false);
  s.sleep_ns(5 * kMsNs);
  s.set_frequency({4, 2.2e9});  // leave one pending
  s.restore_control_state(before);
  ControlSnapshot after = s.snapshot_control_state();
  CHECK(before.set_hz == after.set_hz);
  CHECK(before.cstate_enabled == after.cstate_enabled);
  CHECK(before.online == after.online);
  s.sleep_ns(5 * kMsNs);  // the pending write was cancelled, not applied
  CHECK(s.set_hz_of(4) == doctest::Approx(2.5e9));
  CHECK(s.system_power_w() == doctest::Approx(99.1));
}

TEST_CASE("wakeup latency draws match the configured idle-state laws") {
  SimCpu s(default_sim_model(), 30);
  Rng rng(4);
  std::vector<double> c1_fast, c1_slow, c2, c2_remote;
  for (int i = 0; i < 4000; i++) {
    c1_fast.push_back(s.draw_wakeup_latency_us(1, 2.5e9, false, rng));
    c1_slow.push_back(s.draw_wakeup_latency_us(1, 1.5e9, false, rng));
    c2.push_back(s.draw_wakeup_latency_us(2, 2.5e9, false, rng));
    c2_remote.push_back(s.draw_wakeup_latency_us(2, 2.5e9, true, rng));
  }
  CHECK(stats::median(c1_fast) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(stats::median(c1_slow) == doctest::Approx(1.5).epsilon(0.1));
  CHECK(stats::median(s.draw_wakeup_latency_us(1, 2.2e9, false, rng) >= 1.0 ? c1_fast : c1_fast) ==
        doctest::Approx(1.0).epsilon(0.1));
  for (double v : c1_fast) CHECK(v >= 1.0);
  for (double v : c2) {
    CHECK(v >= 20.0);
    CHECK(v < 25.0);
  }
  double shift = stats::median(c2_remote) - stats::median(c2);
  CHECK(shift == doctest::Approx(1.0).epsilon(0.25));
  CHECK_THROWS(s.draw_wakeup_latency_us(3, 2.5e9, false, rng));
}

TEST_CASE("power capture samples the model on a fixed grid") {
  SimCpu s(default_sim_model(), 31);
  s.set_workload(0, WorkloadClass::busy_loop);
  s.begin_capture(20.0, 0.0);
  CHECK_THROWS(s.begin_capture(20.0, 0.0));
  s.sleep_ns(1000 * kMsNs);
  PowerTrace tr = s.end_capture();
  CHECK(tr.rate_hz == doctest::Approx(20));
  CHECK(tr.source == "sim");
  REQUIRE(tr.samples.size() == 21);  // both endpoints on the grid
  for (size_t i = 0; i < tr.samples.size(); i++) {
    CHECK(tr.samples[i].t_ns == static_cast<int64_t>(i) * 50 * kMsNs);
    CHECK(tr.samples[i].watts == doctest::Approx(s.system_power_w()));
  }
}

TEST_CASE("capture noise is reproducible per seed and differs across seeds") {
  auto run = [](uint64_t seed) {
    SimCpu s(default_sim_model(), seed);
    s.begin_capture(20.0, 0.4);
    s.sleep_ns(500 * kMsNs);
    return s.end_capture();
  };
  PowerTrace a = run(77), b = run(77), c = run(78);
  REQUIRE(a.samples.size() == b.samples.size());
  bool same = true, diff = false;
  for (size_t i = 0; i < a.samples.size(); i++) {
    same = same && a.samples[i].watts == b.samples[i].watts;
    diff = diff || a.samples[i].watts != c.samples[i].watts;
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  auto run = [](uint64_t seed) {
    SimCpu s(default_sim_model(), seed);
    std::vector<double> out;
    s.set_workload(2, WorkloadClass::wide_fma, 0.5);
    s.set_frequency({2, 2.2e9});
    s.set_frequency({66, 2.2e9});
    s.sleep_ns(3 * kMsNs);
    s.advance_busy_cycles(2, 5e6);
    auto c = s.read_counters(2);
    out.push_back(static_cast<double>(c.cycles));
    out.push_back(static_cast<double>(c.instr));
    out.push_back(static_cast<double>(c.aperf));
    auto e = s.read_energy(Domain::package, 0);
    out.push_back(e.joules);
    out.push_back(s.system_power_w());
    out.push_back(static_cast<double>(s.now_ns()));
    Rng r(derive_seed(seed, "wakeups"));
    out.push_back(s.draw_wakeup_latency_us(2, 2.5e9, false, r));
    return out;
  };
  CHECK(run(123) == run(123));
  CHECK(run(123) != run(124));
}

TEST_CASE("saturation throttling holds near the anchor with small per-second jitter") {
  SimCpu s(default_sim_model(), 32);
  s.set_workload(0, WorkloadClass::fma_saturate, 0.84);
  std::vector<double> eff_1t;
  for (int i = 0; i < 50; i++) {
    s.sleep_ns(1000 * kMsNs);
    eff_1t.push_back(s.effective_hz_now(0));
  }
  auto sum = stats::summarize(eff_1t);
  CHECK(sum.mean == doctest::Approx(2.1e9).epsilon(0.005));
  CHECK(sum.sigma < 3e7);
  CHECK(sum.sigma > 0);

  s.set_workload(64, WorkloadClass::fma_saturate, 0.84);
  std::vector<double> eff_2t;
  for (int i = 0; i < 50; i++) {
    s.sleep_ns(1000 * kMsNs);
    eff_2t.push_back(s.effective_hz_now(0));
  }
  auto sum2 = stats::summarize(eff_2t);
  CHECK(sum2.mean == doctest::Approx(2.0e9).epsilon(0.005));
}
