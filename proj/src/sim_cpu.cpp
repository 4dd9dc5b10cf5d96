// SPDX-License-Identifier: Apache-2.0
#include "pmchar/sim_cpu.hpp"

#include <algorithm>
#include <cmath>

#include "pmchar/util.hpp"

namespace pmchar {

namespace {

constexpr int64_t kNoEvent = INT64_MAX;

// One standard-normal draw from a stateless seed (for per-interval jitter:
// the value must depend only on the interval index, not on how the caller
// happened to advance the clock).
double stateless_normal(uint64_t s) {
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace

SimCpu::SimCpu(SimModel model, uint64_t seed)
    : model_(std::move(model)),
      topo_(Topology::synthetic(model_.packages, model_.ccds_per_package, model_.ccxs_per_ccd,
                                model_.cores_per_ccx, model_.threads_per_core)),
      seed_(seed),
      rapl_noise_(derive_seed(seed, "rapl-read-noise")) {
  model_.finalize();
  nominal_idx_ = model_.freq_index(model_.nominal_hz);
  if (nominal_idx_ < 0) fail("model: nominal_hz must be one of frequencies_hz");
  int n = topo_.n_cpus();
  cpus_.resize(n);
  for (CpuState& c : cpus_) c.set_idx = nominal_idx_;
  pending_.resize(n);
  revert_.resize(n);
  last_apply_.resize(n, -1);
  aperf_.assign(n, 0);
  mperf_.assign(n, 0);
  cycles_.assign(n, 0);
  instr_.assign(n, 0);
  core_energy_.resize(topo_.n_cores());
  pkg_energy_.resize(topo_.n_packages());
  core_cpus_.resize(topo_.n_cores());
  core_others_.resize(topo_.n_cores());
  for (int core = 0; core < topo_.n_cores(); core++) {
    core_cpus_[core] = topo_.core_cpus(core);
    core_others_[core] = topo_.other_ccx_cores(core_cpus_[core][0]);
  }
  pkg_cores_.resize(topo_.n_packages());
  for (int core = 0; core < topo_.n_cores(); core++)
    pkg_cores_[topo_.package_of(core_cpus_[core][0])].push_back(core);
  scratch_hz_.resize(topo_.n_cores());
  pkg_of_core_.resize(topo_.n_cores());
  for (int pkg = 0; pkg < topo_.n_packages(); pkg++)
    for (int core : pkg_cores_[pkg]) pkg_of_core_[core] = pkg;
  scratch_pkg_w_.resize(topo_.n_packages());
}

int SimCpu::thread_idle_state(int n) const {
  const CpuState& c = cpus_[n];
  if (c.c2_enabled) return 2;
  if (c.c1_enabled) return 1;
  return 0;  // no idle state left: the OS polls, which behaves like activity
}

int SimCpu::core_state(int core) const {
  int st = 3;
  for (int cpu : core_cpus_[core]) {
    const CpuState& c = cpus_[cpu];
    if (!c.online) {
      // A parked thread should let its core idle deeply; on the anomalous
      // reference machine it pins the core at the C1 level instead.
      if (model_.offline_anomaly) st = std::min(st, 1);
      continue;
    }
    if (c.work != WorkloadClass::idle) return 0;
    st = std::min(st, thread_idle_state(cpu));
  }
  return st == 3 ? 2 : st;
}

int SimCpu::core_set_idx(int core) const {
  int m = 0;
  for (int cpu : core_cpus_[core]) m = std::max(m, cpus_[cpu].set_idx);
  return m;
}

int SimCpu::busy_threads_of_core(int core) const {
  int n = 0;
  for (int cpu : core_cpus_[core])
    if (cpus_[cpu].online && (cpus_[cpu].work != WorkloadClass::idle || thread_idle_state(cpu) == 0))
      n++;
  return n;
}

WorkloadClass SimCpu::core_class(int core) const {
  for (int cpu : core_cpus_[core])
    if (cpu_busy(cpu)) return cpus_[cpu].work;
  // Active purely through polling idle threads.
  return WorkloadClass::pause_loop;
}

double SimCpu::throttle_jitter_hz(int core) const {
  int64_t interval = now_ / kSec;
  double sigma = busy_threads_of_core(core) >= 2 ? model_.freq_jitter_sigma_2t_hz
                                                 : model_.freq_jitter_sigma_1t_hz;
  return sigma * stateless_normal(derive_seed(seed_, "throttle-jitter",
                                              static_cast<uint64_t>(interval)));
}

double SimCpu::effective_core_hz(int core) const {
  int own = core_set_idx(core);
  int m = -1;
  for (int oc : core_others_[core]) m = std::max(m, core_set_idx(oc));
  double hz = m >= 0 ? model_.coupling_hz[own][m] : model_.coupling_hz[own][own];
  bool fma = false;
  for (int cpu : core_cpus_[core])
    if (cpu_busy(cpu) && cpus_[cpu].work == WorkloadClass::fma_saturate) fma = true;
  if (fma) {
    double base = busy_threads_of_core(core) >= 2 ? model_.throttle_hz_2t : model_.throttle_hz_1t;
    hz = std::min(hz, base + throttle_jitter_hz(core));
  }
  return hz;
}

double SimCpu::core_rapl_rate_w(int core) const {
  if (core_state(core) != 0) return 0;
  WorkloadClass cls = core_class(core);
  const WorkloadCoeff& c = model_.coeff(cls);
  double scale = effective_core_hz(core) / model_.nominal_hz;
  double wsum = 0;
  int wn = 0;
  for (int cpu : core_cpus_[core])
    if (cpu_busy(cpu)) {
      wsum += cpus_[cpu].weight;
      wn++;
    }
  double weight = wn ? wsum / wn : 0;
  return c.rapl_core_w_per_core * scale * (1.0 + c.rapl_data_delta * weight);
}

double SimCpu::system_power_model() const {
  int n_up = 0;
  bool any_active = false;
  double p = model_.base_all_c2_w;
  double dynamic = 0;
  bool first_active_seen = false;
  double class_wsum[kWorkloadClassCount] = {};
  int class_wn[kWorkloadClassCount] = {};
  bool class_present[kWorkloadClassCount] = {};

  for (int core = 0; core < topo_.n_cores(); core++) {
    int st = core_state(core);
    if (st <= 1) n_up++;
    if (st != 0) continue;
    any_active = true;
    WorkloadClass cls = core_class(core);
    const WorkloadCoeff& c = model_.coeff(cls);
    double scale = effective_core_hz(core) / model_.nominal_hz;
    if (first_active_seen)
      dynamic += c.sys_w_per_core * scale;
    else
      first_active_seen = true;
    dynamic += c.sys_w_per_sibling * scale * (busy_threads_of_core(core) - 1);
    class_present[static_cast<int>(cls)] = true;
  }
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    if (!cpus_[cpu].online) continue;
    if (cpu_busy(cpu)) {
      class_wsum[static_cast<int>(cpus_[cpu].work)] += cpus_[cpu].weight;
      class_wn[static_cast<int>(cpus_[cpu].work)]++;
    }
  }
  if (n_up > 0) p += model_.first_c1_delta_w + model_.per_extra_c1_core_w * (n_up - 1);
  if (any_active) p += model_.active_flat_w;
  p += dynamic;
  double mult = 1.0;
  for (int i = 0; i < kWorkloadClassCount; i++) {
    if (!class_present[i]) continue;
    const WorkloadCoeff& c = model_.workload[i];
    if (c.dram_w > 0) p += c.dram_w;
    if (c.data_delta > 0 && class_wn[i] > 0)
      mult *= 1.0 + c.data_delta * (class_wsum[i] / class_wn[i]);
  }
  return p * mult;
}

double SimCpu::system_power_w() const { return system_power_model(); }

bool SimCpu::any_saturation_busy() const { return fma_count_ > 0; }

void SimCpu::refresh_active_cpus() {
  active_cpus_.clear();
  active_cores_.clear();
  int last_core = -1;
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    const CpuState& c = cpus_[cpu];
    if (!c.online) continue;
    if (c.work == WorkloadClass::idle && thread_idle_state(cpu) != 0) continue;
    active_cpus_.push_back(cpu);
    int core = topo_.core_of(cpu);
    if (core != last_core &&
        std::find(active_cores_.begin(), active_cores_.end(), core) == active_cores_.end())
      active_cores_.push_back(core);
    last_core = core;
  }
  std::sort(active_cores_.begin(), active_cores_.end());
  active_dirty_ = false;
}

void SimCpu::refresh_pending_min() {
  pending_min_ns_ = kNoEvent;
  if (pending_count_ == 0) return;
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++)
    if (pending_[cpu]) pending_min_ns_ = std::min(pending_min_ns_, pending_[cpu]->apply_ns);
}

int64_t SimCpu::next_event_ns() const {
  int64_t te = pending_min_ns_;
  if (capture_) te = std::min(te, capture_->next_ns);
  if (fma_count_ > 0) te = std::min(te, (now_ / kSec + 1) * kSec);
  return te;
}

void SimCpu::integrate_segment(int64_t t0, int64_t t1) {
  if (t1 <= t0) return;
  if (active_dirty_) refresh_active_cpus();
  double dt = static_cast<double>(t1 - t0) * 1e-9;
  for (int pkg = 0; pkg < topo_.n_packages(); pkg++) scratch_pkg_w_[pkg] = 0;
  for (int core : active_cores_) {
    scratch_hz_[core] = effective_core_hz(core);
    double rate = core_rapl_rate_w(core);
    core_energy_[core].accum_j += rate * dt;
    scratch_pkg_w_[pkg_of_core_[core]] += rate;
  }
  for (int pkg = 0; pkg < topo_.n_packages(); pkg++) {
    double rate = std::min(scratch_pkg_w_[pkg] + model_.rapl_uncore_w, model_.rapl_package_cap_w);
    pkg_energy_[pkg].accum_j += rate * dt;
  }
  for (int cpu : active_cpus_) {
    const CpuState& c = cpus_[cpu];
    bool poll = c.work == WorkloadClass::idle;
    int core = topo_.core_of(cpu);
    double f = scratch_hz_[core];
    aperf_[cpu] += f * dt;
    mperf_[cpu] += model_.nominal_hz * dt;
    cycles_[cpu] += f * dt;
    double ipc;
    if (c.work == WorkloadClass::fma_saturate) {
      int tpc = busy_threads_of_core(core);
      ipc = (tpc >= 2 ? model_.fma_ipc_2t : model_.fma_ipc_1t) / std::max(tpc, 1);
    } else {
      ipc = model_.coeff(poll ? WorkloadClass::pause_loop : c.work).ipc;
    }
    instr_[cpu] += ipc * f * dt;
  }
}

void SimCpu::run_due_events() {
  if (pending_count_ > 0 && pending_min_ns_ <= now_) {
    for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
      if (!pending_[cpu] || pending_[cpu]->apply_ns > now_) continue;
      const Pending& p = *pending_[cpu];
      cpus_[cpu].set_idx = p.to_idx;
      if (p.is_down)
        revert_[cpu] = Revert{true, p.from_idx, now_ + model_.revert_window_ns};
      else
        revert_[cpu].armed = false;
      last_apply_[cpu] = now_;
      pending_[cpu].reset();
      pending_count_--;
    }
    refresh_pending_min();
  }
  if (capture_) {
    while (capture_->next_ns <= now_) {
      double w = system_power_model() + capture_->rng.normal(0, capture_->sigma_w);
      capture_->samples.push_back(PowerSample{capture_->next_ns, w});
      capture_->next_ns += capture_->period_ns;
    }
  }
}

void SimCpu::advance_to(int64_t t_ns) {
  if (t_ns < now_) fail(strf("time regression: %lld -> %lld ns", static_cast<long long>(now_),
                             static_cast<long long>(t_ns)));
  for (;;) {
    int64_t te = next_event_ns();
    if (te <= t_ns) {
      integrate_segment(now_, te);
      now_ = te;
      run_due_events();
      continue;
    }
    integrate_segment(now_, t_ns);
    now_ = t_ns;
    return;
  }
}

void SimCpu::sleep_ns(int64_t ns) {
  if (ns < 0) fail("sleep_ns: negative duration");
  advance_to(now_ + ns);
}

int64_t SimCpu::advance_busy_cycles(int cpu, double cycles) {
  topo_.require_cpu(cpu);
  if (!cpus_[cpu].online) fail(strf("cpu %d is offline", cpu));
  if (cpus_[cpu].work == WorkloadClass::idle)
    fail(strf("advance_busy_cycles: cpu %d has no workload set", cpu));
  int64_t start = now_;
  double remaining = cycles;
  int core = topo_.core_of(cpu);
  while (remaining > 1e-6) {
    double f = effective_core_hz(core);
    int64_t te = next_event_ns();
    int64_t target = now_ + static_cast<int64_t>(std::ceil(remaining / f * 1e9));
    if (target <= te) {
      advance_to(target);
      break;
    }
    double dt = static_cast<double>(te - now_);
    advance_to(te);
    remaining -= f * dt * 1e-9;
  }
  return now_ - start;
}

void SimCpu::set_workload(int cpu, WorkloadClass w, double weight) {
  topo_.require_cpu(cpu);
  if (!cpus_[cpu].online) fail(strf("cpu %d is offline", cpu));
  if (weight < 0 || weight > 1) fail(strf("operand weight %g outside [0, 1]", weight));
  if (cpus_[cpu].work == WorkloadClass::fma_saturate) fma_count_--;
  cpus_[cpu].work = w;
  cpus_[cpu].weight = weight;
  if (w == WorkloadClass::fma_saturate) fma_count_++;
  active_dirty_ = true;
}

void SimCpu::clear_workload(int cpu) {
  topo_.require_cpu(cpu);
  if (cpus_[cpu].work == WorkloadClass::fma_saturate) fma_count_--;
  cpus_[cpu].work = WorkloadClass::idle;
  cpus_[cpu].weight = 0;
  active_dirty_ = true;
}

WorkloadClass SimCpu::workload_of(int cpu) const {
  topo_.require_cpu(cpu);
  return cpus_[cpu].work;
}

double SimCpu::set_hz_of(int cpu) const {
  topo_.require_cpu(cpu);
  return model_.frequencies_hz[cpus_[cpu].set_idx];
}

int64_t SimCpu::last_apply_ns(int cpu) const {
  topo_.require_cpu(cpu);
  return last_apply_[cpu];
}

double SimCpu::effective_hz_now(int cpu) const {
  topo_.require_cpu(cpu);
  return effective_core_hz(topo_.core_of(cpu));
}

void SimCpu::set_frequency(const FreqSetting& s) {
  topo_.require_cpu(s.cpu);
  if (!cpus_[s.cpu].online) fail(strf("cpu %d is offline", s.cpu));
  require_valid_frequency(s.hz);
  int idx = model_.freq_index(s.hz);
  int cur = cpus_[s.cpu].set_idx;
  if (idx == cur) {
    if (pending_[s.cpu]) {
      pending_[s.cpu].reset();
      pending_count_--;
      refresh_pending_min();
    }
    return;
  }
  bool down = idx < cur;
  Pending p;
  p.to_idx = idx;
  p.from_idx = cur;
  p.is_down = down;
  Revert& rv = revert_[s.cpu];
  if (!down && rv.armed && now_ <= rv.deadline_ns && idx == rv.prev_idx) {
    // Voltage from the higher operating point has not decayed yet; restoring
    // the previous frequency needs no slot wait.
    p.apply_ns = now_ + model_.revert_latency_ns;
    rv.armed = false;
  } else {
    int64_t T = model_.update_interval_ns;
    int64_t slot = (now_ + T - 1) / T * T;
    p.apply_ns = slot + (down ? model_.transition_down_ns : model_.transition_up_ns);
  }
  if (!pending_[s.cpu]) pending_count_++;
  pending_[s.cpu] = p;
  pending_min_ns_ = std::min(pending_min_ns_, p.apply_ns);
}

CounterSnapshot SimCpu::read_counters(int cpu) {
  topo_.require_cpu(cpu);
  if (!cpus_[cpu].online) fail(strf("counters unavailable: cpu %d is offline", cpu));
  CounterSnapshot s;
  s.cpu = cpu;
  s.timestamp_ns = now_;
  s.cycles = static_cast<uint64_t>(cycles_[cpu]);
  s.aperf = static_cast<uint64_t>(aperf_[cpu]);
  s.mperf = static_cast<uint64_t>(mperf_[cpu]);
  s.instr = static_cast<uint64_t>(instr_[cpu]);
  return s;
}

EnergyReading SimCpu::read_energy(Domain d, int locus) {
  EnergyLocus* L = nullptr;
  if (d == Domain::package) {
    if (locus < 0 || locus >= topo_.n_packages()) fail(strf("unknown package %d", locus));
    L = &pkg_energy_[locus];
  } else {
    topo_.require_cpu(locus);
    int core = topo_.core_of(locus);
    bool any_online = false;
    for (int cpu : core_cpus_[core]) any_online |= cpus_[cpu].online;
    if (!any_online) fail(strf("core energy unavailable: all threads of core %d offline", core));
    L = &core_energy_[core];
  }
  if (L->last_read_ns != now_) {
    double obs = L->accum_j + rapl_noise_.normal(0, model_.rapl_read_noise_sigma_j);
    obs = std::max(obs, L->observed_j);
    L->observed_j = obs;
    L->last_units = static_cast<uint64_t>(std::floor(std::ldexp(obs, model_.rapl_esu)));
    L->last_read_ns = now_;
  }
  EnergyReading r;
  r.domain = d;
  r.locus = locus;
  r.raw = static_cast<uint32_t>(L->last_units & 0xffffffffull);
  r.joules = std::ldexp(static_cast<double>(r.raw), -model_.rapl_esu);
  r.timestamp_ns = now_;
  r.esu = model_.rapl_esu;
  return r;
}

void SimCpu::set_cstate(const CStateControl& c) {
  topo_.require_cpu(c.cpu);
  if (c.state == 0) fail("idle state 0 (active) cannot be disabled");
  if (c.state == 1)
    cpus_[c.cpu].c1_enabled = c.enabled;
  else if (c.state == 2)
    cpus_[c.cpu].c2_enabled = c.enabled;
  else
    fail(strf("unknown idle state %d", c.state));
  active_dirty_ = true;
}

void SimCpu::set_online(int cpu, bool online) {
  topo_.require_cpu(cpu);
  if (!online && cpu == 0) fail("cpu 0 (boot cpu) cannot be taken offline");
  if (!online && cpu_busy(cpu)) fail(strf("cpu %d is busy", cpu));
  if (!online && pending_[cpu]) {
    pending_[cpu].reset();
    pending_count_--;
    refresh_pending_min();
  }
  if (!online) revert_[cpu].armed = false;
  cpus_[cpu].online = online;
  active_dirty_ = true;
}

bool SimCpu::is_online(int cpu) const {
  topo_.require_cpu(cpu);
  return cpus_[cpu].online;
}

void SimCpu::pin_current_thread(int cpu) {
  topo_.require_cpu(cpu);
  if (!cpus_[cpu].online) fail(strf("cannot pin to offline cpu %d", cpu));
  pinned_cpu_ = cpu;
}

ControlSnapshot SimCpu::snapshot_control_state() {
  ControlSnapshot s;
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    s.set_hz[cpu] = model_.frequencies_hz[cpus_[cpu].set_idx];
    s.cstate_enabled[{cpu, 1}] = cpus_[cpu].c1_enabled;
    s.cstate_enabled[{cpu, 2}] = cpus_[cpu].c2_enabled;
    s.online[cpu] = cpus_[cpu].online;
  }
  return s;
}

void SimCpu::restore_control_state(const ControlSnapshot& s) {
  // Administrative reset: applied directly, not through the transition model.
  for (const auto& [cpu, on] : s.online) {
    topo_.require_cpu(cpu);
    cpus_[cpu].online = on;
  }
  for (const auto& [cpu, hz] : s.set_hz) {
    topo_.require_cpu(cpu);
    int idx = model_.freq_index(hz);
    if (idx < 0) fail(strf("snapshot frequency %.0f Hz unknown to the model", hz));
    cpus_[cpu].set_idx = idx;
    if (pending_[cpu]) {
      pending_[cpu].reset();
      pending_count_--;
    }
    revert_[cpu].armed = false;
  }
  for (const auto& [key, enabled] : s.cstate_enabled) {
    topo_.require_cpu(key.first);
    if (key.second == 1)
      cpus_[key.first].c1_enabled = enabled;
    else if (key.second == 2)
      cpus_[key.first].c2_enabled = enabled;
  }
  refresh_pending_min();
  active_dirty_ = true;
}

void SimCpu::begin_capture(double rate_hz, double noise_sigma_w) {
  if (capture_) fail("power capture already running");
  if (rate_hz <= 0) fail("capture rate must be positive");
  Capture c;
  c.rate_hz = rate_hz;
  c.period_ns = static_cast<int64_t>(std::llround(1e9 / rate_hz));
  c.next_ns = now_;
  c.sigma_w = noise_sigma_w;
  c.rng = Rng(derive_seed(seed_, "power-capture", static_cast<uint64_t>(capture_count_++)));
  capture_ = std::move(c);
}

PowerTrace SimCpu::end_capture() {
  if (!capture_) fail("no power capture running");
  // Flush a tick landing exactly on the end time.
  run_due_events();
  PowerTrace t;
  t.rate_hz = capture_->rate_hz;
  t.source = "sim";
  t.samples = std::move(capture_->samples);
  capture_.reset();
  return t;
}

double SimCpu::draw_wakeup_latency_us(int cstate, double freq_hz, bool remote, Rng& rng) const {
  double lat;
  if (cstate == 1) {
    double base = freq_hz >= model_.c1_fast_threshold_hz ? model_.c1_latency_fast_us
                                                         : model_.c1_latency_slow_us;
    lat = base + rng.half_normal(model_.wake_jitter_sigma_us);
  } else if (cstate == 2) {
    lat = rng.uniform(model_.c2_latency_lo_us, model_.c2_latency_hi_us);
  } else {
    fail(strf("unsupported idle state %d", cstate));
  }
  if (remote) lat += model_.remote_overhead_us;
  return lat;
}

}  // namespace pmchar
