// SPDX-License-Identifier: Apache-2.0
#include "pmchar/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "pmchar/rng.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/util.hpp"

namespace pmchar {
namespace {

inline void cpu_relax() {
#if defined(__x86_64__)
  __builtin_ia32_pause();
#else
  std::this_thread::yield();
#endif
}

// Dependent dec/branch chain. dec+jnz macro-fuse into one uop, so the chain
// retires one iteration per cycle and its wall time is cycles/f exactly.
inline void busy_chain(uint64_t n) {
#if defined(__x86_64__)
  uint64_t c = n;
  asm volatile(
      "1:\n\t"
      "dec %0\n\t"
      "jnz 1b"
      : "+r"(c)
      :
      : "cc");
#else
  for (volatile uint64_t i = n; i != 0; --i) {
  }
#endif
}

// Optimizer barrier: keeps accumulators live without a store.
template <class T>
inline void sink(T& v) {
#if defined(__GNUC__)
  asm volatile("" : "+g"(v));
#else
  volatile T keep = v;
  (void)keep;
#endif
}

constexpr uint64_t kCheckEvery = 1 << 20;  // stop-flag poll granularity

void loop_pause(const std::atomic<bool>& stop) {
  while (!stop.load(std::memory_order_relaxed)) cpu_relax();
}

void loop_chain(const std::atomic<bool>& stop) {
  while (!stop.load(std::memory_order_relaxed)) busy_chain(kCheckEvery);
}

void loop_scalar_add(const std::atomic<bool>& stop) {
  uint64_t a = 0x9e3779b9;
  while (!stop.load(std::memory_order_relaxed)) {
    for (uint64_t i = 0; i < kCheckEvery; i++) a += i | 1;
    sink(a);
  }
}

// Eight independent accumulators keep the multiplier/FMA pipes full; the
// factor is chosen so values stay finite for hours, with a cheap reset as a
// backstop.  Plain a*b+c so the build needs no ISA flags; contraction to a
// fused op is the compiler's call.
void loop_fp(WorkloadClass cls, const std::atomic<bool>& stop) {
  double a[8];
  for (int k = 0; k < 8; k++) a[k] = 1.0 + 0.01 * k;
  while (!stop.load(std::memory_order_relaxed)) {
    for (uint64_t i = 0; i < kCheckEvery / 8; i++) {
      if (cls == WorkloadClass::sqrt_chain) {
        for (int k = 0; k < 8; k++) a[k] = std::sqrt(a[k] + 2.0);
      } else if (cls == WorkloadClass::wide_mul) {
        for (int k = 0; k < 8; k++) a[k] *= 1.0000000001;
      } else {
        for (int k = 0; k < 8; k++) a[k] = a[k] * 1.0000000001 + 1e-12;
      }
    }
    for (int k = 0; k < 8; k++) sink(a[k]);
    if (a[0] > 1e300) {
      for (int k = 0; k < 8; k++) a[k] = 1.0 + 0.01 * k;
    }
  }
}

void loop_memory(bool writes, const std::atomic<bool>& stop) {
  std::vector<uint64_t> buf(8 << 20, 1);  // 64 MiB, far beyond any cache level
  uint64_t a = 0;
  while (!stop.load(std::memory_order_relaxed)) {
    for (size_t i = 0; i < buf.size(); i += 8) {  // one touch per cache line
      if (writes)
        buf[i] = i;
      else
        a += buf[i];
    }
    sink(a);
  }
}

void loop_triad_class(const std::atomic<bool>& stop) {
  constexpr size_t n = 512 * 1024;  // 3 x 4 MiB per thread: streams past L2
  std::vector<double> a(n, 0), b(n, 1.0), c(n, 2.0);
  while (!stop.load(std::memory_order_relaxed)) {
    for (size_t i = 0; i < n; i++) a[i] = b[i] + 3.0 * c[i];
    sink(a[0]);
  }
}

void loop_xor(double weight, const std::atomic<bool>& stop) {
  uint64_t p = operand_pattern(weight);
  uint64_t a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  while (!stop.load(std::memory_order_relaxed)) {
    for (uint64_t i = 0; i < kCheckEvery / 4; i++) {
      a0 ^= p;
      a1 ^= (p << 1) | (p >> 63);
      a2 ^= (p << 2) | (p >> 62);
      a3 ^= (p << 3) | (p >> 61);
    }
    sink(a0);
    sink(a1);
    sink(a2);
    sink(a3);
  }
}

void loop_shift(double weight, const std::atomic<bool>& stop) {
  uint64_t p = operand_pattern(weight);
  uint64_t a = 0;
  unsigned s = 0;
  while (!stop.load(std::memory_order_relaxed)) {
    for (uint64_t i = 0; i < kCheckEvery; i++) {
      a += p >> s;
      s = (s + 1) & 63;
    }
    sink(a);
  }
}

void loop_chase_class(const std::atomic<bool>& stop) {
  constexpr size_t nodes = (32 << 20) / 64;  // 32 MiB: memory-latency bound
  std::vector<uint64_t> buf = chase_ring(nodes, 0x63686173);
  uint64_t idx = 0;
  while (!stop.load(std::memory_order_relaxed)) {
    for (uint64_t i = 0; i < kCheckEvery / 16; i++) idx = buf[idx];
    sink(idx);
  }
}

void run_class_loop(WorkloadClass cls, double weight, const std::atomic<bool>& stop) {
  switch (cls) {
    case WorkloadClass::pause_loop:
      return loop_pause(stop);
    case WorkloadClass::busy_loop:
    case WorkloadClass::minimal_timed:
      return loop_chain(stop);
    case WorkloadClass::scalar_add:
      return loop_scalar_add(stop);
    case WorkloadClass::wide_mul:
    case WorkloadClass::wide_fma:
    case WorkloadClass::sqrt_chain:
    case WorkloadClass::fma_saturate:
      return loop_fp(cls, stop);
    case WorkloadClass::memory_read:
      return loop_memory(false, stop);
    case WorkloadClass::memory_write:
      return loop_memory(true, stop);
    case WorkloadClass::triad:
      return loop_triad_class(stop);
    case WorkloadClass::wide_xor:
      return loop_xor(weight, stop);
    case WorkloadClass::shift_right:
      return loop_shift(weight, stop);
    case WorkloadClass::pointer_chase:
      return loop_chase_class(stop);
    case WorkloadClass::idle:
      break;  // rejected in the constructor
  }
}

const SimModel::MemLabel& find_label(const SimModel& m, const std::string& label) {
  for (const auto& ml : m.mem_labels)
    if (ml.label == label) return ml;
  std::string known;
  for (const auto& ml : m.mem_labels) known += " " + ml.label;
  fail(strf("unknown memory label '%s' (model defines:%s)", label.c_str(), known.c_str()));
}

// Highest set index anywhere in cpu's complex; shared-cache timing follows
// the fastest set point in the domain, not the reader's own.
int ccx_max_set_idx(SimCpu* s, int cpu) {
  const Topology& t = s->topology();
  int best = 0;
  for (int c : t.ccx_cpus(t.ccx_of(cpu)))
    best = std::max(best, s->model().freq_index(s->set_hz_of(c)));
  return best;
}

}  // namespace

struct ScopedWorkload::Worker {
  std::atomic<bool> stop{false};
  std::thread th;
};

ScopedWorkload::ScopedWorkload(Platform& p, int cpu, WorkloadClass cls, double operand_weight)
    : plat_(&p), cpu_(cpu) {
  if (cls == WorkloadClass::idle) fail("refusing to run an idle workload");
  if (SimCpu* s = p.sim()) {
    s->set_workload(cpu, cls, operand_weight);
    return;
  }
  if (operand_weight < 0 || operand_weight > 1)
    fail(strf("operand weight %g outside [0, 1]", operand_weight));
  worker_ = std::make_unique<Worker>();
  Worker* w = worker_.get();
  Platform* pp = plat_;
  w->th = std::thread([pp, cpu, cls, operand_weight, w] {
    pp->pin_current_thread(cpu);
    run_class_loop(cls, operand_weight, w->stop);
  });
}

void ScopedWorkload::release() {
  if (!plat_) return;
  if (worker_) {
    worker_->stop = true;
    if (worker_->th.joinable()) worker_->th.join();
    worker_.reset();
  } else if (SimCpu* s = plat_->sim()) {
    s->clear_workload(cpu_);
  }
  plat_ = nullptr;
  cpu_ = -1;
}

ScopedWorkload::~ScopedWorkload() { release(); }

ScopedWorkload::ScopedWorkload(ScopedWorkload&& o) noexcept
    : plat_(o.plat_), cpu_(o.cpu_), worker_(std::move(o.worker_)) {
  o.plat_ = nullptr;
  o.cpu_ = -1;
}

ScopedWorkload& ScopedWorkload::operator=(ScopedWorkload&& o) noexcept {
  if (this != &o) {
    release();
    plat_ = o.plat_;
    cpu_ = o.cpu_;
    worker_ = std::move(o.worker_);
    o.plat_ = nullptr;
    o.cpu_ = -1;
  }
  return *this;
}

int64_t timed_cycles(Platform& p, int cpu, double cycles) {
  if (cycles <= 0) fail(strf("timed_cycles: cycle count %g must be positive", cycles));
  if (SimCpu* s = p.sim()) {
    bool was_idle = s->workload_of(cpu) == WorkloadClass::idle;
    if (was_idle) s->set_workload(cpu, WorkloadClass::minimal_timed);
    int64_t ns = s->advance_busy_cycles(cpu, cycles);
    if (was_idle) s->clear_workload(cpu);
    return ns;
  }
  thread_local int pinned_cpu = -1;
  if (pinned_cpu != cpu) {
    p.pin_current_thread(cpu);
    pinned_cpu = cpu;
  }
  int64_t t0 = p.now_ns();
  busy_chain(static_cast<uint64_t>(cycles));
  return p.now_ns() - t0;
}

double run_pointer_chase(Platform& p, int cpu, int64_t working_set_bytes, int64_t loads,
                         const std::string& mem_label) {
  if (working_set_bytes < 64) fail("pointer chase needs at least one cache line");
  if (loads <= 0) fail("pointer chase needs a positive load count");
  if (SimCpu* s = p.sim()) {
    const SimModel& m = s->model();
    double per_ns;
    if (working_set_bytes <= m.l1_size)
      per_ns = m.l1_latency_ns * (m.nominal_hz / s->effective_hz_now(cpu));
    else if (working_set_bytes <= m.l2_size)
      per_ns = m.l2_latency_ns * (m.nominal_hz / s->effective_hz_now(cpu));
    else if (working_set_bytes <= m.l3_size)
      per_ns = m.l3_latency_ns[ccx_max_set_idx(s, cpu)];
    else
      per_ns = find_label(m, mem_label).latency_ns;
    bool was_idle = s->workload_of(cpu) == WorkloadClass::idle;
    if (was_idle) s->set_workload(cpu, WorkloadClass::pointer_chase);
    int64_t t0 = s->now_ns();
    s->advance_to(t0 + llround(per_ns * static_cast<double>(loads)));
    if (was_idle) s->clear_workload(cpu);
    return static_cast<double>(s->now_ns() - t0) / static_cast<double>(loads);
  }
  p.pin_current_thread(cpu);
  size_t nodes = static_cast<size_t>(working_set_bytes) / 64;
  std::vector<uint64_t> buf = chase_ring(nodes, 0x63686173);
  uint64_t idx = 0;
  for (size_t i = 0; i < nodes; i++) idx = buf[idx];  // fault + warm
  int64_t best = INT64_MAX;
  for (int rep = 0; rep < 3; rep++) {  // min filters interference, not latency
    int64_t t0 = p.now_ns();
    for (int64_t i = 0; i < loads; i++) idx = buf[idx];
    best = std::min(best, p.now_ns() - t0);
  }
  sink(idx);
  return static_cast<double>(best) / static_cast<double>(loads);
}

double run_triad(Platform& p, const std::vector<int>& cpus, double seconds,
                 const std::string& mem_label) {
  if (cpus.empty()) fail("triad needs at least one cpu");
  if (seconds <= 0) fail("triad needs a positive duration");
  std::set<int> uniq(cpus.begin(), cpus.end());
  if (uniq.size() != cpus.size()) fail("triad cpu list has duplicates");
  if (SimCpu* s = p.sim()) {
    const SimModel& m = s->model();
    const auto& ml = find_label(m, mem_label);
    const Topology& t = s->topology();
    double bw = 0;
    for (int pkg = 0; pkg < t.n_packages(); pkg++) {
      int threads = 0;
      std::set<int> cores;
      for (int c : cpus)
        if (t.package_of(c) == pkg) {
          threads++;
          cores.insert(t.core_of(c));
        }
      if (threads == 0) continue;
      double base = m.max_bw_per_socket * ml.bw_scale;
      if (threads == 1)
        bw += base * m.single_thread_bw_frac;
      else
        bw += base * std::max(0.0, 1.0 - m.bw_droop_per_core *
                                             std::max<int>(0, static_cast<int>(cores.size()) - 2));
    }
    std::vector<ScopedWorkload> loads;
    loads.reserve(cpus.size());
    for (int c : cpus) loads.emplace_back(p, c, WorkloadClass::triad);
    s->advance_to(s->now_ns() + llround(seconds * 1e9));
    loads.clear();
    return bw;
  }
  struct TriadWorker {
    std::thread th;
    std::atomic<uint64_t> passes{0};
    std::atomic<bool> stop{false};
  };
  constexpr size_t n = 512 * 1024;  // 3 x 4 MiB per thread
  std::vector<std::unique_ptr<TriadWorker>> ws;
  for (int c : cpus) {
    auto w = std::make_unique<TriadWorker>();
    TriadWorker* wp = w.get();
    Platform* pp = &p;
    w->th = std::thread([pp, c, wp] {
      pp->pin_current_thread(c);
      std::vector<double> a(n, 0), b(n, 1.0), cc(n, 2.0);
      while (!wp->stop.load(std::memory_order_relaxed)) {
        for (size_t i = 0; i < n; i++) a[i] = b[i] + 3.0 * cc[i];
        sink(a[0]);
        wp->passes.fetch_add(1, std::memory_order_relaxed);
      }
    });
    ws.push_back(std::move(w));
  }
  int64_t t0 = p.now_ns();
  p.sleep_ns(llround(seconds * 1e9));
  double span_s = static_cast<double>(p.now_ns() - t0) * 1e-9;
  uint64_t passes = 0;
  for (auto& w : ws) {
    w->stop = true;
    w->th.join();
    passes += w->passes.load();
  }
  return static_cast<double>(passes) * static_cast<double>(n) * 24.0 / span_s;
}

std::vector<SaturationInterval> run_fma_saturate(Platform& p, const std::vector<int>& cpus,
                                                 double seconds) {
  if (cpus.empty()) fail("saturation needs at least one cpu");
  if (seconds < 0) fail("saturation needs a non-negative duration");
  std::vector<SaturationInterval> out;
  int n_intervals = static_cast<int>(seconds);
  if (n_intervals == 0) return out;

  const Topology& t = p.topology();
  std::map<int, std::vector<int>> by_core;  // core -> loaded cpus, first = cycle reference
  for (int c : cpus) by_core[t.core_of(c)].push_back(c);

  std::vector<ScopedWorkload> loads;
  loads.reserve(cpus.size());
  for (int c : cpus) loads.emplace_back(p, c, WorkloadClass::fma_saturate);

  int64_t next = (p.now_ns() / kSec + 1) * kSec;
  p.sleep_ns(next - p.now_ns());
  std::map<int, CounterSnapshot> prev;
  for (int c : cpus) prev[c] = p.read_counters(c);
  for (int k = 0; k < n_intervals; k++) {
    SaturationInterval iv;
    iv.t0_ns = p.now_ns();
    p.sleep_ns(kSec);
    iv.t1_ns = p.now_ns();
    double freq_sum = 0;
    double instr = 0, core_cycles = 0;
    for (const auto& [core, members] : by_core) {
      CounterSnapshot ref_now = p.read_counters(members[0]);
      freq_sum += effective_hz(prev[members[0]], ref_now, p.nominal_hz());
      core_cycles += static_cast<double>(ref_now.cycles - prev[members[0]].cycles);
      for (int c : members) {
        CounterSnapshot now = (c == members[0]) ? ref_now : p.read_counters(c);
        instr += static_cast<double>(now.instr - prev[c].instr);
        prev[c] = now;
      }
    }
    iv.freq_hz = freq_sum / static_cast<double>(by_core.size());
    iv.ipc = core_cycles > 0 ? instr / core_cycles : 0;
    out.push_back(iv);
  }
  loads.clear();
  return out;
}

uint64_t operand_pattern(double weight) {
  if (weight < 0 || weight > 1) fail(strf("operand weight %g outside [0, 1]", weight));
  int k = static_cast<int>(llround(64.0 * weight));
  uint64_t v = 0;
  for (int i = 0; i < 64; i++)
    if (i * k % 64 < k) v |= 1ull << i;  // k bits evenly spread from bit 0: w=0.5 -> 0x5555...
  return v;
}

std::vector<uint64_t> chase_ring(size_t nodes, uint64_t seed) {
  if (nodes == 0) fail("chase ring needs at least one node");
  std::vector<uint64_t> buf(nodes * 8, 0);
  std::vector<uint32_t> order(nodes);
  for (size_t i = 0; i < nodes; i++) order[i] = static_cast<uint32_t>(i);
  Rng r(seed);
  r.shuffle(order);
  for (size_t i = 0; i < nodes; i++)
    buf[static_cast<size_t>(order[i]) * 8] = order[(i + 1) % nodes] * 8ull;
  return buf;
}

}  // namespace pmchar
