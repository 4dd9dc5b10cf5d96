// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pmchar/platform.hpp"
#include "pmchar/powertrace.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/sim_model.hpp"
#include "pmchar/topology.hpp"

namespace pmchar {

// Simulated processor backend: a behavioral model of the reference machine
// behind the ordinary Platform interface, driven by a virtual clock.
//
// Time advances only through sleep_ns()/advance_to()/advance_busy_cycles();
// between state changes every rate (power draw, counter slopes) is constant,
// so integration is exact piecewise closed form.  Pending frequency requests,
// power-capture ticks, and saturation-jitter interval boundaries are the only
// events that break a segment.
class SimCpu final : public Platform {
 public:
  SimCpu(SimModel model, uint64_t seed);

  const Topology& topology() const override { return topo_; }
  std::vector<double> available_frequencies() const override { return model_.frequencies_hz; }
  double nominal_hz() const override { return model_.nominal_hz; }
  bool is_simulated() const override { return true; }
  SimCpu* sim() override { return this; }

  int64_t now_ns() override { return now_; }
  void sleep_ns(int64_t ns) override;

  void set_frequency(const FreqSetting& s) override;
  CounterSnapshot read_counters(int cpu) override;
  EnergyReading read_energy(Domain d, int locus) override;
  void set_cstate(const CStateControl& c) override;
  void set_online(int cpu, bool online) override;
  bool is_online(int cpu) const override;
  void pin_current_thread(int cpu) override;

  ControlSnapshot snapshot_control_state() override;
  void restore_control_state(const ControlSnapshot& s) override;

  // --- simulation-only surface ---

  const SimModel& model() const { return model_; }
  uint64_t seed() const { return seed_; }

  void advance_to(int64_t t_ns);

  // Consumes `cycles` core cycles on `cpu` at whatever effective frequency
  // applies while they run (transitions mid-run show up as mixed runtime,
  // exactly like a wall-clocked loop would).  Returns elapsed ns.
  int64_t advance_busy_cycles(int cpu, double cycles);

  // Marks a hardware thread busy with a workload class; weight is the
  // relative operand Hamming weight for data-dependent classes.
  void set_workload(int cpu, WorkloadClass w, double weight = 0.0);
  void clear_workload(int cpu);
  WorkloadClass workload_of(int cpu) const;

  double set_hz_of(int cpu) const;
  int64_t last_apply_ns(int cpu) const;
  double effective_hz_now(int cpu) const;
  // Instantaneous model system power, noise-free (the captured trace is the
  // noisy observable).
  double system_power_w() const;

  void begin_capture(double rate_hz, double noise_sigma_w);
  PowerTrace end_capture();

  // Closed-form wakeup latency draw; the caller owns the stream so probe
  // output stays reproducible per probe seed.
  double draw_wakeup_latency_us(int cstate, double freq_hz, bool remote, Rng& rng) const;

 private:
  struct CpuState {
    int set_idx = 0;
    bool online = true;
    bool c1_enabled = true;
    bool c2_enabled = true;
    WorkloadClass work = WorkloadClass::idle;
    double weight = 0;
  };
  struct Pending {
    int to_idx = 0;
    int from_idx = 0;
    int64_t apply_ns = 0;
    bool is_down = false;
  };
  struct Revert {
    bool armed = false;
    int prev_idx = 0;
    int64_t deadline_ns = 0;
  };
  struct EnergyLocus {
    double accum_j = 0;     // true integrated energy
    double observed_j = 0;  // last noisy observation (monotone clamp)
    int64_t last_read_ns = -1;
    uint64_t last_units = 0;
  };

  bool cpu_busy(int n) const { return cpus_[n].online && cpus_[n].work != WorkloadClass::idle; }
  int thread_idle_state(int n) const;     // 0 = poll (behaves active), 1, 2
  int core_state(int core) const;         // 0 = active, 1, 2
  int core_set_idx(int core) const;       // max set over threads, offline included
  double effective_core_hz(int core) const;
  int busy_threads_of_core(int core) const;
  WorkloadClass core_class(int core) const;
  double core_rapl_rate_w(int core) const;
  double system_power_model() const;
  double throttle_jitter_hz(int core) const;

  int64_t next_event_ns() const;  // earliest pending/capture/jitter event, or INT64_MAX
  void integrate_segment(int64_t t0, int64_t t1);
  void run_due_events();          // applies everything scheduled at exactly now_
  bool any_saturation_busy() const;

  SimModel model_;
  Topology topo_;
  uint64_t seed_;
  int64_t now_ = 0;
  int nominal_idx_ = 0;

  // Flattened topology lookups and integration scratch (hot path).
  std::vector<std::vector<int>> core_cpus_;
  std::vector<std::vector<int>> core_others_;  // other cores of the same CCX
  std::vector<std::vector<int>> pkg_cores_;
  std::vector<double> scratch_hz_;

  // Event-loop caches: most segments have a handful of active threads and at
  // most one pending request, so the integrator must not scan every cpu.
  std::vector<int> active_cpus_;   // busy or polling, rebuilt when dirty
  std::vector<int> active_cores_;  // cores containing an active cpu
  std::vector<int> pkg_of_core_;
  std::vector<double> scratch_pkg_w_;
  bool active_dirty_ = true;
  int fma_count_ = 0;              // busy threads running the saturation class
  int64_t pending_min_ns_ = INT64_MAX;

  void refresh_active_cpus();
  void refresh_pending_min();

  std::vector<CpuState> cpus_;
  std::vector<std::optional<Pending>> pending_;
  int pending_count_ = 0;
  std::vector<Revert> revert_;
  std::vector<int64_t> last_apply_;

  std::vector<double> aperf_, mperf_, cycles_, instr_;
  std::vector<EnergyLocus> core_energy_;  // per core
  std::vector<EnergyLocus> pkg_energy_;   // per package
  Rng rapl_noise_;

  struct Capture {
    double rate_hz = 0;
    int64_t period_ns = 0;
    int64_t next_ns = 0;
    double sigma_w = 0;
    std::vector<PowerSample> samples;
    Rng rng{0};
  };
  std::optional<Capture> capture_;
  int capture_count_ = 0;
  int pinned_cpu_ = -1;
};

}  // namespace pmchar
