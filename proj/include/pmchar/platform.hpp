// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmchar/topology.hpp"

namespace pmchar {

enum class Domain { package, core };

const char* to_string(Domain d);

struct FreqSetting {
  int cpu = 0;
  double hz = 0;  // must be one of the backend's available frequencies
};

struct CounterSnapshot {
  int cpu = 0;
  int64_t timestamp_ns = 0;
  uint64_t cycles = 0;  // actual core cycles (halted while idle)
  uint64_t aperf = 0;
  uint64_t mperf = 0;
  uint64_t instr = 0;   // instructions retired
};

// One energy-counter reading.  `raw` is the native 32-bit accumulator, which
// wraps; `joules` is raw scaled by 2^-esu.  Use energy_delta_joules for
// differences so wrap-around is corrected.
struct EnergyReading {
  Domain domain = Domain::package;
  int locus = 0;  // package id for Domain::package, OS cpu id for Domain::core
  uint32_t raw = 0;
  double joules = 0;
  int64_t timestamp_ns = 0;
  int esu = 16;
};

double energy_delta_joules(const EnergyReading& before, const EnergyReading& after);

// Effective frequency over an interval from paired counter snapshots:
// nominal * delta(aperf)/delta(mperf).
double effective_hz(const CounterSnapshot& before, const CounterSnapshot& after, double nominal_hz);

struct CStateControl {
  int cpu = 0;
  int state = 0;  // OS idle-state index; state 0 cannot be disabled
  bool enabled = true;
};

// What a workload keeps the pipeline busy with; the simulated backend keys
// its power and timing model on this, the hardware backend ignores it (the
// real instructions speak for themselves).
enum class WorkloadClass {
  idle,
  pause_loop,
  busy_loop,
  scalar_add,
  wide_mul,
  wide_fma,
  sqrt_chain,
  memory_read,
  memory_write,
  triad,
  fma_saturate,
  wide_xor,
  shift_right,
  minimal_timed,
  pointer_chase,
};

const char* to_string(WorkloadClass w);
WorkloadClass workload_class_from_string(const std::string& s);

// Everything the run controller mutates, captured at startup and restored at
// exit.
struct ControlSnapshot {
  std::map<int, double> set_hz;
  std::map<std::pair<int, int>, bool> cstate_enabled;  // (cpu, state) -> enabled
  std::map<int, bool> online;
  std::string governor;  // hardware only
};

class SimCpu;  // simulated backend (sim_cpu.hpp)

// Uniform control/measurement surface over one machine, real or simulated.
// All control operations are idempotent; energy readout per locus is
// serialized inside the backend.
class Platform {
 public:
  virtual ~Platform() = default;

  virtual const Topology& topology() const = 0;
  virtual std::vector<double> available_frequencies() const = 0;
  virtual double nominal_hz() const = 0;
  virtual bool is_simulated() const = 0;
  // Non-null on the simulated backend; kernels use it for closed-form timing.
  virtual SimCpu* sim() { return nullptr; }

  virtual int64_t now_ns() = 0;
  virtual void sleep_ns(int64_t ns) = 0;

  virtual void set_frequency(const FreqSetting& s) = 0;
  virtual CounterSnapshot read_counters(int cpu) = 0;
  virtual EnergyReading read_energy(Domain d, int locus) = 0;
  virtual void set_cstate(const CStateControl& c) = 0;
  virtual void set_online(int cpu, bool online) = 0;
  virtual bool is_online(int cpu) const = 0;
  virtual void pin_current_thread(int cpu) = 0;

  virtual ControlSnapshot snapshot_control_state() = 0;
  virtual void restore_control_state(const ControlSnapshot& s) = 0;

  // Validates a requested frequency, listing the valid set on failure.
  void require_valid_frequency(double hz) const;
};

}  // namespace pmchar
