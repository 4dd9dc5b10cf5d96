// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pmchar/platform.hpp"

namespace pmchar {

// Keeps one hardware thread busy with a workload class for as long as the
// object lives.  On the simulated backend this marks the cpu busy in the
// model; on hardware it runs the class's instruction loop on a thread pinned
// to the cpu.  Movable so probes can hold a vector of loads.
class ScopedWorkload {
 public:
  ScopedWorkload() = default;
  ScopedWorkload(Platform& p, int cpu, WorkloadClass cls, double operand_weight = 0.0);
  ~ScopedWorkload();
  ScopedWorkload(ScopedWorkload&& o) noexcept;
  ScopedWorkload& operator=(ScopedWorkload&& o) noexcept;
  ScopedWorkload(const ScopedWorkload&) = delete;
  ScopedWorkload& operator=(const ScopedWorkload&) = delete;

  void release();  // stop the load now instead of at scope exit

 private:
  struct Worker;
  Platform* plat_ = nullptr;
  int cpu_ = -1;
  std::unique_ptr<Worker> worker_;  // hardware backend only
};

// Runs a dependent chain of single-cycle ops on `cpu` and returns elapsed
// wall nanoseconds.  Chain duration tracks 1/f exactly, which is what makes
// frequency transitions observable from inside a loop.  Hardware callers run
// this on the thread being measured; it pins itself on first use per cpu.
int64_t timed_cycles(Platform& p, int cpu, double cycles);

// Dependent-load latency over a working set: ns per load.  `mem_label` names
// the memory interleaving configuration in effect (operator metadata on
// hardware, model input when simulated).
double run_pointer_chase(Platform& p, int cpu, int64_t working_set_bytes, int64_t loads,
                         const std::string& mem_label = "auto");

// Streaming triad bandwidth over the given cpus, bytes per second moved by
// the arithmetic (3 x 8B per element; write-allocate traffic not counted).
double run_triad(Platform& p, const std::vector<int>& cpus, double seconds,
                 const std::string& mem_label = "auto");

// One wall-second of saturating dense arithmetic, reduced from counters:
// frequency is nominal * daperf/dmperf averaged over the loaded cores, ipc is
// instructions per core-cycle (both sibling threads pooled).
struct SaturationInterval {
  int64_t t0_ns = 0;
  int64_t t1_ns = 0;
  double freq_hz = 0;
  double ipc = 0;
};

// Saturating arithmetic on every given cpu for `seconds`, recorded per whole
// 1 s interval (starts on a second boundary so intervals line up with the
// throttle governor's evaluation windows).  seconds=0 -> empty.
std::vector<SaturationInterval> run_fma_saturate(Platform& p, const std::vector<int>& cpus,
                                                 double seconds);

// Fills a 64-bit operand whose Hamming weight is round(64 * weight), bits
// spread evenly from bit 0 (weight 0.5 -> 0x5555...).  The data-dependence
// loops build their inputs from this.
uint64_t operand_pattern(double weight);

// Cache-line ring in shuffled visit order: entry at index 8*i holds the
// uint64 index of the next node's entry, covering every node exactly once.
std::vector<uint64_t> chase_ring(size_t nodes, uint64_t seed);

}  // namespace pmchar
