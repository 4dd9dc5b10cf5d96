// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmchar/csv.hpp"
#include "pmchar/kernels.hpp"
#include "pmchar/platform.hpp"
#include "pmchar/powertrace.hpp"
#include "pmchar/samples.hpp"
#include "pmchar/stats.hpp"

namespace pmchar::probes {

// Shared probe environment.  out_dir empty keeps results in memory only;
// otherwise each probe writes its raw records as one comment-headed CSV.
// Every probe derives its own RNG stream from `seed`, so the same seed over
// the simulated backend reproduces identical output bytes regardless of
// which other probes ran.
struct Context {
  Platform& platform;
  uint64_t seed = 1;
  std::string out_dir;
  std::string mem_label = "auto";  // DIMM population label for memory probes
};

// Starts a report table with the standard identification header.
csv::Table new_report(const Context& ctx, const std::string& probe);

// ---------------------------------------------------------------------------
// Frequency-transition delay.
//
// One iteration: request `to` on the worker core, time fixed-cycle chains
// until one lands within detect_band of the calibrated runtime at `to`
// (the delay is the request-to-detection time minus that one chain), then
// validate with `validate_runs` further chains against a 95% confidence
// interval around the calibration mean.  The same detect/validate pass runs
// for the return to `from`.  A failed validation discards the sample and the
// one that follows it (its starting state is tainted).  Between iterations
// the probe sleeps uniformly inside [lo, wait_max]; lo is guard_ms once
// wait_max reaches it, else 0 — gaps shorter than the hardware's
// down-transition grace window re-trigger its fast path, so runs that want
// clean window statistics keep every gap above it.

struct TransitionParams {
  int cpu = 1;               // worker hardware thread; its whole core switches
  double from_hz = 2.2e9;
  double to_hz = 1.5e9;
  int n = 100000;            // recorded from->to samples
  double wait_max_ms = 10.0;
  double guard_ms = 5.0;
  double detect_cycles = 10000;
  double detect_band = 0.03;      // relative half-width of the accept band
  int validate_runs = 100;
  double detect_timeout_ms = 50.0;
};

struct TransitionResult {
  TransitionParams params;
  std::vector<TransitionSample> samples;
  double chain_ns_from = 0;  // calibrated chain runtime at each frequency
  double chain_ns_to = 0;
  double chain_sigma_from = 0;
  double chain_sigma_to = 0;
  int n_valid = 0;
  int n_discarded = 0;
};

TransitionResult run_freq_transition(const Context& ctx, const TransitionParams& p);

// Validation bookkeeping for sequentially dependent samples: a failed check
// discards the sample itself, and the next sample started from an unproven
// state, so it is still measured, then marked as following the failure.
void apply_validation_outcome(TransitionSample& s, bool ok, bool& prev_failed);

// ---------------------------------------------------------------------------
// Sibling-thread frequency coupling: one thread of a core runs busy at
// low_hz while its sibling's set point is walked through {low idle,
// high idle, high offline}; the busy thread's effective frequency is
// measured each time from timed cycle chains.

struct SiblingParams {
  int core = 1;
  double low_hz = 0;   // 0: slowest available frequency
  double high_hz = 0;  // 0: fastest available frequency
  int chains = 50;
  double chain_cycles = 200000;
};

struct SiblingScenario {
  std::string name;
  double sibling_set_hz = 0;
  bool sibling_online = true;
  double measured_hz = 0;
};

struct SiblingResult {
  SiblingParams params;
  std::vector<SiblingScenario> rows;
};

SiblingResult run_sibling_freq(const Context& ctx, const SiblingParams& p);

// ---------------------------------------------------------------------------
// Mixed set points inside one CCX: every core of the CCX runs a busy loop;
// the observed core is set to f_self, the rest to f_others, for every pair
// from `freqs_hz`.  Effective frequency is sampled once per second from
// aperf/mperf, and the shared-cache latency for the pair is taken as the
// minimum of repeated pointer-chase runs.

struct MixedFreqParams {
  int ccx = 0;
  std::vector<double> freqs_hz;  // empty: all available frequencies
  double duration_s = 120;
  int64_t chase_bytes = 8ll << 20;
  int64_t chase_loads = 100000;
  int chase_reps = 3;
};

struct MixedFreqCell {
  double self_set_hz = 0;
  double others_set_hz = 0;
  double mean_hz = 0;
  double sigma_hz = 0;
  int n_samples = 0;
  double l3_ns = 0;
};

struct MixedFreqResult {
  MixedFreqParams params;
  std::vector<MixedFreqCell> cells;
};

MixedFreqResult run_mixed_freq(const Context& ctx, const MixedFreqParams& p);

// ---------------------------------------------------------------------------
// Memory performance: triad bandwidth over a growing set of cores on one
// CCX (one thread per core), plus pointer-chase latency over a working-set
// sweep ending in main memory.

struct MemPerfParams {
  int ccx = 0;
  std::vector<int> core_counts = {1, 2, 3, 4};
  double triad_seconds = 1.0;
  std::vector<int64_t> chase_sizes = {16ll << 10, 256ll << 10, 8ll << 20, 64ll << 20};
  int64_t chase_loads = 100000;
};

struct TriadPoint {
  int cores = 0;
  double gb_per_s = 0;  // decimal GB/s
};

struct ChasePoint {
  int64_t bytes = 0;
  double ns = 0;
};

struct MemPerfResult {
  MemPerfParams params;
  std::string label;  // resolved memory label
  std::vector<TriadPoint> triad;
  std::vector<ChasePoint> chase;
};

MemPerfResult run_mem_perf(const Context& ctx, const MemPerfParams& p);

// ---------------------------------------------------------------------------
// Sustained full-load throttling: the dense-FMA workload on every core (one
// or both threads), frequency/IPC sampled per second, system power averaged
// over the steady window, and the package energy counters read across it.
// The first head_skip_s and last tail_skip_s are excluded from statistics.

struct ThrottleParams {
  int threads_per_core = 1;  // 1 or 2
  double duration_s = 120;
  double warmup_s = 0;       // real machines want several minutes here
  double head_skip_s = 5;
  double tail_skip_s = 2;
  double capture_rate_hz = 20;
};

struct ThrottleResult {
  ThrottleParams params;
  std::vector<SaturationInterval> intervals;  // steady-window intervals only
  stats::Summary freq_hz;
  stats::Summary ipc;
  double sys_power_w = 0;  // mean over the steady window
  bool sys_measured = false;
  int sys_samples = 0;
  std::vector<double> rapl_pkg_w;  // one entry per package
};

ThrottleResult run_throttle(const Context& ctx, const ThrottleParams& p);

// ---------------------------------------------------------------------------
// Idle and pause-loop power sweep.  Phase "baseline" holds every thread at
// its deepest idle state; phase "c1" then caps threads at C1 one CPU at a
// time in logical numbering; phase "active" finally starts a pause loop on
// one CPU at a time in the same order.  Each configuration holds hold_s and
// is identified in the schedule so an external trace can be merged later;
// on the simulated backend the built-in capture fills the means directly.

struct CStateSweepParams {
  double hold_s = 10;
  double capture_rate_hz = 20;
};

struct CStateSweepResult {
  CStateSweepParams params;
  std::vector<CStatePowerPoint> points;
  std::vector<ScheduleEntry> schedule;
  bool measured = false;  // points carry means (built-in capture was available)
};

CStateSweepResult run_cstate_power_sweep(const Context& ctx, const CStateSweepParams& p);

// Round-trips one sweep configuration through the schedule's config id, so
// merged windows can be decoded back into sweep points.
std::string encode_sweep_config(const CStatePowerPoint& pt);
CStatePowerPoint decode_sweep_config(const std::string& config);

// ---------------------------------------------------------------------------
// Wake-up latency from a given idle state.  The callee thread idles with its
// states capped to `cstate` and its core set to freq_hz; the caller (same
// CCX, or the other package when remote) wakes it n times.  Samples with a
// non-monotone clock reading are re-drawn, never recorded.

struct WakeupParams {
  int n = 200;
  int cstate = 1;
  double freq_hz = 0;  // 0: fastest available
  bool remote = false;
  int callee_cpu = 2;
  int caller_cpu = -1;  // -1: same-CCX neighbour, or other package when remote
};

struct WakeupResult {
  WakeupParams params;
  std::vector<WakeupSample> samples;
  int resampled = 0;
};

WakeupResult run_cstate_latency(const Context& ctx, const WakeupParams& p);

// ---------------------------------------------------------------------------
// Parked-sibling power anomaly: idle power is averaged with one core's
// sibling thread offline and again after re-onlining it.  On machines with
// the anomaly the offline phase sits a full core-wake step above baseline.

struct OfflineAnomalyParams {
  int core = 0;
  double hold_s = 10;
  double capture_rate_hz = 20;
  double step_threshold_w = 40;  // offline-minus-baseline power that flags it
};

struct OfflinePhase {
  std::string phase;  // "baseline", "sibling_offline", "reonlined"
  double mean_w = 0;
  int sample_count = 0;
};

struct OfflineAnomalyResult {
  OfflineAnomalyParams params;
  std::vector<OfflinePhase> phases;
  std::vector<ScheduleEntry> schedule;
  bool measured = false;
  bool anomaly_detected = false;  // meaningful only when measured
};

OfflineAnomalyResult run_offline_anomaly(const Context& ctx, const OfflineAnomalyParams& p);

// ---------------------------------------------------------------------------
// Energy-counter fidelity matrix: every (workload, placement, frequency)
// cell holds for hold_s while the package/core energy counters and the
// reference (full-system) power are recorded.

struct Placement {
  std::string name;
  std::vector<int> cpus;
};

struct RaplAccuracyParams {
  std::vector<WorkloadClass> workloads;  // empty: the standard ten-class set
  std::vector<Placement> placements;     // empty: core0 / ccx0 / all cores
  std::vector<double> freqs_hz;          // empty: all available
  double hold_s = 10;
  double capture_rate_hz = 20;
};

struct RaplConfigRecord {
  std::string workload;
  std::string placement;
  double freq_hz = 0;
  int n_cpus = 0;
  double sys_w = 0;
  bool sys_measured = false;
  double rapl_pkg_w = 0;   // summed over packages
  double rapl_core_w = 0;  // summed over cores
};

struct RaplAccuracyResult {
  RaplAccuracyParams params;
  std::vector<RaplConfigRecord> records;
  std::vector<ScheduleEntry> schedule;
};

RaplAccuracyResult run_rapl_accuracy(const Context& ctx, const RaplAccuracyParams& p);

// The ten-class default workload set for the fidelity matrix.
std::vector<WorkloadClass> default_rapl_workloads();

// ---------------------------------------------------------------------------
// Operand-data dependence of the energy counters: every hardware thread runs
// the same wide-register instruction in blocks; each block draws its operand
// Hamming-weight fraction from {0, 0.5, 1}.  Energy counters are read only
// between blocks.

struct RaplDataParams {
  WorkloadClass instruction = WorkloadClass::wide_xor;
  int n_blocks = 3000;
  double block_s = 5.0;
  double capture_rate_hz = 20;
};

struct RaplDataResult {
  RaplDataParams params;
  std::vector<BlockRecord> blocks;
};

RaplDataResult run_rapl_data(const Context& ctx, const RaplDataParams& p);

}  // namespace pmchar::probes
