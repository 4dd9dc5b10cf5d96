// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pmchar/platform.hpp"

namespace pmchar {

// Per-workload-class power/behavior coefficients.  System-power terms are
// specified at the nominal frequency and scale with effective frequency;
// dram_w is flat (memory-bus power does not track core clocks here).
struct WorkloadCoeff {
  double sys_w_per_core = 0;       // system W per active core beyond the first
  double sys_w_per_sibling = 0;    // system W per extra active sibling thread
  double rapl_core_w_per_core = 0; // core-domain W reported per active core
  double dram_w = 0;               // flat system W while the class runs anywhere
  double data_delta = 0;           // system-power fraction per unit operand weight
  double rapl_data_delta = 0;      // same, for the core energy domain
  double ipc = 0;                  // instructions per core-cycle, for the counters
};

constexpr int kWorkloadClassCount = 15;

// Behavioral model of the characterized machine; every default is either a
// published measurement of the reference system or a placeholder marked so
// in the comments.  Loadable from JSON with per-field overrides.
struct SimModel {
  int version = 1;

  // Topology (dual-socket, 4 chiplets of 2 four-core complexes, SMT2).
  int packages = 2;
  int ccds_per_package = 4;
  int ccxs_per_ccd = 2;
  int cores_per_ccx = 4;
  int threads_per_core = 2;

  // Frequency control.
  std::vector<double> frequencies_hz = {1.5e9, 2.2e9, 2.5e9};
  double nominal_hz = 2.5e9;
  int64_t update_interval_ns = 1000000;    // firmware applies requests each 1 ms slot
  int64_t transition_down_ns = 390000;
  int64_t transition_up_ns = 360000;
  int64_t revert_window_ns = 5000000;      // voltage still settling: revert is cheap
  int64_t revert_latency_ns = 1000;

  // Effective frequency when all cores of a complex are busy:
  // coupling_hz[own set][max set among the other cores], indexed into
  // frequencies_hz.  Nine measured cells.
  std::vector<std::vector<double>> coupling_hz = {
      {1.499e9, 1.466e9, 1.428e9},
      {2.200e9, 2.199e9, 2.000e9},
      {2.497e9, 2.499e9, 2.499e9},
  };

  // Cache/memory latencies.  L3 is keyed by the max set frequency in the
  // complex; values are placeholders chosen monotone (only the trend is
  // published), L1/L2 likewise.
  std::vector<double> l3_latency_ns = {19.0, 15.5, 14.2};
  double l1_latency_ns = 0.9;
  double l2_latency_ns = 3.5;
  int64_t l1_size = 32 * 1024;
  int64_t l2_size = 512 * 1024;
  int64_t l3_size = 16 * 1024 * 1024;

  // Memory behavior per BIOS configuration label (uncontrollable from
  // software; recorded as operator metadata).  Latencies for "auto"/"P0"
  // are published; P1/P2 and all bandwidth scales are placeholders.
  struct MemLabel {
    std::string label;
    double latency_ns;
    double bw_scale;
  };
  std::vector<MemLabel> mem_labels = {
      {"auto", 92.0, 1.0}, {"P0", 96.0, 1.0}, {"P1", 95.0, 0.93}, {"P2", 94.0, 0.88}};
  double max_bw_per_socket = 120e9;     // placeholder absolute scale, B/s
  double single_thread_bw_frac = 0.55;  // one thread cannot saturate the bus
  double bw_droop_per_core = 0.01;      // mild contention past saturation

  // Idle power ladder.
  double base_all_c2_w = 99.1;
  double first_c1_delta_w = 81.2;     // first core leaving the deepest state
  double per_extra_c1_core_w = 0.09;
  double active_flat_w = 0.1;         // first active core over the C1 level
  double first_active_total_w = 180.4;  // cross-check: base + first_c1 + active_flat

  // Wakeup latencies.
  double c1_latency_fast_us = 1.0;    // at and above c1_fast_threshold_hz
  double c1_latency_slow_us = 1.5;
  double c1_fast_threshold_hz = 2.2e9;
  double c2_latency_lo_us = 20.0;
  double c2_latency_hi_us = 25.0;
  double remote_overhead_us = 1.0;
  double wake_jitter_sigma_us = 0.03;

  // Saturation throttling (dense fused-multiply-add on every core).
  double throttle_hz_1t = 2.1e9;
  double throttle_hz_2t = 2.0e9;
  double fma_ipc_1t = 3.23;
  double fma_ipc_2t = 3.56;
  double fma_sys_w_1t = 489.0;
  double fma_sys_w_2t = 509.0;
  double freq_jitter_sigma_1t_hz = 0.82e6;
  double freq_jitter_sigma_2t_hz = 3.04e6;

  // Energy reporting.
  double rapl_package_cap_w = 170.0;  // per socket
  double rapl_uncore_w = 20.0;        // package = core sum + this, per socket
  int rapl_esu = 16;                  // energy unit 2^-16 J
  double rapl_read_noise_sigma_j = 0.02;
  double power_noise_sigma_w = 0.5;   // per system-power sample

  bool offline_anomaly = true;  // parked threads hold their core at the C1 level

  std::array<WorkloadCoeff, kWorkloadClassCount> workload{};

  SimModel();

  const WorkloadCoeff& coeff(WorkloadClass w) const {
    return workload[static_cast<int>(w)];
  }
  WorkloadCoeff& coeff(WorkloadClass w) { return workload[static_cast<int>(w)]; }

  int n_cores() const { return packages * ccds_per_package * ccxs_per_ccd * cores_per_ccx; }
  int freq_index(double hz) const;  // -1 when not an available frequency

  // Fills derived coefficients (the saturation workload's system-power terms
  // are back-computed from the two published full-load anchors) and checks
  // all invariants; throws naming the offending field.
  void finalize();
};

SimModel load_sim_model(const std::string& path);
SimModel default_sim_model();

}  // namespace pmchar
