// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pmchar {

// Record types produced by the probes and consumed by the analysis layer.

enum class DiscardReason { validation_failed, follows_failure };

const char* to_string(DiscardReason r);

struct TransitionSample {
  double from_hz = 0;
  double to_hz = 0;
  double delay_us = 0;                      // >= 0
  bool valid = true;
  std::optional<DiscardReason> discard_reason;  // set iff !valid
};

// One merged configuration window of an idle-power sweep.
struct CStatePowerPoint {
  std::string sweep;     // "baseline", "c1", "active"
  int order_index = 0;   // position in the sweep schedule
  int n_c1 = 0;          // hardware threads whose idle floor is C1
  int n_active = 0;      // hardware threads running the pause workload
  double mean_w = 0;
  int sample_count = 0;
  bool flagged = false;  // insufficient trace samples in the window
};

struct WakeupSample {
  int cstate = 0;        // 1 or 2
  double freq_hz = 0;    // set frequency of the callee core
  bool remote = false;   // caller on another package
  double latency_us = 0; // > 0
};

// One instruction block of the data-dependence probe.
struct BlockRecord {
  std::string instruction;  // "wide_xor" or "shift_right"
  double weight = 0;        // operand Hamming weight: 0, 0.5 or 1
  int64_t duration_ns = 0;
  double sys_power_w = 0;   // reference (full-system) power over the block
  double pkg_energy_j = 0;  // summed over packages, wrap-corrected
  double core_energy_j = 0; // summed over cores
  double pkg_power_w() const { return pkg_energy_j / (duration_ns * 1e-9); }
  double core_power_w() const { return core_energy_j / (duration_ns * 1e-9); }
};

}  // namespace pmchar
