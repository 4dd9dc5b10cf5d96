// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "pmchar/platform.hpp"
#include "pmchar/topology.hpp"

namespace pmchar {

// Filesystem roots, injectable so control paths are testable against a fake
// tree.  msr_pattern must contain one %d for the cpu id.  The register driver
// decodes the file position as a register index and returns that register's 8
// bytes; a regular file cannot do that for adjacent indices, so fakes set
// msr_stride = 8 and store register r at byte offset 8r (sparse).
struct HwPaths {
  std::string cpu_root = "/sys/devices/system/cpu";
  std::string msr_pattern = "/dev/cpu/%d/msr";
  int msr_stride = 1;
};

// Linux backend: cpufreq userspace governor for frequency writes, cpuidle
// disable files for C-states, online files for hotplug, and privileged
// per-cpu register files for counters and energy.
//
// Counter mapping: aperf counts actual cycles in C0 only, so it doubles as
// the cycles reading; mperf ticks at the nominal frequency while in C0.
class HwCpu final : public Platform {
 public:
  explicit HwCpu(HwPaths paths = {});
  ~HwCpu() override;

  const Topology& topology() const override { return topo_; }
  std::vector<double> available_frequencies() const override { return freqs_hz_; }
  double nominal_hz() const override { return nominal_hz_; }
  bool is_simulated() const override { return false; }

  int64_t now_ns() override;
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

  // Fails with an actionable message unless every cpu runs the userspace
  // governor and the register files are readable.  Called once before a run
  // mutates anything.
  void require_control_ready();

  // Restores a sane default state without a snapshot: all threads online,
  // all idle states enabled, the named governor everywhere.
  void restore_defaults(const std::string& governor = "schedutil");

  int energy_status_units() const { return esu_; }

 private:
  std::string cpu_path(int cpu, const char* leaf) const;
  std::string read_ctl(const std::string& path) const;
  void write_ctl(const std::string& path, const std::string& value);
  uint64_t read_msr(int cpu, uint32_t reg);
  int first_online_cpu() const;

  HwPaths paths_;
  Topology topo_;
  std::vector<double> freqs_hz_;
  double nominal_hz_ = 0;
  int esu_ = -1;  // lazily read from the unit register
  std::map<int, int> msr_fds_;
  std::mutex energy_mu_;
};

}  // namespace pmchar
