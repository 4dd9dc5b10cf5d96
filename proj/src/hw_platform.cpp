// SPDX-License-Identifier: Apache-2.0
#include "pmchar/hw_platform.hpp"

#include <fcntl.h>
#include <pthread.h>
#include <sched.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pmchar/csv.hpp"
#include "pmchar/util.hpp"

namespace pmchar {

namespace {

// Model-specific register addresses (AMD family 17h).
constexpr uint32_t kMsrMperf = 0xe7;
constexpr uint32_t kMsrAperf = 0xe8;
constexpr uint32_t kMsrIrPerf = 0xc00000e9;
constexpr uint32_t kMsrRaplUnit = 0xc0010299;
constexpr uint32_t kMsrCoreEnergy = 0xc001029a;
constexpr uint32_t kMsrPkgEnergy = 0xc001029b;

std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

HwCpu::HwCpu(HwPaths paths) : paths_(std::move(paths)), topo_(discover_sysfs(paths_.cpu_root)) {
  // Available frequencies come from cpufreq (kHz, any order in the file).
  std::string leaf = cpu_path(first_online_cpu(), "cpufreq/scaling_available_frequencies");
  std::string line = read_ctl(leaf);
  for (const std::string& tok : split(line, ' ')) {
    if (trim(tok).empty()) continue;
    freqs_hz_.push_back(csv::to_double(tok, leaf) * 1000.0);
  }
  if (freqs_hz_.empty()) fail("no frequencies listed in " + leaf);
  std::sort(freqs_hz_.begin(), freqs_hz_.end());
  freqs_hz_.erase(std::unique(freqs_hz_.begin(), freqs_hz_.end()), freqs_hz_.end());
  nominal_hz_ = freqs_hz_.back();  // highest P-state is the mperf reference
}

HwCpu::~HwCpu() {
  for (auto& [cpu, fd] : msr_fds_)
    if (fd >= 0) ::close(fd);
}

std::string HwCpu::cpu_path(int cpu, const char* leaf) const {
  return strf("%s/cpu%d/%s", paths_.cpu_root.c_str(), cpu, leaf);
}

int HwCpu::first_online_cpu() const {
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++)
    if (is_online(cpu)) return cpu;
  fail("no online cpu found");
}

std::string HwCpu::read_ctl(const std::string& path) const {
  std::ifstream f(path);
  if (!f) fail("cannot read " + path + " (missing hardware support or permissions?)");
  std::string line;
  std::getline(f, line);
  return chomp(line);
}

void HwCpu::write_ctl(const std::string& path, const std::string& value) {
  std::ofstream f(path);
  if (!f) fail("cannot open " + path + " for writing (run with privileges?)");
  f << value;
  f.flush();
  if (!f) fail("write to " + path + " rejected (value '" + value + "')");
}

uint64_t HwCpu::read_msr(int cpu, uint32_t reg) {
  auto it = msr_fds_.find(cpu);
  if (it == msr_fds_.end()) {
    std::string p = strf(paths_.msr_pattern.c_str(), cpu);
    int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0)
      fail(strf("cannot open %s: %s (is the msr driver loaded and are you privileged?)",
                p.c_str(), std::strerror(errno)));
    it = msr_fds_.emplace(cpu, fd).first;
  }
  uint64_t v = 0;
  ssize_t n = ::pread(it->second, &v, sizeof v,
                      static_cast<off_t>(reg) * paths_.msr_stride);
  if (n != sizeof v)
    fail(strf("register 0x%x unreadable on cpu %d: %s", reg, cpu,
              n < 0 ? std::strerror(errno) : "short read"));
  return v;
}

int64_t HwCpu::now_ns() {
  timespec ts;
  clock_gettime(CLOCK_MONOTONIC_RAW, &ts);
  return static_cast<int64_t>(ts.tv_sec) * 1000000000 + ts.tv_nsec;
}

void HwCpu::sleep_ns(int64_t ns) {
  if (ns < 0) fail("sleep_ns: negative duration");
  timespec ts{static_cast<time_t>(ns / 1000000000), static_cast<long>(ns % 1000000000)};
  while (nanosleep(&ts, &ts) != 0 && errno == EINTR) {
  }
}

void HwCpu::set_frequency(const FreqSetting& s) {
  topo_.require_cpu(s.cpu);
  require_valid_frequency(s.hz);
  long khz = std::lround(s.hz / 1000.0);
  write_ctl(cpu_path(s.cpu, "cpufreq/scaling_setspeed"), strf("%ld", khz));
}

CounterSnapshot HwCpu::read_counters(int cpu) {
  topo_.require_cpu(cpu);
  if (!is_online(cpu)) fail(strf("counters unavailable: cpu %d is offline", cpu));
  CounterSnapshot s;
  s.cpu = cpu;
  s.aperf = read_msr(cpu, kMsrAperf);
  s.mperf = read_msr(cpu, kMsrMperf);
  s.instr = read_msr(cpu, kMsrIrPerf);
  s.cycles = s.aperf;  // aperf counts actual C0 cycles
  s.timestamp_ns = now_ns();
  return s;
}

EnergyReading HwCpu::read_energy(Domain d, int locus) {
  std::lock_guard<std::mutex> lock(energy_mu_);
  int cpu;
  uint32_t reg;
  if (d == Domain::package) {
    if (locus < 0 || locus >= topo_.n_packages()) fail(strf("unknown package %d", locus));
    cpu = topo_.package_cpus(locus).front();
    reg = kMsrPkgEnergy;
  } else {
    topo_.require_cpu(locus);
    cpu = locus;
    reg = kMsrCoreEnergy;
  }
  if (esu_ < 0) esu_ = static_cast<int>((read_msr(cpu, kMsrRaplUnit) >> 8) & 0x1f);
  EnergyReading r;
  r.domain = d;
  r.locus = locus;
  r.raw = static_cast<uint32_t>(read_msr(cpu, reg) & 0xffffffffull);
  r.esu = esu_;
  r.joules = std::ldexp(static_cast<double>(r.raw), -esu_);
  r.timestamp_ns = now_ns();
  return r;
}

void HwCpu::set_cstate(const CStateControl& c) {
  topo_.require_cpu(c.cpu);
  if (c.state == 0) fail("idle state 0 (active) cannot be disabled");
  std::string p = cpu_path(c.cpu, strf("cpuidle/state%d/disable", c.state).c_str());
  if (!std::filesystem::exists(p)) fail("no such idle state: " + p);
  write_ctl(p, c.enabled ? "0" : "1");
}

void HwCpu::set_online(int cpu, bool online) {
  topo_.require_cpu(cpu);
  if (cpu == 0 && !online) fail("cpu 0 (boot cpu) cannot be taken offline");
  write_ctl(cpu_path(cpu, "online"), online ? "1" : "0");
}

bool HwCpu::is_online(int cpu) const {
  topo_.require_cpu(cpu);
  std::string p = cpu_path(cpu, "online");
  if (!std::filesystem::exists(p)) return true;  // cpu0 has no online file
  return read_ctl(p) == "1";
}

void HwCpu::pin_current_thread(int cpu) {
  topo_.require_cpu(cpu);
  if (!is_online(cpu)) fail(strf("cannot pin to offline cpu %d", cpu));
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  if (pthread_setaffinity_np(pthread_self(), sizeof set, &set) != 0)
    fail(strf("cannot pin thread to cpu %d", cpu));
}

ControlSnapshot HwCpu::snapshot_control_state() {
  ControlSnapshot s;
  s.governor = read_ctl(cpu_path(first_online_cpu(), "cpufreq/scaling_governor"));
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    bool on = is_online(cpu);
    s.online[cpu] = on;
    if (!on) continue;  // control files vanish with the cpu
    std::string cur = cpu_path(cpu, "cpufreq/scaling_cur_freq");
    if (std::filesystem::exists(cur)) s.set_hz[cpu] = csv::to_double(read_ctl(cur), cur) * 1000.0;
    for (int st = 1;; st++) {
      std::string p = cpu_path(cpu, strf("cpuidle/state%d/disable", st).c_str());
      if (!std::filesystem::exists(p)) break;
      s.cstate_enabled[{cpu, st}] = read_ctl(p) == "0";
    }
  }
  return s;
}

void HwCpu::restore_control_state(const ControlSnapshot& s) {
  // Online first so the other control files exist again.
  for (const auto& [cpu, on] : s.online)
    if (cpu != 0 && is_online(cpu) != on) set_online(cpu, on);
  for (const auto& [key, enabled] : s.cstate_enabled) {
    std::string p = cpu_path(key.first, strf("cpuidle/state%d/disable", key.second).c_str());
    if (std::filesystem::exists(p)) write_ctl(p, enabled ? "0" : "1");
  }
  for (const auto& [cpu, hz] : s.set_hz) {
    std::string p = cpu_path(cpu, "cpufreq/scaling_setspeed");
    if (std::filesystem::exists(p) &&
        read_ctl(cpu_path(cpu, "cpufreq/scaling_governor")) == "userspace")
      write_ctl(p, strf("%ld", std::lround(hz / 1000.0)));
  }
  if (!s.governor.empty())
    for (int cpu = 0; cpu < topo_.n_cpus(); cpu++)
      if (is_online(cpu)) write_ctl(cpu_path(cpu, "cpufreq/scaling_governor"), s.governor);
}

void HwCpu::require_control_ready() {
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    if (!is_online(cpu)) continue;
    std::string gov = read_ctl(cpu_path(cpu, "cpufreq/scaling_governor"));
    if (gov != "userspace")
      fail(strf("cpu %d runs governor '%s'; switch to 'userspace' first "
                "(echo userspace > %s)",
                cpu, gov.c_str(), cpu_path(cpu, "cpufreq/scaling_governor").c_str()));
  }
  read_msr(first_online_cpu(), kMsrAperf);  // fails with guidance if unreadable
}

void HwCpu::restore_defaults(const std::string& governor) {
  for (int cpu = 1; cpu < topo_.n_cpus(); cpu++)
    if (!is_online(cpu)) set_online(cpu, true);
  for (int cpu = 0; cpu < topo_.n_cpus(); cpu++) {
    for (int st = 1;; st++) {
      std::string p = cpu_path(cpu, strf("cpuidle/state%d/disable", st).c_str());
      if (!std::filesystem::exists(p)) break;
      write_ctl(p, "0");
    }
    std::string gp = cpu_path(cpu, "cpufreq/scaling_governor");
    if (std::filesystem::exists(gp)) write_ctl(gp, governor);
  }
}

}  // namespace pmchar
