// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmchar {

// CPU layout: package -> CCD -> CCX -> core -> hardware thread.  A CCX is the
// set of cores sharing one L3 slice; it is the domain that matters for
// frequency coupling and cache experiments.  Immutable once built; all
// mutable state (online, set frequency, ...) lives in the platform backends.

struct Core {
  int id = 0;                 // dense global core id
  std::vector<int> cpus;      // OS CPU ids of the hardware threads, thread 0 first
};

struct Ccx {
  int id = 0;                 // dense global ccx id
  std::vector<Core> cores;
};

struct Ccd {
  int id = 0;                 // dense global ccd id
  std::vector<Ccx> ccxs;
};

struct Package {
  int id = 0;                 // dense global package id
  std::vector<Ccd> ccds;
};

class Topology {
 public:
  Topology() = default;
  Topology(std::vector<Package> packages, int cores_per_ccx, int threads_per_core);

  // Uniform synthetic layout with Linux-style numbering: OS CPUs
  // 0..(n_cores-1) are thread 0 of each core in (package, ccd, ccx, core)
  // order; thread k of core c is CPU k*n_cores + c.
  static Topology synthetic(int packages, int ccds_per_package, int ccxs_per_ccd,
                            int cores_per_ccx, int threads_per_core);

  const std::vector<Package>& packages() const { return packages_; }
  int cores_per_ccx() const { return cores_per_ccx_; }
  int threads_per_core() const { return threads_per_core_; }

  int n_cpus() const { return static_cast<int>(cpu_to_core_.size()); }
  int n_cores() const { return n_cores_; }
  int n_ccx() const { return n_ccx_; }
  int n_packages() const { return static_cast<int>(packages_.size()); }

  bool has_cpu(int cpu) const { return cpu >= 0 && cpu < n_cpus(); }
  void require_cpu(int cpu) const;  // throws with the offending id

  int core_of(int cpu) const;
  int ccx_of(int cpu) const;
  int package_of(int cpu) const;

  std::vector<int> all_cpus() const;
  std::vector<int> core_cpus(int core) const;
  std::vector<int> ccx_cpus(int ccx) const;
  std::vector<int> package_cpus(int package) const;
  // Sibling threads of `cpu` (same core, excluding cpu itself).
  std::vector<int> siblings(int cpu) const;
  // Cores of cpu's CCX excluding cpu's own core.
  std::vector<int> other_ccx_cores(int cpu) const;

  // Stable hash of the full layout; recorded in every output header.
  uint64_t layout_hash() const;
  std::string describe() const;

 private:
  void index();   // builds lookup tables, enforces invariants

  std::vector<Package> packages_;
  int cores_per_ccx_ = 0;
  int threads_per_core_ = 0;
  int n_cores_ = 0;
  int n_ccx_ = 0;
  std::vector<int> cpu_to_core_;
  std::vector<int> cpu_to_ccx_;
  std::vector<int> cpu_to_package_;
  std::vector<std::vector<int>> core_to_cpus_;
  std::vector<std::vector<int>> ccx_to_cores_;
  std::vector<std::vector<int>> package_to_cpus_;
};

// Reads a Linux sysfs CPU tree (root like "/sys/devices/system/cpu").  CCXs
// are delineated by the L3 shared_cpu_list; CCDs come from die_id when the
// kernel exposes it, else CCXs are paired in order (two CCXs per CCD).
// Throws with the missing file's path on enumeration failure, and rejects
// heterogeneous layouts (unequal cores per CCX or threads per core).
Topology discover_sysfs(const std::string& cpu_root);

// An explicit, ordered set of OS CPU ids.
struct CpuSet {
  std::vector<int> ids;

  CpuSet() = default;
  CpuSet(std::initializer_list<int> l) : ids(l) {}
  explicit CpuSet(std::vector<int> v) : ids(std::move(v)) {}

  bool empty() const { return ids.empty(); }
  size_t size() const { return ids.size(); }
  // Throws if any id is unknown to `t` or duplicated.
  void validate(const Topology& t) const;
};

}  // namespace pmchar
