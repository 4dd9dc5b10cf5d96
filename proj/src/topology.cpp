// SPDX-License-Identifier: Apache-2.0
#include "pmchar/topology.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "pmchar/util.hpp"

namespace pmchar {

Topology::Topology(std::vector<Package> packages, int cores_per_ccx, int threads_per_core)
    : packages_(std::move(packages)),
      cores_per_ccx_(cores_per_ccx),
      threads_per_core_(threads_per_core) {
  index();
}

Topology Topology::synthetic(int packages, int ccds_per_package, int ccxs_per_ccd,
                             int cores_per_ccx, int threads_per_core) {
  if (packages < 1 || ccds_per_package < 1 || ccxs_per_ccd < 1 || cores_per_ccx < 1 ||
      threads_per_core < 1)
    fail("synthetic topology: all level counts must be >= 1");
  int n_cores = packages * ccds_per_package * ccxs_per_ccd * cores_per_ccx;
  std::vector<Package> pkgs;
  int core_seq = 0, ccx_seq = 0, ccd_seq = 0;
  for (int p = 0; p < packages; ++p) {
    Package pkg;
    pkg.id = p;
    for (int d = 0; d < ccds_per_package; ++d) {
      Ccd ccd;
      ccd.id = ccd_seq++;
      for (int x = 0; x < ccxs_per_ccd; ++x) {
        Ccx ccx;
        ccx.id = ccx_seq++;
        for (int c = 0; c < cores_per_ccx; ++c) {
          Core core;
          core.id = core_seq++;
          for (int t = 0; t < threads_per_core; ++t)
            core.cpus.push_back(t * n_cores + core.id);
          ccx.cores.push_back(std::move(core));
        }
        ccd.ccxs.push_back(std::move(ccx));
      }
      pkg.ccds.push_back(std::move(ccd));
    }
    pkgs.push_back(std::move(pkg));
  }
  return Topology(std::move(pkgs), cores_per_ccx, threads_per_core);
}

void Topology::index() {
  n_cores_ = 0;
  n_ccx_ = 0;
  std::set<int> seen_cpus;
  int max_cpu = -1;
  for (const auto& pkg : packages_)
    for (const auto& ccd : pkg.ccds)
      for (const auto& ccx : ccd.ccxs) {
        if (static_cast<int>(ccx.cores.size()) != cores_per_ccx_)
          fail(strf("heterogeneous topology: ccx %d has %zu cores, expected %d", ccx.id,
                    ccx.cores.size(), cores_per_ccx_));
        ++n_ccx_;
        for (const auto& core : ccx.cores) {
          if (static_cast<int>(core.cpus.size()) != threads_per_core_)
            fail(strf("heterogeneous topology: core %d has %zu threads, expected %d", core.id,
                      core.cpus.size(), threads_per_core_));
          ++n_cores_;
          for (int cpu : core.cpus) {
            if (!seen_cpus.insert(cpu).second)
              fail(strf("topology: duplicate OS cpu id %d", cpu));
            max_cpu = std::max(max_cpu, cpu);
          }
        }
      }
  if (seen_cpus.empty()) fail("topology: no cpus");
  if (max_cpu + 1 != static_cast<int>(seen_cpus.size()))
    fail(strf("topology: cpu ids not contiguous (max %d, count %zu)", max_cpu, seen_cpus.size()));

  int n = max_cpu + 1;
  cpu_to_core_.assign(n, -1);
  cpu_to_ccx_.assign(n, -1);
  cpu_to_package_.assign(n, -1);
  core_to_cpus_.assign(n_cores_, {});
  ccx_to_cores_.assign(n_ccx_, {});
  package_to_cpus_.assign(packages_.size(), {});

  // Reassign dense ids in traversal order at every level.
  int pkg_seq = 0, ccd_seq = 0, ccx_seq = 0, core_seq = 0;
  for (auto& pkg : packages_) {
    pkg.id = pkg_seq++;
    for (auto& ccd : pkg.ccds) {
      ccd.id = ccd_seq++;
      for (auto& ccx : ccd.ccxs) {
        ccx.id = ccx_seq++;
        for (auto& core : ccx.cores) {
          core.id = core_seq++;
          ccx_to_cores_[ccx.id].push_back(core.id);
          for (int cpu : core.cpus) {
            cpu_to_core_[cpu] = core.id;
            cpu_to_ccx_[cpu] = ccx.id;
            cpu_to_package_[cpu] = pkg.id;
            core_to_cpus_[core.id].push_back(cpu);
            package_to_cpus_[pkg.id].push_back(cpu);
          }
        }
      }
    }
  }
  for (auto& v : package_to_cpus_) std::sort(v.begin(), v.end());
}

void Topology::require_cpu(int cpu) const {
  if (!has_cpu(cpu)) fail(strf("unknown cpu id %d (topology has %d cpus)", cpu, n_cpus()));
}

int Topology::core_of(int cpu) const {
  require_cpu(cpu);
  return cpu_to_core_[cpu];
}

int Topology::ccx_of(int cpu) const {
  require_cpu(cpu);
  return cpu_to_ccx_[cpu];
}

int Topology::package_of(int cpu) const {
  require_cpu(cpu);
  return cpu_to_package_[cpu];
}

std::vector<int> Topology::all_cpus() const {
  std::vector<int> out(n_cpus());
  for (int i = 0; i < n_cpus(); ++i) out[i] = i;
  return out;
}

std::vector<int> Topology::core_cpus(int core) const {
  if (core < 0 || core >= n_cores_) fail(strf("unknown core id %d", core));
  return core_to_cpus_[core];
}

std::vector<int> Topology::ccx_cpus(int ccx) const {
  if (ccx < 0 || ccx >= n_ccx_) fail(strf("unknown ccx id %d", ccx));
  std::vector<int> out;
  for (int core : ccx_to_cores_[ccx])
    for (int cpu : core_to_cpus_[core]) out.push_back(cpu);
  return out;
}

std::vector<int> Topology::package_cpus(int package) const {
  if (package < 0 || package >= n_packages()) fail(strf("unknown package id %d", package));
  return package_to_cpus_[package];
}

std::vector<int> Topology::siblings(int cpu) const {
  std::vector<int> out;
  for (int c : core_cpus(core_of(cpu)))
    if (c != cpu) out.push_back(c);
  return out;
}

std::vector<int> Topology::other_ccx_cores(int cpu) const {
  int own = core_of(cpu);
  std::vector<int> out;
  for (int core : ccx_to_cores_[ccx_of(cpu)])
    if (core != own) out.push_back(core);
  return out;
}

std::string Topology::describe() const {
  std::string s;
  for (const auto& pkg : packages_) {
    s += strf("pkg%d:", pkg.id);
    for (const auto& ccd : pkg.ccds) {
      s += strf("ccd%d(", ccd.id);
      for (const auto& ccx : ccd.ccxs) {
        s += strf("ccx%d[", ccx.id);
        for (const auto& core : ccx.cores) {
          s += strf("c%d{", core.id);
          for (int cpu : core.cpus) s += strf("%d,", cpu);
          s += "}";
        }
        s += "]";
      }
      s += ")";
    }
    s += ";";
  }
  return s;
}

uint64_t Topology::layout_hash() const { return fnv1a(describe()); }

namespace {

std::string read_file_line(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("topology discovery: cannot read " + path);
  std::string line;
  std::getline(f, line);
  return trim(line);
}

int read_file_int(const std::string& path) {
  try {
    return std::stoi(read_file_line(path));
  } catch (const std::invalid_argument&) {
    fail("topology discovery: non-numeric content in " + path);
  }
}

}  // namespace

Topology discover_sysfs(const std::string& cpu_root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(cpu_root)) fail("topology discovery: no such directory: " + cpu_root);

  std::vector<int> cpus;
  if (fs::exists(cpu_root + "/present")) {
    cpus = parse_cpu_list(read_file_line(cpu_root + "/present"));
  } else {
    for (int c = 0;; ++c) {
      if (!fs::is_directory(strf("%s/cpu%d", cpu_root.c_str(), c))) break;
      cpus.push_back(c);
    }
  }
  if (cpus.empty()) fail("topology discovery: no cpus found under " + cpu_root);

  struct CpuInfo {
    int cpu, pkg, core_key, die;
    std::string l3;
  };
  std::vector<CpuInfo> info;
  bool have_die = true;
  for (int c : cpus) {
    std::string base = strf("%s/cpu%d", cpu_root.c_str(), c);
    CpuInfo ci;
    ci.cpu = c;
    ci.pkg = read_file_int(base + "/topology/physical_package_id");
    ci.core_key = read_file_int(base + "/topology/core_id");
    std::string die_path = base + "/topology/die_id";
    if (have_die && fs::exists(die_path))
      ci.die = read_file_int(die_path);
    else {
      have_die = false;
      ci.die = -1;
    }
    ci.l3 = read_file_line(base + "/cache/index3/shared_cpu_list");
    info.push_back(ci);
  }

  // Group: core by (pkg, core_id); ccx by canonical L3 cpu set.
  std::map<std::pair<int, int>, std::vector<int>> cores;  // (pkg, core_key) -> cpus
  std::map<std::string, int> ccx_of_l3;                   // canonical l3 list -> ccx seq
  std::map<std::pair<int, int>, std::set<int>> ccx_members;  // (pkg, ccx seq) -> core keys? below
  for (const auto& ci : info) cores[{ci.pkg, ci.core_key}].push_back(ci.cpu);

  struct CoreRec {
    int pkg, die, ccx;
    std::vector<int> cpus;
  };
  std::vector<CoreRec> recs;
  int ccx_seq = 0;
  for (auto& [key, cpulist] : cores) {
    std::sort(cpulist.begin(), cpulist.end());
    const CpuInfo* first = nullptr;
    for (const auto& ci : info)
      if (ci.cpu == cpulist.front()) first = &ci;
    std::string l3_key = first->l3;
    auto it = ccx_of_l3.find(l3_key);
    if (it == ccx_of_l3.end()) it = ccx_of_l3.emplace(l3_key, ccx_seq++).first;
    recs.push_back({first->pkg, first->die, it->second, cpulist});
  }
  (void)ccx_members;

  // Assemble nested layout ordered by (pkg, ccx-first-appearance).
  std::map<int, std::map<int, std::vector<CoreRec*>>> by_pkg_ccx;
  for (auto& r : recs) by_pkg_ccx[r.pkg][r.ccx].push_back(&r);

  std::vector<Package> pkgs;
  for (auto& [pkg_id, ccxmap] : by_pkg_ccx) {
    Package pkg;
    pkg.id = pkg_id;
    // Build CCX list in order of smallest contained cpu.
    std::vector<std::pair<int, int>> order;  // (min cpu, ccx key)
    for (auto& [ccx_id, corelist] : ccxmap) {
      int mn = corelist.front()->cpus.front();
      for (auto* cr : corelist) mn = std::min(mn, cr->cpus.front());
      order.push_back({mn, ccx_id});
    }
    std::sort(order.begin(), order.end());

    // CCD grouping: by die_id when exposed, else two CCXs per CCD in order.
    std::map<int, Ccd> ccds;
    int seq = 0;
    for (auto& [mn, ccx_key] : order) {
      auto& corelist = ccxmap[ccx_key];
      std::sort(corelist.begin(), corelist.end(),
                [](const CoreRec* a, const CoreRec* b) { return a->cpus.front() < b->cpus.front(); });
      Ccx ccx;
      for (auto* cr : corelist) {
        Core core;
        core.cpus = cr->cpus;
        ccx.cores.push_back(core);
      }
      int ccd_key = corelist.front()->die >= 0 ? corelist.front()->die : seq / 2;
      ccds[ccd_key].ccxs.push_back(std::move(ccx));
      ++seq;
    }
    for (auto& [k, ccd] : ccds) pkg.ccds.push_back(std::move(ccd));
    pkgs.push_back(std::move(pkg));
  }

  int cores_per_ccx = static_cast<int>(pkgs.front().ccds.front().ccxs.front().cores.size());
  int threads_per_core =
      static_cast<int>(pkgs.front().ccds.front().ccxs.front().cores.front().cpus.size());
  return Topology(std::move(pkgs), cores_per_ccx, threads_per_core);
}

void CpuSet::validate(const Topology& t) const {
  std::set<int> seen;
  for (int c : ids) {
    t.require_cpu(c);
    if (!seen.insert(c).second) fail(strf("cpu set: duplicate cpu %d", c));
  }
}

}  // namespace pmchar
