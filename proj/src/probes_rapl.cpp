// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "pmchar/kernels.hpp"
#include "pmchar/probes.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/stats.hpp"
#include "pmchar/util.hpp"
#include "probe_util.hpp"

namespace pmchar::probes {

namespace {

std::vector<EnergyReading> read_pkg_energy(Platform& p) {
  std::vector<EnergyReading> out;
  for (int pkg = 0; pkg < p.topology().n_packages(); pkg++)
    out.push_back(p.read_energy(Domain::package, pkg));
  return out;
}

std::vector<EnergyReading> read_core_energy(Platform& p) {
  std::vector<EnergyReading> out;
  for (int core = 0; core < p.topology().n_cores(); core++)
    out.push_back(p.read_energy(Domain::core, p.topology().core_cpus(core)[0]));
  return out;
}

double delta_sum_j(const std::vector<EnergyReading>& before,
                   const std::vector<EnergyReading>& after) {
  double j = 0;
  for (size_t i = 0; i < before.size(); i++) j += energy_delta_joules(before[i], after[i]);
  return j;
}

}  // namespace

RaplAccuracyResult run_rapl_accuracy(const Context& ctx, const RaplAccuracyParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.hold_s <= 2) fail("fidelity matrix: hold_s too short to average");

  std::vector<WorkloadClass> workloads =
      p.workloads.empty() ? default_rapl_workloads() : p.workloads;
  std::vector<double> freqs = p.freqs_hz.empty() ? pf.available_frequencies() : p.freqs_hz;
  for (double f : freqs) pf.require_valid_frequency(f);

  std::vector<Placement> placements = p.placements;
  if (placements.empty()) {
    Placement one{"core0", {topo.core_cpus(0)[0]}};
    Placement ccx{"ccx0", {}};
    for (int c : ccx_cores(topo, 0)) ccx.cpus.push_back(topo.core_cpus(c)[0]);
    Placement all{"all_cores", {}};
    for (int c = 0; c < topo.n_cores(); c++) all.cpus.push_back(topo.core_cpus(c)[0]);
    placements = {one, ccx, all};
  }
  for (const Placement& pl : placements) {
    if (pl.cpus.empty()) fail(strf("fidelity matrix: placement '%s' is empty", pl.name.c_str()));
    for (int cpu : pl.cpus) topo.require_cpu(cpu);
  }

  int64_t hold_ns = static_cast<int64_t>(p.hold_s * 1e9);
  RaplAccuracyResult r;
  r.params = p;
  SysPowerCapture capture(pf, p.capture_rate_hz);

  for (WorkloadClass wl : workloads) {
    for (const Placement& pl : placements) {
      for (double f : freqs) {
        set_all_cores_hz(pf, f);
        settle(pf);
        std::vector<ScopedWorkload> loads;
        if (wl != WorkloadClass::idle)
          for (int cpu : pl.cpus) loads.emplace_back(pf, cpu, wl);

        int64_t t0 = pf.now_ns();
        std::vector<EnergyReading> pkg0 = read_pkg_energy(pf);
        std::vector<EnergyReading> core0 = read_core_energy(pf);
        pf.sleep_ns(hold_ns);
        std::vector<EnergyReading> pkg1 = read_pkg_energy(pf);
        std::vector<EnergyReading> core1 = read_core_energy(pf);
        int64_t t1 = pf.now_ns();
        loads.clear();

        double dt = static_cast<double>(t1 - t0) * 1e-9;
        RaplConfigRecord rec;
        rec.workload = to_string(wl);
        rec.placement = pl.name;
        rec.freq_hz = f;
        rec.n_cpus = static_cast<int>(pl.cpus.size());
        rec.rapl_pkg_w = delta_sum_j(pkg0, pkg1) / dt;
        rec.rapl_core_w = delta_sum_j(core0, core1) / dt;
        r.records.push_back(rec);
        r.schedule.push_back(ScheduleEntry{
            strf("%s/%s/%lld", to_string(wl), pl.name.c_str(), llround(f / 1e6)), t0, t1});
      }
    }
  }

  PowerTrace trace = capture.finish();
  if (!trace.samples.empty()) {
    for (size_t i = 0; i < r.records.size(); i++) {
      const ScheduleEntry& e = r.schedule[i];
      // Trim like the merged sweeps do so set-up edges stay out of the mean.
      int64_t trim = std::min<int64_t>(kSec, (e.t_end_ns - e.t_start_ns) / 4);
      r.records[i].sys_w = mean_in_window(trace, e.t_start_ns + trim, e.t_end_ns - trim);
      r.records[i].sys_measured = true;
    }
  }

  csv::Table t = new_report(ctx, "rapl_accuracy");
  t.set_meta("hold_s", num(p.hold_s));
  t.columns = {"workload", "placement", "freq_hz",    "n_cpus",
               "sys_w",    "sys_measured", "rapl_pkg_w", "rapl_core_w"};
  for (const RaplConfigRecord& rec : r.records)
    t.rows.push_back({rec.workload, rec.placement, num(rec.freq_hz), strf("%d", rec.n_cpus),
                      rec.sys_measured ? num(rec.sys_w) : "", rec.sys_measured ? "1" : "0",
                      num(rec.rapl_pkg_w), num(rec.rapl_core_w)});
  write_report(ctx, t, "rapl_accuracy.csv");
  write_schedule(ctx, r.schedule, "rapl_accuracy_schedule.csv");
  write_trace(ctx, trace, "rapl_accuracy_trace.csv");
  return r;
}

RaplDataResult run_rapl_data(const Context& ctx, const RaplDataParams& p) {
  Platform& pf = ctx.platform;
  const Topology& topo = pf.topology();
  if (p.instruction == WorkloadClass::idle) fail("data sweep: instruction cannot be idle");
  if (p.n_blocks < 0) fail("data sweep: n_blocks must be >= 0");
  if (p.block_s <= 0) fail("data sweep: block_s must be > 0");

  set_all_cores_hz(pf, pf.nominal_hz());
  settle(pf);

  static const double kWeights[3] = {0.0, 0.5, 1.0};
  Rng rng(derive_seed(ctx.seed, "rapl_data"));
  int64_t block_ns = static_cast<int64_t>(p.block_s * 1e9);

  RaplDataResult r;
  r.params = p;
  SysPowerCapture capture(pf, p.capture_rate_hz);
  std::vector<std::pair<int64_t, int64_t>> windows;

  for (int b = 0; b < p.n_blocks; b++) {
    double weight = kWeights[rng.below(3)];
    // Counters are read strictly outside the loaded window.
    std::vector<EnergyReading> pkg0 = read_pkg_energy(pf);
    std::vector<EnergyReading> core0 = read_core_energy(pf);

    std::vector<ScopedWorkload> loads;
    loads.reserve(static_cast<size_t>(topo.n_cpus()));
    for (int cpu = 0; cpu < topo.n_cpus(); cpu++)
      if (pf.is_online(cpu)) loads.emplace_back(pf, cpu, p.instruction, weight);
    int64_t t0 = pf.now_ns();
    pf.sleep_ns(block_ns);
    int64_t t1 = pf.now_ns();
    loads.clear();

    std::vector<EnergyReading> pkg1 = read_pkg_energy(pf);
    std::vector<EnergyReading> core1 = read_core_energy(pf);

    BlockRecord rec;
    rec.instruction = to_string(p.instruction);
    rec.weight = weight;
    rec.duration_ns = t1 - t0;
    rec.pkg_energy_j = delta_sum_j(pkg0, pkg1);
    rec.core_energy_j = delta_sum_j(core0, core1);
    r.blocks.push_back(rec);
    windows.emplace_back(t0, t1);
  }

  PowerTrace trace = capture.finish();
  if (!trace.samples.empty())
    for (size_t i = 0; i < r.blocks.size(); i++)
      r.blocks[i].sys_power_w = mean_in_window(trace, windows[i].first, windows[i].second);

  if (r.blocks.size() > 1) {
    std::vector<double> durations;
    for (const BlockRecord& b : r.blocks) durations.push_back(static_cast<double>(b.duration_ns));
    stats::Summary s = stats::summarize(durations);
    double cov = s.mean > 0 ? s.sigma / s.mean : 0;
    if (cov >= 0.01)
      fail(strf("data sweep: block durations vary by %.2f%% (need < 1%%); timer instability "
                "invalidates the weight comparison",
                cov * 100.0));
  }

  csv::Table t = new_report(ctx, "rapl_data");
  t.set_meta("instruction", to_string(p.instruction));
  t.set_meta("n_blocks", strf("%d", p.n_blocks));
  t.set_meta("block_s", num(p.block_s));
  t.columns = {"index", "weight", "duration_ns", "sys_power_w", "pkg_energy_j", "core_energy_j"};
  for (size_t i = 0; i < r.blocks.size(); i++) {
    const BlockRecord& b = r.blocks[i];
    t.rows.push_back({strf("%zu", i), num(b.weight),
                      strf("%lld", static_cast<long long>(b.duration_ns)), num(b.sys_power_w),
                      num(b.pkg_energy_j), num(b.core_energy_j)});
  }
  write_report(ctx, t, strf("rapl_data_%s.csv", to_string(p.instruction)));
  write_trace(ctx, trace, strf("rapl_data_%s_trace.csv", to_string(p.instruction)));
  return r;
}

}  // namespace pmchar::probes
