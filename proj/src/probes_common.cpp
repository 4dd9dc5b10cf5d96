// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <string>
#include <vector>

#include "pmchar/csv.hpp"
#include "pmchar/probes.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/util.hpp"
#include "probe_util.hpp"

namespace pmchar::probes {

std::string num(double v) { return strf("%.10g", v); }

csv::Table new_report(const Context& ctx, const std::string& probe) {
  csv::Table t;
  t.set_meta("tool", "pmchar");
  t.set_meta("version", kVersion);
  t.set_meta("probe", probe);
  t.set_meta("backend", ctx.platform.is_simulated() ? "simulated" : "hardware");
  t.set_meta("seed", strf("%llu", static_cast<unsigned long long>(ctx.seed)));
  t.set_meta("topology", strf("%016llx",
                              static_cast<unsigned long long>(ctx.platform.topology().layout_hash())));
  if (SimCpu* s = ctx.platform.sim())
    t.set_meta("model_version", strf("%d", s->model().version));
  return t;
}

void write_report(const Context& ctx, const csv::Table& t, const std::string& name) {
  if (ctx.out_dir.empty()) return;
  std::filesystem::create_directories(ctx.out_dir);
  csv::write_table(ctx.out_dir + "/" + name, t);
}

void write_schedule(const Context& ctx, const std::vector<ScheduleEntry>& schedule,
                    const std::string& name) {
  if (ctx.out_dir.empty()) return;
  csv::Table t;
  t.columns = {"config", "t_start_ns", "t_end_ns"};
  for (const ScheduleEntry& e : schedule)
    t.rows.push_back({e.config, strf("%lld", static_cast<long long>(e.t_start_ns)),
                      strf("%lld", static_cast<long long>(e.t_end_ns))});
  std::filesystem::create_directories(ctx.out_dir);
  csv::write_table(ctx.out_dir + "/" + name, t);
}

void write_trace(const Context& ctx, const PowerTrace& trace, const std::string& name) {
  if (ctx.out_dir.empty() || trace.samples.empty()) return;
  std::filesystem::create_directories(ctx.out_dir);
  save_power_trace(ctx.out_dir + "/" + name, trace);
}

void settle(Platform& p, double ms) { p.sleep_ns(static_cast<int64_t>(ms * 1e6)); }

void set_core_hz(Platform& p, int core, double hz) {
  for (int cpu : p.topology().core_cpus(core))
    if (p.is_online(cpu)) p.set_frequency({cpu, hz});
}

void set_all_cores_hz(Platform& p, double hz) {
  for (int core = 0; core < p.topology().n_cores(); core++) set_core_hz(p, core, hz);
}

std::vector<int> ccx_cores(const Topology& topo, int ccx) {
  std::vector<int> cores;
  for (int cpu : topo.ccx_cpus(ccx)) {
    int core = topo.core_of(cpu);
    if (cores.empty() || cores.back() != core) cores.push_back(core);
  }
  return cores;
}

SysPowerCapture::SysPowerCapture(Platform& p, double rate_hz) : p_(p) {
  if (SimCpu* s = p.sim()) {
    s->begin_capture(rate_hz, s->model().power_noise_sigma_w);
    active_ = true;
  }
}

PowerTrace SysPowerCapture::finish() {
  if (!active_) return PowerTrace{};
  active_ = false;
  return p_.sim()->end_capture();
}

std::string encode_sweep_config(const CStatePowerPoint& pt) {
  return strf("%s:%d:%d:%d", pt.sweep.c_str(), pt.order_index, pt.n_c1, pt.n_active);
}

CStatePowerPoint decode_sweep_config(const std::string& config) {
  CStatePowerPoint pt;
  size_t a = config.find(':');
  if (a == std::string::npos) fail(strf("malformed sweep config '%s'", config.c_str()));
  pt.sweep = config.substr(0, a);
  int n = std::sscanf(config.c_str() + a, ":%d:%d:%d", &pt.order_index, &pt.n_c1, &pt.n_active);
  if (n != 3 || pt.sweep.empty()) fail(strf("malformed sweep config '%s'", config.c_str()));
  return pt;
}

std::vector<WorkloadClass> default_rapl_workloads() {
  return {WorkloadClass::idle,        WorkloadClass::pause_loop, WorkloadClass::busy_loop,
          WorkloadClass::scalar_add,  WorkloadClass::wide_mul,   WorkloadClass::wide_fma,
          WorkloadClass::sqrt_chain,  WorkloadClass::memory_read, WorkloadClass::memory_write,
          WorkloadClass::triad};
}

}  // namespace pmchar::probes
