// SPDX-License-Identifier: Apache-2.0
#include "pmchar/sim_model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "pmchar/util.hpp"

namespace pmchar {

using nlohmann::json;

SimModel::SimModel() {
  auto set = [&](WorkloadClass w, double q, double h, double c, double m, double ipc) {
    coeff(w) = WorkloadCoeff{q, h, c, m, 0, 0, ipc};
  };
  // q = system W per extra active core at nominal, h = per extra sibling
  // thread, c = core-domain W per active core, m = flat memory-bus W.
  set(WorkloadClass::idle, 0, 0, 0, 0, 0);
  set(WorkloadClass::pause_loop, 0.33, 0.05, 0.2, 0, 0.3);
  set(WorkloadClass::busy_loop, 1.0, 0.15, 0.8, 0, 1.0);
  set(WorkloadClass::scalar_add, 1.3, 0.2, 1.1, 0, 4.0);
  set(WorkloadClass::wide_mul, 2.6, 0.35, 2.2, 0, 2.5);
  set(WorkloadClass::wide_fma, 3.5, 0.45, 3.0, 0, 3.0);
  set(WorkloadClass::sqrt_chain, 1.8, 0.25, 1.5, 0, 0.25);
  set(WorkloadClass::memory_read, 1.1, 0.1, 0.9, 95.0, 0.8);
  set(WorkloadClass::memory_write, 1.0, 0.1, 0.85, 90.0, 0.7);
  set(WorkloadClass::triad, 1.2, 0.1, 1.0, 100.0, 0.9);
  set(WorkloadClass::fma_saturate, 0, 0, 7.0, 0, 0);  // q/h derived in finalize()
  set(WorkloadClass::wide_xor, 1.2, 0.3, 2.1, 0, 2.0);
  set(WorkloadClass::shift_right, 0.9, 0.2, 1.8, 0, 2.0);
  set(WorkloadClass::minimal_timed, 0.8, 0.12, 0.6, 0, 1.0);
  set(WorkloadClass::pointer_chase, 0.9, 0.12, 0.7, 0, 0.05);
  coeff(WorkloadClass::wide_xor).data_delta = 0.076;
  coeff(WorkloadClass::wide_xor).rapl_data_delta = 0.0008;
  coeff(WorkloadClass::shift_right).data_delta = 0.008;
  coeff(WorkloadClass::shift_right).rapl_data_delta = 0.0008;
}

int SimModel::freq_index(double hz) const {
  for (size_t i = 0; i < frequencies_hz.size(); i++)
    if (frequencies_hz[i] == hz) return static_cast<int>(i);
  return -1;
}

void SimModel::finalize() {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) fail(strf("model: %s must be > 0 (got %g)", name, v));
  };
  positive(base_all_c2_w, "base_all_c2_w");
  positive(first_c1_delta_w, "first_c1_delta_w");
  positive(per_extra_c1_core_w, "per_extra_c1_core_w");
  positive(active_flat_w, "active_flat_w");
  positive(nominal_hz, "nominal_hz");
  positive(rapl_package_cap_w, "rapl_package_cap_w");
  positive(rapl_uncore_w, "rapl_uncore_w");
  positive(fma_sys_w_1t, "fma_sys_w_1t");
  positive(fma_sys_w_2t, "fma_sys_w_2t");
  if (packages < 1 || ccds_per_package < 1 || ccxs_per_ccd < 1 || cores_per_ccx < 1 ||
      threads_per_core < 1)
    fail("model: topology counts must be ≥ 1");
  if (update_interval_ns <= transition_down_ns || transition_down_ns < 0)
    fail(strf("model: need update_interval (%lld ns) > transition_down (%lld ns) >= 0",
              static_cast<long long>(update_interval_ns),
              static_cast<long long>(transition_down_ns)));
  if (transition_up_ns < 0 || revert_window_ns <= 0 || revert_latency_ns <= 0)
    fail("model: transition/revert times must be positive");
  if (frequencies_hz.empty()) fail("model: no frequencies defined");
  for (size_t i = 1; i < frequencies_hz.size(); i++)
    if (frequencies_hz[i] <= frequencies_hz[i - 1])
      fail("model: frequencies_hz must be strictly ascending");
  size_t nf = frequencies_hz.size();
  if (coupling_hz.size() != nf) fail("model: coupling_hz needs one row per frequency");
  for (const auto& row : coupling_hz)
    if (row.size() != nf) fail("model: coupling_hz rows need one column per frequency");
  if (l3_latency_ns.size() != nf) fail("model: l3_latency_ns needs one entry per frequency");
  for (size_t i = 1; i < nf; i++)
    if (l3_latency_ns[i] > l3_latency_ns[i - 1])
      fail("model: l3_latency_ns must be non-increasing in frequency");
  if (c2_latency_lo_us >= c2_latency_hi_us) fail("model: c2 latency range is empty");
  if (mem_labels.empty()) fail("model: mem_labels must not be empty");

  double first_active = base_all_c2_w + first_c1_delta_w + active_flat_w;
  if (std::fabs(first_active - first_active_total_w) > 0.05)
    fail(strf("model: base+first_c1+active_flat = %.2f W disagrees with first_active_total_w "
              "= %.2f W",
              first_active, first_active_total_w));

  // Back out the saturation workload's per-core/per-sibling system power
  // from the two full-load anchors (every core busy; then every thread).
  // With all cores up the C1 ladder term is present in both anchors.
  int extra_cores = n_cores() - 1;
  int sibling_threads = n_cores() * (threads_per_core - 1);
  if (extra_cores > 0) {
    double all_up = first_active + per_extra_c1_core_w * extra_cores;
    double s1 = throttle_hz_1t / nominal_hz;
    double s2 = throttle_hz_2t / nominal_hz;
    double q = (fma_sys_w_1t - all_up) / (extra_cores * s1);
    coeff(WorkloadClass::fma_saturate).sys_w_per_core = q;
    if (sibling_threads > 0)
      coeff(WorkloadClass::fma_saturate).sys_w_per_sibling =
          (fma_sys_w_2t - all_up - extra_cores * q * s2) / (sibling_threads * s2);
    coeff(WorkloadClass::fma_saturate).ipc = fma_ipc_1t;
  }
  for (int i = 0; i < kWorkloadClassCount; i++) {
    const WorkloadCoeff& c = workload[i];
    if (c.sys_w_per_core < 0 || c.sys_w_per_sibling < 0 || c.rapl_core_w_per_core < 0 ||
        c.dram_w < 0)
      fail(strf("model: workload '%s' has a negative power coefficient",
                to_string(static_cast<WorkloadClass>(i))));
  }
}

namespace {

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void get_ns_from_us(const json& j, const char* key, int64_t& out) {
  if (auto it = j.find(key); it != j.end()) out = static_cast<int64_t>(it->get<double>() * 1000.0);
}

}  // namespace

SimModel default_sim_model() {
  SimModel m;
  m.finalize();
  return m;
}

SimModel load_sim_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(strf("cannot open model file %s", path.c_str()));
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    fail(strf("%s: %s", path.c_str(), e.what()));
  }
  SimModel m;
  get(j, "version", m.version);
  get(j, "packages", m.packages);
  get(j, "ccds_per_package", m.ccds_per_package);
  get(j, "ccxs_per_ccd", m.ccxs_per_ccd);
  get(j, "cores_per_ccx", m.cores_per_ccx);
  get(j, "threads_per_core", m.threads_per_core);
  get(j, "frequencies_hz", m.frequencies_hz);
  get(j, "nominal_hz", m.nominal_hz);
  get_ns_from_us(j, "update_interval_us", m.update_interval_ns);
  get_ns_from_us(j, "transition_down_us", m.transition_down_ns);
  get_ns_from_us(j, "transition_up_us", m.transition_up_ns);
  get_ns_from_us(j, "revert_window_us", m.revert_window_ns);
  get_ns_from_us(j, "revert_latency_us", m.revert_latency_ns);
  get(j, "coupling_hz", m.coupling_hz);
  get(j, "l3_latency_ns", m.l3_latency_ns);
  get(j, "l1_latency_ns", m.l1_latency_ns);
  get(j, "l2_latency_ns", m.l2_latency_ns);
  get(j, "l1_size", m.l1_size);
  get(j, "l2_size", m.l2_size);
  get(j, "l3_size", m.l3_size);
  if (auto it = j.find("mem_labels"); it != j.end()) {
    m.mem_labels.clear();
    for (const json& e : *it)
      m.mem_labels.push_back({e.at("label").get<std::string>(), e.at("latency_ns").get<double>(),
                              e.at("bw_scale").get<double>()});
  }
  get(j, "max_bw_per_socket", m.max_bw_per_socket);
  get(j, "single_thread_bw_frac", m.single_thread_bw_frac);
  get(j, "bw_droop_per_core", m.bw_droop_per_core);
  get(j, "base_all_c2_w", m.base_all_c2_w);
  get(j, "first_c1_delta_w", m.first_c1_delta_w);
  get(j, "per_extra_c1_core_w", m.per_extra_c1_core_w);
  get(j, "active_flat_w", m.active_flat_w);
  get(j, "first_active_total_w", m.first_active_total_w);
  get(j, "c1_latency_fast_us", m.c1_latency_fast_us);
  get(j, "c1_latency_slow_us", m.c1_latency_slow_us);
  get(j, "c1_fast_threshold_hz", m.c1_fast_threshold_hz);
  get(j, "c2_latency_lo_us", m.c2_latency_lo_us);
  get(j, "c2_latency_hi_us", m.c2_latency_hi_us);
  get(j, "remote_overhead_us", m.remote_overhead_us);
  get(j, "wake_jitter_sigma_us", m.wake_jitter_sigma_us);
  get(j, "throttle_hz_1t", m.throttle_hz_1t);
  get(j, "throttle_hz_2t", m.throttle_hz_2t);
  get(j, "fma_ipc_1t", m.fma_ipc_1t);
  get(j, "fma_ipc_2t", m.fma_ipc_2t);
  get(j, "fma_sys_w_1t", m.fma_sys_w_1t);
  get(j, "fma_sys_w_2t", m.fma_sys_w_2t);
  get(j, "freq_jitter_sigma_1t_hz", m.freq_jitter_sigma_1t_hz);
  get(j, "freq_jitter_sigma_2t_hz", m.freq_jitter_sigma_2t_hz);
  get(j, "rapl_package_cap_w", m.rapl_package_cap_w);
  get(j, "rapl_uncore_w", m.rapl_uncore_w);
  get(j, "rapl_esu", m.rapl_esu);
  get(j, "rapl_read_noise_sigma_j", m.rapl_read_noise_sigma_j);
  get(j, "power_noise_sigma_w", m.power_noise_sigma_w);
  get(j, "offline_anomaly", m.offline_anomaly);
  if (auto it = j.find("workloads"); it != j.end()) {
    for (auto& [name, e] : it->items()) {
      WorkloadCoeff& c = m.coeff(workload_class_from_string(name));
      get(e, "sys_w_per_core", c.sys_w_per_core);
      get(e, "sys_w_per_sibling", c.sys_w_per_sibling);
      get(e, "rapl_core_w_per_core", c.rapl_core_w_per_core);
      get(e, "dram_w", c.dram_w);
      get(e, "data_delta", c.data_delta);
      get(e, "rapl_data_delta", c.rapl_data_delta);
      get(e, "ipc", c.ipc);
    }
  }
  m.finalize();
  return m;
}

}  // namespace pmchar
