// SPDX-License-Identifier: Apache-2.0
#include "pmchar/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <set>

#include "pmchar/csv.hpp"
#include "pmchar/hw_platform.hpp"
#include "pmchar/probes.hpp"
#include "pmchar/rng.hpp"
#include "pmchar/sim_cpu.hpp"
#include "pmchar/stats.hpp"
#include "pmchar/util.hpp"
#include "probe_util.hpp"

namespace pmchar::runner {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using probes::num;

// Scale presets: "reference" runs the full published sample counts, "desk" the
// scaled-down counterpart that finishes in CI time.
struct Preset {
  int64_t transition_n;
  int wakeup_n;
  int data_blocks;
  double throttle_duration_s;
  double mixed_duration_s;
  bool accuracy_nominal_only;
};

Preset preset_for(const std::string& name) {
  if (name == "reference") return Preset{100000, 200, 3000, 120, 120, false};
  return Preset{1000, 50, 60, 20, 20, true};  // desk
}

// Typed access to one probe's parameter object.  Every read is echoed into a
// resolved-parameter object for the manifest; unknown keys are a config
// error so typos cannot silently fall back to defaults.
class ParamReader {
 public:
  ParamReader(std::string probe, const json& j) : probe_(std::move(probe)), j_(j) {
    if (!j_.is_object())
      throw ConfigError(strf("probe %s: params must be a JSON object", probe_.c_str()));
  }

  double number(const char* key, double dflt) { return get<double>(key, dflt); }
  int64_t integer(const char* key, int64_t dflt) { return get<int64_t>(key, dflt); }
  int integer32(const char* key, int dflt) { return static_cast<int>(get<int64_t>(key, dflt)); }
  bool flag(const char* key, bool dflt) { return get<bool>(key, dflt); }
  std::string text(const char* key, const std::string& dflt) { return get<std::string>(key, dflt); }

  std::vector<double> numbers(const char* key, std::vector<double> dflt) {
    return get<std::vector<double>>(key, std::move(dflt));
  }
  std::vector<int64_t> integers(const char* key, std::vector<int64_t> dflt) {
    return get<std::vector<int64_t>>(key, std::move(dflt));
  }
  std::vector<std::string> texts(const char* key, std::vector<std::string> dflt) {
    return get<std::vector<std::string>>(key, std::move(dflt));
  }

  const json* raw(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }
  void echo(const char* key, json value) { echo_[key] = std::move(value); }

  // Call after the last read: leftover keys are typos or unsupported options.
  std::string finish() {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError(strf("probe %s: unknown parameter \"%s\"", probe_.c_str(),
                               item.key().c_str()));
    return echo_.dump();
  }

 private:
  template <typename T>
  T get(const char* key, T dflt) {
    T v = std::move(dflt);
    auto it = j_.find(key);
    if (it != j_.end()) {
      seen_.insert(key);
      try {
        v = it->get<T>();
      } catch (const json::exception&) {
        throw ConfigError(strf("probe %s: parameter \"%s\" has the wrong type", probe_.c_str(),
                               key));
      }
    }
    echo_[key] = v;
    return v;
  }

  std::string probe_;
  const json& j_;
  std::set<std::string> seen_;
  json echo_ = json::object();
};

// Where one run's files land: probes write raw data, the runner derives
// analysis summaries and plot-ready files from the in-memory results.
struct Dirs {
  std::string raw;
  std::string analysis;
  std::string plots;
};

struct RunEnv {
  probes::Context& ctx;
  const Dirs& dirs;
  uint64_t seed;
};

void write_out(const std::string& dir, const std::string& name, const csv::Table& t) {
  fs::create_directories(dir);
  csv::write_table(dir + "/" + name, t);
}

csv::Table analysis_table(const std::string& kind, std::vector<std::string> columns) {
  csv::Table t;
  t.set_meta("tool", "pmchar");
  t.set_meta("kind", kind);
  t.columns = std::move(columns);
  return t;
}

void append_ecdf_rows(csv::Table& t, const stats::EcdfSeries& s,
                      const std::vector<std::string>& prefix) {
  for (size_t i = 0; i < s.values.size(); i++) {
    std::vector<std::string> row = prefix;
    row.push_back(s.label);
    row.push_back(strf("%d", s.subset));
    row.push_back(num(s.values[i]));
    row.push_back(num(static_cast<double>(i + 1) / static_cast<double>(s.values.size())));
    t.rows.push_back(std::move(row));
  }
}

// ---------------------------------------------------------------------------
// Per-probe plans.  A plan is parsed (and rejected) before anything runs, so
// parameter typos surface as config errors, never as mid-run failures.

struct Plan {
  std::string name;
  std::string params_echo;  // resolved parameters as a JSON object
  std::function<void(const RunEnv&)> exec;
};

Plan plan_freq_transition(const json& params, const Preset& preset) {
  ParamReader rd("freq_transition", params);
  probes::TransitionParams p;
  p.cpu = rd.integer32("cpu", p.cpu);
  p.from_hz = rd.number("from_hz", p.from_hz);
  p.to_hz = rd.number("to_hz", p.to_hz);
  p.n = rd.integer("n", preset.transition_n);
  p.wait_max_ms = rd.number("wait_max_ms", p.wait_max_ms);
  p.guard_ms = rd.number("guard_ms", p.guard_ms);
  p.detect_cycles = rd.integer("detect_cycles", p.detect_cycles);
  p.detect_band = rd.number("detect_band", p.detect_band);
  p.validate_runs = rd.integer32("validate_runs", p.validate_runs);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::TransitionResult r = run_freq_transition(env.ctx, p);
    std::vector<double> d;
    size_t shortcuts = 0;
    for (const TransitionSample& s : r.samples)
      if (s.valid) {
        d.push_back(s.delay_us);
        if (s.delay_us < 100.0) shortcuts++;
      }
    std::string tag = strf("freq_transition_%lld_%lld", llround(p.from_hz / 1e6),
                           llround(p.to_hz / 1e6));

    csv::Table fit = analysis_table("uniform_window_fit",
                                    {"d_hat_us", "t_hat_us", "ks_stat", "n_used", "n_excluded"});
    fit.set_meta("from_hz", num(p.from_hz));
    fit.set_meta("to_hz", num(p.to_hz));
    fit.set_meta("n_valid", strf("%lld", r.n_valid));
    fit.set_meta("n_discarded", strf("%lld", r.n_discarded));
    fit.set_meta("shortcut_frac",
                 num(d.empty() ? 0.0
                               : static_cast<double>(shortcuts) / static_cast<double>(d.size())));
    try {
      stats::UniformFit f = stats::fit_uniform_window(d);
      fit.rows.push_back({num(f.d_hat_us), num(f.t_hat_us), num(f.ks_stat),
                          strf("%zu", f.n_used), strf("%zu", f.n_excluded)});
    } catch (const std::exception& e) {
      fit.set_meta("fit_error", e.what());
    }
    write_out(env.dirs.analysis, tag + "_fit.csv", fit);

    stats::Histogram h = stats::make_histogram(d, 25.0);
    csv::Table hist = analysis_table("delay_histogram", {"lower_edge_us", "count"});
    hist.set_meta("bin_width_us", num(h.bin_width));
    for (size_t k = 0; k < h.counts.size(); k++)
      hist.rows.push_back({num(h.lower_edge(k)), strf("%llu", h.counts[k])});
    write_out(env.dirs.plots, tag + "_hist.csv", hist);
  };
  return Plan{"freq_transition", echo, exec};
}

Plan plan_sibling_freq(const json& params) {
  ParamReader rd("sibling_freq", params);
  probes::SiblingParams p;
  p.core = rd.integer32("core", p.core);
  p.low_hz = rd.number("low_hz", p.low_hz);
  p.high_hz = rd.number("high_hz", p.high_hz);
  p.chains = rd.integer32("chains", p.chains);
  p.chain_cycles = rd.integer("chain_cycles", p.chain_cycles);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::SiblingResult r = run_sibling_freq(env.ctx, p);
    csv::Table t = analysis_table("sibling_freq_summary",
                                  {"scenario", "sibling_set_ghz", "sibling_online",
                                   "measured_ghz"});
    for (const probes::SiblingScenario& s : r.rows)
      t.rows.push_back({s.name, strf("%.4f", s.sibling_set_hz / 1e9),
                        s.sibling_online ? "1" : "0", strf("%.4f", s.measured_hz / 1e9)});
    write_out(env.dirs.analysis, "sibling_freq_summary.csv", t);
  };
  return Plan{"sibling_freq", echo, exec};
}

Plan plan_mixed_freq(const json& params, const Preset& preset) {
  ParamReader rd("mixed_freq", params);
  probes::MixedFreqParams p;
  p.ccx = rd.integer32("ccx", p.ccx);
  p.freqs_hz = rd.numbers("freqs_hz", {});
  p.duration_s = rd.number("duration_s", preset.mixed_duration_s);
  p.chase_bytes = rd.integer("chase_bytes", p.chase_bytes);
  p.chase_loads = rd.integer("chase_loads", p.chase_loads);
  p.chase_reps = rd.integer32("chase_reps", p.chase_reps);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::MixedFreqResult r = run_mixed_freq(env.ctx, p);
    csv::Table t = analysis_table("coupling_table", {"self_set_ghz", "others_set_ghz",
                                                     "mean_ghz", "sigma_mhz", "l3_ns"});
    for (const probes::MixedFreqCell& c : r.cells)
      t.rows.push_back({strf("%.4f", c.self_set_hz / 1e9), strf("%.4f", c.others_set_hz / 1e9),
                        strf("%.4f", c.mean_hz / 1e9), strf("%.3f", c.sigma_hz / 1e6),
                        strf("%.1f", c.l3_ns)});
    write_out(env.dirs.analysis, "mixed_freq_table.csv", t);
  };
  return Plan{"mixed_freq", echo, exec};
}

Plan plan_mem_perf(const json& params) {
  ParamReader rd("mem_perf", params);
  probes::MemPerfParams p;
  p.ccx = rd.integer32("ccx", p.ccx);
  std::vector<int64_t> counts = rd.integers("core_counts", {1, 2, 3, 4});
  p.core_counts.assign(counts.begin(), counts.end());
  p.triad_seconds = rd.number("triad_seconds", p.triad_seconds);
  p.chase_sizes = rd.integers("chase_sizes", p.chase_sizes);
  p.chase_loads = rd.integer("chase_loads", p.chase_loads);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::MemPerfResult r = run_mem_perf(env.ctx, p);
    csv::Table t = analysis_table("mem_perf_summary", {"kind", "x", "value"});
    t.set_meta("mem_label", r.label);
    for (const probes::TriadPoint& tp : r.triad)
      t.rows.push_back({"triad_gb_per_s", strf("%d", tp.cores), num(tp.gb_per_s)});
    for (const probes::ChasePoint& cp : r.chase)
      t.rows.push_back({"chase_ns", strf("%lld", cp.bytes), num(cp.ns)});
    write_out(env.dirs.analysis, "mem_perf_summary.csv", t);
  };
  return Plan{"mem_perf", echo, exec};
}

Plan plan_throttle(const json& params, const Preset& preset) {
  ParamReader rd("throttle", params);
  probes::ThrottleParams base;
  int tpc = rd.integer32("threads_per_core", 0);  // 0: run both variants
  base.duration_s = rd.number("duration_s", preset.throttle_duration_s);
  base.warmup_s = rd.number("warmup_s", base.warmup_s);
  base.head_skip_s = rd.number("head_skip_s", base.head_skip_s);
  base.tail_skip_s = rd.number("tail_skip_s", base.tail_skip_s);
  base.capture_rate_hz = rd.number("capture_rate_hz", base.capture_rate_hz);
  std::string echo = rd.finish();
  if (tpc != 0 && tpc != 1 && tpc != 2)
    throw ConfigError("probe throttle: threads_per_core must be 0 (both), 1 or 2");

  auto exec = [base, tpc](const RunEnv& env) {
    csv::Table t = analysis_table(
        "throttle_summary", {"threads_per_core", "freq_mean_hz", "freq_sigma_hz", "ipc_mean",
                             "sys_power_w", "sys_samples", "rapl_pkg_total_w"});
    std::vector<int> variants = tpc == 0 ? std::vector<int>{1, 2} : std::vector<int>{tpc};
    for (int v : variants) {
      probes::ThrottleParams p = base;
      p.threads_per_core = v;
      probes::ThrottleResult r = run_throttle(env.ctx, p);
      double pkg_total = 0;
      for (double w : r.rapl_pkg_w) pkg_total += w;
      t.rows.push_back({strf("%d", v), num(r.freq_hz.mean), num(r.freq_hz.sigma),
                        num(r.ipc.mean), num(r.sys_power_w), strf("%d", r.sys_samples),
                        num(pkg_total)});
    }
    write_out(env.dirs.analysis, "throttle_summary.csv", t);
  };
  return Plan{"throttle", echo, exec};
}

Plan plan_cstate_power_sweep(const json& params) {
  ParamReader rd("cstate_power_sweep", params);
  probes::CStateSweepParams p;
  p.hold_s = rd.number("hold_s", p.hold_s);
  p.capture_rate_hz = rd.number("capture_rate_hz", p.capture_rate_hz);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::CStateSweepResult r = run_cstate_power_sweep(env.ctx, p);

    csv::Table pts = analysis_table(
        "sweep_points", {"order_index", "sweep", "n_c1", "n_active", "mean_w", "flagged"});
    pts.set_meta("measured", r.measured ? "1" : "0");
    for (const CStatePowerPoint& pt : r.points)
      pts.rows.push_back({strf("%d", pt.order_index), pt.sweep, strf("%d", pt.n_c1),
                          strf("%d", pt.n_active), num(pt.mean_w), pt.flagged ? "1" : "0"});
    write_out(env.dirs.plots, "cstate_sweep_points.csv", pts);

    if (!r.measured) return;  // external-meter run: merge happens offline
    const Topology& topo = env.ctx.platform.topology();
    int nc = topo.n_cores(), ncpu = topo.n_cpus();
    csv::Table fits = analysis_table(
        "sweep_fits", {"segment", "slope_w", "intercept_w", "residual_sigma_w"});
    auto put = [&](const char* name, const char* sweep, int first, int last, bool x_active) {
      stats::AffineFit f = stats::fit_linear_increments(r.points, sweep, first, last, x_active);
      fits.rows.push_back({name, num(f.slope), num(f.intercept), num(f.residual_sigma)});
    };
    put("c1_per_core", "c1", 2, nc, false);
    put("active_per_core", "active", 2, nc, true);
    put("active_per_sibling", "active", nc + 1, ncpu, true);
    write_out(env.dirs.analysis, "cstate_sweep_fits.csv", fits);
  };
  return Plan{"cstate_power_sweep", echo, exec};
}

Plan plan_cstate_latency(const json& params, const Preset& preset) {
  ParamReader rd("cstate_latency", params);
  probes::WakeupParams base;
  base.n = rd.integer32("n", preset.wakeup_n);
  int cstate = rd.integer32("cstate", 0);  // 0: the default grid
  base.freq_hz = rd.number("freq_hz", 0);
  base.remote = rd.flag("remote", false);
  base.callee_cpu = rd.integer32("callee_cpu", base.callee_cpu);
  base.caller_cpu = rd.integer32("caller_cpu", base.caller_cpu);
  std::string echo = rd.finish();

  auto exec = [base, cstate](const RunEnv& env) {
    std::vector<probes::WakeupParams> combos;
    if (cstate != 0) {
      probes::WakeupParams p = base;
      p.cstate = cstate;
      combos.push_back(p);
    } else {
      // Grid: shallow state at every frequency, deep state, remote caller.
      for (double f : env.ctx.platform.available_frequencies()) {
        probes::WakeupParams p = base;
        p.cstate = 1;
        p.freq_hz = f;
        combos.push_back(p);
      }
      probes::WakeupParams deep = base;
      deep.cstate = 2;
      combos.push_back(deep);
      probes::WakeupParams rem = base;
      rem.cstate = 1;
      rem.remote = true;
      rem.caller_cpu = -1;  // auto: first cpu of the other package
      combos.push_back(rem);
    }

    csv::Table t = analysis_table(
        "wakeup_summary", {"cstate", "freq_hz", "remote", "n", "median_us", "mean_us",
                           "sigma_us", "min_us", "max_us", "resampled"});
    csv::Table ec = analysis_table("wakeup_ecdf",
                                   {"cstate", "freq_hz", "remote", "label", "subset",
                                    "latency_us", "cdf"});
    for (const probes::WakeupParams& p : combos) {
      probes::WakeupResult r = run_cstate_latency(env.ctx, p);
      std::vector<double> v;
      for (const WakeupSample& s : r.samples) v.push_back(s.latency_us);
      stats::Summary sm = stats::summarize(v);
      t.rows.push_back({strf("%d", r.params.cstate), num(r.params.freq_hz),
                        r.params.remote ? "1" : "0", strf("%zu", v.size()),
                        num(stats::median(v)), num(sm.mean), num(sm.sigma), num(sm.min),
                        num(sm.max), strf("%d", r.resampled)});
      std::string label = strf("c%d_%lld_%s", r.params.cstate, llround(r.params.freq_hz / 1e6),
                               r.params.remote ? "remote" : "local");
      stats::EcdfSeries s = stats::make_ecdf(v, label);
      append_ecdf_rows(ec, s,
                       {strf("%d", r.params.cstate), num(r.params.freq_hz),
                        r.params.remote ? "1" : "0"});
    }
    write_out(env.dirs.analysis, "cstate_latency_summary.csv", t);
    write_out(env.dirs.plots, "cstate_latency_ecdf.csv", ec);
  };
  return Plan{"cstate_latency", echo, exec};
}

Plan plan_offline_anomaly(const json& params) {
  ParamReader rd("offline_anomaly", params);
  probes::OfflineAnomalyParams p;
  p.core = rd.integer32("core", p.core);
  p.hold_s = rd.number("hold_s", p.hold_s);
  p.capture_rate_hz = rd.number("capture_rate_hz", p.capture_rate_hz);
  p.step_threshold_w = rd.number("step_threshold_w", p.step_threshold_w);
  std::string echo = rd.finish();

  auto exec = [p](const RunEnv& env) {
    probes::OfflineAnomalyResult r = run_offline_anomaly(env.ctx, p);
    csv::Table t = analysis_table("offline_anomaly_summary", {"phase", "mean_w", "samples"});
    t.set_meta("measured", r.measured ? "1" : "0");
    t.set_meta("anomaly_detected", r.anomaly_detected ? "1" : "0");
    t.set_meta("step_threshold_w", num(p.step_threshold_w));
    for (const probes::OfflinePhase& ph : r.phases)
      t.rows.push_back({ph.phase, num(ph.mean_w), strf("%d", ph.sample_count)});
    write_out(env.dirs.analysis, "offline_anomaly_summary.csv", t);
  };
  return Plan{"offline_anomaly", echo, exec};
}

bool is_memory_class(const std::string& wl) {
  return wl == "memory_read" || wl == "memory_write" || wl == "triad";
}
bool is_compute_class(const std::string& wl) { return wl != "idle" && !is_memory_class(wl); }

Plan plan_rapl_accuracy(const json& params, const Preset& preset) {
  ParamReader rd("rapl_accuracy", params);
  probes::RaplAccuracyParams p;
  std::vector<std::string> wl_names = rd.texts("workloads", {});
  for (const std::string& w : wl_names) p.workloads.push_back(workload_class_from_string(w));
  p.freqs_hz = rd.numbers("freqs_hz", {});
  p.hold_s = rd.number("hold_s", p.hold_s);
  p.capture_rate_hz = rd.number("capture_rate_hz", p.capture_rate_hz);
  bool nominal_only = preset.accuracy_nominal_only && p.freqs_hz.empty();
  if (const json* pl = rd.raw("placements")) {
    json echo_pl = json::array();
    for (const json& e : *pl) {
      if (!e.is_object() || !e.contains("name") || !e.contains("cpus"))
        throw ConfigError("probe rapl_accuracy: each placement needs \"name\" and \"cpus\"");
      probes::Placement pm;
      pm.name = e["name"].get<std::string>();
      pm.cpus = e["cpus"].get<std::vector<int>>();
      p.placements.push_back(pm);
      echo_pl.push_back(e);
    }
    rd.echo("placements", echo_pl);
  }
  std::string echo = rd.finish();

  auto exec = [p, nominal_only](const RunEnv& env) mutable {
    if (nominal_only) p.freqs_hz = {env.ctx.platform.nominal_hz()};
    probes::RaplAccuracyResult r = run_rapl_accuracy(env.ctx, p);

    // One affine map from the core domain to the package domain, fitted over
    // compute-only classes (memory classes spend power neither domain sees).
    std::vector<double> core_x, pkg_y;
    for (const probes::RaplConfigRecord& rec : r.records)
      if (is_compute_class(rec.workload)) {
        core_x.push_back(rec.rapl_core_w);
        pkg_y.push_back(rec.rapl_pkg_w);
      }
    csv::Table fit = analysis_table(
        "core_to_package_fit", {"slope", "intercept_w", "residual_sigma_w", "max_rel_residual",
                                "n"});
    if (core_x.size() >= 2) {
      stats::AffineFit f = stats::fit_affine(core_x, pkg_y);
      fit.rows.push_back({num(f.slope), num(f.intercept), num(f.residual_sigma),
                          num(f.max_rel_residual), strf("%zu", core_x.size())});
    } else {
      fit.set_meta("fit_error", "needs at least two compute-class records");
    }
    write_out(env.dirs.analysis, "rapl_accuracy_core_pkg_fit.csv", fit);

    // Reference power vs the package-implied prediction: fit reference
    // against package watts over compute classes per (placement, frequency)
    // group, then report how far each memory class lands above it.
    csv::Table ex = analysis_table(
        "memory_excess", {"workload", "placement", "freq_hz", "sys_w", "predicted_w",
                          "excess_frac"});
    std::set<std::pair<std::string, double>> groups;
    for (const probes::RaplConfigRecord& rec : r.records)
      groups.insert({rec.placement, rec.freq_hz});
    for (const auto& g : groups) {
      std::vector<double> xs, ys;
      for (const probes::RaplConfigRecord& rec : r.records)
        if (rec.placement == g.first && rec.freq_hz == g.second &&
            is_compute_class(rec.workload) && rec.sys_measured) {
          xs.push_back(rec.rapl_pkg_w);
          ys.push_back(rec.sys_w);
        }
      if (xs.size() < 2) continue;
      stats::AffineFit f = stats::fit_affine(xs, ys);
      for (const probes::RaplConfigRecord& rec : r.records)
        if (rec.placement == g.first && rec.freq_hz == g.second &&
            is_memory_class(rec.workload) && rec.sys_measured) {
          double predicted = f.slope * rec.rapl_pkg_w + f.intercept;
          ex.rows.push_back({rec.workload, rec.placement, num(rec.freq_hz), num(rec.sys_w),
                             num(predicted), num(rec.sys_w / predicted - 1.0)});
        }
    }
    write_out(env.dirs.analysis, "rapl_accuracy_memory_excess.csv", ex);
  };
  return Plan{"rapl_accuracy", echo, exec};
}

Plan plan_rapl_data(const json& params, const Preset& preset) {
  ParamReader rd("rapl_data", params);
  probes::RaplDataParams base;
  std::string instr = rd.text("instruction", "");  // empty: both wide ops
  base.n_blocks = rd.integer32("n_blocks", preset.data_blocks);
  base.block_s = rd.number("block_s", base.block_s);
  base.capture_rate_hz = rd.number("capture_rate_hz", base.capture_rate_hz);
  std::string echo = rd.finish();
  std::vector<WorkloadClass> instrs;
  if (instr.empty())
    instrs = {WorkloadClass::wide_xor, WorkloadClass::shift_right};
  else
    instrs = {workload_class_from_string(instr)};

  auto exec = [base, instrs](const RunEnv& env) {
    for (WorkloadClass wc : instrs) {
      probes::RaplDataParams p = base;
      p.instruction = wc;
      probes::RaplDataResult r = run_rapl_data(env.ctx, p);

      std::map<std::string, std::vector<double>> sys, core, pkg;
      for (const BlockRecord& b : r.blocks) {
        std::string w = num(b.weight);
        sys[w].push_back(b.sys_power_w);
        core[w].push_back(b.core_power_w());
        pkg[w].push_back(b.pkg_power_w());
      }

      csv::Table gaps = analysis_table(
          "weight_gaps", {"field", "weight_a", "weight_b", "mean_gap", "ks_stat"});
      gaps.set_meta("instruction", to_string(wc));
      for (const auto& grp : sys) gaps.set_meta("n_weight_" + grp.first,
                                                strf("%zu", grp.second.size()));
      auto put = [&](const char* field, std::map<std::string, std::vector<double>>& by_w) {
        auto a = by_w.find("0"), b = by_w.find("1");
        if (a == by_w.end() || b == by_w.end()) return;
        gaps.rows.push_back({field, "0", "1", num(stats::mean_gap(a->second, b->second)),
                             num(stats::ks_two_sample(a->second, b->second))});
      };
      put("sys_power_w", sys);
      put("rapl_core_w", core);
      put("rapl_pkg_w", pkg);
      write_out(env.dirs.analysis, strf("rapl_data_%s_gaps.csv", to_string(wc)), gaps);

      // ECDF plot data, split into random subsets to show run-to-run
      // stability of the separation.
      size_t smallest = SIZE_MAX;
      for (const auto& grp : sys) smallest = std::min(smallest, grp.second.size());
      int k = (smallest != SIZE_MAX && smallest >= 10) ? 10 : 1;
      csv::Table ec = analysis_table("weight_ecdf", {"label", "subset", "sys_power_w", "cdf"});
      ec.set_meta("instruction", to_string(wc));
      ec.set_meta("subsets", strf("%d", k));
      if (!sys.empty()) {
        uint64_t s = derive_seed(env.seed, strf("rapl_data_ecdf/%s", to_string(wc)));
        for (const stats::EcdfSeries& series : stats::ecdf_with_subsets(sys, k, s))
          append_ecdf_rows(ec, series, {});
      }
      write_out(env.dirs.plots, strf("rapl_data_%s_ecdf.csv", to_string(wc)), ec);
    }
  };
  return Plan{"rapl_data", echo, exec};
}

Plan make_plan(const std::string& name, const json& params, const Preset& preset) {
  if (name == "freq_transition") return plan_freq_transition(params, preset);
  if (name == "sibling_freq") return plan_sibling_freq(params);
  if (name == "mixed_freq") return plan_mixed_freq(params, preset);
  if (name == "mem_perf") return plan_mem_perf(params);
  if (name == "throttle") return plan_throttle(params, preset);
  if (name == "cstate_power_sweep") return plan_cstate_power_sweep(params);
  if (name == "cstate_latency") return plan_cstate_latency(params, preset);
  if (name == "offline_anomaly") return plan_offline_anomaly(params);
  if (name == "rapl_accuracy") return plan_rapl_accuracy(params, preset);
  if (name == "rapl_data") return plan_rapl_data(params, preset);
  throw ConfigError(strf("unknown probe \"%s\"", name.c_str()));
}

std::vector<std::string> relative_csvs(const std::string& root) {
  std::vector<std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  std::sort(out.begin(), out.end());
  return out;
}

json config_echo(const RunConfig& cfg, const std::vector<Plan>& plans) {
  json probes_j = json::array();
  for (const Plan& pl : plans)
    probes_j.push_back({{"name", pl.name}, {"params", json::parse(pl.params_echo)}});
  return json{{"backend", cfg.backend},       {"model_file", cfg.model_file},
              {"preset", cfg.preset},         {"out_dir", cfg.out_dir},
              {"seed", cfg.seed},             {"mem_label", cfg.mem_label},
              {"machine_state_ack", cfg.machine_state_ack},
              {"probes", probes_j}};
}

}  // namespace

std::vector<std::string> known_probes() {
  return {"freq_transition", "sibling_freq",      "mixed_freq",     "mem_perf",
          "throttle",        "cstate_power_sweep", "cstate_latency", "offline_anomaly",
          "rapl_accuracy",   "rapl_data"};
}

std::vector<std::string> default_suite() {
  return {"freq_transition", "mixed_freq",      "throttle",      "cstate_power_sweep",
          "cstate_latency",  "offline_anomaly", "rapl_accuracy", "rapl_data"};
}

void validate(const RunConfig& cfg) {
  if (cfg.backend != "simulated" && cfg.backend != "hardware")
    throw ConfigError(strf("backend must be \"simulated\" or \"hardware\", got \"%s\"",
                           cfg.backend.c_str()));
  if (cfg.preset != "reference" && cfg.preset != "desk")
    throw ConfigError(strf("preset must be \"reference\" or \"desk\", got \"%s\"",
                           cfg.preset.c_str()));
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  std::vector<std::string> known = known_probes();
  for (const ProbeEntry& e : cfg.probes)
    if (std::find(known.begin(), known.end(), e.name) == known.end())
      throw ConfigError(strf("unknown probe \"%s\"", e.name.c_str()));
  if (cfg.backend == "hardware" && !cfg.machine_state_ack)
    throw ConfigError(
        "the hardware backend changes frequencies, idle states and thread availability "
        "system-wide; acknowledge with --i-know-this-changes-machine-state");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(strf("cannot open config file %s", path.c_str()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(strf("config file %s: %s", path.c_str(), e.what()));
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig cfg;
  std::set<std::string> known_keys = {"backend", "model_file", "preset",    "probes",
                                      "out_dir", "seed",       "mem_label", "machine_state_ack"};
  for (const auto& item : j.items())
    if (!known_keys.count(item.key()))
      throw ConfigError(strf("config: unknown key \"%s\"", item.key().c_str()));
  try {
    cfg.backend = j.value("backend", cfg.backend);
    cfg.model_file = j.value("model_file", cfg.model_file);
    cfg.preset = j.value("preset", cfg.preset);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.mem_label = j.value("mem_label", cfg.mem_label);
    cfg.machine_state_ack = j.value("machine_state_ack", cfg.machine_state_ack);
    if (j.contains("probes")) {
      for (const json& e : j["probes"]) {
        ProbeEntry entry;
        if (e.is_string()) {
          entry.name = e.get<std::string>();
        } else if (e.is_object()) {
          if (!e.contains("name")) throw ConfigError("config: probe entry without \"name\"");
          entry.name = e["name"].get<std::string>();
          entry.params_json = e.value("params", json::object()).dump();
          for (const auto& item : e.items())
            if (item.key() != "name" && item.key() != "params")
              throw ConfigError(strf("config: probe entry key \"%s\" not recognized",
                                     item.key().c_str()));
        } else {
          throw ConfigError("config: probe entries must be names or {name, params} objects");
        }
        cfg.probes.push_back(entry);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(strf("config file %s: %s", path.c_str(), e.what()));
  }
  validate(cfg);
  return cfg;
}

RunResult run(const RunConfig& cfg) {
  validate(cfg);
  // Backend construction and prerequisite checks are read-only.
  std::unique_ptr<Platform> owned;
  if (cfg.backend == "simulated") {
    SimModel m;
    try {
      m = cfg.model_file.empty() ? default_sim_model() : load_sim_model(cfg.model_file);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    owned = std::make_unique<SimCpu>(std::move(m), cfg.seed);
  } else {
    try {
      auto hw = std::make_unique<HwCpu>();
      hw->require_control_ready();
      owned = std::move(hw);
    } catch (const std::exception& e) {
      throw PrereqError(e.what());
    }
  }
  return run(cfg, *owned);
}

RunResult run(const RunConfig& cfg, Platform& p) {
  validate(cfg);
  Preset preset = preset_for(cfg.preset);

  // Resolve the probe list and parse every parameter set before anything
  // runs: configuration errors must precede the first control mutation.
  std::vector<ProbeEntry> entries = cfg.probes;
  if (entries.empty())
    for (const std::string& name : default_suite()) entries.push_back({name, "{}"});
  std::vector<Plan> plans;
  for (const ProbeEntry& e : entries) {
    json params;
    try {
      params = json::parse(e.params_json);
    } catch (const json::exception& ex) {
      throw ConfigError(strf("probe %s: bad params: %s", e.name.c_str(), ex.what()));
    }
    plans.push_back(make_plan(e.name, params, preset));
  }

  ControlSnapshot startup = p.snapshot_control_state();

  Dirs dirs{cfg.out_dir + "/raw", cfg.out_dir + "/analysis", cfg.out_dir + "/plots"};
  fs::create_directories(cfg.out_dir);
  probes::Context ctx{p, cfg.seed, dirs.raw, cfg.mem_label};
  RunEnv env{ctx, dirs, cfg.seed};

  RunResult result;
  for (const Plan& plan : plans) {
    ProbeReport rep;
    rep.name = plan.name;
    rep.params_json = plan.params_echo;
    std::vector<std::string> before = relative_csvs(cfg.out_dir);
    auto t0 = std::chrono::steady_clock::now();
    try {
      plan.exec(env);
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.error = e.what();
    }
    // A probe must never leak control state into its successor.
    p.restore_control_state(startup);
    rep.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<std::string> after = relative_csvs(cfg.out_dir);
    std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                        std::back_inserter(rep.artifacts));
    result.probes.push_back(std::move(rep));
  }
  p.restore_control_state(startup);

  int n_fail = 0;
  json probes_j = json::array();
  for (const ProbeReport& rep : result.probes) {
    json pj{{"name", rep.name},
            {"params", json::parse(rep.params_json)},
            {"status", rep.ok ? "pass" : "fail"},
            {"artifacts", rep.artifacts},
            {"wall_s", std::round(rep.wall_s * 1000.0) / 1000.0}};
    if (!rep.ok) {
      pj["error"] = rep.error;
      n_fail++;
    }
    probes_j.push_back(std::move(pj));
  }
  json manifest{{"tool", "pmchar"},
                {"version", kVersion},
                {"backend", cfg.backend},
                {"topology", strf("%016llx", static_cast<unsigned long long>(
                                                 p.topology().layout_hash()))},
                {"seed", cfg.seed},
                {"preset", cfg.preset},
                {"status", n_fail == 0 ? "pass" : "partial"},
                {"probes", probes_j},
                {"config", config_echo(cfg, plans)}};
  if (p.sim()) manifest["model_version"] = p.sim()->model().version;
  result.manifest_path = cfg.out_dir + "/manifest.json";
  std::ofstream out(result.manifest_path);
  out << manifest.dump(2) << "\n";
  if (!out) fail(strf("cannot write %s", result.manifest_path.c_str()));

  result.exit_status = n_fail == 0 ? 0 : 3;
  return result;
}

void restore_hardware(const RunConfig& cfg, const std::string& governor) {
  if (cfg.backend != "hardware")
    throw ConfigError("restore applies to the hardware backend; the simulated machine "
                      "lives and dies with its process");
  if (!cfg.machine_state_ack)
    throw ConfigError(
        "restore writes governors, idle states and online files system-wide; acknowledge "
        "with --i-know-this-changes-machine-state");
  try {
    HwCpu hw;
    hw.restore_defaults(governor);
  } catch (const std::exception& e) {
    throw PrereqError(e.what());
  }
}

}  // namespace pmchar::runner
