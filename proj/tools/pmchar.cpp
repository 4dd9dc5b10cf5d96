// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: run probe suites, restore machine defaults, and
// merge external power-meter traces against hold schedules.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "pmchar/powertrace.hpp"
#include "pmchar/runner.hpp"
#include "pmchar/util.hpp"

namespace {

using namespace pmchar;

// Exit codes: 0 success, 1 configuration error, 2 prerequisite error,
// 3 probe failure.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPrereqError = 2;

struct RunArgs {
  std::string config_file;
  std::string backend;
  std::string preset;
  std::string model_file;
  std::string out_dir;
  std::string mem_label;
  std::vector<std::string> probe_names;
  uint64_t seed = 0;
  bool seed_set = false;
  bool ack = false;
};

runner::RunConfig assemble(const RunArgs& a) {
  runner::RunConfig cfg;
  if (!a.config_file.empty()) cfg = runner::load_run_config(a.config_file);
  if (!a.backend.empty()) cfg.backend = a.backend;
  if (!a.preset.empty()) cfg.preset = a.preset;
  if (!a.model_file.empty()) cfg.model_file = a.model_file;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (!a.mem_label.empty()) cfg.mem_label = a.mem_label;
  if (a.seed_set) cfg.seed = a.seed;
  if (a.ack) cfg.machine_state_ack = true;
  if (!a.probe_names.empty()) {
    cfg.probes.clear();
    for (const std::string& name : a.probe_names) cfg.probes.push_back({name, "{}"});
  }
  return cfg;
}

int do_run(const RunArgs& a) {
  runner::RunConfig cfg = assemble(a);
  runner::RunResult r = runner::run(cfg);
  for (const runner::ProbeReport& rep : r.probes) {
    if (rep.ok)
      std::printf("probe %-20s pass   (%.2f s, %zu files)\n", rep.name.c_str(), rep.wall_s,
                  rep.artifacts.size());
    else
      std::printf("probe %-20s FAIL   %s\n", rep.name.c_str(), rep.error.c_str());
  }
  std::printf("manifest: %s\n", r.manifest_path.c_str());
  return r.exit_status;
}

int do_restore(const RunArgs& a, const std::string& governor) {
  runner::RunConfig cfg = assemble(a);
  if (cfg.backend.empty()) cfg.backend = "hardware";
  runner::restore_hardware(cfg, governor);
  std::printf("restored: threads online, idle states enabled, governor %s\n", governor.c_str());
  return kOk;
}

int do_merge(const std::string& trace_file, const std::string& schedule_file,
             const std::string& out_file) {
  PowerTrace trace = load_power_trace(trace_file);
  std::vector<ScheduleEntry> schedule = load_schedule(schedule_file);
  std::vector<MergedWindow> windows = merge_trace(trace, schedule);
  save_merged_windows(out_file, windows);
  int flagged = 0;
  for (const MergedWindow& w : windows) flagged += w.flagged ? 1 : 0;
  std::printf("merged %zu windows (%d flagged) -> %s\n", windows.size(), flagged,
              out_file.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPU power-management characterization suite"};
  app.require_subcommand(1);

  RunArgs args;
  std::string governor = "schedutil";
  std::string trace_file, schedule_file, merge_out = "merged.csv";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--backend", args.backend, "simulated or hardware");
    cmd->add_option("--config", args.config_file, "JSON run configuration");
    cmd->add_flag("--i-know-this-changes-machine-state", args.ack,
                  "acknowledge system-wide control writes (hardware backend)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run probes and write an artifact directory");
  add_common(run_cmd);
  run_cmd->add_option("--probe", args.probe_names,
                      "probe to run with default parameters (repeatable; overrides the "
                      "config's probe list)");
  run_cmd->add_option("--out", args.out_dir, "artifact directory");
  run_cmd->add_option("--seed", args.seed, "random seed recorded in all outputs")
      ->each([&](const std::string&) { args.seed_set = true; });
  run_cmd->add_option("--preset", args.preset, "parameter defaults: reference or desk");
  run_cmd->add_option("--model", args.model_file, "behavioral model JSON (simulated backend)");
  run_cmd->add_option("--mem-label", args.mem_label,
                      "DIMM P-state label recorded with memory results");

  CLI::App* restore_cmd =
      app.add_subcommand("restore", "re-enable idle states, online all threads, set governor");
  add_common(restore_cmd);
  restore_cmd->add_option("--governor", governor, "cpufreq governor to restore");

  CLI::App* merge_cmd = app.add_subcommand(
      "merge-trace", "average an external power trace over a probe's hold schedule");
  merge_cmd->add_option("--trace", trace_file, "power trace CSV (timestamp_ns,power_w)")
      ->required();
  merge_cmd->add_option("--schedule", schedule_file, "hold schedule CSV from a probe")
      ->required();
  merge_cmd->add_option("--out", merge_out, "merged windows CSV");

  CLI::App* list_cmd = app.add_subcommand("list-probes", "print known probes and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (list_cmd->parsed()) {
      std::vector<std::string> suite = runner::default_suite();
      for (const std::string& name : runner::known_probes()) {
        bool in_suite = std::find(suite.begin(), suite.end(), name) != suite.end();
        std::printf("%-20s %s\n", name.c_str(), in_suite ? "(default suite)" : "");
      }
      return kOk;
    }
    if (run_cmd->parsed()) return do_run(args);
    if (restore_cmd->parsed()) return do_restore(args, governor);
    if (merge_cmd->parsed()) return do_merge(trace_file, schedule_file, merge_out);
  } catch (const runner::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const runner::PrereqError& e) {
    std::fprintf(stderr, "prerequisite error: %s\n", e.what());
    return kPrereqError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kOk;
}
