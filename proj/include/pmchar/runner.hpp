// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pmchar/platform.hpp"

namespace pmchar::runner {

// Bad configuration (unknown probe, malformed file, missing acknowledgment):
// exit code 1.  Unmet machine prerequisites (privileges, governor): exit
// code 2, raised before anything is mutated.  Probe failures do not throw;
// they are recorded and reflected as exit code 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PrereqError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProbeEntry {
  std::string name;
  std::string params_json = "{}";  // per-probe overrides, JSON object text
};

struct RunConfig {
  std::string backend = "simulated";  // "simulated" or "hardware"
  std::string model_file;             // optional behavioral-model override
  std::string preset = "reference";   // "reference" or "desk" parameter defaults
  std::vector<ProbeEntry> probes;     // empty: the default suite
  std::string out_dir = "pmchar-artifacts";
  uint64_t seed = 1;
  std::string mem_label = "auto";     // recorded DIMM P-state label
  bool machine_state_ack = false;     // required to touch a real machine
};

// Probes run when the config lists none.
std::vector<std::string> default_suite();
// Every probe name the runner accepts.
std::vector<std::string> known_probes();

// Parses a JSON config file.  Throws ConfigError on unknown keys, unknown
// probe names, or malformed values.
RunConfig load_run_config(const std::string& path);

// Structural checks (probe names, backend name, preset name, hardware
// acknowledgment).  run() calls this first; the CLI calls it early so config
// errors surface before a backend is built.
void validate(const RunConfig& cfg);

struct ProbeReport {
  std::string name;
  std::string params_json;  // parameters as resolved, echoing defaults
  bool ok = false;
  std::string error;                   // set when !ok
  std::vector<std::string> artifacts;  // files created, relative to out_dir
  double wall_s = 0;
};

struct RunResult {
  int exit_status = 0;  // 0 ok, 1 config, 2 prerequisite, 3 probe failure
  std::vector<ProbeReport> probes;
  std::string manifest_path;
};

// Builds the backend, checks prerequisites, snapshots control state, runs
// every probe in order (a failing probe is recorded and the rest continue),
// restores control state between probes and at exit, and writes raw data,
// analysis summaries, plot data and a manifest under cfg.out_dir.
RunResult run(const RunConfig& cfg);

// Same, on a backend the caller already holds (embedding, tests).  The
// caller is responsible for its prerequisites.
RunResult run(const RunConfig& cfg, Platform& platform);

// Standalone clean-up for a real machine: every thread online, every idle
// state enabled, the named governor everywhere.  Idempotent.
void restore_hardware(const RunConfig& cfg, const std::string& governor = "schedutil");

}  // namespace pmchar::runner
