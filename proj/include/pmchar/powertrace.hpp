// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmchar {

struct PowerSample {
  int64_t t_ns = 0;
  double watts = 0;
};

// A system (wall) power recording, nominally 20 Sa/s.  Timestamps share the
// clock of the run that produced the matching hold schedule; alignment skew
// up to ±0.9 s is absorbed by the inner-window averaging.
struct PowerTrace {
  double rate_hz = 20.0;
  std::string source;  // "sim" or a meter name
  std::vector<PowerSample> samples;
};

// One scheduled configuration hold, identified by an opaque config id.
struct ScheduleEntry {
  std::string config;
  int64_t t_start_ns = 0;
  int64_t t_end_ns = 0;
};

struct MergedWindow {
  std::string config;
  int64_t t_start_ns = 0;  // inner window, after trimming
  int64_t t_end_ns = 0;
  double mean_w = 0;
  int sample_count = 0;
  bool flagged = false;  // too few samples to trust the mean
};

// Trace files are two-column CSV `timestamp_ns,power_w`; the column-name row
// and `# key=value` headers are optional so vendor exports drop in directly.
PowerTrace load_power_trace(const std::string& path);
void save_power_trace(const std::string& path, const PowerTrace& trace);

std::vector<ScheduleEntry> load_schedule(const std::string& path);

double mean_in_window(const PowerTrace& trace, int64_t t0, int64_t t1, int* count_out = nullptr);

// Collapse a trace onto a schedule: each hold is trimmed by trim_ns on both
// ends (set-up settling in, tear-down out) and averaged.  Holds must not
// overlap and must be 10 s ± 5 %; windows with fewer than 80 % of the
// expected samples are flagged, never silently dropped.
std::vector<MergedWindow> merge_trace(const PowerTrace& trace,
                                      const std::vector<ScheduleEntry>& schedule,
                                      int64_t trim_ns = 1000000000);

void save_merged_windows(const std::string& path, const std::vector<MergedWindow>& windows);

}  // namespace pmchar
