// SPDX-License-Identifier: Apache-2.0
#include "pmchar/powertrace.hpp"

#include <algorithm>
#include <fstream>

#include "pmchar/csv.hpp"
#include "pmchar/util.hpp"

namespace pmchar {

namespace {

// The nominal sample rate must hold within ±10 % over any 10 s stretch;
// heavy jitter would silently bias the window means.
void check_rate_stability(const PowerTrace& trace, const std::string& path) {
  const int64_t window = 10 * kSec;
  const auto& s = trace.samples;
  if (s.empty() || s.back().t_ns - s.front().t_ns < window) return;
  double expected = trace.rate_hz * 10.0;
  size_t lo = 0;
  for (size_t hi = 0; hi < s.size(); hi++) {
    while (s[hi].t_ns - s[lo].t_ns > window) lo++;
    if (s[hi].t_ns - s[lo].t_ns < window - window / 10) continue;
    double count = static_cast<double>(hi - lo + 1);
    if (count < 0.9 * expected || count > 1.1 * expected)
      fail(strf("%s: sample rate near t=%lld ns is %.1f/10s, outside ±10%% of %.1f", path.c_str(),
                static_cast<long long>(s[lo].t_ns), count, expected));
  }
}

}  // namespace

PowerTrace load_power_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(strf("cannot open %s", path.c_str()));
  PowerTrace trace;
  bool have_rate = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string body = trim(line);
    if (body.empty()) continue;
    if (body[0] == '#') {
      std::string kv = trim(body.substr(1));
      size_t eq = kv.find('=');
      if (eq == std::string::npos) continue;  // free-form vendor comment
      std::string key = trim(kv.substr(0, eq));
      std::string value = trim(kv.substr(eq + 1));
      if (key == "rate_hz") {
        trace.rate_hz = csv::to_double(value, strf("%s:%d: rate_hz", path.c_str(), lineno));
        have_rate = true;
      } else if (key == "source") {
        trace.source = value;
      }
      continue;
    }
    std::vector<std::string> fields = split(body, ',');
    if (fields.size() != 2)
      fail(strf("%s:%d: expected 'timestamp_ns,power_w', got %zu fields", path.c_str(), lineno,
                fields.size()));
    std::string f0 = trim(fields[0]);
    std::string f1 = trim(fields[1]);
    if (f0 == "timestamp_ns" || f0 == "t_ns") continue;  // optional column-name row
    std::string ctx = strf("%s:%d", path.c_str(), lineno);
    PowerSample s;
    s.t_ns = csv::to_int(f0, ctx);
    s.watts = csv::to_double(f1, ctx);
    if (!trace.samples.empty()) {
      if (s.t_ns == trace.samples.back().t_ns)
        fail(strf("%s:%d: duplicate timestamp %lld", path.c_str(), lineno,
                  static_cast<long long>(s.t_ns)));
      if (s.t_ns < trace.samples.back().t_ns)
        fail(strf("%s:%d: timestamp %lld goes backwards", path.c_str(), lineno,
                  static_cast<long long>(s.t_ns)));
    }
    trace.samples.push_back(s);
  }
  if (trace.samples.empty()) fail(strf("%s: no power samples", path.c_str()));
  if (!have_rate && trace.samples.size() > 1) {
    int64_t span = trace.samples.back().t_ns - trace.samples.front().t_ns;
    trace.rate_hz = static_cast<double>(trace.samples.size() - 1) * kSec / span;
  }
  check_rate_stability(trace, path);
  return trace;
}

void save_power_trace(const std::string& path, const PowerTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(strf("cannot write %s", path.c_str()));
  out << "# source=" << (trace.source.empty() ? "sim" : trace.source) << "\n";
  out << "# rate_hz=" << strf("%g", trace.rate_hz) << "\n";
  out << "timestamp_ns,power_w\n";
  for (const PowerSample& s : trace.samples)
    out << strf("%lld,%.4f\n", static_cast<long long>(s.t_ns), s.watts);
  if (!out) fail(strf("write to %s failed", path.c_str()));
}

std::vector<ScheduleEntry> load_schedule(const std::string& path) {
  csv::Table t = csv::read_table(path);
  int cc = t.require_column("config");
  int c0 = t.require_column("t_start_ns");
  int c1 = t.require_column("t_end_ns");
  std::vector<ScheduleEntry> schedule;
  schedule.reserve(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); i++) {
    std::string ctx = strf("%s: row %zu", path.c_str(), i + 1);
    ScheduleEntry e;
    e.config = t.rows[i][cc];
    e.t_start_ns = csv::to_int(t.rows[i][c0], ctx);
    e.t_end_ns = csv::to_int(t.rows[i][c1], ctx);
    if (e.t_end_ns <= e.t_start_ns) fail(ctx + ": hold must end after it starts");
    schedule.push_back(std::move(e));
  }
  return schedule;
}

double mean_in_window(const PowerTrace& trace, int64_t t0, int64_t t1, int* count_out) {
  auto lo = std::lower_bound(trace.samples.begin(), trace.samples.end(), t0,
                             [](const PowerSample& s, int64_t t) { return s.t_ns < t; });
  double sum = 0;
  int n = 0;
  for (auto it = lo; it != trace.samples.end() && it->t_ns < t1; ++it) {
    sum += it->watts;
    n++;
  }
  if (count_out) *count_out = n;
  if (n == 0)
    fail(strf("no power samples in [%lld, %lld) ns", static_cast<long long>(t0),
              static_cast<long long>(t1)));
  return sum / n;
}

std::vector<MergedWindow> merge_trace(const PowerTrace& trace,
                                      const std::vector<ScheduleEntry>& schedule,
                                      int64_t trim_ns) {
  if (trace.samples.empty()) fail("empty power trace");
  if (schedule.empty()) return {};
  const int64_t hold = 10 * kSec;
  for (size_t i = 0; i < schedule.size(); i++) {
    const ScheduleEntry& e = schedule[i];
    int64_t len = e.t_end_ns - e.t_start_ns;
    if (len < hold - hold / 20 || len > hold + hold / 20)
      fail(strf("hold '%s' lasts %.2f s; expected 10 s ± 5%%", e.config.c_str(),
                static_cast<double>(len) / kSec));
    if (i > 0 && e.t_start_ns < schedule[i - 1].t_end_ns)
      fail(strf("holds '%s' and '%s' overlap", schedule[i - 1].config.c_str(), e.config.c_str()));
    if (2 * trim_ns >= len)
      fail(strf("hold '%s' is too short for a %lld ns trim on each side", e.config.c_str(),
                static_cast<long long>(trim_ns)));
  }
  int64_t trace_start = trace.samples.front().t_ns;
  int64_t trace_end = trace.samples.back().t_ns;
  if (schedule.front().t_start_ns + trim_ns >= trace_end ||
      schedule.back().t_end_ns - trim_ns <= trace_start)
    fail("schedule lies outside the trace time range");

  std::vector<MergedWindow> windows;
  windows.reserve(schedule.size());
  double expected = trace.rate_hz * static_cast<double>(hold - 2 * trim_ns) / kSec;
  for (const ScheduleEntry& e : schedule) {
    MergedWindow w;
    w.config = e.config;
    w.t_start_ns = e.t_start_ns + trim_ns;
    w.t_end_ns = e.t_end_ns - trim_ns;
    w.mean_w = mean_in_window(trace, w.t_start_ns, w.t_end_ns, &w.sample_count);
    w.flagged = w.sample_count < 0.8 * expected;
    windows.push_back(std::move(w));
  }
  return windows;
}

void save_merged_windows(const std::string& path, const std::vector<MergedWindow>& windows) {
  csv::Table t;
  t.set_meta("file", "merged_windows");
  t.columns = {"config", "t_start_ns", "t_end_ns", "mean_w", "sample_count", "flagged"};
  for (const MergedWindow& w : windows)
    t.rows.push_back({w.config, strf("%lld", static_cast<long long>(w.t_start_ns)),
                      strf("%lld", static_cast<long long>(w.t_end_ns)), strf("%.4f", w.mean_w),
                      strf("%d", w.sample_count), w.flagged ? "1" : "0"});
  csv::write_table(path, t);
}

}  // namespace pmchar
