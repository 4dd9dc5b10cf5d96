// SPDX-License-Identifier: Apache-2.0
#include "pmchar/platform.hpp"

#include <cmath>

#include "pmchar/util.hpp"

namespace pmchar {

const char* to_string(Domain d) {
  return d == Domain::package ? "package" : "core";
}

double energy_delta_joules(const EnergyReading& before, const EnergyReading& after) {
  if (before.domain != after.domain || before.locus != after.locus)
    fail("energy delta across different counters");
  if (before.esu != after.esu) fail("energy delta across different counter scales");
  uint32_t d = after.raw - before.raw;  // unsigned wrap gives the true delta
  return std::ldexp(static_cast<double>(d), -before.esu);
}

double effective_hz(const CounterSnapshot& before, const CounterSnapshot& after, double nominal_hz) {
  uint64_t da = after.aperf - before.aperf;
  uint64_t dm = after.mperf - before.mperf;
  if (dm == 0) fail("effective frequency: reference counter did not advance");
  return nominal_hz * static_cast<double>(da) / static_cast<double>(dm);
}

const char* to_string(WorkloadClass w) {
  switch (w) {
    case WorkloadClass::idle: return "idle";
    case WorkloadClass::pause_loop: return "pause_loop";
    case WorkloadClass::busy_loop: return "busy_loop";
    case WorkloadClass::scalar_add: return "scalar_add";
    case WorkloadClass::wide_mul: return "wide_mul";
    case WorkloadClass::wide_fma: return "wide_fma";
    case WorkloadClass::sqrt_chain: return "sqrt_chain";
    case WorkloadClass::memory_read: return "memory_read";
    case WorkloadClass::memory_write: return "memory_write";
    case WorkloadClass::triad: return "triad";
    case WorkloadClass::fma_saturate: return "fma_saturate";
    case WorkloadClass::wide_xor: return "wide_xor";
    case WorkloadClass::shift_right: return "shift_right";
    case WorkloadClass::minimal_timed: return "minimal_timed";
    case WorkloadClass::pointer_chase: return "pointer_chase";
  }
  return "?";
}

WorkloadClass workload_class_from_string(const std::string& s) {
  static const WorkloadClass all[] = {
      WorkloadClass::idle,          WorkloadClass::pause_loop,  WorkloadClass::busy_loop,
      WorkloadClass::scalar_add,    WorkloadClass::wide_mul,    WorkloadClass::wide_fma,
      WorkloadClass::sqrt_chain,    WorkloadClass::memory_read, WorkloadClass::memory_write,
      WorkloadClass::triad,         WorkloadClass::fma_saturate, WorkloadClass::wide_xor,
      WorkloadClass::shift_right,   WorkloadClass::minimal_timed, WorkloadClass::pointer_chase,
  };
  for (WorkloadClass w : all)
    if (s == to_string(w)) return w;
  fail(strf("unknown workload class '%s'", s.c_str()));
}

void Platform::require_valid_frequency(double hz) const {
  std::string avail;
  for (double f : available_frequencies()) {
    if (f == hz) return;
    if (!avail.empty()) avail += ", ";
    avail += strf("%.0f", f);
  }
  fail(strf("frequency %.0f Hz not offered by this platform (available: %s)", hz, avail.c_str()));
}

}  // namespace pmchar
