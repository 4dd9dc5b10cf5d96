// SPDX-License-Identifier: Apache-2.0
#pragma once

// Helpers shared by the probe implementations.  Internal to src/.

#include <string>
#include <vector>

#include "pmchar/platform.hpp"
#include "pmchar/powertrace.hpp"
#include "pmchar/probes.hpp"

namespace pmchar::probes {

// Number formatting for report rows: round-trips doubles we care about
// without printing 17 digits of everything.
std::string num(double v);

void write_report(const Context& ctx, const csv::Table& t, const std::string& name);
void write_schedule(const Context& ctx, const std::vector<ScheduleEntry>& schedule,
                    const std::string& name);
void write_trace(const Context& ctx, const PowerTrace& trace, const std::string& name);

// Lets pending set-point updates apply and any transition grace window lapse.
void settle(Platform& p, double ms = 8.0);

// Sets every online hardware thread of one core / of all cores.
void set_core_hz(Platform& p, int core, double hz);
void set_all_cores_hz(Platform& p, double hz);

// Distinct core ids covered by a CCX, ascending.
std::vector<int> ccx_cores(const Topology& topo, int ccx);

// System-power recording around a probe: on the simulated backend this is the
// built-in capture (with the model's sample noise); on hardware the recording
// comes from an external meter, so finish() reports no samples and the probe
// leaves means unfilled.
class SysPowerCapture {
 public:
  SysPowerCapture(Platform& p, double rate_hz);
  PowerTrace finish();
  bool active() const { return active_; }

 private:
  Platform& p_;
  bool active_ = false;
};

}  // namespace pmchar::probes
