#pragma once

#include <iosfwd>

#include "phil/harness/config.hpp"
#include "phil/harness/recording.hpp"
#include "phil/transport.hpp"

namespace phil {

/// Runs the grid and microgrid loops on two threads for horizon/dt steps.
/// Failures surface as the typed error of the loop that failed first.
Recording run_scenario(const ScenarioConfig& config);

/// Loopback delay measurement with the scenario's dt and transport.
DelayReport run_benchmark(const ScenarioConfig& config);

void print_delay_report(std::ostream& out, const DelayReport& report);

} // namespace phil
