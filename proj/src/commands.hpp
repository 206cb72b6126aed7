#pragma once

#include "config.hpp"
#include "report.hpp"

namespace elicit {

/// Runs simulate, estimate-le, test-le, estimate-mrt or montecarlo. Side
/// outputs (simulated data, plot CSV) are written atomically; the report
/// itself is returned for the caller to render.
Report run_subcommand(const RunConfig& config);

/// p < 0.05, p < 0.1, otherwise.
const char* significance_marker(double p_value);

}  // namespace elicit
