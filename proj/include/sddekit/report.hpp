#pragma once

#include "sddekit/experiments.hpp"
#include "sddekit/stability.hpp"
#include "sddekit/stepper.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace sddekit {

inline constexpr const char* kVersion = "0.3.0";

/// Shortest round-trip decimal form ("%.17g").
std::string format_number(double value);

/// Columns t,y0..y{d-1}; last line "# status=<status>".
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Columns problem,scheme,h,eps,std_error,blowups,failures,samples,order.
void write_report_csv(std::ostream& os, const ExperimentReport& report);

/// Columns h followed by one column per "<problem>:<scheme>".
void write_table1_csv(std::ostream& os, const Table1& table);

/// Columns scheme,h,t,mean_sq,divergent (one block per trace).
void write_trace_csv(std::ostream& os, const std::vector<StabilityTrace>& traces);

nlohmann::json to_json(const StabilityProfile& profile);
nlohmann::json to_json(const ExperimentReport& report);

/// Aligned plain-text rendering of a profile.
std::string format_profile(const StabilityProfile& profile);

}  // namespace sddekit
