#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "mveq/feedback_solver.hpp"
#include "mveq/mixed_solver.hpp"
#include "mveq/open_loop_solver.hpp"
#include "mveq/policy.hpp"

namespace mveq {

/// Header "stage,K_1..K_m,c_1..c_m", one row per stage, full precision.
void write_policy_csv(std::ostream& out, const AffinePolicy& policy);
/// Fixed-point table with `decimals` places, as printed in reports.
std::string format_policy_table(const AffinePolicy& policy, int decimals = 4);
nlohmann::json policy_to_json(const AffinePolicy& policy);

/// One row per stage k = 0..N; per-stage columns are empty at k = N and for
/// stages that were not solved.
void write_trace_csv(std::ostream& out, const OpenLoopTrace& trace);
void write_trace_csv(std::ostream& out, const FeedbackTrace& trace);
void write_trace_csv(std::ostream& out, const MixedTrace& trace);

nlohmann::json trace_to_json(const OpenLoopTrace& trace);
nlohmann::json trace_to_json(const FeedbackTrace& trace);
nlohmann::json trace_to_json(const MixedTrace& trace);

}  // namespace mveq
