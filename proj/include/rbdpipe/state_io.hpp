#pragma once

#include <string>
#include <vector>

#include "rbdpipe/dynamics.hpp"

namespace rbdpipe {

/// A batch job read from a state file: the function to run and one entry
/// per task.
struct StateBatch {
  FunctionCall call;
  std::vector<RobotState> states;
};

/// Parse a state document: {"function": ..., "states": [{q, qd, qdd|tau,
/// f_ext?, minv?, base_velocity?, base_acceleration?}, ...]}. Vector
/// lengths are validated against the model.
StateBatch parse_states(const RobotModel& model, const std::string& text);
StateBatch load_states(const RobotModel& model, const std::string& path);

/// Serialize a batch of task results in the same document style; parsing
/// the emitted text again yields bit-identical values.
std::string format_results(const RobotModel& model, const FunctionCall& call,
                           const std::vector<TaskResult>& results);

/// Deterministic state generator for seeded benchmark/compute runs.
std::vector<RobotState> generate_states(const RobotModel& model, FunctionId fn,
                                        std::uint64_t seed, int count);

}  // namespace rbdpipe
