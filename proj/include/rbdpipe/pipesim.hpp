#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rbdpipe/dynamics.hpp"
#include "rbdpipe/model.hpp"

namespace rbdpipe::pipesim {

enum class StageKind { Rf, Rb, Df, Db, Mb, Mf, Broadcast, Reduce, Trig, Schedule, Feedback };

const char* stage_kind_name(StageKind k);

/// One pipeline stage: a per-joint submodule or an auxiliary node. A stage
/// accepts a new token once its initiation interval has elapsed, all input
/// FIFOs hold the token's data and every output FIFO has room.
struct StageSpec {
  int id{0};
  StageKind kind{StageKind::Rf};
  int joint_id{-1};
  int latency{1};
  int initiation_interval{1};
  int branch{-1};           // branch array this stage belongs to (-1: root/aux)
  int tokens_per_task{1};   // multiplexed arrays see this many tokens per task
  /// Join stages consume a full task (all replicas on every input edge) per
  /// acceptance instead of one token.
  bool join{false};
};

/// FIFO edge. src/dst are stage ids; src = -1 is the input stream, dst = -2
/// the output sink. Data on feedback edges re-enters the input stream
/// tagged with the task's next micro-instruction.
struct FifoEdge {
  int src{-1};
  int dst{-2};
  int capacity{2};
  int tokens_per_task{1};
  std::vector<int> insts{0};  // micro-instruction passes routed over this edge
  bool feedback{false};
};

struct PipelineGraph {
  FunctionId function_id{FunctionId::ID};
  std::vector<StageSpec> stages;
  std::vector<FifoEdge> edges;
  BranchLayout branch_map;
  int n_insts{1};
  int source_ii{1};
};

/// Stage cost coefficients and pipeline build knobs. Values are calibration
/// data: they ship in a config file, not in code.
struct PipelineConfig {
  // Depth-independent per-joint costs, scaled by dof; one-hot
  // revolute/prismatic joints take the cheap path.
  double rf_base{3.0}, rb_base{2.0}, mb_base{3.0}, mf_base{2.0};
  double dof_step{1.5};  // extra cost per dof beyond the first
  // Derivative stages grow affinely with the iteration depth:
  // cost = a + b * depth * dof.
  double df_a{0.0}, df_b{1.0};
  double db_a{0.0}, db_b{1.0};
  double broadcast_cost{1.0}, reduce_cost{1.0}, schedule_cost{2.0}, feedback_cost{1.0};
  double trig_cost{1.0}, boundary_cost{2.0};
  int latency_pad{1};
  int fifo_capacity{2};
  int source_ii{1};
  MultiplexPolicy multiplex{MultiplexPolicy::Pairs};
};

PipelineConfig load_pipeline_config(const std::string& path);

/// Cost model for one submodule: initiation interval and latency from the
/// joint type, its iteration depth within the chain, and the stage kind.
StageSpec cost_model(const JointType& joint, int depth, StageKind kind,
                     const PipelineConfig& cfg = {});

/// Build the stage graph for one function over a branch layout: forward
/// stages out and backward stages home per branch with bypass FIFOs sized
/// so shallow joints' data waits without stalling; broadcast after the root
/// forward stages and reduce before the backward ones; reversed dataflow
/// (leaf-first) for the mass-matrix functions; derivative passes route
/// through Schedule, and dFD re-issues each task through a Feedback stage
/// for its second pass. Trig and I/O live in the source/sink boundary.
PipelineGraph build_pipeline(const RobotModel& model, const BranchLayout& layout,
                             FunctionId function_id, const PipelineConfig& cfg = {});

/// Batched work: tasks with optional predecessor dependencies.
struct Task {
  int id{0};
  std::vector<int> deps;
  FunctionId function_id{FunctionId::ID};
};

struct TaskSet {
  std::vector<Task> tasks;
  static TaskSet independent(int count, FunctionId fn = FunctionId::ID);
  /// `points` chains of `length` serially dependent sub-tasks each.
  static TaskSet chains(int points, int length, FunctionId fn = FunctionId::ID);
};

enum class SchedulePolicy {
  EligibleFirst,  // dependency-aware: ready tasks fill pipeline bubbles
  StrictOrder,    // issue strictly in listing order, stalling on dependencies
};

struct TaskTrace {
  int id{0};
  std::int64_t issue{-1};
  std::int64_t finish{-1};
};

struct TraceReport {
  std::vector<TaskTrace> tasks;
  std::vector<std::int64_t> stage_busy;    // cycles each stage spent accepting work
  std::vector<std::int64_t> stage_tokens;  // tokens accepted per stage
  std::vector<int> fifo_high_water;        // per edge
  std::int64_t makespan{0};
  std::int64_t first_latency{0};           // finish - issue of the first task
  double steady_ii{0.0};                   // (makespan - first_latency) / (B - 1)
  std::vector<int> issue_order;            // task ids in issue order
};

class DeadlockError : public std::runtime_error {
 public:
  DeadlockError(std::string msg, std::int64_t cycle) : std::runtime_error(std::move(msg)), blocked_cycle(cycle) {}
  std::int64_t blocked_cycle;
};

/// Deterministic discrete-event execution of a task set through the graph.
/// Backpressure stalls and never drops; ties break by task id, then stage
/// id. Throws DeadlockError (with the blocked cycle and FIFO states in the
/// message) if no event can fire while tasks remain.
TraceReport simulate(const PipelineGraph& graph, const TaskSet& tasks,
                     SchedulePolicy policy = SchedulePolicy::EligibleFirst);

/// Issue order a simulation run produces for this task set (errors out on
/// dependency cycles without running).
std::vector<int> schedule_tasks(const TaskSet& tasks, const PipelineGraph& graph,
                                SchedulePolicy policy = SchedulePolicy::EligibleFirst);

/// Largest per-task initiation interval along the task path: the
/// steady-state throughput bound.
double bottleneck_interval(const PipelineGraph& graph);

/// Human-readable summary.
std::string report_text(const TraceReport& trace, const PipelineGraph& graph);
/// Line-delimited structured records (one JSON object per line).
std::string report_records(const TraceReport& trace, const PipelineGraph& graph);

}  // namespace rbdpipe::pipesim
