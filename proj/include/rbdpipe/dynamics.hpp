#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbdpipe/model.hpp"

namespace rbdpipe {

/// One task's inputs. qdd_or_tau is read as joint accelerations by the
/// inverse-dynamics family and as joint forces by the forward-dynamics
/// family. External forces are expressed in each link's own joint frame
/// (see world_forces_to_local for the conversion helper).
struct RobotState {
  VecX q;
  VecX qd;
  VecX qdd_or_tau;
  std::vector<SpatialVector> f_ext;  // empty means zero
  VecX sinq, cosq;                   // cached trig, filled on demand

  // Used when the model root_mode is StateInjected: spatial velocity and
  // acceleration of the anchor, expressed in the anchor frame. The
  // acceleration must already include the -gravity offset if gravity is
  // wanted.
  SpatialVector base_velocity{};
  SpatialVector base_acceleration{};

  static RobotState zero(const RobotModel& model);
};

/// Fill sinq/cosq from q if not already cached.
void ensure_trig(RobotState& state);

/// sin/cos of every entry of q (the shared trig front-end of all dynamics
/// functions).
void trig_approx(const VecX& q, VecX& sinq, VecX& cosq);

/// Analytic derivative blocks: d_dq and d_dqd are N x N matrices holding
/// the partials of tau (or qdd) with respect to q and qd.
struct DerivativeBlocks {
  MatX d_dq;
  MatX d_dqd;
};

/// Per-task intermediates, reusable across calls. rnea leaves the data its
/// derivative pass consumes (v, a, accumulated f, joint transforms and
/// derivative axes); mminv_gen keeps its factorization buffers here too.
struct DynamicsWorkspace {
  // Recursion values per link.
  std::vector<SpatialVector> v, a, f;
  std::vector<SpatialTransform> X;
  std::vector<JointEval> jeval;

  // Derivative column buffers per link (6 x N, only ancestor columns are
  // meaningful; their count grows with the iteration depth).
  std::vector<MatX> dv_q, da_q, dv_qd, da_qd, dfl_q, dfl_qd, dfa_q, dfa_qd;

  // Mass-matrix sweep buffers.
  std::vector<Mat6> IA;                 // composite accumulators (M path)
  std::vector<Mat6> IA_articulated;     // deflated accumulators (Minv path)
  std::vector<MatX> U, Uinv_side, F, F_minv, P;
  std::vector<MatX> D, Dinv;

  // Stamp of the state rnea last ran with (drnea validates against it).
  VecX stamp_q, stamp_qd, stamp_qdd;
  bool has_rnea{false};
};

/// Inverse dynamics (recursive Newton-Euler): joint forces realizing the
/// state's accelerations. The backward pass recomputes each joint transform
/// from the cached sin/cos instead of buffering the forward one, and parent
/// force accumulation is deferred to the parent's own turn; both choices
/// are bit-identical to the straightforward evaluation.
VecX rnea(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws);

/// Analytic partials of rnea at the state it last evaluated: d tau / dq and
/// d tau / dqd. Only columns belonging to each link's ancestor chain are
/// touched on the way down, and entries outside the branch-induced
/// sparsity pattern are exact zeros.
DerivativeBlocks drnea(const RobotModel& model, const RobotState& state, DynamicsWorkspace& ws);

struct MassMatrixResult {
  std::optional<MatX> M;
  std::optional<MatX> Minv;
};

/// Column-computation order for the symmetric accumulator update inside
/// mminv_gen: Priority emits the motion-subspace column on the critical
/// path first. Results are identical either way.
enum class AccumulatorOrder { Natural, Priority };

/// Joint-space inertia matrix and/or its inverse from one shared backward
/// sweep (composite-inertia accumulation for M, articulated-body
/// factorization for Minv) plus a forward substitution for Minv. Only
/// upper-triangle slices are computed; outputs are symmetrized, with
/// structural zeros written as exact zeros.
MassMatrixResult mminv_gen(const RobotModel& model, RobotState& state, bool out_M,
                           bool out_Minv, DynamicsWorkspace& ws,
                           AccumulatorOrder order = AccumulatorOrder::Priority);

/// Forward dynamics by composition: qdd = Minv(q) * (tau - C) with
/// C = rnea(q, qd, 0, f_ext). Optionally exposes the Minv by-product.
VecX fd(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws,
        MatX* minv_out = nullptr);

/// Derivatives of forward dynamics: stage 1 computes qdd = fd (with Minv as
/// a by-product), stage 2 evaluates the inverse-dynamics derivatives at
/// that qdd, stage 3 composes d qdd/du = -Minv * d tau/du.
DerivativeBlocks dfd(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws,
                     MatX* minv_out = nullptr);

/// Same as dfd but with qdd (in state.qdd_or_tau) and Minv supplied by the
/// caller, skipping stage 1. Consistency of the inputs is the caller's
/// contract; with inputs from a prior fd + mminv_gen call the result equals
/// dfd bit for bit.
DerivativeBlocks difd(const RobotModel& model, RobotState& state, const MatX& minv,
                      DynamicsWorkspace& ws);

/// Re-express per-link external forces given in world coordinates into each
/// link's own frame at configuration q.
std::vector<SpatialVector> world_forces_to_local(const RobotModel& model, RobotState& state,
                                                 const std::vector<SpatialVector>& f_world);

enum class FunctionId { ID, FD, M, Minv, dID, dFD, diFD };

const char* function_name(FunctionId f);
std::optional<FunctionId> function_from_name(const std::string& s);

/// Function selector plus option flags (out_Minv is meaningful for M, Minv
/// and dFD only; a root-mode override re-anchors the model for the whole
/// batch).
struct FunctionCall {
  FunctionId fn{FunctionId::ID};
  bool out_M{false};
  bool out_Minv{false};
  std::optional<RootMode> root_mode_override;
  /// diFD: per-task Minv input; when empty it is recomputed from q.
  std::vector<MatX> minv_inputs;
};

void validate_flags(const FunctionCall& call);

/// Outputs of one batched task. Only the members implied by the function
/// are filled; `error` is non-empty when this task failed (the batch
/// continues regardless).
struct TaskResult {
  VecX tau;
  VecX qdd;
  std::optional<MatX> M;
  std::optional<MatX> Minv;
  std::optional<DerivativeBlocks> deriv;
  std::string error;
};

/// Evaluate one function over a batch of states. Results are ordered like
/// the inputs and identical to sequential single calls; tasks may be
/// processed in parallel (thread count from the RBDPIPE_THREADS environment
/// variable, default hardware concurrency).
std::vector<TaskResult> batch_evaluate(const RobotModel& model, const FunctionCall& call,
                                       std::vector<RobotState>& states);

}  // namespace rbdpipe
