#include "rbdpipe/dynamics.hpp"

#include <stdexcept>

#include "rbdpipe/trig.hpp"

namespace rbdpipe {

RobotState RobotState::zero(const RobotModel& model) {
  RobotState s;
  s.q = VecX::Zero(model.n_dof());
  s.qd = VecX::Zero(model.n_dof());
  s.qdd_or_tau = VecX::Zero(model.n_dof());
  s.f_ext.assign(model.n_bodies(), SpatialVector::Zero());
  return s;
}

void trig_approx(const VecX& q, VecX& sinq, VecX& cosq) {
  sincos_poly(q, sinq, cosq);
}

void ensure_trig(RobotState& state) {
  if (state.sinq.size() != state.q.size()) {
    trig_approx(state.q, state.sinq, state.cosq);
  }
}

const char* function_name(FunctionId f) {
  switch (f) {
    case FunctionId::ID: return "ID";
    case FunctionId::FD: return "FD";
    case FunctionId::M: return "M";
    case FunctionId::Minv: return "Minv";
    case FunctionId::dID: return "dID";
    case FunctionId::dFD: return "dFD";
    case FunctionId::diFD: return "diFD";
  }
  return "?";
}

std::optional<FunctionId> function_from_name(const std::string& s) {
  for (FunctionId f : {FunctionId::ID, FunctionId::FD, FunctionId::M, FunctionId::Minv,
                       FunctionId::dID, FunctionId::dFD, FunctionId::diFD}) {
    if (s == function_name(f)) return f;
  }
  return std::nullopt;
}

void validate_flags(const FunctionCall& call) {
  const bool minv_ok = call.fn == FunctionId::M || call.fn == FunctionId::Minv ||
                       call.fn == FunctionId::dFD;
  if (call.out_Minv && !minv_ok) {
    throw std::invalid_argument("out_Minv is only meaningful for M, Minv and dFD");
  }
  if (call.out_M && !(call.fn == FunctionId::M || call.fn == FunctionId::Minv)) {
    throw std::invalid_argument("out_M is only meaningful for M and Minv");
  }
}

namespace detail {

void check_state(const RobotModel& model, const RobotState& state) {
  const int n = model.n_dof();
  if (state.q.size() != n || state.qd.size() != n || state.qdd_or_tau.size() != n) {
    throw std::invalid_argument("state dimension does not match model dof count");
  }
  if (!state.f_ext.empty() && static_cast<int>(state.f_ext.size()) != model.n_bodies()) {
    throw std::invalid_argument("f_ext must have one entry per link");
  }
}

void root_boundary(const RobotModel& model, const RobotState& state, SpatialVector& v0,
                   SpatialVector& a0) {
  if (model.root_mode == RootMode::StateInjected) {
    v0 = state.base_velocity;
    a0 = state.base_acceleration;
  } else {
    v0 = SpatialVector::Zero();
    a0 = {Vec3::Zero(), -model.gravity};
  }
}

void resize_core(const RobotModel& model, DynamicsWorkspace& ws) {
  const size_t nb = model.n_bodies();
  ws.v.resize(nb);
  ws.a.resize(nb);
  ws.f.resize(nb);
  ws.X.resize(nb);
  ws.jeval.resize(nb);
}

}  // namespace detail

VecX rnea(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws) {
  detail::check_state(model, state);
  ensure_trig(state);
  detail::resize_core(model, ws);

  const int nb = model.n_bodies();
  SpatialVector v0, a0;
  detail::root_boundary(model, state, v0, a0);

  for (int i = 0; i < nb; ++i) {
    const int off = model.dof_offset(i);
    const int nd = model.dof(i);
    eval_joint(model.joints[i], state.q.segment(off, nd), state.sinq.segment(off, nd),
               state.cosq.segment(off, nd), ws.jeval[i]);
    ws.X[i] = ws.jeval[i].X * model.fixed_xform[i];

    const int lam = model.parent[i];
    const SpatialVector& vp = lam < 0 ? v0 : ws.v[lam];
    const SpatialVector& ap = lam < 0 ? a0 : ws.a[lam];
    const SpatialVector vJ = model.S[i].apply(state.qd.segment(off, nd));

    ws.v[i] = xform_motion(ws.X[i], vp) + vJ;
    ws.a[i] = xform_motion(ws.X[i], ap) + model.S[i].apply(state.qdd_or_tau.segment(off, nd)) +
              cross_motion(ws.v[i], vJ);
    ws.f[i] = inertia_apply(model.inertia[i], ws.a[i]) +
              cross_force(ws.v[i], inertia_apply(model.inertia[i], ws.v[i]));
    if (!state.f_ext.empty()) ws.f[i] -= state.f_ext[i];
  }

  VecX tau(model.n_dof());
  JointEval je;
  for (int i = nb - 1; i >= 0; --i) {
    // Pull each child's finished wrench through a freshly recomputed joint
    // transform; additions happen at the parent's turn, in descending child
    // order, matching the in-place evaluation bit for bit.
    const auto& kids = model.children(i);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      const int c = *it;
      const int coff = model.dof_offset(c);
      const int cnd = model.dof(c);
      eval_joint(model.joints[c], state.q.segment(coff, cnd), state.sinq.segment(coff, cnd),
                 state.cosq.segment(coff, cnd), je);
      const SpatialTransform Xc = je.X * model.fixed_xform[c];
      ws.f[i] += xform_force_transpose(Xc, ws.f[c]);
    }
    tau.segment(model.dof_offset(i), model.dof(i)) = model.S[i].apply_transpose(ws.f[i]);
  }

  ws.stamp_q = state.q;
  ws.stamp_qd = state.qd;
  ws.stamp_qdd = state.qdd_or_tau;
  ws.has_rnea = true;
  return tau;
}

VecX fd(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws, MatX* minv_out) {
  detail::check_state(model, state);
  const VecX tau_in = state.qdd_or_tau;
  state.qdd_or_tau = VecX::Zero(model.n_dof());
  const VecX bias = rnea(model, state, ws);
  state.qdd_or_tau = tau_in;
  const MassMatrixResult mm = mminv_gen(model, state, false, true, ws);
  const VecX qdd = (*mm.Minv) * (tau_in - bias);
  if (minv_out) *minv_out = *mm.Minv;
  return qdd;
}

DerivativeBlocks difd(const RobotModel& model, RobotState& state, const MatX& minv,
                      DynamicsWorkspace& ws) {
  if (minv.rows() != model.n_dof() || minv.cols() != model.n_dof()) {
    throw std::invalid_argument("difd: Minv dimension mismatch");
  }
  rnea(model, state, ws);
  const DerivativeBlocks id = drnea(model, state, ws);
  return {-minv * id.d_dq, -minv * id.d_dqd};
}

DerivativeBlocks dfd(const RobotModel& model, RobotState& state, DynamicsWorkspace& ws,
                     MatX* minv_out) {
  MatX minv;
  const VecX qdd = fd(model, state, ws, &minv);
  const VecX tau_in = state.qdd_or_tau;
  state.qdd_or_tau = qdd;
  DerivativeBlocks out = difd(model, state, minv, ws);
  state.qdd_or_tau = tau_in;
  if (minv_out) *minv_out = std::move(minv);
  return out;
}

std::vector<SpatialVector> world_forces_to_local(const RobotModel& model, RobotState& state,
                                                 const std::vector<SpatialVector>& f_world) {
  if (static_cast<int>(f_world.size()) != model.n_bodies()) {
    throw std::invalid_argument("world_forces_to_local: one wrench per link required");
  }
  ensure_trig(state);
  std::vector<SpatialTransform> Xw(model.n_bodies());
  std::vector<SpatialVector> out(model.n_bodies());
  JointEval je;
  for (int i = 0; i < model.n_bodies(); ++i) {
    const int off = model.dof_offset(i);
    const int nd = model.dof(i);
    eval_joint(model.joints[i], state.q.segment(off, nd), state.sinq.segment(off, nd),
               state.cosq.segment(off, nd), je);
    const SpatialTransform Xi = je.X * model.fixed_xform[i];
    Xw[i] = model.parent[i] < 0 ? Xi : Xi * Xw[model.parent[i]];
    out[i] = xform_force_star(Xw[i], f_world[i]);
  }
  return out;
}

}  // namespace rbdpipe
