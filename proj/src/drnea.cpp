#include <stdexcept>

#include "rbdpipe/dynamics.hpp"

namespace rbdpipe {

namespace detail {
void root_boundary(const RobotModel& model, const RobotState& state, SpatialVector& v0,
                   SpatialVector& a0);
}

namespace {

SpatialVector col_sv(const MatX& m, int j) {
  return {m.block<3, 1>(0, j), m.block<3, 1>(3, j)};
}

void set_col(MatX& m, int j, const SpatialVector& v) {
  m.block<3, 1>(0, j) = v.angular;
  m.block<3, 1>(3, j) = v.linear;
}

void add_col(MatX& m, int j, const SpatialVector& v) {
  m.block<3, 1>(0, j) += v.angular;
  m.block<3, 1>(3, j) += v.linear;
}

}  // namespace

DerivativeBlocks drnea(const RobotModel& model, const RobotState& state, DynamicsWorkspace& ws) {
  if (!ws.has_rnea || ws.stamp_q != state.q || ws.stamp_qd != state.qd ||
      ws.stamp_qdd != state.qdd_or_tau) {
    throw std::invalid_argument("drnea: workspace does not hold an rnea evaluation of this state");
  }

  const int nb = model.n_bodies();
  const int n = model.n_dof();
  auto prep = [&](std::vector<MatX>& buf) {
    buf.resize(nb);
    for (auto& m : buf) {
      m.resize(6, n);
      m.setZero();
    }
  };
  prep(ws.dv_q);
  prep(ws.da_q);
  prep(ws.dv_qd);
  prep(ws.da_qd);
  prep(ws.dfl_q);
  prep(ws.dfl_qd);
  prep(ws.dfa_q);
  prep(ws.dfa_qd);

  SpatialVector v0, a0;
  detail::root_boundary(model, state, v0, a0);

  // Forward sweep: per link, derivative columns for its own dofs plus every
  // ancestor dof. The active column count grows with the iteration depth.
  for (int i = 0; i < nb; ++i) {
    const int lam = model.parent[i];
    const int off = model.dof_offset(i);
    const int nd = model.dof(i);
    const SpatialTransform& X = ws.X[i];
    const SpatialInertia& I = model.inertia[i];

    const SpatialVector& vp = lam < 0 ? v0 : ws.v[lam];
    const SpatialVector& ap = lam < 0 ? a0 : ws.a[lam];
    const SpatialVector Xv = xform_motion(X, vp);
    const SpatialVector Xa = xform_motion(X, ap);
    const SpatialVector vJ = model.S[i].apply(state.qd.segment(off, nd));
    const SpatialVector Iv = inertia_apply(I, ws.v[i]);

    auto local_force = [&](const SpatialVector& dv, const SpatialVector& da) {
      return inertia_apply(I, da) + cross_force(dv, Iv) + cross_force(ws.v[i], inertia_apply(I, dv));
    };

    for (int g = 0; g < nd; ++g) {
      const int col = off + g;
      const SpatialVector& psi = ws.jeval[i].psi[g];
      const SpatialVector dv = -cross_motion(psi, Xv);
      const SpatialVector da = -cross_motion(psi, Xa) + cross_motion(dv, vJ);
      set_col(ws.dv_q[i], col, dv);
      set_col(ws.da_q[i], col, da);
      set_col(ws.dfl_q[i], col, local_force(dv, da));

      const SpatialVector sg = model.S[i].column(g);
      const SpatialVector dav = cross_motion(sg, vJ) + cross_motion(ws.v[i], sg);
      set_col(ws.dv_qd[i], col, sg);
      set_col(ws.da_qd[i], col, dav);
      set_col(ws.dfl_qd[i], col, local_force(sg, dav));
    }
    if (lam >= 0) {
      for (int col : model.ancestor_cols(lam)) {
        const SpatialVector dv = xform_motion(X, col_sv(ws.dv_q[lam], col));
        const SpatialVector da =
            xform_motion(X, col_sv(ws.da_q[lam], col)) + cross_motion(dv, vJ);
        set_col(ws.dv_q[i], col, dv);
        set_col(ws.da_q[i], col, da);
        set_col(ws.dfl_q[i], col, local_force(dv, da));

        const SpatialVector dvv = xform_motion(X, col_sv(ws.dv_qd[lam], col));
        const SpatialVector dav =
            xform_motion(X, col_sv(ws.da_qd[lam], col)) + cross_motion(dvv, vJ);
        set_col(ws.dv_qd[i], col, dvv);
        set_col(ws.da_qd[i], col, dav);
        set_col(ws.dfl_qd[i], col, local_force(dvv, dav));
      }
    }
  }

  // Backward sweep: accumulate wrench derivatives toward the root. The
  // transmission through joint c additionally picks up the variation of the
  // transform itself against the accumulated wrench f_c.
  DerivativeBlocks out;
  out.d_dq = MatX::Zero(n, n);
  out.d_dqd = MatX::Zero(n, n);

  for (int i = nb - 1; i >= 0; --i) {
    for (int col : model.ancestor_cols(i)) {
      add_col(ws.dfa_q[i], col, col_sv(ws.dfl_q[i], col));
      add_col(ws.dfa_qd[i], col, col_sv(ws.dfl_qd[i], col));
    }
    const auto& kids = model.children(i);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      const int c = *it;
      const SpatialTransform& Xc = ws.X[c];
      const int coff = model.dof_offset(c);
      const int cnd = model.dof(c);
      // Columns a child can carry: its ancestors plus its own subtree.
      for (int col : model.ancestor_cols(c)) {
        SpatialVector w = col_sv(ws.dfa_q[c], col);
        if (col >= coff && col < coff + cnd) {
          w += cross_force(ws.jeval[c].psi[col - coff], ws.f[c]);
        }
        add_col(ws.dfa_q[i], col, xform_force_transpose(Xc, w));
        add_col(ws.dfa_qd[i], col, xform_force_transpose(Xc, col_sv(ws.dfa_qd[c], col)));
      }
      const auto& sub = model.subtree_cols(c);
      for (size_t k = cnd; k < sub.size(); ++k) {
        const int col = sub[k];
        add_col(ws.dfa_q[i], col, xform_force_transpose(Xc, col_sv(ws.dfa_q[c], col)));
        add_col(ws.dfa_qd[i], col, xform_force_transpose(Xc, col_sv(ws.dfa_qd[c], col)));
      }
    }

    const int off = model.dof_offset(i);
    const int nd = model.dof(i);
    auto emit = [&](int col) {
      out.d_dq.block(off, col, nd, 1) = model.S[i].apply_transpose(col_sv(ws.dfa_q[i], col));
      out.d_dqd.block(off, col, nd, 1) = model.S[i].apply_transpose(col_sv(ws.dfa_qd[i], col));
    };
    for (int col : model.ancestor_cols(i)) emit(col);
    const auto& sub = model.subtree_cols(i);
    for (size_t k = nd; k < sub.size(); ++k) emit(sub[k]);
  }
  return out;
}

}  // namespace rbdpipe
