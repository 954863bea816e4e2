#include <stdexcept>

#include "rbdpipe/dynamics.hpp"

namespace rbdpipe {
namespace {

SpatialVector col_sv(const MatX& m, int j) {
  return {m.block<3, 1>(0, j), m.block<3, 1>(3, j)};
}

void set_col(MatX& m, int j, const SpatialVector& v) {
  m.block<3, 1>(0, j) = v.angular;
  m.block<3, 1>(3, j) = v.linear;
}

Mat6 inertia_matrix(const SpatialInertia& I) {
  Mat6 m;
  const Mat3 hx = skew(I.h);
  m.topLeftCorner<3, 3>() = I.I;
  m.topRightCorner<3, 3>() = hx;
  m.bottomLeftCorner<3, 3>() = -hx;
  m.bottomRightCorner<3, 3>() = I.mass * Mat3::Identity();
  return m;
}

/// Column j of the motion transform X = [R 0; -R tx R] as two 3-vectors.
void xform_column(const SpatialTransform& X, int j, Vec3& top, Vec3& bot) {
  if (j < 3) {
    top = X.R.col(j);
    bot = -X.R * skew(X.t).col(j);
  } else {
    top = Vec3::Zero();
    bot = X.R.col(j - 3);
  }
}

/// Congruence update Y = X^T A X of a symmetric accumulator toward the
/// parent frame. Output columns are produced one at a time; `first_cols`
/// lists the columns on the critical path (those the parent's motion
/// subspace consumes), emitted before the rest. The ordering changes
/// nothing numerically and mirrors the priority-vector transmission split.
Mat6 congruence_to_parent(const SpatialTransform& X, const Mat6& A,
                          const std::vector<int>& first_cols) {
  // T = X^T A via 3x3 blocks.
  const Mat3 Rt = X.R.transpose();
  const Mat3 tx = skew(X.t);
  const Mat3 A11 = A.topLeftCorner<3, 3>(), A12 = A.topRightCorner<3, 3>();
  const Mat3 A21 = A.bottomLeftCorner<3, 3>(), A22 = A.bottomRightCorner<3, 3>();
  Eigen::Matrix<double, 6, 6> T;
  T.topLeftCorner<3, 3>() = Rt * A11 + tx * (Rt * A21);
  T.topRightCorner<3, 3>() = Rt * A12 + tx * (Rt * A22);
  T.bottomLeftCorner<3, 3>() = Rt * A21;
  T.bottomRightCorner<3, 3>() = Rt * A22;

  bool picked[6] = {false, false, false, false, false, false};
  Mat6 Y;
  auto emit = [&](int j) {
    if (picked[j]) return;
    picked[j] = true;
    Vec3 top, bot;
    xform_column(X, j, top, bot);
    Y.col(j) = T.leftCols<3>() * top + T.rightCols<3>() * bot;
  };
  for (int j : first_cols) emit(j);
  for (int j = 0; j < 6; ++j) emit(j);
  return 0.5 * (Y + Y.transpose());
}

/// Rows of S with any nonzero entry: the output columns of the parent-bound
/// accumulator on the critical path.
std::vector<int> priority_columns(const MotionSubspace& S) {
  std::vector<int> cols;
  for (int r = 0; r < 6; ++r) {
    if (S.cols.row(r).cwiseAbs().maxCoeff() > 0.0) cols.push_back(r);
  }
  return cols;
}

}  // namespace

MassMatrixResult mminv_gen(const RobotModel& model, RobotState& state, bool out_M, bool out_Minv,
                           DynamicsWorkspace& ws, AccumulatorOrder order) {
  if (!out_M && !out_Minv) {
    throw std::invalid_argument("mminv_gen: at least one of out_M / out_Minv must be set");
  }
  if (state.q.size() != model.n_dof()) {
    throw std::invalid_argument("mminv_gen: q dimension mismatch");
  }
  ensure_trig(state);

  const int nb = model.n_bodies();
  const int n = model.n_dof();

  ws.X.resize(nb);
  ws.jeval.resize(nb);
  ws.U.resize(nb);
  ws.D.resize(nb);
  ws.Dinv.resize(nb);
  auto prep6n = [&](std::vector<MatX>& buf) {
    buf.resize(nb);
    for (auto& m : buf) {
      m.resize(6, n);
      m.setZero();
    }
  };
  if (out_M) {
    ws.IA.assign(nb, Mat6::Zero());
    prep6n(ws.F);
  }
  if (out_Minv) {
    ws.IA_articulated.assign(nb, Mat6::Zero());
    prep6n(ws.F_minv);
    prep6n(ws.P);
  }

  MassMatrixResult res;
  MatX M = MatX::Zero(n, n);
  MatX Minv = MatX::Zero(n, n);

  // Shared backward sweep: joint transforms are evaluated once; the
  // composite accumulation (M) and the articulated factorization (Minv)
  // ride the same loop.
  for (int i = nb - 1; i >= 0; --i) {
    const int lam = model.parent[i];
    const int off = model.dof_offset(i);
    const int nd = model.dof(i);
    eval_joint(model.joints[i], state.q.segment(off, nd), state.sinq.segment(off, nd),
               state.cosq.segment(off, nd), ws.jeval[i]);
    ws.X[i] = ws.jeval[i].X * model.fixed_xform[i];
    const SpatialTransform& X = ws.X[i];
    const auto& S = model.S[i].cols;
    const Mat6 Ii = inertia_matrix(model.inertia[i]);
    const std::vector<int> prio =
        (order == AccumulatorOrder::Priority && lam >= 0) ? priority_columns(model.S[lam])
                                                          : std::vector<int>{};

    const auto& sub = model.subtree_cols(i);

    if (out_M) {
      ws.IA[i] += Ii;
      const MatX U = ws.IA[i] * S;                       // 6 x nd
      M.block(off, off, nd, nd) = S.transpose() * U;     // D
      for (size_t k = nd; k < sub.size(); ++k) {
        const int col = sub[k];
        M.block(off, col, nd, 1) = S.transpose() * ws.F[i].col(col);
      }
      if (lam >= 0) {
        ws.F[i].middleCols(off, nd) = U;
        for (int col : sub) {
          set_col(ws.F[lam], col,
                  col_sv(ws.F[lam], col) + xform_force_transpose(X, col_sv(ws.F[i], col)));
        }
        ws.IA[lam] += congruence_to_parent(X, ws.IA[i], prio);
      }
    }

    if (out_Minv) {
      ws.IA_articulated[i] += Ii;
      MatX U = ws.IA_articulated[i] * S;  // 6 x nd
      MatX D = S.transpose() * U;
      D = (0.5 * (D + D.transpose())).eval();
      const MatX Dinv = (nd == 1) ? MatX::Constant(1, 1, 1.0 / D(0, 0))
                                  : MatX(D.inverse());
      ws.U[i] = U;
      ws.D[i] = D;
      ws.Dinv[i] = Dinv;

      Minv.block(off, off, nd, nd) = Dinv;
      for (size_t k = nd; k < sub.size(); ++k) {
        const int col = sub[k];
        Minv.block(off, col, nd, 1) = -Dinv * (S.transpose() * ws.F_minv[i].col(col));
      }
      if (lam >= 0) {
        for (int col : sub) {
          ws.F_minv[i].col(col) += U * Minv.block(off, col, nd, 1);
        }
        Mat6 deflated = ws.IA_articulated[i] - U * Dinv * U.transpose();
        deflated = (0.5 * (deflated + deflated.transpose())).eval();
        ws.IA_articulated[i] = deflated;
        for (int col : sub) {
          set_col(ws.F_minv[lam], col,
                  col_sv(ws.F_minv[lam], col) +
                      xform_force_transpose(X, col_sv(ws.F_minv[i], col)));
        }
        ws.IA_articulated[lam] += congruence_to_parent(X, deflated, prio);
      }
    }
  }

  // Forward substitution completes the inverse. Row slices run over every
  // remaining column in the joint's world-anchored group; columns with no
  // shared dof-carrying ancestor are structural zeros and stay untouched.
  if (out_Minv) {
    std::vector<int> dof_group(n);
    for (int j = 0; j < nb; ++j) {
      for (int d = 0; d < model.dof(j); ++d) {
        dof_group[model.dof_offset(j) + d] = model.world_group(j);
      }
    }
    for (int i = 0; i < nb; ++i) {
      const int lam = model.parent[i];
      const int off = model.dof_offset(i);
      const int nd = model.dof(i);
      const auto& S = model.S[i].cols;
      for (int col = off; col < n; ++col) {
        if (dof_group[col] != model.world_group(i)) continue;
        if (lam >= 0) {
          const SpatialVector tmp = xform_motion(ws.X[i], col_sv(ws.P[lam], col));
          Minv.block(off, col, nd, 1) -= ws.Dinv[i] * (ws.U[i].transpose() * tmp.vec());
          set_col(ws.P[i], col,
                  SpatialVector::from_vec(S * Minv.block(off, col, nd, 1)) + tmp);
        } else {
          set_col(ws.P[i], col, SpatialVector::from_vec(S * Minv.block(off, col, nd, 1)));
        }
      }
    }
  }

  // Only upper-triangle slices were written; mirror them.
  if (out_M) {
    M.triangularView<Eigen::StrictlyLower>() = M.transpose();
    res.M = std::move(M);
  }
  if (out_Minv) {
    Minv.triangularView<Eigen::StrictlyLower>() = Minv.transpose();
    res.Minv = std::move(Minv);
  }
  return res;
}

}  // namespace rbdpipe
