#include <random>

#include <doctest.h>

#include "rbdpipe/dynamics.hpp"
#include "rbdpipe/model_io.hpp"
#include "support/reference_dynamics.hpp"
#include "support/test_models.hpp"

using namespace rbdpipe;
namespace rt = rbdpipe::testing;

namespace {

double rel_max(const MatX& got, const MatX& want) {
  const double scale = std::max(1e-9, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

double rel_max(const VecX& got, const VecX& want) {
  const double scale = std::max(1e-9, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

std::vector<RobotModel> test_fleet() {
  return {
      load_model(rt::model_path("iiwa14.json")),
      split_root(load_model(rt::model_path("quadruped_arm.json"))),
      load_model(rt::model_path("quadruped_arm.json")),  // unsplit floating root
      load_model(rt::model_path("humanoid_waist.json")),
      rt::joint_zoo(),
  };
}

}  // namespace

TEST_CASE("rnea: single link gravity torque closed form") {
  const RobotModel m = rt::single_link();
  RobotState s = RobotState::zero(m);
  DynamicsWorkspace ws;
  const VecX tau = rnea(m, s, ws);

  // tau = S^T (I * (X * a0)) with a0 = (0, -g), evaluated by hand.
  ensure_trig(s);
  JointEval je;
  eval_joint(m.joints[0], s.q.head(1), s.sinq.head(1), s.cosq.head(1), je);
  const SpatialTransform X = je.X * m.fixed_xform[0];
  const SpatialVector a0{Vec3::Zero(), -m.gravity};
  const VecX want = m.S[0].apply_transpose(inertia_apply(m.inertia[0], xform_motion(X, a0)));
  CHECK(rel_max(tau, want) < 1e-15);
}

TEST_CASE("rnea: equilibrium gives zero torque") {
  for (RobotModel m : test_fleet()) {
    m.gravity = Vec3::Zero();
    RobotState s = RobotState::zero(m);
    DynamicsWorkspace ws;
    CHECK(rnea(m, s, ws).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("rnea matches the dense-arithmetic oracle") {
  std::mt19937_64 rng(101);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 25; ++k) {
      RobotState s = rt::random_state(m, rng);
      const VecX got = rnea(m, s, ws);
      const VecX want = rt::reference_rnea(m, s);
      CHECK(rel_max(got, want) < 1e-13);
    }
  }
}

TEST_CASE("rnea: state-injected base boundary") {
  RobotModel m = load_model(rt::model_path("iiwa14.json"));
  m.root_mode = RootMode::StateInjected;
  std::mt19937_64 rng(77);
  RobotState s = rt::random_state(m, rng);
  s.base_velocity = {{0.1, -0.2, 0.3}, {1.0, 0.0, -0.5}};
  s.base_acceleration = {{0.0, 0.1, 0.0}, {0.2, -0.1, 9.81}};
  DynamicsWorkspace ws;
  CHECK(rel_max(rnea(m, s, ws), rt::reference_rnea(m, s)) < 1e-13);

  // Injecting a zero twist and pure -gravity acceleration reproduces the
  // fixed-base result.
  RobotModel fixed = load_model(rt::model_path("iiwa14.json"));
  RobotState sf = s;
  s.base_velocity = SpatialVector::Zero();
  s.base_acceleration = {Vec3::Zero(), -fixed.gravity};
  CHECK(rel_max(rnea(m, s, ws), rnea(fixed, sf, ws)) < 1e-15);
}

TEST_CASE("equation-of-motion linearity: rnea(q,qd,qdd) - rnea(q,qd,0) = M qdd") {
  std::mt19937_64 rng(303);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 20; ++k) {
      RobotState s = rt::random_state(m, rng);
      const VecX with = rnea(m, s, ws);
      RobotState s0 = s;
      s0.qdd_or_tau.setZero();
      const VecX bias = rnea(m, s0, ws);
      const MatX M = rt::reference_mass_matrix(m, s);
      CHECK(rel_max(VecX(with - bias), VecX(M * s.qdd_or_tau)) < 1e-9);
    }
  }
}

TEST_CASE("mminv_gen: single revolute link reduces to scalars") {
  const RobotModel m = rt::single_link();
  RobotState s = RobotState::zero(m);
  s.q[0] = 0.37;
  DynamicsWorkspace ws;
  const MassMatrixResult res = mminv_gen(m, s, true, true, ws);
  ensure_trig(s);
  JointEval je;
  eval_joint(m.joints[0], s.q.head(1), s.sinq.head(1), s.cosq.head(1), je);
  const double want =
      m.S[0].apply_transpose(inertia_apply(m.inertia[0], m.S[0].column(0)))[0];
  CHECK((*res.M)(0, 0) == doctest::Approx(want).epsilon(1e-14));
  CHECK((*res.Minv)(0, 0) == doctest::Approx(1.0 / want).epsilon(1e-14));
}

TEST_CASE("mminv_gen: at least one flag is required") {
  const RobotModel m = rt::single_link();
  RobotState s = RobotState::zero(m);
  DynamicsWorkspace ws;
  CHECK_THROWS_AS(mminv_gen(m, s, false, false, ws), std::invalid_argument);
}

TEST_CASE("mminv_gen: M against reference CRBA and the unit-acceleration oracle") {
  std::mt19937_64 rng(404);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 10; ++k) {
      RobotState s = rt::random_state(m, rng, false);
      const MassMatrixResult res = mminv_gen(m, s, true, false, ws);
      CHECK(rel_max(*res.M, rt::reference_mass_matrix(m, s)) < 1e-13);

      // Column j = rnea(q, 0, e_j) - rnea(q, 0, 0), gravity on.
      const int n = m.n_dof();
      MatX M_oracle(n, n);
      RobotState su = s;
      su.qd.setZero();
      su.qdd_or_tau.setZero();
      su.f_ext.clear();
      const VecX bias = rnea(m, su, ws);
      for (int j = 0; j < n; ++j) {
        su.qdd_or_tau.setZero();
        su.qdd_or_tau[j] = 1.0;
        M_oracle.col(j) = rnea(m, su, ws) - bias;
      }
      CHECK(rel_max(*res.M, M_oracle) < 1e-10);
      CHECK((*res.M - res.M->transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(Eigen::LLT<MatX>(*res.M).info() == Eigen::Success);
    }
  }
}

TEST_CASE("mminv_gen: M * Minv = I and Minv matches the dense inverse") {
  std::mt19937_64 rng(505);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 10; ++k) {
      RobotState s = rt::random_state(m, rng, false);
      const MassMatrixResult res = mminv_gen(m, s, true, true, ws);
      const int n = m.n_dof();
      CHECK((*res.M * *res.Minv - MatX::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(rel_max(*res.Minv, rt::reference_minv(m, s)) < 1e-9);
      CHECK((*res.Minv - res.Minv->transpose()).cwiseAbs().maxCoeff() == 0.0);

      // Single-flag runs agree with the combined sweep.
      const MassMatrixResult only_m = mminv_gen(m, s, true, false, ws);
      const MassMatrixResult only_inv = mminv_gen(m, s, false, true, ws);
      CHECK((*res.M - *only_m.M).cwiseAbs().maxCoeff() == 0.0);
      CHECK((*res.Minv - *only_inv.Minv).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("mminv_gen: branch-induced zeros are exact") {
  std::mt19937_64 rng(606);
  DynamicsWorkspace ws;

  // M honors the ancestor/subtree pattern on branched models.
  for (const char* file : {"quadruped_arm.json", "humanoid_waist.json"}) {
    const RobotModel m = split_root(load_model(rt::model_path(file)));
    const auto pat = sparsity_pattern(m);
    RobotState s = rt::random_state(m, rng, false);
    const MassMatrixResult res = mminv_gen(m, s, true, true, ws);
    for (int i = 0; i < m.n_dof(); ++i) {
      for (int j = 0; j < m.n_dof(); ++j) {
        if (!pat(i, j)) CHECK((*res.M)(i, j) == 0.0);
      }
    }
    // The inverse fills every column pair sharing a dof-carrying ancestor
    // (all of them, for a floating base); verify against the dense inverse.
    CHECK(rel_max(*res.Minv, rt::reference_minv(m, s)) < 1e-9);
  }

  // With no shared dof-carrying ancestor, the inverse has exact zeros too.
  const RobotModel limbs = rt::two_limbs_fixed();
  RobotState s = rt::random_state(limbs, rng, false);
  const MassMatrixResult res = mminv_gen(limbs, s, true, true, ws);
  const auto pat = minv_sparsity_pattern(limbs);
  for (int i = 0; i < limbs.n_dof(); ++i) {
    for (int j = 0; j < limbs.n_dof(); ++j) {
      if (!pat(i, j)) {
        CHECK((*res.M)(i, j) == 0.0);
        CHECK((*res.Minv)(i, j) == 0.0);
      }
    }
  }
  CHECK(rel_max(*res.Minv, rt::reference_minv(limbs, s)) < 1e-10);

  // The cart with two pendulums is the canonical fill-in case: M has a
  // structural zero between the pendulums, the inverse does not.
  const RobotModel cart = rt::cart_two_pendulums();
  RobotState sc = rt::random_state(cart, rng, false);
  const MassMatrixResult rc = mminv_gen(cart, sc, true, true, ws);
  CHECK((*rc.M)(1, 2) == 0.0);
  CHECK(std::abs((*rc.Minv)(1, 2)) > 1e-6);
  CHECK(rel_max(*rc.Minv, rt::reference_minv(cart, sc)) < 1e-10);
}

TEST_CASE("mminv_gen: priority-vector order is numerically identical to natural order") {
  std::mt19937_64 rng(707);
  DynamicsWorkspace ws1, ws2;
  for (const RobotModel& m : test_fleet()) {
    RobotState s = rt::random_state(m, rng, false);
    const MassMatrixResult a = mminv_gen(m, s, true, true, ws1, AccumulatorOrder::Priority);
    const MassMatrixResult b = mminv_gen(m, s, true, true, ws2, AccumulatorOrder::Natural);
    CHECK((*a.M - *b.M).cwiseAbs().maxCoeff() == 0.0);
    CHECK((*a.Minv - *b.Minv).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fd: bias cancellation and Newton's law") {
  std::mt19937_64 rng(808);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    RobotState s = rt::random_state(m, rng);
    RobotState bias_state = s;
    bias_state.qdd_or_tau.setZero();
    const VecX bias = rnea(m, bias_state, ws);
    RobotState fs = s;
    fs.qdd_or_tau = bias;
    CHECK(fd(m, fs, ws).cwiseAbs().maxCoeff() < 1e-9);
  }

  const RobotModel pm = rt::point_mass_free(2.5);
  RobotState s = RobotState::zero(pm);
  s.qdd_or_tau << 1.0, 0.0, 0.0;
  const VecX qdd = fd(pm, s, ws);
  CHECK(qdd[0] == doctest::Approx(1.0 / 2.5).epsilon(1e-14));
  CHECK(std::abs(qdd[1]) < 1e-15);
  CHECK(std::abs(qdd[2]) < 1e-15);
}

TEST_CASE("fd/rnea roundtrip closes") {
  std::mt19937_64 rng(909);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 20; ++k) {
      RobotState s = rt::random_state(m, rng);
      const VecX tau = s.qdd_or_tau;
      const VecX qdd = fd(m, s, ws);
      RobotState back = s;
      back.qdd_or_tau = qdd;
      CHECK(rel_max(rnea(m, back, ws), tau) < 1e-8);
    }
  }
}

TEST_CASE("drnea: workspace/state mismatch is rejected") {
  const RobotModel m = rt::single_link();
  RobotState s = RobotState::zero(m);
  DynamicsWorkspace ws;
  CHECK_THROWS_AS(drnea(m, s, ws), std::invalid_argument);
  rnea(m, s, ws);
  RobotState other = s;
  other.q[0] += 0.5;
  other.sinq.resize(0);
  CHECK_THROWS_AS(drnea(m, other, ws), std::invalid_argument);
}

TEST_CASE("drnea: static fixed-base state has zero velocity partials") {
  std::mt19937_64 rng(111);
  DynamicsWorkspace ws;
  const RobotModel m = load_model(rt::model_path("iiwa14.json"));
  RobotState s = rt::random_state(m, rng, false);
  s.qd.setZero();
  rnea(m, s, ws);
  const DerivativeBlocks blocks = drnea(m, s, ws);
  CHECK(blocks.d_dqd.cwiseAbs().maxCoeff() == 0.0);
  // and it agrees with central differences at the static state
  const DerivativeBlocks fdiff = rt::fd_drnea(m, s);
  CHECK((blocks.d_dqd - fdiff.d_dqd).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(rel_max(blocks.d_dq, fdiff.d_dq) < 1e-6);

  // With a moving injected base the velocity partials no longer vanish.
  RobotModel mi = m;
  mi.root_mode = RootMode::StateInjected;
  RobotState si = s;
  si.base_velocity = {{0.2, 0.1, -0.3}, {0.5, 0.0, 0.1}};
  si.base_acceleration = {Vec3::Zero(), Vec3(0, 0, 9.81)};
  rnea(mi, si, ws);
  CHECK(drnea(mi, si, ws).d_dqd.cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("drnea: structural zeros outside the sparsity pattern") {
  std::mt19937_64 rng(222);
  DynamicsWorkspace ws;
  for (const char* file : {"quadruped_arm.json", "humanoid_waist.json"}) {
    const RobotModel m = split_root(load_model(rt::model_path(file)));
    const auto pat = sparsity_pattern(m);
    RobotState s = rt::random_state(m, rng);
    rnea(m, s, ws);
    const DerivativeBlocks blocks = drnea(m, s, ws);
    for (int i = 0; i < m.n_dof(); ++i) {
      for (int j = 0; j < m.n_dof(); ++j) {
        if (!pat(i, j)) {
          CHECK(blocks.d_dq(i, j) == 0.0);
          CHECK(blocks.d_dqd(i, j) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("drnea matches central finite differences") {
  std::mt19937_64 rng(333);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 5; ++k) {
      RobotState s = rt::random_state(m, rng);
      rnea(m, s, ws);
      const DerivativeBlocks got = drnea(m, s, ws);
      const DerivativeBlocks want = rt::fd_drnea(m, s);
      CHECK(rel_max(got.d_dq, want.d_dq) < 1e-5);
      CHECK(rel_max(got.d_dqd, want.d_dqd) < 1e-5);
    }
  }
}

TEST_CASE("dfd matches central finite differences of fd") {
  std::mt19937_64 rng(444);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 3; ++k) {
      RobotState s = rt::random_state(m, rng);
      const DerivativeBlocks got = dfd(m, s, ws);
      const DerivativeBlocks want = rt::fd_dfd(m, s);
      CHECK(rel_max(got.d_dq, want.d_dq) < 1e-5);
      CHECK(rel_max(got.d_dqd, want.d_dqd) < 1e-5);
    }
  }
}

TEST_CASE("dfd: free point mass has configuration-independent dynamics") {
  const RobotModel pm = rt::point_mass_free();
  RobotState s = RobotState::zero(pm);
  s.qd << 0.3, -0.2, 0.1;
  s.qdd_or_tau << 1.0, 2.0, -0.5;
  DynamicsWorkspace ws;
  const DerivativeBlocks blocks = dfd(pm, s, ws);
  CHECK(blocks.d_dq.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(blocks.d_dqd.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("dfd composes back to drnea through -M") {
  std::mt19937_64 rng(555);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    RobotState s = rt::random_state(m, rng);
    MatX minv;
    const DerivativeBlocks fwd = dfd(m, s, ws, &minv);
    const MassMatrixResult mm = mminv_gen(m, s, true, false, ws);

    RobotState at_qdd = s;
    at_qdd.qdd_or_tau = fd(m, s, ws);
    rnea(m, at_qdd, ws);
    const DerivativeBlocks id = drnea(m, at_qdd, ws);
    CHECK(rel_max(MatX(-(*mm.M) * fwd.d_dq), id.d_dq) < 1e-9);
    CHECK(rel_max(MatX(-(*mm.M) * fwd.d_dqd), id.d_dqd) < 1e-9);
  }
}

TEST_CASE("difd: bit-identical to dfd on consistent inputs, identity composition") {
  std::mt19937_64 rng(666);
  DynamicsWorkspace ws, ws2;
  const RobotModel m = load_model(rt::model_path("iiwa14.json"));
  RobotState s = rt::random_state(m, rng);

  MatX minv;
  const DerivativeBlocks via_dfd = dfd(m, s, ws, &minv);

  RobotState si = s;
  si.qdd_or_tau = fd(m, s, ws2);
  const DerivativeBlocks via_difd = difd(m, si, minv, ws2);
  CHECK((via_dfd.d_dq - via_difd.d_dq).cwiseAbs().maxCoeff() == 0.0);
  CHECK((via_dfd.d_dqd - via_difd.d_dqd).cwiseAbs().maxCoeff() == 0.0);

  // Minv = I composes to the negated inverse-dynamics blocks.
  const MatX eye = MatX::Identity(m.n_dof(), m.n_dof());
  const DerivativeBlocks neg = difd(m, si, eye, ws2);
  rnea(m, si, ws2);
  const DerivativeBlocks id = drnea(m, si, ws2);
  CHECK((neg.d_dq + id.d_dq).cwiseAbs().maxCoeff() == 0.0);
  CHECK((neg.d_dqd + id.d_dqd).cwiseAbs().maxCoeff() == 0.0);

  // and it matches finite differences of fd on consistent inputs
  const DerivativeBlocks want = rt::fd_dfd(m, s);
  CHECK(rel_max(via_difd.d_dq, want.d_dq) < 1e-5);
  CHECK(rel_max(via_difd.d_dqd, want.d_dqd) < 1e-5);

  MatX bad = MatX::Zero(2, 2);
  CHECK_THROWS_AS(difd(m, si, bad, ws2), std::invalid_argument);
}

TEST_CASE("batch_evaluate equals sequential calls and preserves order") {
  std::mt19937_64 rng(777);
  const RobotModel m = load_model(rt::model_path("iiwa14.json"));
  std::vector<RobotState> states;
  for (int k = 0; k < 256; ++k) states.push_back(rt::random_state(m, rng));

  FunctionCall call;
  call.fn = FunctionId::ID;
  auto results = batch_evaluate(m, call, states);
  REQUIRE(results.size() == states.size());
  DynamicsWorkspace ws;
  for (size_t t = 0; t < states.size(); ++t) {
    CHECK(results[t].error.empty());
    const VecX want = rnea(m, states[t], ws);
    CHECK((results[t].tau - want).cwiseAbs().maxCoeff() == 0.0);
  }

  // Batch of one equals the direct call.
  std::vector<RobotState> one{states[3]};
  auto r1 = batch_evaluate(m, call, one);
  CHECK((r1[0].tau - results[3].tau).cwiseAbs().maxCoeff() == 0.0);

  // Permuted inputs produce permuted outputs.
  std::vector<RobotState> rev(states.rbegin(), states.rend());
  auto rr = batch_evaluate(m, call, rev);
  for (size_t t = 0; t < states.size(); ++t) {
    CHECK((rr[t].tau - results[states.size() - 1 - t].tau).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("batch_evaluate reports per-task errors without aborting") {
  const RobotModel m = load_model(rt::model_path("iiwa14.json"));
  std::mt19937_64 rng(888);
  std::vector<RobotState> states{rt::random_state(m, rng), rt::random_state(m, rng)};
  states[1].q.resize(3);  // wrong dimension
  FunctionCall call;
  call.fn = FunctionId::FD;
  auto results = batch_evaluate(m, call, states);
  CHECK(results[0].error.empty());
  CHECK(results[0].qdd.size() == m.n_dof());
  CHECK_FALSE(results[1].error.empty());
}

TEST_CASE("batch_evaluate covers every function id") {
  const RobotModel m = split_root(load_model(rt::model_path("quadruped_arm.json")));
  std::mt19937_64 rng(999);
  std::vector<RobotState> states{rt::random_state(m, rng)};
  DynamicsWorkspace ws;

  for (FunctionId fn : {FunctionId::ID, FunctionId::FD, FunctionId::M, FunctionId::Minv,
                        FunctionId::dID, FunctionId::dFD, FunctionId::diFD}) {
    FunctionCall call;
    call.fn = fn;
    auto res = batch_evaluate(m, call, states);
    REQUIRE(res[0].error.empty());
    switch (fn) {
      case FunctionId::ID: CHECK(res[0].tau.size() == m.n_dof()); break;
      case FunctionId::FD: CHECK(res[0].qdd.size() == m.n_dof()); break;
      case FunctionId::M: CHECK(res[0].M.has_value()); break;
      case FunctionId::Minv: CHECK(res[0].Minv.has_value()); break;
      default: CHECK(res[0].deriv.has_value()); break;
    }
  }

  FunctionCall bad;
  bad.fn = FunctionId::ID;
  bad.out_Minv = true;
  CHECK_THROWS_AS(batch_evaluate(m, bad, states), std::invalid_argument);

  // Root-mode override drops the virtual base for the whole batch.
  FunctionCall anchored;
  anchored.fn = FunctionId::ID;
  anchored.root_mode_override = RootMode::Ignored;
  const RobotModel am = reanchor(m, RootMode::Ignored);
  std::vector<RobotState> astates{rt::random_state(am, rng)};
  auto ares = batch_evaluate(m, anchored, astates);
  CHECK(ares[0].error.empty());
  CHECK(ares[0].tau.size() == am.n_dof());
}

TEST_CASE("optimized paths agree with the direct dense evaluation to 1e-13") {
  std::mt19937_64 rng(1234);
  DynamicsWorkspace ws;
  for (const RobotModel& m : test_fleet()) {
    for (int k = 0; k < 5; ++k) {
      RobotState s = rt::random_state(m, rng);
      CHECK(rel_max(rnea(m, s, ws), rt::reference_rnea(m, s)) < 1e-13);
      const MassMatrixResult mm = mminv_gen(m, s, true, false, ws);
      CHECK(rel_max(*mm.M, rt::reference_mass_matrix(m, s)) < 1e-13);
    }
  }
}
