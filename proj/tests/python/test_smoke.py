"""Smoke tests for the python module: load the shipped models, run each
main operation once, and sanity-check the core identities."""

import os

import numpy as np
import pytest

import rbdpipe

MODELS = os.environ.get("RBDPIPE_MODELS_DIR", "models")
CONFIGS = os.environ.get("RBDPIPE_CONFIGS_DIR", "configs")


@pytest.fixture(scope="module")
def iiwa():
    return rbdpipe.load_model(os.path.join(MODELS, "iiwa14.json"))


@pytest.fixture(scope="module")
def quad():
    return rbdpipe.load_model(os.path.join(MODELS, "quadruped_arm.json"))


def random_state(model, seed=0):
    rng = np.random.default_rng(seed)
    n = model.n_dof
    return (
        rng.uniform(-1.5, 1.5, n),
        rng.uniform(-1.0, 1.0, n),
        rng.uniform(-1.0, 1.0, n),
    )


def test_model_properties(iiwa, quad):
    assert iiwa.n_dof == 7
    assert iiwa.n_bodies == 7
    assert quad.n_dof == 24
    assert quad.n_bodies == 19
    assert quad.root_mode == "floating_split"
    assert "trunk" in quad.link_names
    assert "RobotModel" in repr(iiwa)


def test_roundtrip_and_mass_matrix(iiwa):
    q, qd, tau = random_state(iiwa, seed=1)
    qdd = rbdpipe.fd(iiwa, q, qd, tau)
    back = rbdpipe.rnea(iiwa, q, qd, qdd)
    assert np.allclose(back, tau, rtol=1e-8, atol=1e-10)

    M = rbdpipe.mass_matrix(iiwa, q)
    Minv = rbdpipe.minv(iiwa, q)
    assert np.allclose(M @ Minv, np.eye(iiwa.n_dof), atol=1e-9)
    assert np.allclose(M, M.T)


def test_derivatives_match_finite_differences(iiwa):
    q, qd, qdd = random_state(iiwa, seed=2)
    dq, dqd = rbdpipe.drnea(iiwa, q, qd, qdd)
    h = 1e-6
    fd_col = np.empty((iiwa.n_dof, iiwa.n_dof))
    for j in range(iiwa.n_dof):
        qp, qm = q.copy(), q.copy()
        qp[j] += h
        qm[j] -= h
        fd_col[:, j] = (rbdpipe.rnea(iiwa, qp, qd, qdd) - rbdpipe.rnea(iiwa, qm, qd, qdd)) / (2 * h)
    scale = max(1.0, np.abs(fd_col).max())
    assert np.abs(dq - fd_col).max() / scale < 1e-5
    assert dqd.shape == (iiwa.n_dof, iiwa.n_dof)


def test_difd_consistency(iiwa):
    q, qd, tau = random_state(iiwa, seed=3)
    qdd = rbdpipe.fd(iiwa, q, qd, tau)
    Minv = rbdpipe.minv(iiwa, q)
    a = rbdpipe.dfd(iiwa, q, qd, tau)
    b = rbdpipe.difd(iiwa, q, qd, qdd, Minv)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


def test_batch_matches_single_calls(iiwa):
    rng = np.random.default_rng(7)
    n = iiwa.n_dof
    q = rng.uniform(-1, 1, (16, n))
    qd = rng.uniform(-1, 1, (16, n))
    qdd = rng.uniform(-1, 1, (16, n))
    tau = rbdpipe.batch_rnea(iiwa, q, qd, qdd)
    for t in range(16):
        assert np.array_equal(tau[t], rbdpipe.rnea(iiwa, q[t], qd[t], qdd[t]))


def test_topology_transforms(quad):
    split = rbdpipe.split_root(quad)
    assert split.n_dof == quad.n_dof
    assert split.n_bodies == quad.n_bodies + 1

    pat = rbdpipe.sparsity_pattern(split)
    assert pat.shape == (24, 24)
    assert (pat == pat.T).all()

    hum = rbdpipe.load_model(os.path.join(MODELS, "humanoid_waist.json"))
    torso2 = hum.link_names.index("torso2")
    rerooted, old_depth, new_depth = rbdpipe.reroot(hum, torso2)
    assert (old_depth, new_depth) == (11, 9)
    assert np.isclose(rerooted.total_mass, hum.total_mass)


def test_simulate_summary(quad):
    out = rbdpipe.simulate(
        quad, "dID", batch=64, config=os.path.join(CONFIGS, "pipeline_default.json")
    )
    assert out["tasks"] == 64
    assert out["makespan"] > out["first_latency"] > 0
    assert out["steady_ii"] == pytest.approx(out["ii_bound"])
    assert "makespan" in out["text"]
