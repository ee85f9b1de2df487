"""Reference subspace constructions: POD of snapshots, Lyapunov solves,
balancing transforms and balanced truncation."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from troop.baselines import (
    balanced_truncation,
    balancing_transform,
    bt_init_for,
    lyapunov_solve,
    pod,
    state_snapshots,
)
from troop.errors import NearSingularGramian, NotHurwitz, RankDeficient
from troop.manifold import orthonormalize
from troop.objective import regularization
from troop.system import LtiSystem, sample_observations, toy_model
from util import impulse_dataset, random_stable_lti


# ------------------------------------------------------------------ POD


def test_pod_principal_axis():
    snaps = np.array([[2.0, 0.0], [0.0, 1.0]])
    pair = pod(snaps, 1)
    assert_allclose(np.abs(pair.phi), [[1.0], [0.0]], atol=1e-12)
    assert_allclose(pair.phi, pair.psi)


def test_pod_full_rank_recovers_whole_space():
    rng = np.random.default_rng(49)
    snaps = rng.standard_normal((4, 12))
    pair = pod(snaps, 4)
    assert_allclose(pair.phi @ pair.phi.T, np.eye(4), atol=1e-12)


def test_pod_is_optimal_among_random_subspaces():
    rng = np.random.default_rng(50)
    snaps = rng.standard_normal((8, 30)) * np.linspace(3.0, 0.2, 8)[:, None]
    r = 3
    basis = pod(snaps, r).phi
    err_pod = np.linalg.norm(snaps - basis @ (basis.T @ snaps))
    for _ in range(50):
        q = orthonormalize(rng.standard_normal((8, r)))
        err_q = np.linalg.norm(snaps - q @ (q.T @ snaps))
        assert err_pod <= err_q + 1e-12


def test_pod_rank_validation():
    rng = np.random.default_rng(51)
    snaps = rng.standard_normal((3, 5))
    with pytest.raises(RankDeficient):
        pod(snaps, 4)
    with pytest.raises(RankDeficient):
        pod(np.zeros((3, 5)), 1)
    # duplicated column data has numerical rank 1
    col = rng.standard_normal((3, 1))
    with pytest.raises(RankDeficient):
        pod(np.hstack([col, col, 2.0 * col]), 2)


def test_pod_weights():
    snaps = np.eye(2)
    pair = pod(snaps, 1, weights=[100.0, 0.01])
    assert_allclose(np.abs(pair.phi), [[1.0], [0.0]], atol=1e-12)
    with pytest.raises(RankDeficient):
        pod(snaps, 1, weights=[1.0, -1.0])
    with pytest.raises(RankDeficient):
        pod(snaps, 1, weights=[1.0, 1.0, 1.0])


def test_pod_pair_is_aligned():
    rng = np.random.default_rng(52)
    pair = pod(rng.standard_normal((5, 9)), 2)
    assert abs(regularization(pair)) <= 1e-12


# ------------------------------------------------------------- Lyapunov


def test_lyapunov_scalar():
    assert_allclose(lyapunov_solve(np.array([[-1.0]]), np.array([[1.0]])),
                    [[0.5]], rtol=1e-14)


def test_lyapunov_residual_and_symmetry():
    rng = np.random.default_rng(53)
    a, b, _ = random_stable_lti(6, 2, 1, rng)
    q = b @ b.T
    p = lyapunov_solve(a, q)
    assert_allclose(p, p.T, atol=1e-12)
    residual = a @ p + p @ a.T + q
    assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(q)


def test_lyapunov_shape_validation():
    with pytest.raises(RankDeficient):
        lyapunov_solve(np.zeros((2, 3)), np.zeros((2, 2)))


# ------------------------------------------------------------ balancing


def test_balancing_scalar_hankel_value():
    sys = LtiSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0]])
    t, t_inv, sigma = balancing_transform(sys)
    assert_allclose(sigma, [0.5], rtol=1e-12)
    assert_allclose(t_inv @ t, np.eye(1), atol=1e-12)


def test_balancing_diagonalizes_both_gramians():
    rng = np.random.default_rng(54)
    a, b, c = random_stable_lti(6, 2, 2, rng)
    sys = LtiSystem(a=a, b=b, c=c)
    t, t_inv, sigma = balancing_transform(sys)
    assert_allclose(t_inv @ t, np.eye(6), atol=1e-10)
    assert np.all(np.diff(sigma) <= 1e-12)
    p = lyapunov_solve(a, b @ b.T)
    q = lyapunov_solve(a.T, c.T @ c)
    assert_allclose(t_inv @ p @ t_inv.T, np.diag(sigma), atol=1e-8)
    assert_allclose(t.T @ q @ t, np.diag(sigma), atol=1e-8)


def test_balancing_rejects_unstable_and_singular():
    with pytest.raises(NotHurwitz):
        balancing_transform(LtiSystem(a=[[1.0]], b=[[1.0]], c=[[1.0]]))
    sys = LtiSystem(a=[[-1.0, 0.0], [0.0, -2.0]], b=[[1.0], [0.0]],
                    c=[[1.0, 1.0]])
    with pytest.raises(NearSingularGramian):
        balancing_transform(sys)


# --------------------------------------------------- balanced truncation


def test_bt_symmetric_realization_gives_aligned_pair():
    # B = C^T with symmetric A makes the two Gramians equal, so the pair
    # coincides and the pairing is the identity.
    rng = np.random.default_rng(55)
    m = rng.standard_normal((5, 5))
    a = -(m @ m.T) - 0.5 * np.eye(5)
    b = rng.standard_normal((5, 1))
    sys = LtiSystem(a=a, b=b, c=b.T)
    pair = balanced_truncation(sys, 2)
    assert_allclose(pair.phi, pair.psi, atol=1e-9)
    assert_allclose(pair.pairing(), np.eye(2), atol=1e-9)


def test_bt_impulse_error_shrinks_with_rank():
    rng = np.random.default_rng(56)
    a, b, c = random_stable_lti(10, 1, 1, rng)
    sys = LtiSystem(a=a, b=b, c=c)
    times = np.linspace(0.0, 8.0, 81)
    y_full, _ = sample_observations(sys, b[:, 0], times, substeps=20)

    def impulse_error(r):
        pair = balanced_truncation(sys, r)
        from troop.projection import assemble_rom
        rom = assemble_rom(sys, pair)
        y_red, _ = sample_observations(rom, rom.reduce_ic(b[:, 0]), times,
                                       substeps=20)
        return float(np.sqrt(np.trapezoid(np.sum((y_full - y_red) ** 2, axis=1),
                                          times)))

    errors = [impulse_error(r) for r in (2, 4, 6)]
    assert errors[0] > errors[1] > errors[2]
    # sanity bound: well below the total response energy
    energy = float(np.sqrt(np.trapezoid(np.sum(y_full**2, axis=1), times)))
    assert errors[1] <= 0.5 * energy


def test_bt_validation():
    with pytest.raises(NotHurwitz):
        balanced_truncation(LtiSystem(a=[[0.0]], b=[[1.0]], c=[[1.0]]), 1)
    sys = LtiSystem(a=[[-1.0, 0.0], [0.0, -2.0]], b=[[1.0], [1.0]],
                    c=[[1.0, 1.0]])
    with pytest.raises(NearSingularGramian):
        balanced_truncation(sys, 3)
    dead = LtiSystem(a=[[-1.0, 0.0], [0.0, -2.0]], b=[[0.0], [0.0]],
                     c=[[1.0, 1.0]])
    with pytest.raises(NearSingularGramian):
        balanced_truncation(dead, 1)


def test_bt_init_for_toy_is_aligned_and_oriented(toy):
    # The benchmark's linearization has B = C^T and symmetric A, so the
    # initial pair coincides; orientation is fixed to det > 0.
    pair = bt_init_for(toy, 2)
    assert_allclose(pair.phi, pair.psi, atol=1e-10)
    assert_allclose(pair.phi.T @ pair.phi, np.eye(2), atol=1e-12)
    sign, _ = np.linalg.slogdet(pair.pairing())
    assert sign > 0


# -------------------------------------------------------- POD snapshots


def test_state_snapshots_dense_collection(toy):
    times = np.linspace(0.0, 10.0, 11)
    data = impulse_dataset(toy, (0.5, 1.0), times)
    snaps = state_snapshots(toy, data, substeps=50)
    # 10 intervals x 50 substeps + 1 final state per trajectory
    assert snaps.shape == (3, 2 * (10 * 50 + 1))
    assert_allclose(snaps[:, 0], data.trajectories[0].x0, atol=1e-14)
    assert np.all(np.isfinite(snaps))
