"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from troop.manifold import RepresentativePair, TangentLift, geodesic_step
from troop.objective import Trajectory, TrajectoryDataset
from troop.system import sample_observations


def step_pair(pair: RepresentativePair, lift: TangentLift, alpha: float) -> RepresentativePair:
    """Move both blocks of a pair along a geodesic with step ``alpha``."""
    return RepresentativePair(
        geodesic_step(pair.phi, lift.x, alpha),
        geodesic_step(pair.psi, lift.y, alpha),
    )


def impulse_dataset(sys, amplitudes, times, substeps: int = 50) -> TrajectoryDataset:
    """Impulse-response training data: x0 = B * (u0 * ones) per amplitude."""
    times = np.asarray(times, dtype=float)
    trajs = []
    for u0 in amplitudes:
        x0 = sys.b @ (float(u0) * np.ones(sys.d))
        outputs, _ = sample_observations(sys, x0, times, substeps)
        trajs.append(
            Trajectory(x0=x0, times=times, observations=outputs, label=f"u0={u0:.10g}")
        )
    return TrajectoryDataset(tuple(trajs))


def fd_directional(f, pair: RepresentativePair, lift: TangentLift, h: float) -> float:
    """Central finite difference of ``f`` along the geodesic through ``pair``."""
    return (f(step_pair(pair, lift, h)) - f(step_pair(pair, lift, -h))) / (2.0 * h)


def random_spd(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random symmetric positive-definite matrix with eigenvalues >= 0.5."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(0.5 + rng.random(n)) @ q.T


def random_stable_lti(n: int, d: int, m: int, rng: np.random.Generator):
    """Random Hurwitz LTI triple (a, b, c) with margin >= 0.5."""
    a = rng.standard_normal((n, n))
    a = a - (np.max(np.real(np.linalg.eigvals(a))) + 0.5) * np.eye(n)
    b = rng.standard_normal((n, d))
    c = rng.standard_normal((m, n))
    return a, b, c
