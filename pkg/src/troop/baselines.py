"""Projection baselines: POD and balanced truncation of the linearization.

Both produce ``RepresentativePair`` instances directly usable as reduced
models or as optimizer initializations.
"""

from __future__ import annotations

import numpy as np

from .errors import NearSingularGramian, NotHurwitz, RankDeficient
from .manifold import RepresentativePair, fix_sign, orthonormalize
from .system import DynamicalSystem, LtiSystem, linearize, sample_observations

__all__ = [
    "pod",
    "state_snapshots",
    "lyapunov_solve",
    "balancing_transform",
    "balanced_truncation",
    "bt_init_for",
]


def state_snapshots(sys: DynamicalSystem, data, substeps: int = 50) -> np.ndarray:
    """Dense full-state snapshots of ``sys`` along every trajectory.

    Simulates the full model from each trajectory's initial condition and
    collects the states at every integrator substep as columns.  The fine
    sampling weights the snapshot energy by time spent, so low-energy fast
    directions are not over-represented by a handful of coarse samples.
    """
    cols = []
    for tr in data:
        x = np.asarray(tr.x0, dtype=float)
        _, segments = sample_observations(sys, x, tr.times, substeps)
        for seg in segments:
            cols.append(seg.states[:-1].T)
        cols.append(segments[-1].states[-1:].T)
    return np.hstack(cols)


def pod(snapshots, r: int, weights=None) -> RepresentativePair:
    """Rank-r proper orthogonal decomposition of a snapshot matrix.

    Returns the pair (U_r, U_r) of leading left singular vectors: the
    orthogonal projector onto the span that minimizes total squared snapshot
    reconstruction error among all rank-r subspaces.  Optional per-snapshot
    weights scale the columns by sqrt(w) before the decomposition.

    Raises
    ------
    RankDeficient
        If the snapshots do not numerically support rank r.
    """
    snaps = np.atleast_2d(np.asarray(snapshots, dtype=float))
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (snaps.shape[1],) or np.any(w < 0):
            raise RankDeficient("weights must be nonnegative, one per snapshot")
        snaps = snaps * np.sqrt(w)
    if not 1 <= r <= min(snaps.shape):
        raise RankDeficient(
            f"rank {r} not attainable from snapshot matrix of shape {snaps.shape}"
        )
    u, s, _ = np.linalg.svd(snaps, full_matrices=False)
    if s[r - 1] <= 1e-12 * s[0]:
        raise RankDeficient(
            f"snapshot singular value {r} is {s[r - 1]:.3e}; data rank is lower"
        )
    basis = u[:, :r]
    return RepresentativePair(basis, basis)


def lyapunov_solve(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve A P + P A^T + Q = 0 for symmetric Q.

    Uses the Kronecker-vectorized dense linear system
    (I (x) A + A (x) I) vec(P) = -vec(Q); exact for any A without mirrored
    eigenvalue pairs, and the solution is symmetrized on return.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = a.shape[0]
    if a.shape != (n, n) or q.shape != (n, n):
        raise RankDeficient(f"need square matrices, got {a.shape} and {q.shape}")
    eye = np.eye(n)
    lhs = np.kron(eye, a) + np.kron(a, eye)
    p = np.linalg.solve(lhs, -q.reshape(n * n, order="F")).reshape((n, n), order="F")
    return 0.5 * (p + p.T)


def _gramian_factor(p: np.ndarray) -> np.ndarray:
    """Factor L with P = L L^T from the eigendecomposition of a PSD matrix.

    Tiny negative eigenvalues from roundoff are clamped to zero.
    """
    w, v = np.linalg.eigh(0.5 * (p + p.T))
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def balancing_transform(sys: LtiSystem):
    """Full balancing transform of a Hurwitz LTI system.

    Returns (t, t_inv, sigma) where the columns of ``t`` are the balancing
    directions, ``t_inv @ t = I``, and both transformed Gramians
    t_inv P t_inv^T and t^T Q t equal diag(sigma), the Hankel singular
    values in decreasing order.

    Raises
    ------
    NotHurwitz
        If A has an eigenvalue with non-negative real part.
    NearSingularGramian
        If a Gramian is numerically rank-deficient, so no full transform
        exists.
    """
    eig = np.linalg.eigvals(sys.a)
    if np.max(eig.real) >= 0.0:
        raise NotHurwitz(
            f"A has eigenvalue with real part {np.max(eig.real):.3e} >= 0"
        )
    p = lyapunov_solve(sys.a, sys.b @ sys.b.T)
    q = lyapunov_solve(sys.a.T, sys.c.T @ sys.c)
    lfac = _gramian_factor(p)
    rfac = _gramian_factor(q)
    u, sigma, vt = np.linalg.svd(rfac.T @ lfac)
    if sigma[-1] <= 1e-12 * sigma[0]:
        raise NearSingularGramian(
            f"Hankel value {len(sigma)} is {sigma[-1]:.3e}; Gramians are singular"
        )
    scale = 1.0 / np.sqrt(sigma)
    t = lfac @ vt.T * scale
    t_inv = (u * scale).T @ rfac.T
    return t, t_inv, sigma


def balanced_truncation(sys: LtiSystem, r: int) -> RepresentativePair:
    """Rank-r balanced-truncation subspace pair of a Hurwitz LTI system.

    The raw factors Phi = L V_r S_r^{-1/2}, Psi = R U_r S_r^{-1/2} (with
    SVD R^T L = U S V^T of the Gramian factors) satisfy Psi^T Phi = I; they
    are orthonormalized afterwards, which changes neither subspace nor the
    induced projector, and the pair is sign-fixed.

    Raises
    ------
    NotHurwitz
        If A is not Hurwitz.
    NearSingularGramian
        If the Hankel spectrum cannot support rank r.
    """
    eig = np.linalg.eigvals(sys.a)
    if np.max(eig.real) >= 0.0:
        raise NotHurwitz(
            f"A has eigenvalue with real part {np.max(eig.real):.3e} >= 0"
        )
    if not 1 <= r <= sys.n:
        raise NearSingularGramian(f"rank {r} out of range for n={sys.n}")
    p = lyapunov_solve(sys.a, sys.b @ sys.b.T)
    q = lyapunov_solve(sys.a.T, sys.c.T @ sys.c)
    lfac = _gramian_factor(p)
    rfac = _gramian_factor(q)
    u, sigma, vt = np.linalg.svd(rfac.T @ lfac)
    if sigma[r - 1] <= 1e-12 * sigma[0]:
        raise NearSingularGramian(
            f"Hankel value {r} is {sigma[r - 1]:.3e}; reduce the target rank"
        )
    scale = 1.0 / np.sqrt(sigma[:r])
    phi = lfac @ vt[:r].T * scale
    psi = rfac @ u[:, :r] * scale
    return fix_sign(RepresentativePair(orthonormalize(phi), orthonormalize(psi)))


def bt_init_for(sys: DynamicalSystem, r: int, x0=None) -> RepresentativePair:
    """Balanced truncation of the linearization of a nonlinear system."""
    return balanced_truncation(linearize(sys, x0), r)
