"""Geometry of the product of two Grassmann manifolds.

A point on Gr(n, r) x Gr(n, r) is represented by a pair of n x r matrices with
orthonormal columns (``RepresentativePair``); tangent vectors are represented
by horizontal lifts, pairs of n x r matrices satisfying Phi^T X = 0 and
Psi^T Y = 0 (``TangentLift``).  All functions below accept and return plain
``numpy.ndarray`` factors.

The metric on lifts at a (not necessarily orthonormal) representative pair is

    <(X1, Y1), (X2, Y2)> = tr[(Phi^T Phi)^{-1} X1^T X2]
                         + tr[(Psi^T Psi)^{-1} Y1^T Y2],

which is invariant under re-basing (Phi, X) -> (Phi S, X S) for S in GL_r.
For orthonormal representatives it reduces to the Frobenius inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient, SingularPairing

__all__ = [
    "RepresentativePair",
    "TangentLift",
    "orthonormalize",
    "fix_sign",
    "metric",
    "norm",
    "horizontal_project",
    "geodesic_step",
    "parallel_translate",
    "retract",
    "transport_by_projection",
    "subspace_distance",
    "random_pair",
    "random_horizontal",
]

# Column scales below this (relative to the largest) are treated as rank loss.
_RANK_RTOL = 1e-12


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < m.shape[1]:
        raise DimensionMismatch(
            f"{name} must be tall (n >= r), got shape {m.shape}"
        )
    if not np.all(np.isfinite(m)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return m


@dataclass(frozen=True)
class TangentLift:
    """Horizontal lift (X, Y) of a tangent vector to the product manifold."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise DimensionMismatch(
                f"lift blocks must share a shape, got {self.x.shape} vs {self.y.shape}"
            )

    def __add__(self, other: "TangentLift") -> "TangentLift":
        return TangentLift(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "TangentLift") -> "TangentLift":
        return TangentLift(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "TangentLift":
        return TangentLift(-self.x, -self.y)

    def __mul__(self, scalar: float) -> "TangentLift":
        return TangentLift(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class RepresentativePair:
    """Representatives (Phi, Psi) of a subspace pair (V, W).

    Orthonormal columns are the working convention maintained by the optimizer
    and the factory functions here; operations that are representative-
    invariant (metric, projector, reduced model) also accept general full-rank
    representatives.
    """

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        phi = _as_matrix(self.phi, "phi")
        psi = _as_matrix(self.psi, "psi")
        if phi.shape != psi.shape:
            raise DimensionMismatch(
                f"phi and psi must share a shape, got {phi.shape} vs {psi.shape}"
            )
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def r(self) -> int:
        return self.phi.shape[1]

    def pairing(self) -> np.ndarray:
        """Cross-Gramian Psi^T Phi of the two representatives."""
        return self.psi.T @ self.phi


def orthonormalize(m) -> np.ndarray:
    """Return an orthonormal basis of range(m) via thin QR.

    The R factor is normalized to a positive diagonal, so the result is
    deterministic and maps an already orthonormal input to itself.

    Raises
    ------
    RankDeficient
        If the columns of ``m`` are (numerically) linearly dependent.
    """
    m = _as_matrix(m)
    q, r = np.linalg.qr(m)
    diag = np.diagonal(r)
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) <= _RANK_RTOL * scale:
        raise RankDeficient(
            f"columns are numerically dependent (|R_ii| min {np.min(np.abs(diag)):.3e})"
        )
    return q * np.sign(diag)


def fix_sign(pair: RepresentativePair) -> RepresentativePair:
    """Flip the first column of phi so that det(Psi^T Phi) > 0.

    Raises
    ------
    SingularPairing
        If det(Psi^T Phi) is exactly zero.
    """
    sign, _ = np.linalg.slogdet(pair.pairing())
    if sign == 0.0:
        raise SingularPairing("det(Psi^T Phi) = 0; cannot orient the pair")
    if sign < 0.0:
        phi = pair.phi.copy()
        phi[:, 0] = -phi[:, 0]
        return RepresentativePair(phi, pair.psi)
    return pair


def metric(pair: RepresentativePair, a: TangentLift, b: TangentLift) -> float:
    """Riemannian inner product of two lifts at ``pair``.

    Uses the general re-basing-invariant form with Gram-matrix weights, so
    non-orthonormal representatives are handled correctly.
    """
    gx = pair.phi.T @ pair.phi
    gy = pair.psi.T @ pair.psi
    tx = np.trace(np.linalg.solve(gx, a.x.T @ b.x))
    ty = np.trace(np.linalg.solve(gy, a.y.T @ b.y))
    return float(tx + ty)


def norm(pair: RepresentativePair, a: TangentLift) -> float:
    """Metric norm of a lift at ``pair``."""
    return float(np.sqrt(max(metric(pair, a, a), 0.0)))


def horizontal_project(base: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Project ``m`` onto the horizontal space at an orthonormal ``base``.

    Returns m - base (base^T m), the component of ``m`` orthogonal to
    range(base).  Idempotent.
    """
    base = np.asarray(base, dtype=float)
    m = np.asarray(m, dtype=float)
    return m - base @ (base.T @ m)


def geodesic_step(base: np.ndarray, direction: np.ndarray, alpha: float) -> np.ndarray:
    """Point reached after time ``alpha`` along the Grassmann geodesic.

    With the thin SVD direction = U S V^T the geodesic from an orthonormal
    ``base`` with initial velocity ``direction`` is

        Phi(alpha) = (base V cos(alpha S) + U sin(alpha S)) V^T.

    The result is re-orthonormalized only if roundoff drift exceeds 1e-12.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if base.shape != direction.shape:
        raise DimensionMismatch(
            f"base and direction must share a shape, got {base.shape} vs {direction.shape}"
        )
    u, s, vt = np.linalg.svd(direction, full_matrices=False)
    c = np.cos(alpha * s)
    sn = np.sin(alpha * s)
    out = (base @ vt.T * c + u * sn) @ vt
    r = out.shape[1]
    drift = np.linalg.norm(out.T @ out - np.eye(r))
    if drift > 1e-12:
        out = orthonormalize(out)
    return out


def parallel_translate(
    base: np.ndarray, direction: np.ndarray, alpha: float, v: np.ndarray
) -> np.ndarray:
    """Parallel-translate the lift ``v`` along the geodesic of ``direction``.

    Uses the closed form built from the thin SVD direction = U S V^T:

        T(v) = (-base V sin(alpha S) + U cos(alpha S)) U^T v + (I - U U^T) v.

    Translation is a linear isometry; translating ``direction`` itself yields
    the geodesic's velocity at time ``alpha``.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    v = np.asarray(v, dtype=float)
    u, s, vt = np.linalg.svd(direction, full_matrices=False)
    utv = u.T @ v
    c = np.cos(alpha * s)
    sn = np.sin(alpha * s)
    return (-(base @ vt.T) * sn + u * c) @ utv + v - u @ utv


def retract(base: np.ndarray, v: np.ndarray) -> np.ndarray:
    """First-order retraction: orthonormal basis of range(base + v)."""
    return orthonormalize(np.asarray(base, dtype=float) + np.asarray(v, dtype=float))


def transport_by_projection(
    base: np.ndarray, direction: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Transport ``v`` to the retracted point by horizontal projection.

    Returns ``v`` minus its component along range(base + direction), the lift
    of the transported tangent at the representative base + direction.  Its
    metric norm at the retracted point never exceeds the norm of ``v`` at
    ``base``.
    """
    target = np.asarray(base, dtype=float) + np.asarray(direction, dtype=float)
    q = orthonormalize(target)
    return v - q @ (q.T @ v)


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between the orthogonal projectors onto two ranges."""
    qa = orthonormalize(a)
    qb = orthonormalize(b)
    return float(np.linalg.norm(qa @ qa.T - qb @ qb.T))


def random_pair(n: int, r: int, rng: np.random.Generator) -> RepresentativePair:
    """Random orthonormal, sign-fixed representative pair."""
    phi = orthonormalize(rng.standard_normal((n, r)))
    psi = orthonormalize(rng.standard_normal((n, r)))
    return fix_sign(RepresentativePair(phi, psi))


def random_horizontal(
    pair: RepresentativePair, rng: np.random.Generator, unit: bool = True
) -> TangentLift:
    """Random horizontal lift at ``pair``, metric-normalized by default."""
    lift = TangentLift(
        horizontal_project(pair.phi, rng.standard_normal(pair.phi.shape)),
        horizontal_project(pair.psi, rng.standard_normal(pair.psi.shape)),
    )
    if unit:
        lift = lift * (1.0 / norm(pair, lift))
    return lift
