"""Oblique projection of states and assembly of reduced-order models.

Given a pair (Phi, Psi) of full-column-rank representatives with
nonsingular pairing Psi^T Phi, the projector onto range(Phi) along the
orthogonal complement of range(Psi) is

    P = Phi (Psi^T Phi)^{-1} Psi^T,

and the reduced dynamics of x' = f(x, u), y = g(x) in coordinates x ~= Phi z
are

    z' = (Psi^T Phi)^{-1} Psi^T f(Phi z, u),   yhat = g(Phi z),
    z(t0) = (Psi^T Phi)^{-1} Psi^T x0.

The reduced output depends only on the two subspaces, not on the chosen
representatives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularPairing
from .manifold import RepresentativePair
from .system import DynamicalSystem, QuadraticBilinearModel

__all__ = [
    "pairing_inverse",
    "project",
    "reduce_to_coords",
    "ReducedModel",
    "assemble_rom",
    "save_checkpoint",
    "load_checkpoint",
]

logger = logging.getLogger(__name__)

# Above this condition number the projector is numerically untrustworthy.
_COND_WARN = 1e8


def pairing_inverse(pair: RepresentativePair) -> np.ndarray:
    """Inverse cross-Gramian A = (Psi^T Phi)^{-1}.

    Raises
    ------
    SingularPairing
        If the pairing is singular to machine precision.
    """
    g = pair.pairing()
    sign, logdet = np.linalg.slogdet(g)
    if sign == 0.0 or not np.isfinite(logdet):
        raise SingularPairing("det(Psi^T Phi) underflowed; subspaces are orthogonal")
    cond = np.linalg.cond(g)
    if cond > _COND_WARN:
        logger.warning(
            "pairing condition number %.3e exceeds %.0e; projector is ill-conditioned",
            cond,
            _COND_WARN,
        )
    return np.linalg.inv(g)


def project(pair: RepresentativePair, x) -> np.ndarray:
    """Apply the oblique projector P = Phi (Psi^T Phi)^{-1} Psi^T to ``x``."""
    x = np.asarray(x, dtype=float)
    return pair.phi @ np.linalg.solve(pair.pairing(), pair.psi.T @ x)


def reduce_to_coords(pair: RepresentativePair, x) -> np.ndarray:
    """Reduced coordinates z = (Psi^T Phi)^{-1} Psi^T x of a full state."""
    x = np.asarray(x, dtype=float)
    return np.linalg.solve(pair.pairing(), pair.psi.T @ x)


@dataclass
class ReducedModel:
    """Petrov-Galerkin reduced model; itself a dynamical system of order r.

    ``w`` caches (Psi^T Phi)^{-1} Psi^T = A Psi^T.  For quadratic-bilinear
    full models the reduced operators (a_r, h_r, b_r) are precomputed so the
    reduced right-hand side and its Jacobian products cost O(r^3) instead of
    full-order evaluations.
    """

    full: DynamicalSystem
    pair: RepresentativePair
    a_inv: np.ndarray
    w: np.ndarray
    a_r: np.ndarray | None = None
    h_r: np.ndarray | None = None
    b_r: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.pair.r

    @property
    def m(self) -> int:
        return self.full.m

    @property
    def d(self) -> int:
        return self.full.d

    @property
    def r(self) -> int:
        return self.pair.r

    def reduce_ic(self, x0) -> np.ndarray:
        """Reduced initial condition z0 = (Psi^T Phi)^{-1} Psi^T x0."""
        return self.w @ np.asarray(x0, dtype=float)

    def lift(self, z) -> np.ndarray:
        """Full-order reconstruction Phi z."""
        return self.pair.phi @ np.asarray(z, dtype=float)

    def rhs(self, z, u, t=0.0) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.a_r is not None:
            out = self.a_r @ z + np.einsum("abc,b,c->a", self.h_r, z, z)
            if u is not None:
                out = out + self.b_r @ np.asarray(u, dtype=float)
            return out
        return self.w @ self.full.rhs(self.pair.phi @ z, u, t)

    def jvp(self, z, u, t, v) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.a_r is not None:
            return (
                self.a_r @ v
                + np.einsum("abc,b,c->a", self.h_r, v, z)
                + np.einsum("abc,b,c->a", self.h_r, z, v)
            )
        return self.w @ self.full.jvp(self.pair.phi @ z, u, t, self.pair.phi @ v)

    def jtvp(self, z, u, t, v) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.a_r is not None:
            return (
                self.a_r.T @ v
                + np.einsum("a,abc,c->b", v, self.h_r, z)
                + np.einsum("a,abc,b->c", v, self.h_r, z)
            )
        return self.pair.phi.T @ self.full.jtvp(
            self.pair.phi @ z, u, t, self.w.T @ v
        )

    def obs(self, z) -> np.ndarray:
        return self.full.obs(self.pair.phi @ np.asarray(z, dtype=float))

    def obs_jtvp(self, z, w) -> np.ndarray:
        return self.pair.phi.T @ self.full.obs_jtvp(
            self.pair.phi @ np.asarray(z, dtype=float), w
        )


def assemble_rom(sys: DynamicalSystem, pair: RepresentativePair) -> ReducedModel:
    """Build the reduced model induced by ``pair`` on ``sys``.

    Quadratic-bilinear systems get precomputed reduced operators; any other
    system is reduced by composing its callables with the projection maps.
    """
    if pair.n != sys.n:
        raise DimensionMismatch(
            f"pair is {pair.n}-dimensional but the system has n={sys.n}"
        )
    a_inv = pairing_inverse(pair)
    w = a_inv @ pair.psi.T
    rom = ReducedModel(full=sys, pair=pair, a_inv=a_inv, w=w)
    if isinstance(sys, QuadraticBilinearModel):
        phi = pair.phi
        rom.a_r = w @ sys.a @ phi
        rom.b_r = w @ sys.b
        r = pair.r
        h_r = np.zeros((r, r, r))
        if sys.h_triplets.size:
            i = sys.h_triplets[:, 0].astype(int)
            j = sys.h_triplets[:, 1].astype(int)
            k = sys.h_triplets[:, 2].astype(int)
            v = sys.h_triplets[:, 3]
            h_r = np.einsum("ta,tb,tc->abc", (w[:, i] * v).T, phi[j, :], phi[k, :])
        rom.h_r = h_r
    return rom


def save_checkpoint(path, pair: RepresentativePair, meta: dict | None = None) -> None:
    """Write a subspace-pair checkpoint as JSON.

    Format: ``{"n", "r", "phi", "psi", "meta"}`` with row-major flat arrays
    and ``meta`` holding at least gamma, iterations, final_cost and
    final_grad_norm for trained pairs.
    """
    doc = {
        "n": pair.n,
        "r": pair.r,
        "phi": pair.phi.ravel().tolist(),
        "psi": pair.psi.ravel().tolist(),
        "meta": dict(meta or {}),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> tuple[RepresentativePair, dict]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path) as fh:
        doc = json.load(fh)
    n, r = int(doc["n"]), int(doc["r"])
    phi = np.asarray(doc["phi"], dtype=float).reshape(n, r)
    psi = np.asarray(doc["psi"], dtype=float).reshape(n, r)
    return RepresentativePair(phi, psi), dict(doc.get("meta", {}))
