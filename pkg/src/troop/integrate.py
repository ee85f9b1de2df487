"""Fixed-step RK4 integration with dense output, plus quadrature helpers.

Forward and adjoint solves use the classical fourth-order Runge-Kutta scheme
with a fixed step; stage values at the grid nodes double as derivative data
for cubic Hermite interpolation, whose O(h^4) accuracy matches the scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DimensionMismatch, NonFiniteState

__all__ = [
    "DenseTrajectory",
    "integrate_forward",
    "integrate_adjoint_backward",
    "QuadratureRule",
    "quad_integrate",
]


@dataclass(frozen=True)
class DenseTrajectory:
    """Piecewise cubic Hermite interpolant of an ODE solution.

    ``times`` is strictly increasing; ``states`` and ``derivs`` hold the
    solution and its time derivative at the nodes.  Evaluation at a node
    returns the stored state exactly.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        f = np.asarray(self.derivs, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise DimensionMismatch("need at least two time nodes")
        if np.any(np.diff(t) <= 0):
            raise DimensionMismatch("times must be strictly increasing")
        if x.shape != (len(t),) + x.shape[1:] or f.shape != x.shape:
            raise DimensionMismatch("states/derivs must align with times")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "derivs", f)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        lo, hi = self.times[0], self.times[-1]
        # Tolerate roundoff-level excursions outside the span.
        slack = 1e-9 * max(1.0, abs(lo), abs(hi))
        if t < lo - slack or t > hi + slack:
            raise ValueError(f"t={t} outside trajectory span [{lo}, {hi}]")
        t = min(max(t, lo), hi)
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(max(k, 0), len(self.times) - 2)
        h = self.times[k + 1] - self.times[k]
        s = (t - self.times[k]) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return (
            h00 * self.states[k]
            + h10 * h * self.derivs[k]
            + h01 * self.states[k + 1]
            + h11 * h * self.derivs[k + 1]
        )


def _grid(t0: float, t1: float, step: float) -> np.ndarray:
    """Equispaced grid from t0 toward t1 with the last step shortened."""
    if not step > 0:
        raise DimensionMismatch(f"step must be positive, got {step}")
    span = t1 - t0
    if not span > 0:
        raise DimensionMismatch(f"need t1 > t0, got [{t0}, {t1}]")
    n_full = int(np.floor(span / step + 1e-12))
    ts = t0 + step * np.arange(n_full + 1)
    if t1 - ts[-1] > 1e-12 * max(1.0, abs(t1)):
        ts = np.append(ts, t1)
    else:
        ts[-1] = t1
    return ts


def _rk4_path(rhs, x0: np.ndarray, ts: np.ndarray) -> DenseTrajectory:
    """RK4 sweep over the node sequence ``ts`` (monotone either way)."""
    x = np.array(x0, dtype=float)
    states = np.empty((len(ts),) + x.shape)
    derivs = np.empty_like(states)
    states[0] = x
    derivs[0] = rhs(float(ts[0]), x)
    for k in range(len(ts) - 1):
        t = float(ts[k])
        h = float(ts[k + 1] - ts[k])
        k1 = derivs[k]
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(
                f"state became non-finite near t={ts[k + 1]:.6g}", t=float(ts[k + 1])
            )
        states[k + 1] = x
        derivs[k + 1] = rhs(float(ts[k + 1]), x)
    if ts[0] > ts[-1]:
        return DenseTrajectory(ts[::-1].copy(), states[::-1].copy(), derivs[::-1].copy())
    return DenseTrajectory(ts, states, derivs)


def integrate_forward(rhs, x0, t0: float, t1: float, step: float) -> DenseTrajectory:
    """Solve x' = rhs(t, x) on [t0, t1] with fixed-step RK4.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, x) -> dx/dt``.
    x0 : array_like
        Initial state at ``t0``.
    step : float
        Nominal step; the final step is shortened to land exactly on ``t1``.

    Raises
    ------
    NonFiniteState
        If the state leaves the representable range mid-integration.
    """
    return _rk4_path(rhs, np.asarray(x0, dtype=float), _grid(t0, t1, step))


def integrate_adjoint_backward(
    lin_rhs_transpose, lam_end, t_hi: float, t_lo: float, step: float
) -> DenseTrajectory:
    """Solve the adjoint equation -lam' = F(t)* lam backward in time.

    ``lin_rhs_transpose(t, lam)`` applies the adjoint operator F(t)*; the
    solve runs from ``t_hi`` down to ``t_lo`` with terminal value ``lam_end``
    and the result is stored forward in time for interpolation.
    """
    ts = _grid(t_lo, t_hi, step)[::-1].copy()

    def rhs(t, lam):
        return -lin_rhs_transpose(t, lam)

    return _rk4_path(rhs, np.asarray(lam_end, dtype=float), ts)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on the reference interval [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, order: int, panels: int = 1) -> "QuadratureRule":
        """Composite Gauss-Legendre rule: ``panels`` equal panels of ``order`` points.

        A single panel is the classical rule.  More panels resolve
        boundary-layer integrands (violent transients) that a lone
        high-order panel misses entirely.
        """
        if not 1 <= order <= 10:
            raise DimensionMismatch(f"quadrature order must be in [1, 10], got {order}")
        if panels < 1:
            raise DimensionMismatch(f"panel count must be >= 1, got {panels}")
        base_nodes, base_weights = leggauss(order)
        if panels == 1:
            return cls(order=order, nodes=base_nodes, weights=base_weights)
        edges = np.linspace(-1.0, 1.0, panels + 1)
        half = 1.0 / panels
        nodes = np.concatenate([0.5 * (lo + hi) + half * base_nodes
                                for lo, hi in zip(edges[:-1], edges[1:])])
        weights = np.tile(half * base_weights, panels)
        return cls(order=order, nodes=nodes, weights=weights)


def quad_integrate(rule: QuadratureRule, f, t_lo: float, t_hi: float):
    """Approximate the integral of ``f`` over [t_lo, t_hi] with ``rule``.

    ``f`` may return scalars or arrays of any fixed shape.  Exact for
    polynomials of degree <= 2*order - 1.
    """
    mid = 0.5 * (t_hi + t_lo)
    half = 0.5 * (t_hi - t_lo)
    total = None
    for xi, wi in zip(rule.nodes, rule.weights):
        val = wi * np.asarray(f(mid + half * xi), dtype=float)
        total = val if total is None else total + val
    result = half * total
    return float(result) if result.ndim == 0 else result
