"""Full-order dynamical systems: x' = f(x, u, t), y = g(x).

A system is anything exposing the attributes ``n`` (state dim), ``m`` (output
dim), ``d`` (input dim) and the callables ``rhs(x, u, t)``, ``jvp(x, u, t,
v)``, ``jtvp(x, u, t, v)`` (Jacobian- and transposed-Jacobian-vector products
of f in x), ``obs(x)`` and ``obs_jtvp(x, w)``.  Inputs enter as a known signal
u(t) supplied by the caller; impulse responses are encoded as initial
conditions, so gradients never differentiate through u.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DimensionMismatch
from .integrate import integrate_forward

__all__ = [
    "DynamicalSystem",
    "QuadraticBilinearModel",
    "LtiSystem",
    "toy_model",
    "linearize",
    "load_model",
    "save_model",
    "sample_observations",
]


class DynamicalSystem(Protocol):
    """Structural interface shared by full and reduced models."""

    n: int
    m: int
    d: int

    def rhs(self, x, u, t): ...
    def jvp(self, x, u, t, v): ...
    def jtvp(self, x, u, t, v): ...
    def obs(self, x): ...
    def obs_jtvp(self, x, w): ...


def _symmetrize_triplets(triplets) -> np.ndarray:
    """Put quadratic-term triplets (i, j, k, value) in symmetric form.

    Each entry contributes value * x_j * x_k to component i of f.  Ingestion
    splits off-diagonal entries across (j, k) and (k, j) so the stored tensor
    is symmetric in its last two indices; duplicate index triples coalesce.
    """
    if triplets is None or len(triplets) == 0:
        return np.zeros((0, 4))
    raw = np.asarray(triplets, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 4:
        raise DimensionMismatch(
            f"quadratic triplets must be rows (i, j, k, value), got shape {raw.shape}"
        )
    acc: dict[tuple[int, int, int], float] = {}
    for i, j, k, val in raw:
        i, j, k = int(i), int(j), int(k)
        if j == k:
            acc[(i, j, k)] = acc.get((i, j, k), 0.0) + val
        else:
            acc[(i, j, k)] = acc.get((i, j, k), 0.0) + 0.5 * val
            acc[(i, k, j)] = acc.get((i, k, j), 0.0) + 0.5 * val
    rows = [(i, j, k, v) for (i, j, k), v in sorted(acc.items()) if v != 0.0]
    return np.asarray(rows, dtype=float).reshape(-1, 4)


@dataclass
class QuadraticBilinearModel:
    """Model f(x, u) = A x + H(x (x) x) + B u with linear output y = C x.

    The quadratic term is stored as sparse triplets (i, j, k, value),
    symmetrized on ingestion.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    h_triplets: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(self.a.shape[0], -1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1, self.a.shape[0])
        self.h_triplets = _symmetrize_triplets(self.h_triplets)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise DimensionMismatch(f"a must be square, got {self.a.shape}")
        if self.h_triplets.size:
            idx = self.h_triplets[:, :3]
            if idx.min() < 0 or idx.max() >= n:
                raise DimensionMismatch("quadratic triplet index out of range")
        self._i = self.h_triplets[:, 0].astype(int)
        self._j = self.h_triplets[:, 1].astype(int)
        self._k = self.h_triplets[:, 2].astype(int)
        self._v = self.h_triplets[:, 3]

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    def _quad(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        if self._v.size:
            np.add.at(out, self._i, self._v * x[self._j] * x[self._k])
        return out

    def rhs(self, x, u, t=0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.zeros(self.d) if u is None else np.asarray(u, dtype=float)
        return self.a @ x + self._quad(x) + self.b @ u

    def jvp(self, x, u, t, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = self.a @ v
        if self._v.size:
            np.add.at(
                out,
                self._i,
                self._v * (v[self._j] * x[self._k] + x[self._j] * v[self._k]),
            )
        return out

    def jtvp(self, x, u, t, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = self.a.T @ v
        if self._v.size:
            np.add.at(out, self._j, self._v * v[self._i] * x[self._k])
            np.add.at(out, self._k, self._v * v[self._i] * x[self._j])
        return out

    def obs(self, x) -> np.ndarray:
        return self.c @ np.asarray(x, dtype=float)

    def obs_jtvp(self, x, w) -> np.ndarray:
        return self.c.T @ np.asarray(w, dtype=float)


@dataclass
class LtiSystem:
    """Linear time-invariant system x' = A x + B u, y = C x."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(self.a.shape[0], -1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1, self.a.shape[0])
        if self.a.shape[0] != self.a.shape[1]:
            raise DimensionMismatch(f"a must be square, got {self.a.shape}")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    def rhs(self, x, u, t=0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.zeros(self.d) if u is None else np.asarray(u, dtype=float)
        return self.a @ x + self.b @ u

    def jvp(self, x, u, t, v) -> np.ndarray:
        return self.a @ np.asarray(v, dtype=float)

    def jtvp(self, x, u, t, v) -> np.ndarray:
        return self.a.T @ np.asarray(v, dtype=float)

    def obs(self, x) -> np.ndarray:
        return self.c @ np.asarray(x, dtype=float)

    def obs_jtvp(self, x, w) -> np.ndarray:
        return self.c.T @ np.asarray(w, dtype=float)


def toy_model() -> QuadraticBilinearModel:
    """Three-state benchmark with quadratic cross terms.

        x1' = -x1 + 20 x1 x3 + u
        x2' = -2 x2 + 20 x2 x3 + u
        x3' = -5 x3 + u
        y   = x1 + x2 + x3

    The linearization at the origin is diagonal and Hurwitz, yet impulse
    responses with amplitude above 0.2 show transient output growth through
    the quadratic coupling to the fast state x3.
    """
    return QuadraticBilinearModel(
        a=np.diag([-1.0, -2.0, -5.0]),
        b=np.array([[1.0], [1.0], [1.0]]),
        c=np.array([[1.0, 1.0, 1.0]]),
        h_triplets=np.array([[0, 0, 2, 20.0], [1, 1, 2, 20.0]]),
    )


def linearize(sys: DynamicalSystem, x0=None) -> LtiSystem:
    """LTI system (A, B, C) from the Jacobian of f at ``x0`` (default 0).

    A is assembled column-by-column from Jacobian-vector products; B and C
    are taken from the model definition.
    """
    x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float)
    u0 = np.zeros(sys.d)
    cols = [sys.jvp(x0, u0, 0.0, e) for e in np.eye(sys.n)]
    return LtiSystem(a=np.column_stack(cols), b=sys.b, c=sys.c)


def load_model(path) -> QuadraticBilinearModel | LtiSystem:
    """Read a model from its JSON description.

    The format is ``{"type": "qb"|"lti", "n", "m", "d", "a", "b", "c"}`` with
    matrices as row-major flat arrays and, for "qb", ``"h"`` as a list of
    (i, j, k, value) rows.
    """
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("type")
    n, m, d = int(doc["n"]), int(doc["m"]), int(doc["d"])
    a = np.asarray(doc["a"], dtype=float).reshape(n, n)
    b = np.asarray(doc["b"], dtype=float).reshape(n, d)
    c = np.asarray(doc["c"], dtype=float).reshape(m, n)
    if kind == "lti":
        return LtiSystem(a=a, b=b, c=c)
    if kind == "qb":
        h = np.asarray(doc.get("h", []), dtype=float).reshape(-1, 4)
        return QuadraticBilinearModel(a=a, b=b, c=c, h_triplets=h)
    raise DimensionMismatch(f"unknown model type {kind!r}")


def save_model(sys, path) -> None:
    """Write a model to the JSON format understood by :func:`load_model`."""
    doc = {
        "n": sys.n,
        "m": sys.m,
        "d": sys.d,
        "a": np.asarray(sys.a).ravel().tolist(),
        "b": np.asarray(sys.b).ravel().tolist(),
        "c": np.asarray(sys.c).ravel().tolist(),
    }
    if isinstance(sys, QuadraticBilinearModel):
        doc["type"] = "qb"
        doc["h"] = [
            [int(i), int(j), int(k), float(v)] for i, j, k, v in sys.h_triplets
        ]
    elif isinstance(sys, LtiSystem):
        doc["type"] = "lti"
    else:
        raise DimensionMismatch(f"cannot serialize system of type {type(sys)!r}")
    with open(path, "w") as fh:
        json.dump(doc, fh)


def sample_observations(
    sys: DynamicalSystem, x0, times, substeps: int = 50, u_fn=None
):
    """Simulate ``sys`` from ``x0`` and observe at the sample ``times``.

    Integration runs interval-by-interval with ``substeps`` RK4 steps per
    sampling interval.  Returns (outputs, segments) where outputs has shape
    (len(times), m) and ``segments`` holds one dense trajectory per interval.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1:
        raise DimensionMismatch("need a 1-D array of sample times")
    if np.any(np.diff(times) <= 0):
        raise DimensionMismatch("sample times must be strictly increasing")
    zero_u = np.zeros(sys.d)

    def rhs(t, x):
        return sys.rhs(x, zero_u if u_fn is None else u_fn(t), t)

    x = np.asarray(x0, dtype=float)
    outputs = np.empty((len(times), sys.m))
    outputs[0] = sys.obs(x)
    segments = []
    for k in range(len(times) - 1):
        t_lo, t_hi = float(times[k]), float(times[k + 1])
        seg = integrate_forward(rhs, x, t_lo, t_hi, step=(t_hi - t_lo) / substeps)
        segments.append(seg)
        x = seg.states[-1]
        outputs[k + 1] = sys.obs(x)
    return outputs, segments
