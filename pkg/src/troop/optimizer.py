"""Riemannian conjugate gradient on the product of two Grassmannians.

The iteration follows geodesics (or, optionally, QR retractions) of the
product manifold, moves the previous search direction with parallel
translation (or projection transport), and combines it with the new gradient
using the Dai-Yuan coefficient

    beta = <g+, g+> / ( <g+, T(eta)> - <g, eta> ),

where eta is the current descent direction and T its transport to the new
iterate.  Steps are chosen by a bisection line search enforcing the Wolfe
conditions

    J(alpha) <= J(0) + c1 alpha J'(0),      J'(alpha) >= c2 J'(0),

which together guarantee a positive beta denominator.  After each step the
first column of Phi (and of the transported direction) is flipped if needed
so that det(Psi^T Phi) stays positive.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DegenerateDenominator,
    DimensionMismatch,
    LineSearchFailed,
    SingularPairing,
)
from .manifold import (
    RepresentativePair,
    TangentLift,
    fix_sign,
    geodesic_step,
    metric,
    orthonormalize,
    parallel_translate,
    retract,
    transport_by_projection,
)
from .objective import (
    ObjectiveConfig,
    evaluate,
    evaluate_integrated,
    gradient_integrated,
    gradient_sampled,
)

__all__ = [
    "CgConfig",
    "CgRecord",
    "OptimizeResult",
    "wolfe_bisection",
    "dai_yuan_beta",
    "optimize",
]


@dataclass(frozen=True)
class CgConfig:
    """Line-search constants, stopping rule and transport choice.

    ``eps`` bounds the squared gradient metric-norm at termination.
    ``transport_mode`` selects geodesic stepping with parallel translation
    ("exponential") or QR retraction with projection transport
    ("retraction").
    """

    c1: float = 0.01
    c2: float = 0.1
    eps: float = 1e-8
    max_iters: int = 500
    max_bisections: int = 60
    transport_mode: str = "exponential"

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise DimensionMismatch(
                f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}"
            )
        if not self.eps > 0.0:
            raise DimensionMismatch(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0:
            raise DimensionMismatch("max_iters must be >= 0")
        if self.max_bisections < 1:
            raise DimensionMismatch("max_bisections must be >= 1")
        if self.transport_mode not in ("exponential", "retraction"):
            raise DimensionMismatch(
                f"unknown transport mode {self.transport_mode!r}"
            )


@dataclass(frozen=True)
class CgRecord:
    """One line of the optimization trace.

    ``step_alpha``, ``beta`` and ``line_search_evals`` describe the step
    taken *from* this iterate; they are None on the final record.
    """

    objective: float
    grad_norm_sq: float
    step_alpha: float | None
    beta: float | None
    line_search_evals: int | None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OptimizeResult:
    pair: RepresentativePair
    trace: tuple[CgRecord, ...]
    converged: bool
    iterations: int

    @property
    def final_cost(self) -> float:
        return self.trace[-1].objective

    @property
    def final_grad_norm(self) -> float:
        return float(np.sqrt(self.trace[-1].grad_norm_sq))


def wolfe_bisection(phi, dphi, cfg: CgConfig = CgConfig()) -> float:
    """Step length satisfying the Wolfe conditions along phi(alpha).

    Starting from alpha = 1, the trial step doubles while the sufficient-
    decrease condition holds but the curvature condition fails, and bisects
    once a violation brackets the step.  Non-finite objective values (reduced
    model blow-up) count as sufficient-decrease failures, so the search backs
    away from blow-up regions automatically.

    If the bisection budget runs out, the largest trial satisfying
    sufficient decrease is returned (this happens only in pathological
    landscapes where no Wolfe point exists, e.g. a linear decrease ending at
    a blow-up wall); LineSearchFailed is raised only if every trial violated
    sufficient decrease.
    """
    f0 = phi(0.0)
    g0 = dphi(0.0)
    if not np.isfinite(f0):
        raise LineSearchFailed(f"objective not finite at the base point: {f0}")
    if not g0 < 0.0:
        raise LineSearchFailed(f"not a descent direction: J'(0) = {g0:.3e}")
    lo, hi = 0.0, np.inf
    alpha = 1.0
    best_decrease = None
    for _ in range(cfg.max_bisections):
        f = phi(alpha)
        if not f <= f0 + cfg.c1 * alpha * g0:
            hi = alpha
            alpha = 0.5 * (lo + hi)
            continue
        best_decrease = alpha if best_decrease is None else max(best_decrease, alpha)
        if dphi(alpha) < cfg.c2 * g0:
            lo = alpha
            alpha = 2.0 * alpha if np.isinf(hi) else 0.5 * (lo + hi)
            continue
        return alpha
    if best_decrease is not None:
        return best_decrease
    raise LineSearchFailed(
        f"no sufficient-decrease step within {cfg.max_bisections} bisections"
    )


def dai_yuan_beta(
    grad_next: TangentLift,
    grad_prev: TangentLift,
    dir_prev_transported: TangentLift,
    dir_prev: TangentLift,
    pair_next: RepresentativePair,
    pair_prev: RepresentativePair,
) -> float:
    """Dai-Yuan conjugacy coefficient for descent directions.

    ``dir_prev`` is the search direction at the previous iterate and
    ``dir_prev_transported`` its transport to the new one.  Under Wolfe steps
    the denominator is bounded below by (c2 - 1) <g, eta> > 0.  In the
    Euclidean special case this reduces to the classical
    ||g+||^2 / <d, g+ - g>.

    Raises
    ------
    DegenerateDenominator
        If the denominator vanishes or is non-finite; callers restart with
        steepest descent (beta = 0).
    """
    num = metric(pair_next, grad_next, grad_next)
    den = metric(pair_next, grad_next, dir_prev_transported) - metric(
        pair_prev, grad_prev, dir_prev
    )
    if not np.isfinite(den) or den == 0.0:
        raise DegenerateDenominator(f"beta denominator is {den}")
    return num / den


def _flip_first_column(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    out[:, 0] = -out[:, 0]
    return out


def _step_and_transport(pair, direction, alpha, mode):
    """New representative pair and transported direction lift at it."""
    if mode == "exponential":
        phi_a = geodesic_step(pair.phi, direction.x, alpha)
        psi_a = geodesic_step(pair.psi, direction.y, alpha)
        tx = parallel_translate(pair.phi, direction.x, alpha, direction.x)
        ty = parallel_translate(pair.psi, direction.y, alpha, direction.y)
        return RepresentativePair(phi_a, psi_a), TangentLift(tx, ty)
    # Retraction mode: orthonormalize the stepped representative and re-base
    # the projected lift onto it (lift_{Q} = lift_{Phi + a X} R^{-1}).
    phi_a = retract(pair.phi, alpha * direction.x)
    psi_a = retract(pair.psi, alpha * direction.y)
    tx = transport_by_projection(pair.phi, alpha * direction.x, direction.x)
    ty = transport_by_projection(pair.psi, alpha * direction.y, direction.y)
    rx = phi_a.T @ (pair.phi + alpha * direction.x)
    ry = psi_a.T @ (pair.psi + alpha * direction.y)
    tx = np.linalg.solve(rx.T, tx.T).T
    ty = np.linalg.solve(ry.T, ty.T).T
    return RepresentativePair(phi_a, psi_a), TangentLift(tx, ty)


def optimize(
    sys,
    init: RepresentativePair,
    data,
    obj_cfg: ObjectiveConfig = ObjectiveConfig(),
    cg_cfg: CgConfig = CgConfig(),
) -> OptimizeResult:
    """Minimize the trajectory-misfit objective over subspace pairs.

    ``init`` may hold any full-rank representatives; it is orthonormalized
    and sign-fixed before the first iteration.  Returns the final pair and
    the per-iteration trace; the objective is non-increasing along it.

    Raises
    ------
    LineSearchFailed
        With the partial trace attached, if no acceptable step exists.
    """
    if obj_cfg.mode == "sampled":
        value_fn, grad_fn = evaluate, gradient_sampled
    else:
        value_fn, grad_fn = evaluate_integrated, gradient_integrated

    pair = fix_sign(
        RepresentativePair(orthonormalize(init.phi), orthonormalize(init.psi))
    )
    result = grad_fn(sys, pair, data, obj_cfg)
    cost, grad = result.value, result.grad
    gg = metric(pair, grad, grad)
    direction = -grad
    trace: list[CgRecord] = []
    converged = False
    iterations = 0

    for k in range(cg_cfg.max_iters):
        if gg <= cg_cfg.eps:
            converged = True
            break

        phi_cache: dict[float, tuple[RepresentativePair, float]] = {}
        grad_cache: dict[float, tuple] = {}
        evals = 0

        def phi_fn(alpha: float) -> float:
            nonlocal evals
            if alpha == 0.0:
                return cost
            if alpha not in phi_cache:
                pair_a, _ = _step_and_transport(
                    pair, direction, alpha, cg_cfg.transport_mode
                )
                evals += 1
                phi_cache[alpha] = (pair_a, value_fn(sys, pair_a, data, obj_cfg))
            return phi_cache[alpha][1]

        def dphi_fn(alpha: float) -> float:
            if alpha == 0.0:
                return -gg
            if alpha not in phi_cache:
                phi_fn(alpha)
            pair_a = phi_cache[alpha][0]
            if alpha not in grad_cache:
                _, moved = _step_and_transport(
                    pair, direction, alpha, cg_cfg.transport_mode
                )
                res_a = grad_fn(sys, pair_a, data, obj_cfg)
                grad_cache[alpha] = (res_a, moved)
            res_a, moved = grad_cache[alpha]
            return metric(pair_a, res_a.grad, moved)

        try:
            alpha = wolfe_bisection(phi_fn, dphi_fn, cg_cfg)
        except LineSearchFailed as exc:
            exc.trace = tuple(
                trace + [CgRecord(cost, gg, None, None, int(evals))]
            )
            raise
        if alpha not in grad_cache:
            dphi_fn(alpha)
        pair_next, cost_next = phi_cache[alpha]
        result_next, moved = grad_cache[alpha]
        grad_next = result_next.grad

        # Keep det(Psi^T Phi) > 0: flip the first column of Phi and of every
        # lift expressed at the new representative.
        sign, _ = np.linalg.slogdet(pair_next.pairing())
        if sign == 0.0:
            raise SingularPairing("pairing became singular after a step")
        if sign < 0.0:
            pair_next = RepresentativePair(
                _flip_first_column(pair_next.phi), pair_next.psi
            )
            grad_next = TangentLift(_flip_first_column(grad_next.x), grad_next.y)
            moved = TangentLift(_flip_first_column(moved.x), moved.y)

        try:
            beta = dai_yuan_beta(grad_next, grad, moved, direction, pair_next, pair)
        except DegenerateDenominator:
            beta = 0.0
        direction_next = -grad_next + beta * moved
        if metric(pair_next, grad_next, direction_next) >= 0.0:
            # Conjugacy failed to produce descent; restart with steepest descent.
            beta = 0.0
            direction_next = -grad_next

        trace.append(CgRecord(cost, gg, float(alpha), float(beta), int(evals)))
        pair, cost, grad, direction = pair_next, cost_next, grad_next, direction_next
        gg = metric(pair, grad, grad)
        iterations = k + 1

    if gg <= cg_cfg.eps:
        converged = True
    trace.append(CgRecord(cost, gg, None, None, None))
    return OptimizeResult(
        pair=pair, trace=tuple(trace), converged=converged, iterations=iterations
    )
