"""Trajectory-misfit objective and its Riemannian gradient via adjoints.

The sampled objective for a dataset of M trajectories with L samples each is

    J(V, W) = (1/(M L)) sum_m (1/E_m) sum_l ||yhat_{m,l} - y_{m,l}||^2
            + gamma * rho(V, W),
    E_m     = (1/L) sum_l ||y_{m,l}||^2,

where yhat is the reduced model's output and rho is the subspace-alignment
regularizer

    rho(V, W) = -log[ det(Psi^T Phi)^2 / (det(Phi^T Phi) det(Psi^T Psi)) ],

nonnegative, zero exactly when V = W, and +inf as the subspaces approach
orthogonality.  The gradient of the misfit is computed exactly (up to
integration error) from one forward reduced solve and one backward adjoint
solve per trajectory, at a cost independent of the number of parameters.

The integrated objective replaces the per-sample average by a time average
(1/T) int ||yhat - y||^2 dt over a continuous output signal.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, DimensionMismatch, NonFiniteState, SingularPairing
from .integrate import QuadratureRule, integrate_adjoint_backward, quad_integrate
from .manifold import RepresentativePair, TangentLift, horizontal_project
from .projection import ReducedModel, assemble_rom
from .system import DynamicalSystem, sample_observations

__all__ = [
    "Trajectory",
    "TrajectoryDataset",
    "SignalTrajectory",
    "SignalDataset",
    "ObjectiveConfig",
    "GradientResult",
    "load_dataset",
    "save_dataset",
    "regularization",
    "regularization_gradient",
    "evaluate",
    "gradient_sampled",
    "evaluate_integrated",
    "gradient_integrated",
]


def _sq_norm(e: np.ndarray) -> float:
    return float(e @ e)


def _sq_norm_grad(e: np.ndarray) -> np.ndarray:
    return 2.0 * e


@dataclass(frozen=True)
class Trajectory:
    """One sampled trajectory: initial state, sample times, observed outputs."""

    x0: np.ndarray
    times: np.ndarray
    observations: np.ndarray
    label: str = ""

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        times = np.asarray(self.times, dtype=float)
        obs = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if x0.ndim != 1:
            raise DimensionMismatch("x0 must be a vector")
        if times.ndim != 1 or len(times) < 1:
            raise DimensionMismatch("times must be a non-empty vector")
        if np.any(np.diff(times) <= 0):
            raise DimensionMismatch(
                f"times must be strictly increasing (trajectory {self.label!r})"
            )
        if obs.shape[0] != len(times):
            raise DimensionMismatch(
                f"got {obs.shape[0]} observations for {len(times)} sample times"
            )
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observations", obs)

    @property
    def num_samples(self) -> int:
        return len(self.times)

    @property
    def energy(self) -> float:
        """Mean squared output magnitude E = (1/L) sum_l ||y_l||^2."""
        return float(np.mean(np.sum(self.observations**2, axis=1)))


@dataclass(frozen=True)
class TrajectoryDataset:
    """Collection of sampled trajectories sharing state/output dimensions."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise DimensionMismatch("dataset must contain at least one trajectory")
        n, m = len(trajs[0].x0), trajs[0].observations.shape[1]
        for tr in trajs:
            if len(tr.x0) != n or tr.observations.shape[1] != m:
                raise DimensionMismatch(
                    f"trajectory {tr.label!r} has inconsistent dimensions"
                )
        object.__setattr__(self, "trajectories", trajs)

    @property
    def n(self) -> int:
        return len(self.trajectories[0].x0)

    @property
    def m(self) -> int:
        return self.trajectories[0].observations.shape[1]

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True)
class SignalTrajectory:
    """Continuous-time data: initial state and an output signal y(t).

    ``times`` partitions [t0, tf] for integration and quadrature; ``y`` is a
    callable t -> (m,) array (e.g. a dense trajectory composed with the
    observation map).
    """

    x0: np.ndarray
    times: np.ndarray
    y: object
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
            raise DimensionMismatch("times must be strictly increasing, length >= 2")
        object.__setattr__(self, "times", times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class SignalDataset:
    """Collection of continuous-output trajectories."""

    trajectories: tuple[SignalTrajectory, ...]

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise DimensionMismatch("dataset must contain at least one trajectory")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True)
class ObjectiveConfig:
    """Weights and discretization knobs for the objective.

    gamma
        Regularization strength (>= 0).
    normalize_by_energy / average_over_trajectories / time_average
        Toggles for the 1/E_m, 1/M and 1/L (resp. 1/T) factors; all on by
        default.  Disabling all three gives the raw sum / raw integral.
    quad_order / quad_panels
        Gauss-Legendre points per panel and panels per sampling interval for
        the adjoint quadrature.  One panel is the classical rule; several
        panels resolve boundary-layer integrands from violent transients.
    substeps
        RK4 steps per sampling interval, forward and backward.
    loss / loss_grad
        Per-sample penalty and its gradient; default squared Euclidean norm.
    threads
        Trajectories are processed in a thread pool of this size; reduction
        order is fixed, so results do not depend on scheduling.
    """

    gamma: float = 1e-3
    normalize_by_energy: bool = True
    average_over_trajectories: bool = True
    time_average: bool = True
    mode: str = "sampled"
    quad_order: int = 2
    quad_panels: int = 1
    substeps: int = 50
    loss: object = None
    loss_grad: object = None
    threads: int = 1

    def __post_init__(self):
        if self.gamma < 0:
            raise DimensionMismatch(f"gamma must be >= 0, got {self.gamma}")
        if self.mode not in ("sampled", "integrated"):
            raise DimensionMismatch(f"unknown objective mode {self.mode!r}")
        if self.substeps < 1:
            raise DimensionMismatch("substeps must be >= 1")
        if self.threads < 1:
            raise DimensionMismatch("threads must be >= 1")
        QuadratureRule.gauss_legendre(self.quad_order, self.quad_panels)

    def rule(self) -> QuadratureRule:
        return QuadratureRule.gauss_legendre(self.quad_order, self.quad_panels)

    @property
    def loss_fn(self):
        return self.loss if self.loss is not None else _sq_norm

    @property
    def loss_grad_fn(self):
        return self.loss_grad if self.loss_grad is not None else _sq_norm_grad


@dataclass(frozen=True)
class GradientResult:
    """Objective value, Riemannian gradient lift, per-trajectory misfits."""

    value: float
    grad: TangentLift
    per_trajectory: tuple[float, ...]


def load_dataset(path) -> TrajectoryDataset:
    """Read a dataset from JSON: {"n", "m", "trajectories": [...]}
    with each trajectory carrying label, x0, times and observations."""
    with open(path) as fh:
        doc = json.load(fh)
    n, m = int(doc["n"]), int(doc["m"])
    trajs = []
    for row in doc["trajectories"]:
        obs = np.asarray(row["observations"], dtype=float).reshape(-1, m)
        trajs.append(
            Trajectory(
                x0=np.asarray(row["x0"], dtype=float),
                times=np.asarray(row["times"], dtype=float),
                observations=obs,
                label=str(row.get("label", "")),
            )
        )
    data = TrajectoryDataset(tuple(trajs))
    if data.n != n or data.m != m:
        raise DimensionMismatch(
            f"dataset header ({n}, {m}) disagrees with trajectories ({data.n}, {data.m})"
        )
    return data


def save_dataset(data: TrajectoryDataset, path) -> None:
    """Write a dataset to the JSON format read by :func:`load_dataset`."""
    doc = {
        "n": data.n,
        "m": data.m,
        "trajectories": [
            {
                "label": tr.label,
                "x0": tr.x0.tolist(),
                "times": tr.times.tolist(),
                "observations": tr.observations.tolist(),
            }
            for tr in data
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def regularization(pair: RepresentativePair) -> float:
    """Alignment penalty rho; valid for any full-rank representatives.

    Raises
    ------
    SingularPairing
        If det(Psi^T Phi) underflows to zero.
    """
    sign, logdet = np.linalg.slogdet(pair.pairing())
    if sign == 0.0 or not np.isfinite(logdet):
        raise SingularPairing("det(Psi^T Phi) underflowed in the regularizer")
    _, logdet_phi = np.linalg.slogdet(pair.phi.T @ pair.phi)
    _, logdet_psi = np.linalg.slogdet(pair.psi.T @ pair.psi)
    return float(-2.0 * logdet + logdet_phi + logdet_psi)


def regularization_gradient(pair: RepresentativePair) -> TangentLift:
    """Horizontal gradient lift of rho at ``pair``.

    General-representative form; for orthonormal representatives it reduces
    to 2 (Phi - Psi A^T, Psi - Phi A) with A = (Psi^T Phi)^{-1}.  Vanishes
    exactly when the two subspaces coincide.
    """
    phi, psi = pair.phi, pair.psi
    gx = 2.0 * (phi - psi @ np.linalg.solve(phi.T @ psi, phi.T @ phi))
    gy = 2.0 * (psi - phi @ np.linalg.solve(psi.T @ phi, psi.T @ psi))
    return TangentLift(gx, gy)


def _weight(cfg: ObjectiveConfig, num_traj: int, energy: float, span: float) -> float:
    """Combined per-trajectory misfit weight for the configured normalizers."""
    w = 1.0
    if cfg.time_average:
        w /= span
    if cfg.average_over_trajectories:
        w /= num_traj
    if cfg.normalize_by_energy:
        if not energy > 0.0:
            raise ValueError(
                "zero-energy trajectory cannot be normalized; disable "
                "normalize_by_energy or drop the trajectory"
            )
        w /= energy
    return w


def _u_or_zero(u_fn, d: int):
    if u_fn is not None:
        return u_fn
    zero = np.zeros(d)
    return lambda t: zero


def _map_trajectories(fn, items, threads: int):
    """Apply ``fn`` over ``items`` preserving order, optionally in threads."""
    if threads == 1 or len(items) == 1:
        return [fn(i, it) for i, it in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, i, it) for i, it in enumerate(items)]
        return [f.result() for f in futures]


def evaluate(
    sys: DynamicalSystem,
    pair: RepresentativePair,
    data: TrajectoryDataset,
    cfg: ObjectiveConfig = ObjectiveConfig(),
    u_fn=None,
) -> float:
    """Sampled objective value; returns +inf if the reduced model blows up
    or the pairing is numerically singular (sentinel, not an exception)."""
    try:
        rho = regularization(pair)
        rom = assemble_rom(sys, pair)
    except SingularPairing:
        return np.inf
    u = _u_or_zero(u_fn, sys.d)
    loss = cfg.loss_fn

    def one(_i, tr):
        try:
            yhat, _ = sample_observations(
                rom, rom.reduce_ic(tr.x0), tr.times, cfg.substeps, u
            )
        except NonFiniteState:
            return np.inf
        w = _weight(cfg, len(data), tr.energy, float(tr.num_samples))
        return w * sum(loss(e) for e in (yhat - tr.observations))

    costs = _map_trajectories(one, list(data), cfg.threads)
    total = float(sum(costs)) + cfg.gamma * rho
    return total if np.isfinite(total) else np.inf


def _trajectory_gradient_sampled(sys, rom, tr, cfg, u, rule):
    """Raw (unweighted) misfit value and gradient blocks for one trajectory."""
    phi, psi, a_inv = rom.pair.phi, rom.pair.psi, rom.a_inv
    loss, dloss = cfg.loss_fn, cfg.loss_grad_fn
    times = tr.times
    big_l = tr.num_samples

    z0 = rom.reduce_ic(tr.x0)
    yhat, segments = sample_observations(rom, z0, times, cfg.substeps, u)
    zs = np.empty((big_l, rom.r))
    zs[0] = z0
    for k, seg in enumerate(segments):
        zs[k + 1] = seg.states[-1]
    residuals = yhat - tr.observations
    value = sum(loss(e) for e in residuals)
    gs = [dloss(e) for e in residuals]

    gx = np.zeros_like(phi)
    gy = np.zeros_like(psi)

    def t_star(l, w):
        """Adjoint of the explicit Phi-dependence of the output at sample l."""
        x = phi @ zs[l]
        return np.outer(sys.obs_jtvp(x, w), zs[l])

    # Terminal datapoint. lam carries the running adjoint state.
    gx += t_star(big_l - 1, gs[big_l - 1])
    lam = rom.obs_jtvp(zs[big_l - 1], gs[big_l - 1])

    for l in range(big_l - 2, -1, -1):
        seg = segments[l]
        t_lo, t_hi = float(times[l]), float(times[l + 1])
        step = (t_hi - t_lo) / cfg.substeps

        def f_adj(t, lam_t, seg=seg):
            return rom.jtvp(seg(t), u(t), t, lam_t)

        lam_traj = integrate_adjoint_backward(f_adj, lam, t_hi, t_lo, step)

        def s_star(t, seg=seg, lam_traj=lam_traj):
            z = seg(t)
            lam_t = lam_traj(t)
            ut = u(t)
            x = phi @ z
            f_red = rom.rhs(z, ut, t)
            at_lam = a_inv.T @ lam_t
            pav = psi @ at_lam
            sx = np.outer(sys.jtvp(x, ut, t, pav), z) - np.outer(pav, f_red)
            sy = np.outer(sys.rhs(x, ut, t) - phi @ f_red, at_lam)
            return np.stack([sx, sy])

        acc = quad_integrate(rule, s_star, t_lo, t_hi)
        gx += acc[0]
        gy += acc[1]
        gx += t_star(l, gs[l])
        lam = lam_traj(t_lo) + rom.obs_jtvp(zs[l], gs[l])

    # Sensitivity of the reduced initial condition z0 = A Psi^T x0.
    at_lam = a_inv.T @ lam
    gx -= np.outer(psi @ at_lam, z0)
    gy += np.outer(tr.x0 - phi @ z0, at_lam)
    return value, gx, gy


def gradient_sampled(
    sys: DynamicalSystem,
    pair: RepresentativePair,
    data: TrajectoryDataset,
    cfg: ObjectiveConfig = ObjectiveConfig(),
    u_fn=None,
) -> GradientResult:
    """Objective value and Riemannian gradient of the sampled objective.

    One forward reduced solve and one backward adjoint solve per trajectory;
    interval integrals of the adjoint source use Gauss-Legendre quadrature
    with ``cfg.quad_order`` points.  Both gradient blocks are horizontal at
    ``pair``.

    Raises
    ------
    BlowUp
        If a reduced trajectory leaves the representable range; carries the
        index of the offending trajectory.
    """
    rho = regularization(pair)
    rom = assemble_rom(sys, pair)
    u = _u_or_zero(u_fn, sys.d)
    rule = cfg.rule()

    def one(i, tr):
        try:
            return _trajectory_gradient_sampled(sys, rom, tr, cfg, u, rule)
        except NonFiniteState as exc:
            raise BlowUp(
                f"reduced trajectory {tr.label or i} diverged: {exc}",
                trajectory_index=i,
            ) from exc

    raw = _map_trajectories(one, list(data), cfg.threads)

    gx = np.zeros_like(pair.phi)
    gy = np.zeros_like(pair.psi)
    total = cfg.gamma * rho
    per = []
    for tr, (value, bx, by) in zip(data, raw):
        w = _weight(cfg, len(data), tr.energy, float(tr.num_samples))
        per.append(w * value)
        total += w * value
        gx += w * bx
        gy += w * by
    reg = regularization_gradient(pair)
    gx += cfg.gamma * reg.x
    gy += cfg.gamma * reg.y
    grad = TangentLift(
        horizontal_project(pair.phi, gx), horizontal_project(pair.psi, gy)
    )
    return GradientResult(value=float(total), grad=grad, per_trajectory=tuple(per))


def _signal_energy(tr: SignalTrajectory, rule: QuadratureRule) -> float:
    """Time-averaged signal energy (1/T) int ||y(t)||^2 dt."""
    total = 0.0
    for t_lo, t_hi in zip(tr.times[:-1], tr.times[1:]):
        total += quad_integrate(
            rule, lambda t: float(np.sum(np.asarray(tr.y(t)) ** 2)), t_lo, t_hi
        )
    return total / tr.horizon


def evaluate_integrated(
    sys: DynamicalSystem,
    pair: RepresentativePair,
    data: SignalDataset,
    cfg: ObjectiveConfig = ObjectiveConfig(mode="integrated"),
    u_fn=None,
) -> float:
    """Integrated objective (1/M) sum_m w_m int ||yhat - y||^2 dt + gamma rho."""
    try:
        rho = regularization(pair)
        rom = assemble_rom(sys, pair)
    except SingularPairing:
        return np.inf
    u = _u_or_zero(u_fn, sys.d)
    rule = cfg.rule()
    loss = cfg.loss_fn

    total = cfg.gamma * rho
    for tr in data:
        try:
            _, segments = sample_observations(
                rom, rom.reduce_ic(tr.x0), tr.times, cfg.substeps, u
            )
        except NonFiniteState:
            return np.inf
        misfit = 0.0
        for seg, t_lo, t_hi in zip(segments, tr.times[:-1], tr.times[1:]):
            misfit += quad_integrate(
                rule,
                lambda t, seg=seg: loss(rom.obs(seg(t)) - np.asarray(tr.y(t))),
                t_lo,
                t_hi,
            )
        w = _weight(cfg, len(data), _signal_energy(tr, rule), tr.horizon)
        total += w * misfit
    return float(total) if np.isfinite(total) else np.inf


def gradient_integrated(
    sys: DynamicalSystem,
    pair: RepresentativePair,
    data: SignalDataset,
    cfg: ObjectiveConfig = ObjectiveConfig(mode="integrated"),
    u_fn=None,
) -> GradientResult:
    """Value and gradient of the integrated objective.

    The adjoint is forced continuously, -lam' = F(t)* lam + H(t)* g(t) with
    lam(tf) = 0, and the gradient adds int [S(t)* lam + T(t)* g] dt to the
    initial-condition term; there are no datapoint jumps.
    """
    rho = regularization(pair)
    rom = assemble_rom(sys, pair)
    phi, psi, a_inv = pair.phi, pair.psi, rom.a_inv
    u = _u_or_zero(u_fn, sys.d)
    rule = cfg.rule()
    loss, dloss = cfg.loss_fn, cfg.loss_grad_fn

    gx_total = np.zeros_like(phi)
    gy_total = np.zeros_like(psi)
    total = cfg.gamma * rho
    per = []
    for i, tr in enumerate(data):
        z0 = rom.reduce_ic(tr.x0)
        try:
            _, segments = sample_observations(rom, z0, tr.times, cfg.substeps, u)
        except NonFiniteState as exc:
            raise BlowUp(
                f"reduced trajectory {tr.label or i} diverged: {exc}",
                trajectory_index=i,
            ) from exc

        def g_of(t, seg):
            return dloss(rom.obs(seg(t)) - np.asarray(tr.y(t)))

        value = 0.0
        gx = np.zeros_like(phi)
        gy = np.zeros_like(psi)
        lam = np.zeros(rom.r)
        for k in range(len(segments) - 1, -1, -1):
            seg = segments[k]
            t_lo, t_hi = float(tr.times[k]), float(tr.times[k + 1])
            step = (t_hi - t_lo) / cfg.substeps

            def f_adj(t, lam_t, seg=seg):
                return rom.jtvp(seg(t), u(t), t, lam_t) + rom.obs_jtvp(
                    seg(t), g_of(t, seg)
                )

            lam_traj = integrate_adjoint_backward(f_adj, lam, t_hi, t_lo, step)

            def integrand(t, seg=seg, lam_traj=lam_traj):
                z = seg(t)
                lam_t = lam_traj(t)
                ut = u(t)
                x = phi @ z
                g_t = g_of(t, seg)
                f_red = rom.rhs(z, ut, t)
                at_lam = a_inv.T @ lam_t
                pav = psi @ at_lam
                sx = np.outer(sys.jtvp(x, ut, t, pav), z) - np.outer(pav, f_red)
                sx += np.outer(sys.obs_jtvp(x, g_t), z)
                sy = np.outer(sys.rhs(x, ut, t) - phi @ f_red, at_lam)
                return np.stack([sx, sy])

            acc = quad_integrate(rule, integrand, t_lo, t_hi)
            gx += acc[0]
            gy += acc[1]
            value += quad_integrate(
                rule, lambda t, seg=seg: loss(rom.obs(seg(t)) - np.asarray(tr.y(t))),
                t_lo,
                t_hi,
            )
            lam = lam_traj(t_lo)

        at_lam = a_inv.T @ lam
        gx -= np.outer(psi @ at_lam, z0)
        gy += np.outer(tr.x0 - phi @ z0, at_lam)

        w = _weight(cfg, len(data), _signal_energy(tr, rule), tr.horizon)
        per.append(w * value)
        total += w * value
        gx_total += w * gx
        gy_total += w * gy

    reg = regularization_gradient(pair)
    gx_total += cfg.gamma * reg.x
    gy_total += cfg.gamma * reg.y
    grad = TangentLift(
        horizontal_project(pair.phi, gx_total), horizontal_project(pair.psi, gy_total)
    )
    return GradientResult(value=float(total), grad=grad, per_trajectory=tuple(per))
