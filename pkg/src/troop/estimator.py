"""Scikit-learn style estimator wrapping the optimization pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .baselines import bt_init_for, pod, state_snapshots
from .errors import DimensionMismatch
from .manifold import RepresentativePair
from .objective import ObjectiveConfig, TrajectoryDataset, evaluate
from .optimizer import CgConfig, optimize
from .projection import assemble_rom
from .system import sample_observations

__all__ = ["TrajectoryOptimizedROM"]


def _check_fitted(est):
    if not hasattr(est, "pair_"):
        raise DimensionMismatch("estimator is not fitted; call fit first")


class TrajectoryOptimizedROM(BaseEstimator):
    """Reduced-order model learned by optimizing an oblique projection.

    ``fit`` minimizes the trajectory-misfit objective over pairs of rank-r
    subspaces, ``predict`` simulates the resulting reduced model, and
    ``transform``/``inverse_transform`` map between full states and reduced
    coordinates.

    Parameters
    ----------
    system : dynamical system
        The full-order model being reduced.
    rank : int
        Reduced order r.
    init : str or RepresentativePair
        "bt" (balanced truncation of the linearization), "pod" (POD of the
        training snapshots) or an explicit pair.
    gamma, c1, c2, tol, max_iters, mode, quad_order, quad_panels, substeps,
    transport, threads
        Objective and optimizer settings; ``tol`` bounds the squared gradient
        metric-norm at termination.
    """

    def __init__(
        self,
        system=None,
        rank: int = 2,
        init="bt",
        gamma: float = 1e-3,
        c1: float = 0.01,
        c2: float = 0.1,
        tol: float = 1e-8,
        max_iters: int = 500,
        mode: str = "sampled",
        quad_order: int = 2,
        quad_panels: int = 1,
        substeps: int = 50,
        transport: str = "exponential",
        threads: int = 1,
    ):
        self.system = system
        self.rank = rank
        self.init = init
        self.gamma = gamma
        self.c1 = c1
        self.c2 = c2
        self.tol = tol
        self.max_iters = max_iters
        self.mode = mode
        self.quad_order = quad_order
        self.quad_panels = quad_panels
        self.substeps = substeps
        self.transport = transport
        self.threads = threads

    def _objective_config(self) -> ObjectiveConfig:
        return ObjectiveConfig(
            gamma=self.gamma,
            mode=self.mode,
            quad_order=self.quad_order,
            quad_panels=self.quad_panels,
            substeps=self.substeps,
            threads=self.threads,
        )

    def _initial_pair(self, data: TrajectoryDataset) -> RepresentativePair:
        if isinstance(self.init, RepresentativePair):
            return self.init
        if self.init == "bt":
            return bt_init_for(self.system, self.rank)
        if self.init == "pod":
            return pod(state_snapshots(self.system, data, self.substeps), self.rank)
        raise DimensionMismatch(f"unknown init {self.init!r}")

    def fit(self, data: TrajectoryDataset, y=None):
        """Learn the subspace pair from a trajectory dataset."""
        if self.system is None:
            raise DimensionMismatch("a full-order system is required to fit")
        result = optimize(
            self.system,
            self._initial_pair(data),
            data,
            obj_cfg=self._objective_config(),
            cg_cfg=CgConfig(
                c1=self.c1,
                c2=self.c2,
                eps=self.tol,
                max_iters=self.max_iters,
                transport_mode=self.transport,
            ),
        )
        self.pair_ = result.pair
        self.result_ = result
        self.rom_ = assemble_rom(self.system, result.pair)
        return self

    def predict(self, x0, times, u_fn=None) -> np.ndarray:
        """Reduced-model outputs at ``times`` from the full initial state."""
        _check_fitted(self)
        outputs, _ = sample_observations(
            self.rom_, self.rom_.reduce_ic(x0), times, self.substeps, u_fn
        )
        return outputs

    def transform(self, states) -> np.ndarray:
        """Reduced coordinates of full states (rows)."""
        _check_fitted(self)
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return states @ self.rom_.w.T

    def inverse_transform(self, coords) -> np.ndarray:
        """Full-state reconstructions of reduced coordinates (rows)."""
        _check_fitted(self)
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        return coords @ self.pair_.phi.T

    def score(self, data: TrajectoryDataset, y=None) -> float:
        """Negative objective value on a dataset (greater is better)."""
        _check_fitted(self)
        return -evaluate(self.system, self.pair_, data, self._objective_config())
