"""Session fixtures: the 3-state toy model, its impulse training data, and
one fully trained subspace pair shared by the slower tests."""

from __future__ import annotations

import time
from collections import namedtuple

import numpy as np
import pytest

from troop.baselines import bt_init_for
from troop.objective import ObjectiveConfig
from troop.optimizer import CgConfig, optimize
from troop.system import toy_model
from util import impulse_dataset

TRAIN_AMPLITUDES = (0.5, 1.0)
TRAIN_TIMES = np.linspace(0.0, 10.0, 11)

TrainedRun = namedtuple("TrainedRun", "result wall_seconds")


@pytest.fixture(scope="session")
def toy():
    return toy_model()


@pytest.fixture(scope="session")
def train_data(toy):
    return impulse_dataset(toy, TRAIN_AMPLITUDES, TRAIN_TIMES)


@pytest.fixture(scope="session")
def trained(toy, train_data):
    """Full training run from the balanced-truncation initial pair.

    Shared by the convergence and test-error checks so the expensive
    optimization happens once per session.
    """
    obj_cfg = ObjectiveConfig(gamma=1e-3, quad_order=8, quad_panels=4, substeps=50)
    cg_cfg = CgConfig(c1=0.01, c2=0.1, eps=1e-8, max_iters=500)
    init = bt_init_for(toy, 2)
    start = time.perf_counter()
    result = optimize(toy, init, train_data, obj_cfg=obj_cfg, cg_cfg=cg_cfg)
    return TrainedRun(result, time.perf_counter() - start)
