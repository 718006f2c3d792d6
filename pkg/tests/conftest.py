import numpy as np
import pytest

import motodyn as md
from motodyn import _kernels

SPEEDS_KPH = (50.0, 80.0, 100.0)


@pytest.fixture(scope='session', autouse=True)
def jit_warmup():
    # compile the hot kernels once so timed tests measure runtime, not JIT
    _kernels.warmup()
    p = md.default_parameters()
    tp = md.find_trim(50 / 3.6, p)
    md.simulate(tp.X_star, tp.u_star, 1e-3, 0.002, p)
    md.run_observer(np.zeros((2, 4)), np.zeros((2, 4)),
                    md.design_observer(p, 50 / 3.6, tp=tp), dt=1e-3)


@pytest.fixture(scope='session')
def params():
    return md.default_parameters()


@pytest.fixture(scope='session')
def trims(params):
    return {kph: md.find_trim(kph / 3.6, params) for kph in SPEEDS_KPH}


@pytest.fixture(scope='session')
def designs(params, trims):
    return {kph: md.design_observer(params, kph / 3.6, tp=trims[kph])
            for kph in SPEEDS_KPH}


def random_q(rng, scale=1.0):
    q = rng.uniform(-scale, scale, 7)
    q[3] = np.clip(q[3], -1.2, 1.2)   # keep roll well inside the domain
    return q
