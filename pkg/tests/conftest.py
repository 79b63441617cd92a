"""Shared constructors for the test suite."""

import numpy as np
import pytest
from scipy.special import expit

from tiltrisk.data import build_table
from tiltrisk.nuisance import NuisanceSet
from tiltrisk.tilt import (
    LossFunction,
    PredictionModel,
    binary_b,
    binary_c,
    selection_a,
)

BRIER = LossFunction("brier")


def logistic_fn(coefs):
    """Callable x -> expit(b0 + x @ b) over full covariate rows."""
    coefs = np.asarray(coefs, dtype=np.float64)

    def fn(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return expit(coefs[0] + x @ coefs[1:])

    return fn


def random_binary_table(rng, n=200, d=2, design="non-nested", model=None):
    """Random table with binary source outcomes and Brier losses."""
    x = rng.uniform(-1.0, 1.0, (n, d))
    n1 = n // 2
    s = np.zeros(n, dtype=int)
    s[rng.permutation(n)[:n1]] = 1
    y = np.where(s == 1, (rng.random(n) < expit(0.4 * x[:, 0])).astype(float), np.nan)
    if model is None:
        model = PredictionModel(
            coefficients=(0.1,) + tuple(rng.normal(0, 0.5, d)), xstar_columns=tuple(range(d))
        )
    return build_table(s, x, y, model, BRIER, design)


def manual_binary_nuisances(model, g_coefs, p_coefs, loss=BRIER):
    """Exact closed-form nuisance set from known logistic g and p."""
    g = logistic_fn(g_coefs)
    p = logistic_fn(p_coefs)

    def b(x, eta):
        pred = model.predict(x)
        l1 = loss(np.ones_like(pred), pred)
        l0 = loss(np.zeros_like(pred), pred)
        return np.asarray(binary_b(l1, l0, g(x), eta))

    def c(x, eta):
        return np.asarray(binary_c(g(x), eta))

    def a(x, eta):
        return np.asarray(selection_a(p(x), c(x, eta)))

    return NuisanceSet(p=p, b=b, c=c, g=g, a=a, mode="binary")


def constant_nuisances(b_val=None, c_val=1.0, p_val=0.5, g_val=None, b_fn=None):
    """Nuisance set returning row-constant values (handy for tiny tables)."""

    def const(v):
        def fn(x, *args):
            return np.full(np.atleast_2d(x).shape[0], float(v))

        return fn

    b = b_fn if b_fn is not None else const(b_val)
    c = const(c_val)
    p = const(p_val)
    g = None if g_val is None else const(g_val)

    def a(x, eta):
        return np.asarray(selection_a(p(x), c(x, eta)))

    return NuisanceSet(p=p, b=b, c=c, g=g, a=a, mode="manual")


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
