"""K-function estimation and goodness-of-fit tests for spatial point patterns."""

import json

from . import _core
from ._core import (
    Body,
    KEstimate,
    KscopeError,
    Pattern,
    Window,
    k_hat,
    lambda_hat,
    normal_cdf,
    normal_quantile,
    sigma2_hat,
)

__all__ = [
    "Body",
    "KEstimate",
    "KscopeError",
    "Pattern",
    "Window",
    "gof",
    "k_hat",
    "lambda_hat",
    "normal_cdf",
    "normal_quantile",
    "run_cli",
    "run_study",
    "sigma2_hat",
    "simulate",
    "theoretical_k",
    "twosample",
]


def simulate(model, window, seed=0, stream=0):
    """Simulate `model` (a dict such as {"variant": "poisson", "lambda": 1}) on `window`."""
    return _core.simulate(json.dumps(model), window, seed, stream)


def theoretical_k(model, body, r):
    return _core.theoretical_k(json.dumps(model), body, r)


def gof(pattern, lambda0, stat="ks", **options):
    """One-sample test against a Poisson null; returns the report as a dict."""
    return json.loads(_core.gof(pattern, lambda0, stat, **options))


def twosample(a, b, stat="ks", **options):
    return json.loads(_core.twosample(a, b, stat, **options))


def run_study(config):
    """Run a Monte-Carlo study described by a config dict; returns the report dict."""
    return json.loads(_core.run_study(json.dumps(config)))


def run_cli(*args):
    """Run the command-line frontend in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
