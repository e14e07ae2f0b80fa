"""Piecewise-constant test signals and measurement synthesis.

Signals are built on the first-difference domain: each of the n-1
differences is zero with probability 1-q and otherwise a jump drawn from
the slab distribution of the chosen model.  The first sample is anchored
at zero and the signal is the cumulative sum of the differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import LinearOperator

__all__ = ["SignalSpec", "generate", "measure", "nmse", "save_signal", "load_signal"]

MODELS = ("gaussian_pwc", "bernoulli_pwc")


@dataclass(frozen=True)
class SignalSpec:
    """Sampling description for one synthetic signal.

    ``model`` selects the jump-size law: "gaussian_pwc" draws N(0, sigma0^2),
    "bernoulli_pwc" draws +-sigma0 with equal probability.  ``q`` is the
    per-difference jump probability; ``sigma0`` the jump scale.
    """

    n: int
    model: str
    q: float
    sigma0: float
    seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("signal length must be at least 2")
        if self.model not in MODELS:
            raise ValueError(f"unknown signal model {self.model!r}")
        if not 0.0 < self.q < 1.0:
            raise ValueError("jump probability q must lie in (0, 1)")
        if not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")


def _draw_jumps(rng, model, sigma0, count):
    if model == "gaussian_pwc":
        return rng.normal(0.0, sigma0, size=count)
    return sigma0 * (rng.integers(0, 2, size=count) * 2 - 1).astype(float)


def generate(spec: SignalSpec, force_k: int | None = None):
    """Draw one signal; returns (x, k) with k the realized jump count.

    With ``force_k`` the jump count is made exact: k difference positions
    are chosen uniformly without replacement and only those receive slab
    draws.  Used by phase grids whose axes require a fixed k.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.n - 1
    u = np.zeros(d)
    if force_k is None:
        active = rng.random(d) < spec.q
        u[active] = _draw_jumps(rng, spec.model, spec.sigma0, int(active.sum()))
    else:
        if not 0 <= force_k <= d:
            raise ValueError("force_k must lie in [0, n-1]")
        pos = rng.choice(d, size=force_k, replace=False)
        u[pos] = _draw_jumps(rng, spec.model, spec.sigma0, force_k)
    x = np.concatenate([[0.0], np.cumsum(u)])
    k = int(np.count_nonzero(u))
    return x, k


def measure(op: LinearOperator, x: np.ndarray, delta: float, seed: int) -> np.ndarray:
    """y = op(x) + w with w ~ N(0, delta I); delta = 0 is exactly noiseless."""
    if delta < 0:
        raise ValueError("noise variance delta must be nonnegative")
    y = op.apply(x)
    if delta > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, np.sqrt(delta), size=op.m)
    return y


def nmse(truth: np.ndarray, estimate: np.ndarray) -> float:
    """Squared error over squared truth norm; plain squared norm at zero truth."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ValueError("truth and estimate must have the same shape")
    err = float(np.sum((truth - estimate) ** 2))
    denom = float(np.sum(truth**2))
    if denom == 0.0:
        return err
    return err / denom


def save_signal(path, x: np.ndarray) -> None:
    """One decimal per line, full round-trip precision."""
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=float):
            fh.write(format(v, ".17g"))
            fh.write("\n")


def load_signal(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)
