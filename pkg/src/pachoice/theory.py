"""Closed-form and numeric theory values for the max-choice tree.

The scaled top degree converges to the unique fixed point x* of
``1 - (1 - x/2)^d = x`` in (0, 1); writing c = 1 - x*/2, the k-th highest
degree (k >= 2) grows like ``n**(c**(d-1) * d / 2)``.  This module solves
for x*, evaluates the rate function behind those statements, verifies the
inequalities the asymptotics rest on over a range of d, and provides the
reinforced-urn walk whose terminal fraction is Beta-distributed.

Everything here is a pure function of its arguments except the urn walk,
which consumes a caller-supplied RNG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import SplitMix64, mix_seed

MAX_D = 64  # (1/2)**d underflows the checks well before float64 gives out


def _check_d(d: int) -> None:
    if d != int(d):
        raise ValueError("d must be an integer")
    if d <= 2:
        raise ValueError(
            "d must exceed 2: for d = 2 the only root of 1-(1-x/2)^d = x "
            "in [0, 1] is the degenerate x = 0"
        )
    if d > MAX_D:
        raise ValueError(f"d larger than {MAX_D} is not supported")


def solve_fixed_point(d: int, tol: float = 1e-12) -> float:
    """Unique root of 1 - (1 - x/2)^d = x in (1 - 1/d, 1), by bisection.

    The bracket is guaranteed: the residual is positive at 1 - 1/d and
    equals -(1/2)^d at 1.  No derivatives, unconditional convergence.
    """
    _check_d(d)
    if tol <= 0:
        raise ValueError("tol must be positive")

    def residual(x: float) -> float:
        return 1.0 - (1.0 - x / 2.0) ** d - x

    lo = 1.0 - 1.0 / d
    hi = 1.0
    if residual(lo) <= 0.0:
        raise AssertionError("lower bracket failed; d out of supported range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def exponent(d: int) -> float:
    """Predicted growth exponent of the k-th highest degree, k >= 2."""
    c = 1.0 - solve_fixed_point(d) / 2.0
    return c ** (d - 1) * d / 2.0


def rate_factor(x: float, y: float, d: int) -> float:
    """The degree-growth rate polynomial (1/2) sum_{i<d} y^(d-1-i) (y-x/2)^i.

    For x != 0 it equals (y^d - (y - x/2)^d) / x; the increase probability
    of a tracked degree M with remaining mass y is (M/n) * rate_factor(M/n, y).
    """
    if x < 0 or y < 0:
        raise ValueError("arguments must be non-negative")
    if d < 1:
        raise ValueError("d must be >= 1")
    z = y - x / 2.0
    acc = 0.0
    for i in range(d):
        acc += y ** (d - 1 - i) * z**i
    return 0.5 * acc


def rate_factor_below_one(y: float, d: int, grid_points: int = 10_000) -> bool:
    """True iff rate_factor(x, y) < 1 across a dense grid of x in [0, 2y].

    Requires y^(d-1) < 2/d, the regime in which the bound holds (the x = 0
    endpoint value is exactly (d/2) y^(d-1)).
    """
    if y < 0:
        raise ValueError("y must be non-negative")
    if d < 1:
        raise ValueError("d must be >= 1")
    if y ** (d - 1) >= 2.0 / d:
        raise ValueError(f"precondition y^(d-1) < 2/d violated: y={y}, d={d}")
    xs = np.linspace(0.0, 2.0 * y, grid_points)
    return all(rate_factor(float(x), y, d) < 1.0 for x in xs)


def exponent_base_bound(d: int) -> bool:
    """True iff c^(d-1) < 2/d for the solved c; feeds the sublinearity proof."""
    c = 1.0 - solve_fixed_point(d) / 2.0
    return c ** (d - 1) < 2.0 / d


def degree_drift(m_k: float, n: float, d: int, c_hat_k: float) -> float:
    """Normalized growth drift 2 * rate_factor(M_k/n, c_hat); -> d*c^(d-1).

    Equals 2n * p/M_k for a uniquely held rank (multiplicity one), where p
    is the one-step increase probability.
    """
    if m_k < 1 or n < 1:
        raise ValueError("need m_k >= 1 and n >= 1")
    return 2.0 * rate_factor(m_k / n, c_hat_k, d)


@dataclass(frozen=True)
class TheoryParams:
    """Solved constants for one d: fixed point, base c, exponent, floor."""

    d: int
    x_star: float
    c: float
    alpha: float
    gamma_lower: float
    delta: float

    @classmethod
    def for_d(cls, d: int, delta: float = 0.05, tol: float = 1e-12) -> "TheoryParams":
        x_star = solve_fixed_point(d, tol)
        residual = abs(1.0 - (1.0 - x_star / 2.0) ** d - x_star)
        if residual > 1e-10:
            raise AssertionError(f"fixed-point residual {residual} too large for d={d}")
        if not (1.0 - 1.0 / d < x_star < 1.0):
            raise AssertionError(f"x_star {x_star} outside (1 - 1/d, 1) for d={d}")
        c = 1.0 - x_star / 2.0
        if not 0 < delta < c:
            raise ValueError(f"delta must lie in (0, c) = (0, {c})")
        return cls(
            d=d,
            x_star=x_star,
            c=c,
            alpha=c ** (d - 1) * d / 2.0,
            gamma_lower=(c - delta) ** (d - 1) / 4.0,
            delta=delta,
        )


def growth_recurrence(
    alpha: float,
    x: float,
    start_index: int,
    r_start: float,
    n_max: int,
    sample_at=None,
):
    """Iterate r_{n+1} = r_n (1 + alpha/(n + x)) from (start_index, r_start).

    Returns (ns, r values, r/n^alpha ratios) at the requested sample points
    (every index up to n_max by default).  The ratio sequence converges to
    a positive limit for alpha > 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if start_index <= 0 or r_start <= 0:
        raise ValueError("start index and value must be positive")
    if n_max < start_index:
        raise ValueError("n_max must be >= the start index")
    if start_index + x <= 0:
        raise ValueError(f"n + x must stay positive; n + x = {start_index + x} at the start")
    if sample_at is None:
        if n_max - start_index > 20_000_000:
            raise ValueError("full series too long; pass sample_at")
        ns = np.arange(start_index, n_max + 1, dtype=np.int64)
    else:
        ns = np.asarray(sorted(int(v) for v in sample_at), dtype=np.int64)
        if len(ns) == 0:
            raise ValueError("sample_at is empty")
        if ns[0] < start_index or ns[-1] > n_max:
            raise ValueError("sample points must lie in [start_index, n_max]")
    rs = kernels.growth_recurrence_at(float(alpha), float(x), start_index, float(r_start), ns)
    ratios = rs / np.power(ns.astype(np.float64), alpha)
    return ns, rs, ratios


@dataclass
class UrnState:
    """Two-color reinforced urn: counts of each color and steps taken."""

    a: int
    b: int
    steps_taken: int = 0

    @property
    def fraction(self) -> float:
        return self.a / (self.a + self.b)


def polya_urn_run(a: int, b: int, steps: int, rng: SplitMix64) -> float:
    """Walk the urn for the given number of reinforcement steps.

    Each step adds one ball of a color drawn proportionally to the current
    counts; returns the terminal fraction of the first color.  The terminal
    fraction converges in law to Beta(a, b) as steps grow.
    """
    if a < 1 or b < 1:
        raise ValueError("initial counts must be >= 1")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return a / (a + b)
    state = np.array([rng.state], dtype=np.uint64)
    final_a = int(kernels.urn_walk(a, b, steps, state))
    rng._state = int(state[0])
    return final_a / (a + b + steps)


def urn_final_fractions(a: int, b: int, steps: int, replicas: int, base_seed: int) -> np.ndarray:
    """Terminal fractions of independent urn replicas (jitted batch)."""
    if a < 1 or b < 1:
        raise ValueError("initial counts must be >= 1")
    if steps < 0 or replicas < 1:
        raise ValueError("need steps >= 0 and replicas >= 1")
    seeds = np.array([mix_seed(base_seed, i) for i in range(replicas)], dtype=np.uint64)
    return kernels.urn_batch(a, b, steps, seeds)
