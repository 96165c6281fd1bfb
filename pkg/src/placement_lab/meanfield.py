"""Large-system limit laws for the load of a single node.

The random policy limit is a jump process with geometric equilibrium; the
power-of-choice limit has an invariant tail given by a quadratic recursion
and a transient described by a tail ODE. Both admit closed scaling limits as
the mean load grows.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from placement_lab.policies import PolicyKind

DEFAULT_TAIL_TOLERANCE = 1e-12


@dataclass
class TailVector:
    """Discrete tail distribution: tail[x] = P(X >= x) for x = 0..x_max."""

    beta: float
    tail: np.ndarray

    def __post_init__(self):
        self.tail = np.asarray(self.tail, dtype=np.float64)
        if self.tail.ndim != 1 or len(self.tail) < 1:
            raise ValueError("tail must be a one-dimensional array")
        if abs(self.tail[0] - 1.0) > 1e-9:
            raise ValueError("tail[0] must equal 1")
        if np.any(self.tail < -1e-12) or np.any(self.tail > 1.0 + 1e-12):
            raise ValueError("tail values must lie in [0, 1]")
        if np.any(np.diff(self.tail) > 1e-9):
            raise ValueError("tail must be non-increasing")

    @property
    def x_max(self) -> int:
        return len(self.tail) - 1

    def pmf(self) -> np.ndarray:
        """P(X == x) for x = 0..x_max, with the mass beyond x_max dropped."""
        extended = np.append(self.tail, 0.0)
        return np.maximum(extended[:-1] - extended[1:], 0.0)

    def mean(self) -> float:
        """E[X] = sum of tail values from 1 up."""
        return float(self.tail[1:].sum())

    def cdf(self, x: int) -> float:
        """P(X <= x)."""
        if x < 0:
            return 0.0
        if x + 1 > self.x_max:
            return 1.0
        return 1.0 - float(self.tail[x + 1])


@dataclass
class LimitProcessSample:
    """One trajectory of the limit jump process as (time, value) steps."""

    beta: float
    path: list[tuple[float, int]]

    def value_at(self, t: float) -> int:
        """Path value at time t (right-continuous step function)."""
        if not self.path or t < self.path[0][0]:
            raise ValueError(f"time {t} precedes the path start")
        lo, hi = 0, len(self.path) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.path[mid][0] <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.path[lo][1]


def _check_beta(beta: float) -> float:
    if not (isinstance(beta, (int, float)) and math.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be a positive number, got {beta!r}")
    return float(beta)


def random_invariant_tail(
    beta: float,
    x_max: int | None = None,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> TailVector:
    """Geometric stationary tail: P(X >= n) = (beta/(1+beta))^n."""
    beta = _check_beta(beta)
    ratio = beta / (1.0 + beta)
    if x_max is None:
        # smallest n with ratio^n below tolerance
        x_max = max(1, math.ceil(math.log(tail_tolerance) / math.log(ratio)))
    tail = ratio ** np.arange(x_max + 1, dtype=np.float64)
    return TailVector(beta=beta, tail=tail)


def poc_invariant_tail(
    beta: float,
    x_max: int | None = None,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> TailVector:
    """Stationary tail of the power-of-choice limit.

    Defined by xi(0) = 1 and xi(x+1) = (-1 + sqrt(1 + 4 beta^2 xi(x)^2)) / (2 beta),
    evaluated in the algebraically equivalent form
    2 beta xi(x)^2 / (1 + sqrt(1 + 4 beta^2 xi(x)^2)) that stays accurate when
    beta * xi(x) is small. Truncates at x_max, or where xi drops below
    tail_tolerance.
    """
    beta = _check_beta(beta)
    values = [1.0]
    prev = 1.0
    while True:
        if x_max is not None:
            if len(values) > x_max:
                break
        elif prev < tail_tolerance and len(values) > 1:
            break
        u = beta * prev
        prev = 2.0 * u * prev / (1.0 + math.sqrt(1.0 + 4.0 * u * u))
        values.append(prev)
    return TailVector(beta=beta, tail=np.array(values))


def point_mass_tail(beta: float, load: int) -> TailVector:
    """Tail vector of the distribution putting all mass on a single load."""
    beta = _check_beta(beta)
    if not isinstance(load, int) or load < 0:
        raise ValueError(f"load must be a non-negative integer, got {load!r}")
    tail = np.zeros(load + 2, dtype=np.float64)
    tail[: load + 1] = 1.0
    return TailVector(beta=beta, tail=tail)


def _ode_rhs(beta: float, tail: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Tail dynamics dF(x)/dt = beta (F(x-1)^2 - F(x)^2) - F(x), F(0) pinned at 1."""
    squares = tail * tail
    out[0] = 0.0
    out[1:] = beta * (squares[:-1] - squares[1:]) - tail[1:]
    return out


def poc_tail_ode(
    beta: float,
    initial: TailVector,
    t_end: float,
    dt: float | None = None,
) -> TailVector:
    """Integrate the power-of-choice tail ODE from `initial` for t_end time units.

    Fixed-step fourth-order Runge-Kutta; the default step 0.01/(1+beta)
    tracks the growth of jump rates with beta. The state is extended with
    zero tail mass well past 2 beta so transients have room to spread.
    """
    beta = _check_beta(beta)
    if not isinstance(initial, TailVector):
        raise ValueError("initial must be a TailVector")
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end!r}")
    if dt is None:
        dt = 0.01 / (1.0 + beta)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt!r}")

    length = max(len(initial.tail), math.ceil(2.5 * beta) + 25)
    state = np.zeros(length, dtype=np.float64)
    state[: len(initial.tail)] = initial.tail
    state[0] = 1.0
    if t_end == 0:
        return TailVector(beta=beta, tail=state)

    n_steps = max(1, math.ceil(t_end / dt))
    h = t_end / n_steps
    k1 = np.empty(length)
    k2 = np.empty(length)
    k3 = np.empty(length)
    k4 = np.empty(length)
    for _ in range(n_steps):
        _ode_rhs(beta, state, k1)
        _ode_rhs(beta, state + 0.5 * h * k1, k2)
        _ode_rhs(beta, state + 0.5 * h * k2, k3)
        _ode_rhs(beta, state + h * k3, k4)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        np.clip(state, 0.0, 1.0, out=state)
    return TailVector(beta=beta, tail=state)


def poc_ode_residual(beta: float, tail: TailVector) -> float:
    """Max-norm of the tail ODE right-hand side at `tail` (0 at stationarity)."""
    beta = _check_beta(beta)
    out = np.empty(len(tail.tail))
    _ode_rhs(beta, tail.tail, out)
    return float(np.abs(out).max())


def simulate_limit_random(
    beta: float, t_end: float, rng: random.Random
) -> LimitProcessSample:
    """Sample the limit jump process: up one at rate beta, reset to 0 at rate 1."""
    beta = _check_beta(beta)
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end!r}")
    total_rate = beta + 1.0
    up_probability = beta / total_rate
    path = [(0.0, 0)]
    t = 0.0
    value = 0
    while True:
        t += rng.expovariate(total_rate)
        if t > t_end:
            break
        value = value + 1 if rng.random() < up_probability else 0
        path.append((t, value))
    return LimitProcessSample(beta=beta, path=path)


def scaled_limit_tail(policy: PolicyKind | str, x: float) -> float:
    """Tail of the load scaled by beta, in the large-beta limit.

    Random: exp(-x). Power of choice: (1 - x/2)^+, uniform on [0, 2].
    """
    policy = PolicyKind(policy)
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x!r}")
    if policy is PolicyKind.RANDOM:
        return math.exp(-x)
    if policy is PolicyKind.POWER_OF_CHOICE:
        return max(1.0 - x / 2.0, 0.0)
    raise ValueError("least_loaded has no scaling limit law")
