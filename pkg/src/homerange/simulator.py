"""Reflected Brownian motion with drift, and duty-cycled ("on-off") observation.

The path is produced by the three-case reflection scheme: take an Euler step,
keep it if it stays in the domain, otherwise try its mirror image across the
boundary, otherwise stay put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Domain

RNG_ALGORITHM = "numpy.random.PCG64 + Generator.standard_normal (ziggurat)"

Drift = Callable[[float, float], tuple[float, float]]


def linear_drift(x: float, y: float) -> tuple[float, float]:
    """``-(x, y)``, i.e. ``-grad f / 2`` for ``f = x^2 + y^2``."""
    return -x, -y


def zero_drift(x: float, y: float) -> tuple[float, float]:
    return 0.0, 0.0


def drift_from_potential(grad_f: Callable[[float, float], tuple[float, float]]) -> Drift:
    """Drift ``-grad f / 2`` for a potential given by its gradient."""

    def nu(x, y):
        gx, gy = grad_f(x, y)
        return -0.5 * gx, -0.5 * gy

    return nu


DRIFTS: dict[str, Drift] = {"linear": linear_drift, "zero": zero_drift}
POTENTIALS = {"quadratic": lambda x, y: x * x + y * y, "zero": lambda x, y: 0.0}
DRIFT_POTENTIAL = {"linear": "quadratic", "zero": "zero"}


@dataclass(frozen=True)
class SimParams:
    domain: Domain
    h: float
    n_steps: int
    start: tuple[float, float] = (0.0, -0.5)
    drift: str = "linear"
    seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("time step h must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.drift not in DRIFTS:
            raise ValueError(f"unknown drift {self.drift!r}; known: {sorted(DRIFTS)}")
        if not self.domain.contains(*map(float, self.start)):
            raise ValueError(f"start point {self.start} is not in the domain {self.domain.name!r}")

    @property
    def drift_fn(self) -> Drift:
        return DRIFTS[self.drift]


@dataclass(frozen=True)
class OnOffSchedule:
    """ON for ``delta1_steps`` steps, then OFF for ``delta2_steps``, repeating from step 0."""

    delta1_steps: int
    delta2_steps: int = 0
    h: float | None = None

    def __post_init__(self):
        if self.delta1_steps < 1:
            raise ValueError("delta1_steps must be >= 1")
        if self.delta2_steps < 0:
            raise ValueError("delta2_steps must be >= 0")

    @property
    def period(self) -> int:
        return self.delta1_steps + self.delta2_steps

    @property
    def delta1(self) -> float:
        """ON window length in time units."""
        return self.delta1_steps * self._h()

    @property
    def delta2(self) -> float:
        return self.delta2_steps * self._h()

    def _h(self) -> float:
        if self.h is None:
            raise ValueError("schedule has no time step; set h to convert steps to time")
        return self.h

    def mask(self, n: int) -> np.ndarray:
        return (np.arange(n) % self.period) < self.delta1_steps

    def n_steps_for(self, p: int) -> int:
        """Steps needed for ``p`` ON windows ending in an ON window."""
        return p * self.delta1_steps + (p - 1) * self.delta2_steps

    def windows_within(self, n_steps: int) -> int:
        """Largest ``p`` with ``n_steps_for(p) <= n_steps``."""
        return (n_steps + self.delta2_steps) // self.period


@dataclass(frozen=True, eq=False)
class Trajectory:
    points: np.ndarray
    times: np.ndarray
    on_flags: np.ndarray
    meta: dict = field(default_factory=dict)
    steps: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.points)
        if len(self.times) != n or len(self.on_flags) != n:
            raise ValueError("points, times and on_flags must have equal length")
        if self.steps is None:
            object.__setattr__(self, "steps", np.arange(n))

    def __len__(self):
        return len(self.points)

    def subset(self, keep: np.ndarray, **meta) -> "Trajectory":
        return Trajectory(
            self.points[keep], self.times[keep], self.on_flags[keep], {**self.meta, **meta}, self.steps[keep]
        )


def step(x, z, params: SimParams, drift: Drift | None = None) -> tuple[float, float]:
    """One step of the reflection scheme from ``x`` with Gaussian increment ``z``."""
    nu = drift or params.drift_fn
    x0, x1 = float(x[0]), float(x[1])
    vx, vy = nu(x0, x1)
    y0 = x0 + float(z[0]) + params.h * vx
    y1 = x1 + float(z[1]) + params.h * vy
    dom = params.domain
    if dom.contains(y0, y1):
        return y0, y1
    s0, s1 = dom.reflect(y0, y1)
    if dom.contains(s0, s1):
        return s0, s1
    return x0, x1


def simulate(params: SimParams) -> Trajectory:
    """Simulate ``n_steps`` points (the start included), deterministic in ``params.seed``."""
    rng = np.random.Generator(np.random.PCG64(params.seed))
    n = params.n_steps
    sd = math.sqrt(params.h)
    incs = (rng.standard_normal((n - 1, 2)) * sd).tolist()
    dom, h, nu = params.domain, params.h, params.drift_fn
    contains, reflect = dom.contains, dom.reflect
    x0, x1 = float(params.start[0]), float(params.start[1])
    xs = [None] * n
    xs[0] = (x0, x1)
    reflected = rejected = 0
    for i in range(1, n):
        z0, z1 = incs[i - 1]
        vx, vy = nu(x0, x1)
        y0 = x0 + z0 + h * vx
        y1 = x1 + z1 + h * vy
        if contains(y0, y1):
            x0, x1 = y0, y1
        else:
            s0, s1 = reflect(y0, y1)
            if contains(s0, s1):
                x0, x1 = s0, s1
                reflected += 1
            else:
                rejected += 1
        xs[i] = (x0, x1)
    out = np.asarray(xs, dtype=float)
    meta = {
        "seed": params.seed,
        "h": h,
        "domain": dom.name,
        "drift": params.drift,
        "rng": RNG_ALGORITHM,
        "n_reflected": reflected,
        "n_rejected": rejected,
    }
    return Trajectory(out, np.arange(n) * h, np.ones(n, dtype=bool), meta)


def flag_schedule(traj: Trajectory, sched: OnOffSchedule) -> Trajectory:
    """Same path with ``on_flags`` set from the schedule (nothing dropped)."""
    flags = (traj.steps % sched.period) < sched.delta1_steps
    meta = {**traj.meta, "delta1_steps": sched.delta1_steps, "delta2_steps": sched.delta2_steps}
    return Trajectory(traj.points, traj.times, flags, meta, traj.steps)


def apply_schedule(traj: Trajectory, sched: OnOffSchedule) -> Trajectory:
    """The ON subsequence; original step indices are kept in ``steps``."""
    _check_h(traj, sched)
    keep = (traj.steps % sched.period) < sched.delta1_steps
    return traj.subset(keep, delta1_steps=sched.delta1_steps, delta2_steps=sched.delta2_steps)


def prefix_window(traj: Trajectory, n_keep: int) -> Trajectory:
    """First ``n_keep`` points: the contiguous-observation baseline."""
    if not 1 <= n_keep <= len(traj):
        raise ValueError(f"n_keep must be in [1, {len(traj)}]")
    return traj.subset(slice(0, n_keep), prefix=n_keep)


def endpoint_subsample(traj: Trajectory, sched: OnOffSchedule, n: int) -> np.ndarray:
    """Last point of each of the first ``n`` ON windows (0-based step ``(k+1)d1 + k d2 - 1``)."""
    k = np.arange(n)
    idx = (k + 1) * sched.delta1_steps + k * sched.delta2_steps - 1
    n_max = sched.windows_within(len(traj))
    if n < 1 or n > n_max:
        raise ValueError(f"trajectory holds only {n_max} complete ON windows; asked for n={n}")
    return traj.points[idx]


def _check_h(traj, sched):
    h = traj.meta.get("h")
    if h is not None and sched.h is not None and not math.isclose(h, sched.h, rel_tol=1e-12):
        raise ValueError(f"schedule h={sched.h} differs from trajectory h={h}")
