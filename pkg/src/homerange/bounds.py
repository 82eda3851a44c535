"""Closed-form probability bounds for on-off versus contiguous observation.

Quantities follow the covering argument: ``delta = c w_d (eps/2)^d / 2`` is
half the stationary mass of an eps/2-ball at the density floor ``c``,
``t1 = log(beta/delta)/alpha`` is the mixing time after which the chain has
forgotten its state to within ``delta``, and ``C1`` bounds the covering
number of the inner parallel set.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import covering_number_bound, unit_ball_volume


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class ErgodicityParams:
    alpha: float = 1.0
    beta: float = 1.0
    c_inf: float = 0.2
    mu_S: float = 4.0
    d: int = 2

    def __post_init__(self):
        for name in ("alpha", "beta", "c_inf", "mu_S"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    def ball_mass(self, eps: float) -> float:
        """``c w_d (eps/2)^d``: stationary-mass floor of an eps/2-ball."""
        return self.c_inf * unit_ball_volume(self.d) * (eps / 2.0) ** self.d

    def max_epsilon(self) -> float:
        return 2.0 * (2.0 * self.beta / (self.c_inf * unit_ball_volume(self.d))) ** (1.0 / self.d)


@dataclass(frozen=True)
class BoundReport:
    epsilon: float
    p: int
    delta1: float
    delta2: float
    delta: float
    t1: float
    l1: float
    l2: float
    C1: float
    C2: float
    C3: float
    bound_contiguous_raw: float
    bound_onoff_raw: float
    feasible: bool
    l1_integer: bool
    l2_integer: bool

    @property
    def bound_contiguous(self) -> float:
        return min(self.bound_contiguous_raw, 1.0)

    @property
    def bound_onoff(self) -> float:
        return min(self.bound_onoff_raw, 1.0)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bound_contiguous"] = self.bound_contiguous
        out["bound_onoff"] = self.bound_onoff
        return out


def _check_eps(eps, params):
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if not eps < params.max_epsilon():
        raise InfeasibleError(f"epsilon={eps} too large; must be < {params.max_epsilon():.6g}")


def min_delta1(epsilon: float, params: ErgodicityParams, strict: bool = True) -> float:
    """Smallest admissible ON-window length.

    With ``strict=False`` the epsilon range is not enforced and the raw
    threshold is returned; a value <= 0 then means any positive window works.
    """
    if strict:
        _check_eps(epsilon, params)
    elif not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return math.log(2.0 * params.beta / params.ball_mass(epsilon)) / params.alpha


def _is_int(x, tol=1e-9):
    return abs(x - round(x)) <= tol * max(1.0, abs(x))


def bound_report(epsilon: float, p: int, delta1: float, delta2: float, params: ErgodicityParams) -> BoundReport:
    """Evaluate both bounds and every intermediate quantity.

    Raises :class:`InfeasibleError` when ``delta1 < t1``; ``delta1 == t1`` is
    returned with ``feasible=False`` (exponent exactly zero).
    """
    _check_eps(epsilon, params)
    if p < 1:
        raise ValueError("p must be >= 1")
    if delta2 < 0:
        raise ValueError("delta2 must be >= 0")
    delta = params.ball_mass(epsilon) / 2.0
    t1 = math.log(params.beta / delta) / params.alpha
    if delta1 < t1:
        raise InfeasibleError(f"delta1={delta1} violates delta1 > {t1:.6g}")
    C1 = covering_number_bound(epsilon, params.mu_S, params.d)
    l1, l2 = delta1 / t1, delta2 / t1
    contiguous_exp = delta * p * (delta1 - t1) / t1
    extra_exp = delta * (p - 1) * (2.0 - (delta / params.beta) ** (l2 - 1.0))
    raw_c = C1 * math.exp(-contiguous_exp)
    raw_o = raw_c * math.exp(-extra_exp)
    return BoundReport(
        epsilon=epsilon,
        p=p,
        delta1=delta1,
        delta2=delta2,
        delta=delta,
        t1=t1,
        l1=l1,
        l2=l2,
        C1=C1,
        C2=contiguous_exp / (p * delta1),
        C3=extra_exp / p,
        bound_contiguous_raw=raw_c,
        bound_onoff_raw=raw_o,
        feasible=delta1 > t1,
        l1_integer=_is_int(l1),
        l2_integer=_is_int(l2),
    )


def bound_contiguous(epsilon, p, delta1, params) -> tuple[float, float]:
    """(raw, clamped) bound on P(d_H > eps) when observing ``[0, p*delta1]`` contiguously."""
    rep = bound_report(epsilon, p, delta1, 0.0, params)
    return rep.bound_contiguous_raw, rep.bound_contiguous


def bound_onoff(epsilon, p, delta1, delta2, params) -> tuple[float, float]:
    """(raw, clamped) bound for ``p`` ON windows of length delta1 separated by OFF gaps delta2."""
    rep = bound_report(epsilon, p, delta1, delta2, params)
    return rep.bound_onoff_raw, rep.bound_onoff


@dataclass(frozen=True)
class ScheduleAdvice:
    delta1: float
    p: int
    report: BoundReport | None


def advise_schedule(
    battery: float,
    epsilon: float,
    params: ErgodicityParams,
    p_max: int,
    delta2: float = 0.0,
    margin: float = 1e-9,
    strict: bool = True,
) -> ScheduleAdvice:
    """Most windows ``p <= p_max`` such that ``battery / p`` still clears the minimum ON length.

    ``report`` is None when epsilon lies outside the range where the bound is
    defined (only possible with ``strict=False``).
    """
    if not battery > 0:
        raise ValueError("battery must be positive")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    m = min_delta1(epsilon, params, strict=strict)
    for p in range(p_max, 0, -1):
        d1 = battery / p
        if d1 > m + margin:
            report = bound_report(epsilon, p, d1, delta2, params) if epsilon < params.max_epsilon() else None
            return ScheduleAdvice(d1, p, report)
    raise InfeasibleError("battery too short for requested epsilon")


def rate_curve(T_values, d: int = 2) -> np.ndarray:
    """``(log(T)^2 / T)^(1/d)``."""
    T = np.asarray(T_values, dtype=float)
    if np.any(T <= 1):
        raise ValueError("T must exceed 1")
    return (np.log(T) ** 2 / T) ** (1.0 / d)
