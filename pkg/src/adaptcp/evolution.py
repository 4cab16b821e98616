"""Mutation kernels, mutation-rate functions, and the mutation-probability
schedule with its validity checks."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RateFunction:
    """Strictly positive mutation-rate function of the parent type.

    variant 'constant': b(lam) = c.  variant 'linear-capped':
    b(lam) = min(c * lam, c_max).
    """

    variant: str = "constant"
    c: float = 1.0
    c_max: float = math.inf

    def __post_init__(self):
        if self.variant not in ("constant", "linear-capped"):
            raise ValidationError(f"unknown rate function variant {self.variant!r}")
        if self.c <= 0 or self.c_max <= 0:
            raise ValidationError("rate function parameters must be positive")

    def __call__(self, lam):
        if self.variant == "constant":
            return self.c
        return min(self.c * lam, self.c_max)

    def kernel_params(self):
        """(kind, c, cap) triple consumed by the event kernel."""
        if self.variant == "constant":
            return 0, float(self.c), 0.0
        return 1, float(self.c), float(self.c_max)


@dataclass(frozen=True)
class MutationKernel:
    """Probability kernel for the mutant type; never returns the parent type.

    variants:
      'two-point'    up to lam + h_up with probability p, otherwise down to
                     lam - h_down, clamped to the positive floor
      'gaussian'     lam + sigma * Z, resampled until positive
      'lognormal'    lam * exp(sigma * Z)
    """

    variant: str = "two-point"
    h_up: float = 1.0
    h_down: float = 1.0
    p: float = 0.5
    sigma: float = 0.1
    floor: float = 1e-6

    def __post_init__(self):
        if self.variant not in ("two-point", "gaussian", "lognormal"):
            raise ValidationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "two-point":
            if self.h_up <= 0 or self.h_down <= 0:
                raise ValidationError("two-point steps must be positive")
            if not 0 <= self.p <= 1:
                raise ValidationError("two-point up-probability must lie in [0, 1]")
            if self.floor <= 0:
                raise ValidationError("floor must be positive")
        else:
            if self.sigma <= 0:
                raise ValidationError("sigma must be positive")

    def sample(self, lam, rng):
        if lam <= 0:
            raise ValidationError("parent type must be positive")
        if self.variant == "two-point":
            if rng.random() < self.p:
                return lam + self.h_up
            down = max(lam - self.h_down, self.floor)
            if down == lam:
                raise ValidationError(
                    f"two-point kernel degenerate at lam={lam}: the down branch "
                    "returns the parent type"
                )
            return down
        if self.variant == "gaussian":
            while True:
                v = lam + self.sigma * rng.standard_normal()
                if v > 0 and v != lam:
                    return v
        v = lam * math.exp(self.sigma * rng.standard_normal())
        return v if v != lam else self.sample(lam, rng)

    def support(self, lam):
        """Atoms (value, mass) for discrete kernels; None for continuous."""
        if self.variant != "two-point":
            return None
        down = max(lam - self.h_down, self.floor)
        atoms = []
        if self.p > 0:
            atoms.append((lam + self.h_up, self.p))
        if self.p < 1:
            atoms.append((down, 1.0 - self.p))
        return atoms


def sample_mutant_type(kernel, lam, rng):
    """Draw a mutant type from K(lam, .); positive and distinct from lam."""
    return kernel.sample(lam, rng)


@dataclass(frozen=True)
class ScalingSchedule:
    """Mutation probability rule delta_N = c * N**(-gamma).

    epsilon0 and a are the declared constants of the two schedule
    assumptions: delta_N * N**(d+1+epsilon0) must vanish, and delta_N must
    dominate N**(-a).  t_N = N**(1 + epsilon0/2) is the stage-2 horizon.
    """

    gamma: float
    c: float = 1.0
    epsilon0: float = 0.5
    a: float = field(default=None)

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ValidationError("schedule prefactor must lie in (0, 1]")
        if self.gamma <= 0 or self.epsilon0 <= 0:
            raise ValidationError("gamma and epsilon0 must be positive")
        if self.a is None:
            object.__setattr__(self, "a", float(self.gamma))
        if self.a <= 0:
            raise ValidationError("a must be positive")

    def delta(self, N):
        d = self.c * float(N) ** (-self.gamma)
        if not 0 < d < 1:
            raise ValidationError(f"delta_N = {d} outside (0, 1) at N = {N}")
        return d

    def t_resolution(self, N):
        """Stage-2 competition horizon t_N."""
        return float(N) ** (1.0 + self.epsilon0 / 2.0)


def default_schedule(d):
    """delta_N = N**-(d+2): the simplest power law satisfying both
    assumptions with epsilon0 = 1/2."""
    return ScalingSchedule(gamma=d + 2, c=1.0, epsilon0=0.5, a=d + 2)


@dataclass
class ScheduleReport:
    separation_ok: bool
    lower_bound_ok: bool
    details: dict

    @property
    def ok(self):
        return self.separation_ok and self.lower_bound_ok


def validate_schedule(schedule, d, n_range):
    """Report-only check of the two schedule assumptions over an N range.

    Assumption 1 (mutation separation): delta_N * N**(d+1+epsilon0) decreasing
    toward 0 over the range, which holds iff gamma > d+1+epsilon0.
    Assumption 2 (not too rare): delta_N >= N**(-a) over the range.
    """
    n_range = sorted(int(N) for N in n_range)
    if not n_range:
        raise ValidationError("empty N range")
    exponent = d + 1 + schedule.epsilon0
    sep_values = [schedule.delta(N) * N**exponent for N in n_range]
    separation_ok = schedule.gamma > exponent and all(
        b <= a * (1 + 1e-12) for a, b in zip(sep_values, sep_values[1:])
    )
    lb_values = [(schedule.delta(N), N ** (-schedule.a)) for N in n_range]
    lower_bound_ok = all(dn >= nb * (1 - 1e-12) for dn, nb in lb_values)
    return ScheduleReport(
        separation_ok=separation_ok,
        lower_bound_ok=lower_bound_ok,
        details={
            "gamma": schedule.gamma,
            "epsilon0": schedule.epsilon0,
            "a": schedule.a,
            "required_gamma_above": exponent,
            "separation_values": sep_values,
            "lower_bound_pairs": lb_values,
            "n_range": n_range,
        },
    )


def birth_split(delta, b, lam):
    """(non-mutant, mutant) birth rate factors; clamped, summing to one."""
    if not 0 <= delta < 1:
        raise ValidationError(f"delta must lie in [0, 1), got {delta}")
    db = delta * b(lam)
    return max(0.0, 1.0 - db), min(db, 1.0)
