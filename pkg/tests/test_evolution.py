import math

import numpy as np
import pytest

from adaptcp.errors import ValidationError
from adaptcp.evolution import (
    MutationKernel,
    RateFunction,
    ScalingSchedule,
    birth_split,
    default_schedule,
    sample_mutant_type,
    validate_schedule,
)


def test_two_point_frequencies():
    k = MutationKernel("two-point", h_up=1.0, h_down=0.5, p=0.3)
    rng = np.random.default_rng(1)
    n = 100_000
    draws = np.array([sample_mutant_type(k, 2.0, rng) for _ in range(n)])
    assert set(np.unique(draws)) == {1.5, 3.0}
    up = (draws == 3.0).mean()
    assert abs(up - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / n)


def test_never_returns_parent():
    rng = np.random.default_rng(2)
    for k in (
        MutationKernel("two-point", h_up=1, h_down=0.5, p=0.5),
        MutationKernel("gaussian", sigma=0.3),
        MutationKernel("lognormal", sigma=0.2),
    ):
        draws = [k.sample(1.0, rng) for _ in range(20_000)]
        assert all(v > 0 and v != 1.0 for v in draws)


def test_lognormal_log_mean():
    k = MutationKernel("lognormal", sigma=0.1)
    rng = np.random.default_rng(3)
    n = 100_000
    logs = np.log([k.sample(1.0, rng) for _ in range(n)]) / 0.1
    assert abs(logs.mean()) <= 3.0 / math.sqrt(n)


def test_gaussian_ks_against_truncated_normal():
    sigma, lam = 0.5, 1.0
    k = MutationKernel("gaussian", sigma=sigma)
    rng = np.random.default_rng(4)
    n = 100_000
    draws = np.sort([k.sample(lam, rng) for _ in range(n)])

    def cdf(x):
        # normal centered at lam, truncated to (0, inf)
        from math import erf, sqrt

        def phi(z):
            return 0.5 * (1 + erf(z / sqrt(2)))

        z0 = -lam / sigma
        return (phi((x - lam) / sigma) - phi(z0)) / (1 - phi(z0))

    grid = draws[:: n // 200]
    emp = np.searchsorted(draws, grid, side="right") / n
    theo = np.array([cdf(x) for x in grid])
    ks = np.abs(emp - theo).max()
    # KS critical value at significance 1e-3
    assert ks < 1.95 / math.sqrt(n)


def test_degenerate_parameters_rejected_at_construction():
    with pytest.raises(ValidationError):
        MutationKernel("gaussian", sigma=0.0)
    with pytest.raises(ValidationError):
        MutationKernel("two-point", h_up=0.0)
    with pytest.raises(ValidationError):
        RateFunction("constant", c=0.0)


def test_birth_split_examples():
    b = RateFunction("constant", c=1.0)
    assert birth_split(0.25, b, 1.0) == (0.75, 0.25)
    assert birth_split(0.0, b, 1.0) == (1.0, 0.0)
    big = RateFunction("constant", c=100.0)
    assert birth_split(0.5, big, 1.0) == (0.0, 1.0)


def test_birth_split_sums_to_one():
    rng = np.random.default_rng(5)
    for _ in range(200):
        delta = rng.uniform(0, 0.999)
        c = rng.uniform(0.01, 50)
        lam = rng.uniform(0.01, 10)
        lo, hi = birth_split(delta, RateFunction("constant", c=c), lam)
        assert 0 <= lo <= 1 and 0 <= hi <= 1
        assert lo + hi == pytest.approx(1.0, abs=1e-12)


def test_validate_schedule_examples():
    ns = [20, 50, 100, 200]
    r = validate_schedule(ScalingSchedule(gamma=3.0, epsilon0=0.5), 1, ns)
    assert r.separation_ok and r.lower_bound_ok
    r = validate_schedule(ScalingSchedule(gamma=2.0, epsilon0=0.5), 1, ns)
    assert not r.separation_ok
    r = validate_schedule(ScalingSchedule(gamma=4.0, epsilon0=0.5, a=4.0), 2, ns)
    assert r.separation_ok and r.lower_bound_ok


def test_validate_schedule_monotone_in_gamma():
    ns = [10, 40, 160]
    prev_sep = False
    for gamma in (2.0, 2.6, 3.5, 5.0):
        rep = validate_schedule(ScalingSchedule(gamma=gamma, epsilon0=0.5, a=5.0), 1, ns)
        if prev_sep:
            assert rep.separation_ok  # strengthening gamma cannot break it
        prev_sep = rep.separation_ok
    # and the lower bound can only break as gamma grows past a
    assert not validate_schedule(
        ScalingSchedule(gamma=6.0, epsilon0=0.5, a=5.0), 1, ns
    ).lower_bound_ok


def test_default_schedule_passes():
    for d in (1, 2):
        sched = default_schedule(d)
        rep = validate_schedule(sched, d, [10, 100, 1000])
        assert rep.ok
        assert sched.t_resolution(100) == pytest.approx(100 ** 1.25)
