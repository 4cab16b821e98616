"""The limiting Markov jump process: direct sampler, finite-dimensional
calculator, non-explosiveness probe, and micro-vs-limit comparison.

Rates come from providers: either tables built from estimator output (with
standard errors) or synthetic user tables for exact unit tests.  Holding in
state lam is exponential with rate b(lam) * R(lam); a proposal drawn from the
mutation kernel is accepted with the acceptance probability, which vanishes
for downward proposals.  Rejected attempts leave no trace in the trait path
but are first-class in the attempt log, which is what the finite-dimensional
law describes.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .errors import ProviderGapError, ValidationError
from .traits import TraitPath


@dataclass
class RateTable:
    """Effective-rate provider keyed by trait value, optional interpolation."""

    grid: list
    values: list
    ses: list = None
    interpolate: bool = False

    def __post_init__(self):
        order = np.argsort(self.grid)
        self.grid = [float(self.grid[i]) for i in order]
        self.values = [float(self.values[i]) for i in order]
        self.ses = (
            [0.0] * len(self.grid)
            if self.ses is None
            else [float(self.ses[i]) for i in order]
        )
        for v in self.values:
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"effective rate {v} outside (0, 1]")

    def __call__(self, lam):
        for x, v, s in zip(self.grid, self.values, self.ses):
            if x == lam:
                return v, s
        if not self.interpolate:
            raise ProviderGapError(f"no effective-rate value for trait {lam}")
        if lam < self.grid[0] or lam > self.grid[-1]:
            raise ProviderGapError(
                f"trait {lam} outside the table range [{self.grid[0]}, "
                f"{self.grid[-1]}]; extrapolation refused"
            )
        v = float(np.interp(lam, self.grid, self.values))
        s = float(np.interp(lam, self.grid, self.ses))
        return v, s


@dataclass
class AcceptanceTable:
    """Acceptance-probability provider keyed by (resident, proposal) pairs.

    Downward proposals are exactly zero and never consult the table."""

    table: dict
    interpolate: bool = False

    def __post_init__(self):
        clean = {}
        for (lam, lp), val in self.table.items():
            v, s = val if isinstance(val, tuple) else (val, 0.0)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"acceptance {v} outside [0, 1]")
            clean[(float(lam), float(lp))] = (float(v), float(s))
        self.table = clean

    def __call__(self, lam, lam_prime):
        if lam_prime <= lam:
            return 0.0, 0.0
        key = (float(lam), float(lam_prime))
        if key in self.table:
            return self.table[key]
        if self.interpolate:
            rows = sorted(
                (lp, v, s) for (l0, lp), (v, s) in self.table.items() if l0 == lam
            )
            if rows:
                lps = [r[0] for r in rows]
                if lps[0] <= lam_prime <= lps[-1]:
                    v = float(np.interp(lam_prime, lps, [r[1] for r in rows]))
                    s = float(np.interp(lam_prime, lps, [r[2] for r in rows]))
                    return v, s
        raise ProviderGapError(f"no acceptance value for ({lam}, {lam_prime})")


@dataclass
class LimitParams:
    lambda0: float
    b: object
    kernel: object
    R: object
    S: object


@dataclass
class Attempt:
    sigma: float
    proposal: float
    accepted: bool
    location: float  # state after the attempt


def sample_limit_path(params, horizon, seed, max_attempts=None):
    """Sample one path of the limiting jump process up to the horizon.

    Returns (TraitPath, attempts): rejected proposals appear only in the
    attempt log, whose (sigma_j, Lambda_j) sequence follows the
    finite-dimensional law with repeats at failed jumps.  ``max_attempts``
    truncates the attempt log (useful with an infinite horizon).
    """
    rng = np.random.default_rng(derive_seed(seed, "limit"))
    lam = float(params.lambda0)
    t = 0.0
    jumps = []
    attempts = []
    while max_attempts is None or len(attempts) < max_attempts:
        r, _ = params.R(lam)
        rate = params.b(lam) * r
        sigma = rng.exponential(1.0 / rate)
        t = t + sigma
        if t > horizon:
            break
        proposal = float(params.kernel.sample(lam, rng))
        s, _ = params.S(lam, proposal)
        accepted = bool(rng.random() < s)
        if accepted:
            jumps.append((t, proposal, None))
            lam = proposal
        attempts.append(Attempt(sigma, proposal, accepted, lam))
    return TraitPath(lambda0=params.lambda0, jumps=jumps, horizon=horizon), attempts


@dataclass
class FddSpec:
    """Horizon grid and bounded test functions for the attempt-log law."""

    times: list
    gs: list

    def __post_init__(self):
        if len(self.times) != len(self.gs) or not self.times:
            raise ValidationError("need one test function per time")
        if any(t <= 0 for t in self.times):
            raise ValidationError("times must be positive")


def _effective_kernel_atoms(params, lam):
    """Atoms (value, mass) of the post-acceptance kernel at lam, including
    the diagonal rejection mass."""
    atoms = params.kernel.support(lam)
    if atoms is None:
        raise ValidationError(
            "exact finite-dimensional evaluation needs a discrete kernel; "
            "use fdd_weights_mc for continuous kernels"
        )
    out = []
    stay = 0.0
    for value, mass in atoms:
        s, _ = params.S(lam, value)
        if s > 0.0:
            out.append((value, mass * s))
        stay += mass * (1.0 - s)
    if stay > 0.0:
        out.append((lam, stay))
    return out


def fdd_weights(params, spec):
    """E[prod_j 1{sigma_j <= t_j} g_j(Lambda_j)], exactly, for discrete
    kernels: nested sums over the post-acceptance kernel atoms with
    exponential holding factors."""

    def recurse(lam, j):
        if j == len(spec.times):
            return 1.0
        r, _ = params.R(lam)
        factor = 1.0 - math.exp(-params.b(lam) * r * spec.times[j])
        total = 0.0
        for value, mass in _effective_kernel_atoms(params, lam):
            total += mass * spec.gs[j](value) * recurse(value, j + 1)
        return factor * total

    return recurse(float(params.lambda0), 0)


def fdd_weights_mc(params, spec, n_paths, seed):
    """Monte Carlo counterpart over sampled attempt logs, with its SE."""
    k = len(spec.times)
    horizon = float(sum(spec.times)) + 1.0
    vals = np.empty(n_paths)
    for i in range(n_paths):
        _, attempts = sample_limit_path(params, horizon, derive_seed(seed, "fdd", i))
        v = 1.0
        for j in range(k):
            if j >= len(attempts) or attempts[j].sigma > spec.times[j]:
                v = 0.0
                break
            v *= spec.gs[j](attempts[j].location)
        vals[i] = v
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_paths))
    return est, se


def check_nonexplosive(params, horizon, trials, seed):
    """Attempt-count statistics at the horizon and at twice the horizon; a
    parameterization is flagged when counts grow clearly superlinearly."""
    counts1 = []
    counts2 = []
    for i in range(trials):
        _, a1 = sample_limit_path(params, horizon, derive_seed(seed, "ne1", i))
        _, a2 = sample_limit_path(params, 2 * horizon, derive_seed(seed, "ne2", i))
        counts1.append(len(a1))
        counts2.append(len(a2))
    c1 = np.asarray(counts1, dtype=np.float64)
    c2 = np.asarray(counts2, dtype=np.float64)
    m1 = float(c1.mean())
    m2 = float(c2.mean())
    se = math.sqrt(c1.var(ddof=1) / trials * 4 + c2.var(ddof=1) / trials)
    flagged = m2 > 2.0 * m1 + 3.0 * se + 1e-9
    return {
        "horizon": horizon,
        "mean_attempts": m1,
        "mean_attempts_doubled": m2,
        "max_attempts": int(c2.max()) if trials else 0,
        "quantiles": {
            q: float(np.quantile(c2, q)) for q in (0.5, 0.9, 0.99)
        },
        "flagged_superlinear": bool(flagged),
    }


# ---------------------------------------------------------------------------
# statistical comparison


def ks_two_sample(x, y):
    """Two-sample Kolmogorov-Smirnov statistic."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    y = np.sort(np.asarray(y, dtype=np.float64))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / len(x)
    fy = np.searchsorted(y, grid, side="right") / len(y)
    return float(np.abs(fx - fy).max())


def tv_discrete(x, y):
    """Total-variation distance between empirical laws of discrete samples."""
    vals = sorted(set(x) | set(y))
    px = np.array([np.mean(np.asarray(x) == v) for v in vals])
    py = np.array([np.mean(np.asarray(y) == v) for v in vals])
    return float(0.5 * np.abs(px - py).sum())


def energy_statistic(a, b):
    """Two-sample energy statistic on row-matrices (joint distributions)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))

    def mean_dist(u, v):
        d = np.sqrt(((u[:, None, :] - v[None, :, :]) ** 2).sum(axis=2))
        return d.mean()

    return float(2 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b))


def _permutation_band(stat, x, y, n_perm, rng, q=0.95):
    pooled = np.concatenate([x, y], axis=0)
    nx = len(x)
    vals = []
    for _ in range(n_perm):
        perm = rng.permutation(len(pooled))
        vals.append(stat(pooled[perm[:nx]], pooled[perm[nx:]]))
    return float(np.quantile(vals, q))


def compare_paths(
    micro_sigma1,
    micro_lambda1,
    limit_sigma1,
    limit_lambda1,
    micro_values_at=None,
    limit_values_at=None,
    n_perm=200,
    seed=0,
):
    """First-round comparison report between micro and limit ensembles.

    Returns a list of rows (statistic, value, null_band95, n_micro, n_limit).
    The null band is the 95th percentile of the statistic under pooled
    permutations, so a self-comparison sits inside its band.
    """
    ms = np.asarray(micro_sigma1, dtype=np.float64)
    ls = np.asarray(limit_sigma1, dtype=np.float64)
    ml = np.asarray(micro_lambda1, dtype=np.float64)
    ll = np.asarray(limit_lambda1, dtype=np.float64)
    if len(ms) == 0 or len(ls) == 0:
        raise ValidationError("both ensembles must be non-empty")
    if len(ms) != len(ml) or len(ls) != len(ll):
        raise ValidationError("sigma and Lambda sample lengths must match")
    rng = np.random.default_rng(derive_seed(seed, "compare"))
    rows = []

    ks = ks_two_sample(ms, ls)
    band = _permutation_band(ks_two_sample, ms, ls, n_perm, rng)
    rows.append(
        {
            "statistic": "ks_sigma1",
            "value": ks,
            "band95": band,
            "n_micro": len(ms),
            "n_limit": len(ls),
        }
    )

    tv = tv_discrete(ml, ll)
    band = _permutation_band(tv_discrete, ml, ll, n_perm, rng)
    rows.append(
        {
            "statistic": "tv_lambda1",
            "value": tv,
            "band95": band,
            "n_micro": len(ml),
            "n_limit": len(ll),
        }
    )

    joint_m = np.column_stack([ms, ml])
    joint_l = np.column_stack([ls, ll])
    scale = np.concatenate([joint_m, joint_l]).std(axis=0)
    scale[scale == 0] = 1.0
    en = energy_statistic(joint_m / scale, joint_l / scale)
    band = _permutation_band(
        lambda a, b: energy_statistic(a, b), joint_m / scale, joint_l / scale,
        min(n_perm, 100), rng,
    )
    rows.append(
        {
            "statistic": "energy_joint",
            "value": en,
            "band95": band,
            "n_micro": len(ms),
            "n_limit": len(ls),
        }
    )

    if micro_values_at is not None and limit_values_at is not None:
        for t, mv, lv in zip(
            micro_values_at["times"],
            np.asarray(micro_values_at["values"], dtype=np.float64).T,
            np.asarray(limit_values_at["values"], dtype=np.float64).T,
        ):
            tv = tv_discrete(mv, lv)
            band = _permutation_band(tv_discrete, mv, lv, n_perm, rng)
            rows.append(
                {
                    "statistic": f"tv_value_at_{t}",
                    "value": tv,
                    "band95": band,
                    "n_micro": len(mv),
                    "n_limit": len(lv),
                }
            )
    return rows
