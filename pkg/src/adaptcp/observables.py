"""Monte Carlo estimators for the quantities entering the limiting process.

Every estimator returns an ``EstimatorResult`` (point estimate, standard
error from the same sample, sample count, diagnostics).  Estimators censor
trials that die before their measurement window and report the censoring
count instead of applying any quasi-stationary correction.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from ._rng import derive_seed
from .engines import run_one_type, run_two_type
from .errors import EstimationFailedError, ValidationError
from .evolution import MutationKernel
from .torus import (
    BoxSpec,
    TorusSpec,
    _dilate,
    as_coords,
    box_sites,
    in_density_class,
    site_index,
    window_index_map,
    window_offsets,
)
from .windows import coupling_time, generate_window


@dataclass
class EstimatorResult:
    estimate: float
    se: float
    count: int
    diagnostics: dict = field(default_factory=dict)

    def band(self, k=3.0):
        return self.estimate - k * self.se, self.estimate + k * self.se


def _mean_se(values):
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        raise EstimationFailedError("no surviving trials")
    se = v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else math.inf
    return float(v.mean()), float(se), len(v)


def binomial_result(successes, n, **diag):
    p = successes / n
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return EstimatorResult(p, se, n, dict(diag))


# ---------------------------------------------------------------------------
# local functions on window patterns


@dataclass(frozen=True)
class LocalFunction:
    """Table-valued local function of the occupancy pattern on Q(o, ell).

    The table is indexed by the pattern code: bit j is the occupancy of the
    j-th window offset (lexicographic order, origin included).
    """

    d: int
    ell: int
    table: tuple

    def __post_init__(self):
        w = (2 * self.ell + 1) ** self.d
        if len(self.table) != 2**w:
            raise ValidationError(
                f"table length {len(self.table)} does not match window size 2^{w}"
            )

    @property
    def width(self):
        return (2 * self.ell + 1) ** self.d

    def array(self):
        return np.asarray(self.table, dtype=np.float64)

    def __call__(self, code):
        return self.table[int(code)]


def local_function_from_rule(d, ell, rule):
    """Tabulate ``rule(occupied_offsets_frozenset) -> float``."""
    offs = window_offsets(d, ell, include_origin=True)
    table = []
    for code in range(2 ** len(offs)):
        occ = frozenset(off for j, off in enumerate(offs) if code >> j & 1)
        table.append(float(rule(occ)))
    return LocalFunction(d, ell, tuple(table))


@lru_cache(maxsize=None)
def q_local_function(d, ell=1):
    """The built-in local function q: indicator the origin is empty times the
    number of occupied neighbors of the origin."""
    if ell < 1:
        raise ValidationError("q needs a window of radius at least 1")
    origin = (0,) * d
    units = []
    for axis in range(d):
        for sign in (1, -1):
            off = [0] * d
            off[axis] = sign
            units.append(tuple(off))

    def rule(occupied):
        if origin in occupied:
            return 0.0
        return float(sum(1 for u in units if u in occupied))

    return local_function_from_rule(d, ell, rule)


@lru_cache(maxsize=None)
def _origin_bit(d, ell):
    return window_offsets(d, ell, include_origin=True).index((0,) * d)


@lru_cache(maxsize=None)
def _neighbor_bits(d, ell):
    offs = window_offsets(d, ell, include_origin=True)
    bits = []
    for axis in range(d):
        for sign in (1, -1):
            off = [0] * d
            off[axis] = sign
            j = offs.index(tuple(off))
            if j not in bits:
                bits.append(j)
    return tuple(bits)


def q_of_code(code, d, ell):
    """Evaluate q directly on an origin-included pattern code."""
    if code >> _origin_bit(d, ell) & 1:
        return 0.0
    return float(sum(code >> j & 1 for j in _neighbor_bits(d, ell)))


@lru_cache(maxsize=None)
def _drop_origin_perm(d, ell):
    with_o = window_offsets(d, ell, include_origin=True)
    without_o = window_offsets(d, ell, include_origin=False)
    return tuple(with_o.index(off) for off in without_o)


def drop_origin(code, d, ell):
    """Re-index an origin-included pattern code onto the origin-less window."""
    out = 0
    for j, src in enumerate(_drop_origin_perm(d, ell)):
        if code >> src & 1:
            out |= 1 << j
    return out


def pattern_code(row):
    """Code of a uint8 pattern row (bit j = row[j])."""
    code = 0
    for j, v in enumerate(row):
        if v:
            code |= 1 << j
    return code


# ---------------------------------------------------------------------------
# effective birth rate R


def estimate_R(lam, spec, warmup, window, trials, seed):
    """Flip-count estimate of the effective birth rate: 0 -> 1 flips anywhere
    per site per unit time, from full occupancy, measured after a warmup.

    Trials whose population dies before warmup + window are censored and
    counted in the diagnostics.
    """
    if warmup <= 0 or window <= 0:
        raise ValidationError("warmup and window must be positive")
    horizon = warmup + window
    values = []
    censored = 0
    for i in range(trials):
        traj = run_one_type(
            spec,
            lam,
            np.ones(spec.n_sites),
            horizon,
            derive_seed(seed, "R", i),
            record_events=False,
            count_from=warmup,
        )
        if traj.status == "empty":
            censored += 1
            continue
        values.append(traj.flips_counted / (spec.n_sites * window))
    if not values:
        raise EstimationFailedError(
            f"all {trials} trials died before the measurement window"
        )
    est, se, k = _mean_se(values)
    return EstimatorResult(est, se, k, {"censored": censored, "trials": trials})


# ---------------------------------------------------------------------------
# jump sums and compensators


def _event_arrays(traj):
    if traj.events is None:
        raise ValidationError("trajectory must carry a full event log")
    ev = traj.events
    births = (ev["new"] > 0).astype(np.uint8)
    return ev["time"].astype(np.float64), ev["site"].astype(np.int32), births


def _jump_and_compensator(traj, f, lam):
    spec = traj.lattice
    if not isinstance(spec, TorusSpec):
        raise ValidationError("jump-sum functionals are defined on the torus")
    if 2 * f.ell >= spec.N:
        raise ValidationError(f"window radius {f.ell} >= N/2 = {spec.N / 2}")
    if f.d != spec.d:
        raise ValidationError("local function dimension mismatch")
    win_map = window_index_map(spec, f.ell, include_origin=True)
    offs = window_offsets(spec.d, f.ell, include_origin=True)
    neg = [offs.index(tuple(-c for c in off)) for off in offs]
    affect_map = np.ascontiguousarray(win_map[:, neg])
    q_tab = q_local_function(spec.d, f.ell).array()
    f_tab = f.array()
    times, sites, births = _event_arrays(traj)
    occ = (traj.initial > 0).astype(np.uint8)
    out = np.zeros(2)
    _kernels.jump_compensator_sweep(
        times,
        sites,
        births,
        occ,
        win_map,
        affect_map,
        f_tab,
        q_tab,
        float(lam),
        traj.t0,
        traj.t_end,
        out,
    )
    return float(out[0]), float(out[1])


def jump_sum(traj, f):
    """Sum of f over 0 -> 1 flips, evaluated at the shifted pre-flip pattern."""
    return _jump_and_compensator(traj, f, 1.0)[0]


def compensator_integral(traj, f, lam):
    """lam * sum_u integral of (q * f)(shifted configuration) dt, integrated
    exactly between events."""
    return _jump_and_compensator(traj, f, lam)[1]


# ---------------------------------------------------------------------------
# landscape at birth


@dataclass
class LandscapeSample:
    """Shifted occupancy patterns around birth sites (origin excluded)."""

    d: int
    ell: int
    patterns: np.ndarray  # uint8[n_samples, (2 ell + 1)^d - 1]
    offsets: list

    @property
    def n(self):
        return len(self.patterns)

    def codes(self):
        weights = 1 << np.arange(self.patterns.shape[1], dtype=np.int64)
        return self.patterns.astype(np.int64) @ weights

    def frequencies(self):
        codes = self.codes()
        out = {}
        for c in codes:
            out[int(c)] = out.get(int(c), 0) + 1
        return {c: k / len(codes) for c, k in out.items()}


def sample_landscape_at_birth(lam, spec, ell, burn_in, samples, seed, max_runs=16):
    """Record the local occupancy pattern (excluding the birth site) at each
    0 -> 1 flip after burn-in; the empirical law estimates the landscape
    distribution restricted to the window."""
    if 2 * ell >= spec.N:
        raise ValidationError(f"window radius {ell} >= N/2 = {spec.N / 2}")
    land_map = window_index_map(spec, ell, include_origin=False)
    out = np.zeros((samples, land_map.shape[1]), dtype=np.uint8)
    collected = 0
    for attempt in range(max_runs):
        buf = out[collected:]
        traj = run_one_type(
            spec,
            lam,
            np.ones(spec.n_sites),
            math.inf,
            derive_seed(seed, "landscape", attempt),
            record_events=False,
            landscape=(land_map, buf, float(burn_in), True),
        )
        collected += traj.landscapes_collected
        if collected >= samples:
            break
    if collected == 0:
        raise EstimationFailedError("no births recorded after burn-in")
    return LandscapeSample(
        d=spec.d,
        ell=ell,
        patterns=out[:collected],
        offsets=window_offsets(spec.d, ell, include_origin=False),
    )


# ---------------------------------------------------------------------------
# past-truncated sampler


@dataclass
class StationarySample:
    """Origin-window patterns (origin included) of the past-truncated state."""

    d: int
    ell: int
    lookback: float
    codes: np.ndarray  # int64[n_samples]

    @property
    def n(self):
        return len(self.codes)

    def density(self):
        bit = _origin_bit(self.d, self.ell)
        occ = (self.codes >> bit & 1).astype(np.float64)
        est, se, k = _mean_se(occ)
        return EstimatorResult(est, se, k)

    def local_average(self, f):
        vals = np.array([f(c) for c in self.codes])
        est, se, k = _mean_se(vals)
        return EstimatorResult(est, se, k)


def sample_stationary_past_truncated(lam, spec, ell, lookback, samples, seed):
    """Approximate draws from the upper stationary law: a site is occupied iff
    it is reached from anywhere over a window of the given lookback length."""
    if lookback <= 0:
        raise ValidationError("lookback must be positive")
    if 2 * ell >= spec.N:
        raise ValidationError(f"window radius {ell} >= N/2 = {spec.N / 2}")
    win_map = window_index_map(spec, ell, include_origin=True)
    origin = site_index(spec, (0,) * spec.d)
    codes = np.empty(samples, dtype=np.int64)
    all_sites = np.ones(spec.n_sites, dtype=np.uint8)
    for i in range(samples):
        window = generate_window(
            spec, lam, None, 0.0, lookback, derive_seed(seed, "pt", i)
        )
        occ = all_sites.copy()
        times, kind, a, b, _ = window.merged()
        out = np.zeros(1)
        _kernels.onetype_window_sweep(
            times,
            kind,
            a,
            b,
            occ,
            0.0,
            lookback,
            0,
            np.empty(0, dtype=np.uint8),
            np.empty(0, dtype=np.float64),
            np.empty(0, dtype=np.int32),
            np.empty(0, dtype=np.uint8),
            out,
        )
        code = 0
        for j, s in enumerate(win_map[origin]):
            if s >= 0 and occ[s]:
                code |= 1 << j
        codes[i] = code
    return StationarySample(d=spec.d, ell=ell, lookback=float(lookback), codes=codes)


# ---------------------------------------------------------------------------
# box survival and acceptance probability


def _box_type1_sites(box, B):
    sites = []
    for u in B:
        c = as_coords(box, u)
        if all(v == 0 for v in c):
            raise ValidationError("type-1 set must not contain the origin")
        sites.append(c)
    return sites


def estimate_Sbox(lam, lam_prime, B, r, trials, seed, d=1, horizon=None):
    """Survival frequency of type 2 on the box Q(o, r): type 2 starts at the
    origin, type 1 on B, and survival is judged at the horizon (default
    sqrt(r))."""
    if lam_prime <= lam:
        raise ValidationError("estimate_Sbox requires lam_prime > lam")
    box = BoxSpec(d, r)
    type1 = _box_type1_sites(box, B)
    horizon = math.sqrt(r) if horizon is None else float(horizon)
    state = np.zeros(box.n_sites, dtype=np.int8)
    for c in type1:
        state[site_index(box, c)] = 1
    state[site_index(box, (0,) * d)] = 2
    survived = 0
    for i in range(trials):
        traj = run_two_type(
            box,
            lam,
            lam_prime,
            state,
            horizon,
            derive_seed(seed, "sbox", i),
            record_events=False,
        )
        if (traj.final == 2).any():
            survived += 1
    return binomial_result(survived, trials, horizon=horizon, r=r)


def landscape_to_box_sites(pattern_row, offsets, r):
    """Occupied offsets of a landscape pattern, truncated to Q(o, r)."""
    return [
        off
        for v, off in zip(pattern_row, offsets)
        if v and all(abs(c) <= r for c in off)
    ]


def estimate_acceptance(
    lam,
    lam_prime,
    spec,
    r,
    n_landscapes,
    inner_trials,
    seed,
    ell=None,
    burn_in=20.0,
    horizon=None,
):
    """Nested Monte Carlo for the jump acceptance probability.

    For lam_prime < lam the result is exactly zero (no sampling).  Otherwise
    landscapes are drawn at birth events of the resident process, each is
    truncated to the survival box, and an inner batch of two-type runs
    estimates the survival probability.  The reported standard error is the
    outer sample error of the per-landscape estimates, which carries both
    stages of variance.
    """
    if lam_prime == lam:
        raise ValidationError("acceptance is defined for lam_prime != lam")
    if lam_prime < lam:
        return EstimatorResult(0.0, 0.0, 1, {"exact": True})
    ell_eff = min(r, ell) if ell is not None else min(r, (spec.N - 1) // 2)
    sample = sample_landscape_at_birth(
        lam, spec, ell_eff, burn_in, n_landscapes, derive_seed(seed, "outer")
    )
    per_landscape = []
    for i in range(sample.n):
        sites = landscape_to_box_sites(sample.patterns[i], sample.offsets, r)
        res = estimate_Sbox(
            lam,
            lam_prime,
            sites,
            r,
            inner_trials,
            derive_seed(seed, "inner", i),
            d=spec.d,
            horizon=horizon,
        )
        per_landscape.append(res.estimate)
    est, se, k = _mean_se(per_landscape)
    return EstimatorResult(
        est, se, k, {"inner_trials": inner_trials, "ell": ell_eff, "r": r}
    )


def rejection_mass(lam, kernel, acceptance):
    """Total rejection probability mass: integral of (1 - acceptance) against
    the mutation kernel.  Closed form over the atoms for discrete kernels,
    Monte Carlo over kernel samples otherwise.

    ``acceptance`` maps a proposed type to an EstimatorResult (values below
    lam are rejected outright and need no estimate).
    """
    atoms = kernel.support(lam) if isinstance(kernel, MutationKernel) else None
    if atoms is not None:
        total = 0.0
        var = 0.0
        for value, mass in atoms:
            if value <= lam:
                total += mass
            else:
                res = acceptance(value)
                total += mass * (1.0 - res.estimate)
                var += (mass * res.se) ** 2
        return EstimatorResult(total, math.sqrt(var), 1, {"closed_form": True})
    raise ValidationError(
        "continuous kernels need a sampled evaluation; draw proposals and "
        "average 1 - acceptance explicitly"
    )


def rejection_mass_sampled(lam, kernel, acceptance, n_samples, seed):
    """Monte Carlo version of :func:`rejection_mass` for continuous kernels."""
    rng = np.random.default_rng(derive_seed(seed, "rejection"))
    vals = []
    ses = []
    for _ in range(n_samples):
        lp = kernel.sample(lam, rng)
        if lp <= lam:
            vals.append(1.0)
            ses.append(0.0)
        else:
            res = acceptance(lp)
            vals.append(1.0 - res.estimate)
            ses.append(res.se)
    v = np.asarray(vals)
    se2 = (v.var(ddof=1) + float(np.mean(np.square(ses)))) / n_samples
    return EstimatorResult(float(v.mean()), math.sqrt(se2), n_samples, {})


# ---------------------------------------------------------------------------
# good boxes


def detect_good_box(spec, state, box, sub_radius=None):
    """A box is good when it holds no type-1 site and every sub-box of the
    prescribed radius meets the type-2 set."""
    center, radius = (box.center, box.radius) if hasattr(box, "center") else box
    if sub_radius is None:
        sub_radius = max(1, int(radius ** (1.0 / 24.0)))
    state = np.asarray(state)
    sites = box_sites(spec, (center, radius))
    idx = [site_index(spec, u) for u in sites]
    if (state[idx] == 1).any():
        return False
    two = state.reshape(spec.shape) == 2
    covered = _dilate(two, sub_radius, periodic=isinstance(spec, TorusSpec))
    if radius >= sub_radius:
        centers = box_sites(spec, (center, radius - sub_radius))
    else:
        centers = {center}
    for c in centers:
        if not covered[as_coords(spec, c)]:
            return False
    return True


# ---------------------------------------------------------------------------
# extinction times


@dataclass
class ExtinctionReport:
    result: EstimatorResult | None
    inequality_checks: list
    capped: int
    trials: int


def estimate_extinction_time(
    lam, box_radius, trials, seed, d=1, horizon_cap=1e6, probe_times=None
):
    """Mean extinction time from full occupancy on a box, with the tail bound
    P(tau <= t) <= t / E[tau] checked empirically at each probe time."""
    box = BoxSpec(d, box_radius)
    taus = []
    capped = 0
    for i in range(trials):
        traj = run_one_type(
            box,
            lam,
            np.ones(box.n_sites),
            horizon_cap,
            derive_seed(seed, "ext", i),
            record_events=False,
        )
        if traj.status == "empty":
            taus.append(traj.t_end)
        else:
            capped += 1
    if not taus:
        return ExtinctionReport(None, [], capped, trials)
    est, se, k = _mean_se(taus)
    result = EstimatorResult(est, se, k, {"capped": capped})
    taus = np.asarray(taus)
    if probe_times is None:
        probe_times = [est / 2.0]
    checks = []
    for t in probe_times:
        freq = float((taus <= t).mean())
        se_freq = math.sqrt(max(freq * (1 - freq), 0.0) / len(taus))
        bound = t / est
        se_bound = t * se / est**2
        slack = 3.0 * math.sqrt(se_freq**2 + se_bound**2)
        checks.append(
            {
                "t": t,
                "freq": freq,
                "bound": bound,
                "slack": slack,
                "ok": freq <= bound + slack,
            }
        )
    return ExtinctionReport(result, checks, capped, trials)


# ---------------------------------------------------------------------------
# density / coupling diagnostics


def density_and_coupling_diagnostics(
    lam,
    spec,
    horizon,
    seed,
    window_radius=None,
    initial=None,
    coupling_trials=20,
):
    """Two supercritical health checks: the fraction of event times the
    full-start process stays in the density class, and the empirical law of
    the coupling time between a density-class start and the full start on
    shared windows."""
    from .torus import default_density_radius

    if window_radius is None:
        window_radius = default_density_radius(spec.N)
    traj = run_one_type(
        spec, lam, np.ones(spec.n_sites), horizon, derive_seed(seed, "density")
    )
    occ = (traj.initial > 0).copy()
    ev = traj.events
    in_class = 0
    n_ev = len(ev["time"])
    for i in range(n_ev):
        occ[ev["site"][i]] = ev["new"][i] > 0
        if in_density_class(spec, occ, window_radius):
            in_class += 1
    fraction = in_class / n_ev if n_ev else 1.0

    if initial is None:
        # checkerboard: meets every radius-1 box
        initial = [
            tuple(int(c) for c in np.unravel_index(u, spec.shape))
            for u in range(spec.n_sites)
            if sum(np.unravel_index(u, spec.shape)) % 2 == 0
        ]
    full = [
        tuple(int(c) for c in np.unravel_index(u, spec.shape))
        for u in range(spec.n_sites)
    ]
    times = []
    coupled = 0
    for i in range(coupling_trials):
        window = generate_window(
            spec, lam, None, 0.0, horizon, derive_seed(seed, "couple", i)
        )
        t = coupling_time(window, initial, full)
        if t is not None:
            coupled += 1
            times.append(t)
    return {
        "density_fraction": fraction,
        "events": n_ev,
        "window_radius": window_radius,
        "coupling_frequency": coupled / coupling_trials,
        "coupling_times": times,
        "mean_coupling_time": float(np.mean(times)) if times else None,
    }
