"""Macroscopic trait extraction: the projection to {empty, single type, star},
the time-changed star-removed trait path, and the round machinery.

A round opens at a birth with mutation and closes when one type remains.
The round record keeps the exact raw times (mutation T, resolution T', the
deterministic deadline T'' = T + t_resolution), the landscape around the
newborn mutant, and the density-class flags entering the multi-round event
conditions.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .engines import StopRule, run_adaptive
from .errors import ValidationError
from .torus import (
    default_density_radius,
    in_density_class,
    index_site,
    shift,
    window_index_map,
)

EMPTY = "EMPTY"
SINGLE = "SINGLE"
STAR = "STAR"


@dataclass(frozen=True)
class ProjectionValue:
    tag: str
    value: float | None = None


def project_phi(chi):
    """Empty, the unique live type, or the star state when types coexist."""
    chi = np.asarray(chi)
    values = np.unique(chi[chi > 0])
    if len(values) == 0:
        return ProjectionValue(EMPTY, None)
    if len(values) == 1:
        return ProjectionValue(SINGLE, float(values[0]))
    return ProjectionValue(STAR, None)


@dataclass
class TraitPath:
    """Piecewise-constant rescaled trait path.

    ``jumps`` holds (rescaled time, new value, provenance) with provenance
    None for a genuine change and 'resident-retained' for a recorded repeat.
    """

    lambda0: float
    jumps: list
    horizon: float

    def value_at(self, t):
        v = self.lambda0
        for tj, val, _ in self.jumps:
            if tj <= t:
                v = val
            else:
                break
        return v

    def jump_times(self):
        return [t for t, _, _ in self.jumps]


@dataclass
class StarLedger:
    raw: float
    rescaled: float
    intervals: list


def _phi_intervals(traj):
    """(t_start, t_end, tag, value) segments covering [0, t_end]."""
    log = traj.phi_log
    out = []
    for i, (t, tag, value) in enumerate(log):
        t_next = log[i + 1][0] if i + 1 < len(log) else traj.t_end
        if t_next > t or i + 1 >= len(log):
            out.append((t, t_next, tag, value))
    return out


def extract_Z(traj, delta, spec):
    """Apply the (delta N^d)-time change and delete star periods.

    The path value at rescaled time t is the last non-star projection value
    attained strictly before t; a star period therefore turns into a jump at
    the rescaled instant the period ends.
    """
    if not traj.phi_log:
        raise ValidationError("trajectory carries no projection log")
    t0, tag0, value0 = traj.phi_log[0]
    if tag0 != SINGLE:
        raise ValidationError(
            f"trait extraction requires a single-type start, got {tag0}"
        )
    scale = delta * spec.n_sites
    jumps = []
    star_raw = 0.0
    star_intervals = []
    current = value0
    for t_start, t_end, tag, value in _phi_intervals(traj):
        if tag == STAR:
            star_raw += t_end - t_start
            star_intervals.append((t_start * scale, t_end * scale))
        else:
            v = 0.0 if tag == EMPTY else value
            if v != current:
                jumps.append((t_start * scale, v, None))
                current = v
    ledger = StarLedger(
        raw=star_raw, rescaled=star_raw * scale, intervals=star_intervals
    )
    return (
        TraitPath(lambda0=value0, jumps=jumps, horizon=traj.t_end * scale),
        ledger,
    )


def star_time_fraction(traj, delta, spec, t):
    """Fraction of rescaled time in [0, t] spent with more than one type.

    An absorbed (empty) trajectory counts as non-star forever past its end.
    """
    scale = delta * spec.n_sites
    if t <= 0:
        raise ValidationError("horizon must be positive")
    absorbed = bool(traj.phi_log) and traj.phi_log[-1][1] == EMPTY
    if t > traj.t_end * scale * (1 + 1e-12) and not absorbed:
        raise ValidationError(
            f"rescaled horizon {t} exceeds trajectory range {traj.t_end * scale}"
        )
    raw_t = t / scale
    total = 0.0
    for t_start, t_end, tag, _ in _phi_intervals(traj):
        if tag == STAR:
            total += max(0.0, min(t_end, raw_t) - min(t_start, raw_t))
    return total / raw_t


@dataclass
class RoundRecord:
    """One mutation-competition round."""

    index: int
    T_raw: float
    T_rescaled: float
    site: object
    parent_type: float
    mutant_type: float
    landscape_window: np.ndarray
    landscape_support: frozenset
    landscape_in_class: bool
    T_dprime_raw: float
    T_prime_raw: float | None = None
    winner: float | None = None
    support_in_class_at_dprime: bool | None = None
    star_at_dprime: bool | None = None
    outcome: str = "unresolved-at-T″"
    next_mutation_raw: float = math.inf

    @property
    def resolved_in_window(self):
        return self.T_prime_raw is not None and self.T_prime_raw < self.T_dprime_raw

    @property
    def clean(self):
        """Resolution inside the window and no interleaved mutation."""
        return self.resolved_in_window and self.next_mutation_raw > self.T_dprime_raw


@dataclass
class RoundsResult:
    records: list
    e_flags: list
    sigmas: list
    lambdas: list
    scale: float
    died: bool
    capped: bool
    total_events: int
    extra_mutations: list = field(default_factory=list)

    def sigma_lambda_pairs(self):
        """(sigma, Lambda) with the event indicator applied, as in the
        multi-round law."""
        out = []
        for j, rec in enumerate(self.records):
            flag = self.e_flags[j] if j < len(self.e_flags) else False
            out.append(
                (self.sigmas[j] if flag else 0.0, self.lambdas[j] if flag else 0.0)
            )
        return out


def run_rounds(
    spec,
    delta,
    b,
    kernel,
    lambda0,
    n_rounds,
    t_resolution,
    seed,
    density_radius=None,
    ell=3,
    max_events=10**9,
):
    """Simulate successive mutation rounds from full occupancy at lambda0.

    Stage 1 runs until a birth with mutation; stage 2 continues (mutations
    stay on) until one type remains.  The deterministic deadline
    T'' = T + t_resolution is always visited to evaluate the density-class
    flag, and the simulation proceeds past it without truncation; rounds
    whose resolution interleaves with a further mutation are classified
    'unresolved-at-T″' and fail the cumulative event flag.
    """
    if lambda0 <= 0:
        raise ValidationError("lambda0 must be positive")
    if density_radius is None:
        density_radius = default_density_radius(spec.N)
    scale = delta * spec.n_sites
    win_map = window_index_map(spec, ell, include_origin=False)

    chi = np.full(spec.n_sites, float(lambda0))
    t_glob = 0.0
    records = []
    extra_mutations = []
    died = False
    capped = False
    total_events = 0
    seg = 0

    def pending_deadlines():
        return [r for r in records if r.support_in_class_at_dprime is None]

    def unresolved():
        return [r for r in records if r.T_prime_raw is None]

    while True:
        pend = pending_deadlines()
        if len(records) >= n_rounds and not pend and not unresolved():
            break
        if total_events >= max_events:
            capped = True
            break
        next_deadline = min((r.T_dprime_raw for r in pend), default=math.inf)
        horizon = next_deadline - t_glob if math.isfinite(next_deadline) else math.inf
        stop = StopRule(
            horizon=horizon,
            on_first_mutation=True,
            on_resolution=True,
            max_events=max_events - total_events,
        )
        traj = run_adaptive(
            spec,
            delta,
            b,
            kernel,
            chi,
            stop,
            derive_seed(seed, "rounds", seg),
            record_events=False,
        )
        seg += 1
        total_events += traj.n_events
        chi = traj.final
        t0 = t_glob
        t_glob = t0 + traj.t_end

        if traj.status == "mutation":
            tm, site_idx, parent_type, child_type = traj.mutations[-1]
            t_abs = t0 + tm
            t_glob = t_abs
            for r in records:
                if r.next_mutation_raw == math.inf and t_abs > r.T_raw:
                    r.next_mutation_raw = t_abs
            if len(records) < n_rounds:
                support_idx = np.nonzero(chi > 0)[0]
                support_idx = support_idx[support_idx != site_idx]
                mut_site = index_site(spec, site_idx)
                support = frozenset(
                    shift(spec, mut_site, index_site(spec, int(i)))
                    for i in support_idx
                )
                occ_minus = chi > 0
                occ_minus[site_idx] = False
                row = np.array(
                    [1 if (s >= 0 and chi[s] > 0) else 0 for s in win_map[site_idx]],
                    dtype=np.uint8,
                )
                records.append(
                    RoundRecord(
                        index=len(records) + 1,
                        T_raw=t_abs,
                        T_rescaled=t_abs * scale,
                        site=mut_site,
                        parent_type=parent_type,
                        mutant_type=child_type,
                        landscape_window=row,
                        landscape_support=support,
                        landscape_in_class=in_density_class(
                            spec, occ_minus, density_radius
                        ),
                        T_dprime_raw=t_abs + t_resolution,
                    )
                )
            else:
                extra_mutations.append(t_abs)
        elif traj.status == "resolution":
            live = np.unique(chi[chi > 0])
            winner = float(live[0]) if len(live) == 1 else None
            for r in records:
                if r.T_prime_raw is None:
                    r.T_prime_raw = t_glob
                    r.winner = winner
        elif traj.status == "horizon":
            t_glob = next_deadline
            for r in records:
                if (
                    r.support_in_class_at_dprime is None
                    and r.T_dprime_raw <= t_glob * (1 + 1e-12)
                ):
                    r.support_in_class_at_dprime = in_density_class(
                        spec, chi > 0, density_radius
                    )
                    r.star_at_dprime = len(np.unique(chi[chi > 0])) > 1
        elif traj.status == "empty":
            died = True
            for r in records:
                if r.T_prime_raw is None:
                    r.outcome = "process-died"
            break
        elif traj.status == "capped":
            capped = True
            break
        else:
            raise RuntimeError(f"unexpected engine status {traj.status}")

    for r in records:
        if r.outcome == "process-died":
            continue
        if not r.resolved_in_window:
            r.outcome = "unresolved-at-T″"
        elif r.winner == r.mutant_type:
            r.outcome = "mutant-fixed"
        elif r.winner == r.parent_type:
            r.outcome = "resident-retained"
        else:
            r.outcome = "unresolved-at-T″"

    e_flags = []
    e = True
    for r in records:
        e = (
            e
            and r.resolved_in_window
            and r.next_mutation_raw > r.T_dprime_raw
            and bool(r.support_in_class_at_dprime)
        )
        e_flags.append(e)

    sigmas = []
    lambdas = []
    prev_tp = 0.0
    for r in records:
        if r.T_prime_raw is None:
            sigmas.append(math.nan)
            lambdas.append(math.nan)
        else:
            sigmas.append((r.T_prime_raw - prev_tp) * scale)
            lambdas.append(r.winner if r.winner is not None else math.nan)
            prev_tp = r.T_prime_raw

    return RoundsResult(
        records=records,
        e_flags=e_flags,
        sigmas=sigmas,
        lambdas=lambdas,
        scale=scale,
        died=died,
        capped=capped,
        total_events=total_events,
        extra_mutations=extra_mutations,
    )


def trait_path_from_rounds(lambda0, sigmas, lambdas, horizon):
    """Rebuild the star-removed trait path from resolution increments and
    winning types; repeats are flagged rather than dropped."""
    jumps = []
    t = 0.0
    current = lambda0
    for s, lam in zip(sigmas, lambdas):
        t += s
        if t > horizon:
            break
        if lam == current:
            jumps.append((t, lam, "resident-retained"))
        else:
            jumps.append((t, lam, None))
            current = lam
    return TraitPath(lambda0=lambda0, jumps=jumps, horizon=horizon)


def round_statistics(first_rounds, t_grid):
    """Empirical round-transition tables from independent first rounds.

    first_rounds: (record, scale) pairs or RoundsResult objects whose first
    record is used.  Returns dict with arrays over the grid: the cumulative
    mutation law (restricted to in-class landscapes), and the terminal
    fixation / retention frequencies.
    """
    recs = []
    for item in first_rounds:
        if isinstance(item, RoundsResult):
            if item.records:
                recs.append(item.records[0])
        else:
            recs.append(item)
    if not recs:
        raise ValidationError("no first-round records supplied")
    n = len(recs)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    u_hat = np.empty_like(t_grid)
    u_se = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        hits = sum(1 for r in recs if r.T_rescaled <= t and r.landscape_in_class)
        p = hits / n
        u_hat[i] = p
        u_se[i] = math.sqrt(max(p * (1 - p), 0.0) / n)
    fixed = sum(
        1
        for r in recs
        if r.clean and r.outcome == "mutant-fixed" and r.support_in_class_at_dprime
    )
    retained = sum(
        1
        for r in recs
        if r.clean and r.outcome == "resident-retained" and r.support_in_class_at_dprime
    )
    v_hat = fixed / n
    vbar_hat = retained / n
    return {
        "t": t_grid,
        "U_hat": u_hat,
        "U_se": u_se,
        "V_hat": v_hat,
        "V_se": math.sqrt(max(v_hat * (1 - v_hat), 0.0) / n),
        "Vbar_hat": vbar_hat,
        "Vbar_se": math.sqrt(max(vbar_hat * (1 - vbar_hat), 0.0) / n),
        "n": n,
    }
