"""Forward continuous-time engines for the adaptive, one-type and two-type
contact processes.

The event loops live in ``_kernels``; these wrappers own the rare-event
bookkeeping the kernels pause for: drawing a mutant type at a birth with
mutation, tracking the set of live types for the projection log, growing
record buffers, and assembling ``Trajectory`` objects.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._rng import derive_seed, make_state
from .errors import ValidationError
from .torus import BoxSpec, TorusSpec, in_density_class, neighbor_table
from .windows import as_two_type_state

DEFAULT_EVENT_CAP = 10**9

CAUSE_DEATH = 0
CAUSE_BIRTH = 1
CAUSE_MUTATION = 2


@dataclass
class StopRule:
    """When a forward run ends (besides absorption and the event cap)."""

    horizon: float = math.inf
    on_first_mutation: bool = False
    on_resolution: bool = False
    density_exit_radius: int | None = None
    density_check_interval: float = 1.0
    max_events: int = DEFAULT_EVENT_CAP


@dataclass
class Trajectory:
    """Result of a forward run.

    ``events`` is None when recording was disabled; the projection log
    (piecewise-constant count of live types) and the mutation list are always
    exact.  ``status`` is one of 'horizon', 'mutation', 'resolution', 'empty',
    'capped', 'density-exit'.
    """

    lattice: object
    initial: np.ndarray
    final: np.ndarray
    t0: float
    t_end: float
    status: str
    n_events: int = 0
    star_raw_time: float = 0.0
    flips_counted: int = 0
    mutations: list = field(default_factory=list)
    phi_log: list = field(default_factory=list)
    events: dict | None = None
    seed: int | None = None
    capped: bool = False
    landscapes_collected: int = 0

    @property
    def occupied_final(self):
        return int((self.final > 0).sum())


def _phi_tag(values):
    if len(values) == 0:
        return ("EMPTY", None)
    if len(values) == 1:
        return ("SINGLE", float(next(iter(values))))
    return ("STAR", None)


class _Recorder:
    def __init__(self, enabled, capacity=4096):
        self.enabled = enabled
        cap = capacity if enabled else 0
        self.t = np.empty(cap, dtype=np.float64)
        self.site = np.empty(cap, dtype=np.int32)
        self.old = np.empty(cap, dtype=np.float64)
        self.new = np.empty(cap, dtype=np.float64)
        self.cause = np.empty(cap, dtype=np.int8)
        self.parent = np.empty(cap, dtype=np.int32)
        self.n = 0

    def grow(self):
        cap = max(8192, 2 * len(self.t))
        for name in ("t", "site", "old", "new", "cause", "parent"):
            arr = getattr(self, name)
            new = np.empty(cap, dtype=arr.dtype)
            new[: self.n] = arr[: self.n]
            setattr(self, name, new)

    def full(self):
        return self.enabled and self.n >= len(self.t)

    def push(self, t, site, old, new, cause, parent):
        if not self.enabled:
            return
        if self.full():
            self.grow()
        i = self.n
        self.t[i] = t
        self.site[i] = site
        self.old[i] = old
        self.new[i] = new
        self.cause[i] = cause
        self.parent[i] = parent
        self.n = i + 1

    def as_dict(self):
        if not self.enabled:
            return None
        k = self.n
        return {
            "time": self.t[:k].copy(),
            "site": self.site[:k].copy(),
            "old": self.old[:k].copy(),
            "new": self.new[:k].copy(),
            "cause": self.cause[:k].copy(),
            "parent": self.parent[:k].copy(),
        }


def run_adaptive(
    spec,
    delta,
    b,
    kernel,
    initial,
    stop,
    seed,
    record_events=True,
    count_from=math.inf,
    landscape=None,
):
    """Simulate the adaptive contact process.

    Parameters
    ----------
    spec : TorusSpec or BoxSpec
    delta : mutation probability scale in [0, 1)
    b : RateFunction (ignored when delta == 0)
    kernel : MutationKernel (ignored when delta == 0)
    initial : float array of per-site types, or dict site -> type
    stop : StopRule
    seed : stream seed; the event stream and the mutant draws use derived
        substreams, so a run is a pure function of its arguments
    record_events : keep the full event log (memory scales with events)
    count_from : births at times >= count_from are tallied in flips_counted
    landscape : optional (index_map, out, burn_in, stop_when_full) used by the
        landscape estimator
    """
    if not 0 <= delta < 1:
        raise ValidationError(f"delta must lie in [0, 1), got {delta}")
    chi = _as_chi(spec, initial)
    if (chi < 0).any():
        raise ValidationError("type values must be nonnegative")

    nbr = neighbor_table(spec)
    state = make_state(derive_seed(seed, "events"))
    rng_mut = None  # built on the first mutation; delta = 0 runs never pay for it

    type_values = sorted(set(float(v) for v in chi[chi > 0]))
    rec = _Recorder(record_events)
    if delta > 0 and b is None:
        raise ValidationError("a RateFunction is required when delta > 0")
    b_kind, b_c, b_cap = (0, 0.0, 0.0) if b is None else b.kernel_params()

    if landscape is None:
        land_map = np.empty((0, 0), dtype=np.int32)
        land_out = np.empty((0, 0), dtype=np.uint8)
        land_burn = 0.0
        stop_land = False
    else:
        land_map, land_out, land_burn, stop_land = landscape

    out = np.zeros(10, dtype=np.float64)
    t = 0.0
    n_events = 0
    star = 0.0
    flips = 0
    mutations = []
    phi_log = [(0.0,) + _phi_tag(type_values)]
    status = None
    capped = False
    initial_copy = chi.copy()

    horizon = stop.horizon
    if stop.density_exit_radius is not None and math.isinf(horizon):
        raise ValidationError("density-exit stop requires a finite horizon")

    next_density_check = (
        t + stop.density_check_interval
        if stop.density_exit_radius is not None
        else math.inf
    )

    while True:
        flags = _kernels.FLAG_STOP_TYPEDROP
        if rec.enabled:
            flags |= _kernels.FLAG_RECORD
        if stop_land:
            flags |= _kernels.FLAG_STOP_LANDSCAPES
        if rec.full():
            rec.grow()
        slice_end = min(horizon, next_density_check)
        tv = np.asarray(type_values, dtype=np.float64)
        tc = np.zeros(len(type_values), dtype=np.int64)
        out[_kernels.OUT_NREC] = rec.n
        kstat = _kernels.adaptive_kernel(
            nbr,
            chi,
            t,
            slice_end,
            float(delta),
            b_kind,
            b_c,
            b_cap,
            tv,
            tc,
            flags,
            stop.max_events - n_events,
            count_from,
            state,
            rec.t,
            rec.site,
            rec.old,
            rec.new,
            rec.cause,
            rec.parent,
            land_map,
            land_out,
            land_burn,
            out,
        )
        t = out[_kernels.OUT_T]
        star += out[_kernels.OUT_STAR]
        n_events += int(out[_kernels.OUT_NEVENTS])
        flips += int(out[_kernels.OUT_FLIPS])
        rec.n = int(out[_kernels.OUT_NREC])

        if kstat == _kernels.STATUS_MUTATION:
            tm = out[_kernels.OUT_PEND_T]
            site = int(out[_kernels.OUT_PEND_SITE])
            parent = int(out[_kernels.OUT_PEND_PARENT])
            parent_type = float(chi[parent])
            if rng_mut is None:
                rng_mut = np.random.default_rng(derive_seed(seed, "mutants"))
            child = float(kernel.sample(parent_type, rng_mut))
            chi[site] = child
            n_events += 1
            t = tm
            if tm >= count_from:
                flips += 1
            mutations.append((tm, site, parent_type, child))
            rec.push(tm, site, 0.0, child, CAUSE_MUTATION, parent)
            if child not in type_values:
                type_values = sorted(set(type_values) | {child})
                phi_log.append((tm,) + _phi_tag(type_values))
            if stop.on_first_mutation:
                status = "mutation"
                break
            continue

        if kstat == _kernels.STATUS_RESOLUTION:
            live = set(
                float(v) for v, c in zip(tv, tc) if c > 0
            )
            if set(type_values) != live:
                type_values = sorted(live)
                phi_log.append((t,) + _phi_tag(type_values))
            if stop.on_resolution and len(live) <= 1:
                status = "resolution"
                break
            continue

        if kstat == _kernels.STATUS_EMPTY:
            type_values = []
            phi_log.append((t, "EMPTY", None))
            status = "empty"
            break

        if kstat == _kernels.STATUS_CAP:
            if rec.full() and n_events < stop.max_events:
                rec.grow()
                continue
            status = "capped"
            capped = True
            break

        if kstat == _kernels.STATUS_LANDSCAPES:
            status = "landscapes"
            break

        # horizon of this slice
        if t >= horizon:
            status = "horizon"
            break
        next_density_check = t + stop.density_check_interval
        if stop.density_exit_radius is not None:
            if not in_density_class(spec, chi > 0, stop.density_exit_radius):
                status = "density-exit"
                break

    return Trajectory(
        lattice=spec,
        initial=initial_copy,
        final=chi,
        t0=0.0,
        t_end=t,
        status=status,
        n_events=n_events,
        star_raw_time=star,
        flips_counted=flips,
        mutations=mutations,
        phi_log=phi_log,
        events=rec.as_dict(),
        seed=seed,
        capped=capped,
        landscapes_collected=int(out[_kernels.OUT_NLAND]),
    )


def _as_chi(spec, initial):
    if isinstance(initial, np.ndarray):
        chi = initial.astype(np.float64).copy()
        if chi.shape != (spec.n_sites,):
            raise ValidationError("initial array has wrong length")
        return chi
    from .torus import site_index

    chi = np.zeros(spec.n_sites, dtype=np.float64)
    for u, v in dict(initial).items():
        chi[site_index(spec, u)] = float(v)
    return chi


def run_one_type(
    spec,
    lam,
    initial,
    horizon,
    seed,
    boundary=None,
    record_events=True,
    count_from=math.inf,
    max_events=DEFAULT_EVENT_CAP,
    landscape=None,
):
    """One-type contact process at rate lam; the adaptive engine with delta=0.

    ``initial`` is an occupancy array or a collection of occupied sites; the
    boundary is set by the lattice type (torus, or box with absorbing
    complement) and the optional ``boundary`` string is validated against it.
    """
    if lam <= 0:
        raise ValidationError(f"lam must be positive, got {lam}")
    _check_boundary(spec, boundary)
    occ = _as_occupancy(spec, initial)
    stop = StopRule(horizon=horizon, max_events=max_events)
    return run_adaptive(
        spec,
        0.0,
        None,
        None,
        occ * float(lam),
        stop,
        seed,
        record_events=record_events,
        count_from=count_from,
        landscape=landscape,
    )


def _check_boundary(spec, boundary):
    if boundary is None:
        return
    expect = "torus" if isinstance(spec, TorusSpec) else "absorbing-box"
    if boundary != expect:
        raise ValidationError(
            f"boundary {boundary!r} does not match lattice type {type(spec).__name__}"
        )


def _as_occupancy(spec, initial):
    if isinstance(initial, np.ndarray):
        occ = (initial > 0).astype(np.float64)
        if occ.shape != (spec.n_sites,):
            raise ValidationError("initial array has wrong length")
        return occ
    from .torus import site_index

    occ = np.zeros(spec.n_sites, dtype=np.float64)
    for u in initial:
        occ[site_index(spec, u)] = 1.0
    return occ


def run_two_type(
    spec,
    lam,
    lam_prime,
    initial,
    horizon,
    seed,
    boundary=None,
    stop_on_resolution=False,
    record_events=True,
    max_events=DEFAULT_EVENT_CAP,
):
    """Two-type competition: type 1 births at rate lam, type 2 at lam_prime,
    both die at rate one, births land on empty neighbors only."""
    if lam <= 0 or lam_prime <= 0:
        raise ValidationError("both birth rates must be positive")
    _check_boundary(spec, boundary)
    state = as_two_type_state(spec, initial)
    init = state.copy()
    nbr = neighbor_table(spec)
    rng = make_state(derive_seed(seed, "events"))
    rec = _Recorder(record_events)
    out = np.zeros(10, dtype=np.float64)
    flags = 0
    if stop_on_resolution:
        flags |= _kernels.FLAG_STOP_RESOLUTION
    if record_events:
        flags |= _kernels.FLAG_RECORD
    t = 0.0
    n_events = 0
    status = None
    capped = False
    while True:
        out[_kernels.OUT_NREC] = rec.n
        kstat = _kernels.twotype_kernel(
            nbr,
            state,
            float(lam),
            float(lam_prime),
            t,
            float(horizon),
            flags,
            max_events - n_events,
            rng,
            rec.t,
            rec.site,
            rec.old,
            rec.new,
            rec.parent,
            out,
        )
        t = out[_kernels.OUT_T]
        n_events += int(out[_kernels.OUT_NEVENTS])
        rec.n = int(out[_kernels.OUT_NREC])
        if kstat == _kernels.STATUS_CAP:
            if rec.full() and n_events < max_events:
                rec.grow()
                continue
            status = "capped"
            capped = True
            break
        status = {
            _kernels.STATUS_HORIZON: "horizon",
            _kernels.STATUS_RESOLUTION: "resolution",
            _kernels.STATUS_EMPTY: "empty",
        }[kstat]
        break
    events = rec.as_dict()
    if events is not None:
        events["cause"] = np.where(events["new"] == 0, CAUSE_DEATH, CAUSE_BIRTH).astype(
            np.int8
        )
    return Trajectory(
        lattice=spec,
        initial=init.astype(np.float64),
        final=state.astype(np.float64),
        t0=0.0,
        t_end=t,
        status=status,
        n_events=n_events,
        star_raw_time=0.0,
        flips_counted=0,
        mutations=[],
        phi_log=[],
        events=events,
        seed=seed,
        capped=capped,
    )


_CAUSE_NAMES = {CAUSE_DEATH: "death", CAUSE_BIRTH: "birth", CAUSE_MUTATION: "birth-with-mutation"}


def export_trajectory_csv(traj, path, metadata_path=None, parameters=None):
    """CSV event log (time, site_index, old, new, cause, parent_site) plus an
    optional JSON metadata sidecar (parameters, seed, stop reason)."""
    if traj.events is None:
        raise ValidationError("trajectory was run without event recording")
    ev = traj.events
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["time", "site_index", "old", "new", "cause", "parent_site"])
        for i in range(len(ev["time"])):
            wr.writerow(
                [
                    repr(float(ev["time"][i])),
                    int(ev["site"][i]),
                    repr(float(ev["old"][i])),
                    repr(float(ev["new"][i])),
                    _CAUSE_NAMES[int(ev["cause"][i])],
                    int(ev["parent"][i]),
                ]
            )
    if metadata_path is not None:
        meta = {
            "seed": traj.seed,
            "stop_reason": traj.status,
            "n_events": traj.n_events,
            "t_end": traj.t_end,
            "capped": traj.capped,
            "parameters": parameters or {},
        }
        with open(metadata_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
