"""Realized Poisson event windows and the trajectories built from them.

A window holds every death mark, basic birth arrow (rate lam), extra birth
arrow (rate lam_prime - lam, present when lam_prime is given) and per-arrow
mutation flag on a lattice over [0, t_max].  Identical parameters and seed
reproduce a bit-identical window.  Queries (reachability, one-type and
two-type trajectories, insulation, coupling) run over a lazily built merged
event order: strictly increasing times with deterministic (time, channel,
index) tie-breaking.

Binary dump format (little endian), magic ``ACPW``, version 1:

    magic[4] | u32 version | u8 lattice kind (0 torus, 1 box) | u32 d |
    u32 N_or_side_radius | f8 lam | f8 lam_prime (NaN if absent) |
    f8 mark_prob | f8 t_max | u64 seed
    then per site:           u64 count | f8 times[count]
    then per directed edge:  u64 count | f8 times[count] | u8 marks[count]
    then (extra channel present iff lam_prime is not NaN) per directed edge:
                             u64 count | f8 times[count] | u8 marks[count]
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._rng import make_state
from .errors import ValidationError
from .torus import BoxSpec, TorusSpec, coords_array, directed_edges, site_index

_MAGIC = b"ACPW"
_VERSION = 1


@dataclass
class PathQuery:
    """Reachability question: from_set x {s} leads-to to_set x {t}."""

    from_set: set
    s: float
    to_set: set
    t: float
    arrow_classes: tuple = ("basic",)
    restriction: set | None = None


@dataclass
class EventWindow:
    lattice: object
    lam: float
    lam_prime: float | None
    mark_prob: float
    t_max: float
    seed: int
    death_off: np.ndarray
    death_times: np.ndarray
    basic_off: np.ndarray
    basic_times: np.ndarray
    basic_marks: np.ndarray
    extra_off: np.ndarray
    extra_times: np.ndarray
    extra_marks: np.ndarray
    _merged: tuple = field(default=None, repr=False, compare=False)

    @property
    def has_extra(self):
        return self.lam_prime is not None

    def counts(self):
        return {
            "death": len(self.death_times),
            "basic": len(self.basic_times),
            "extra": len(self.extra_times),
        }

    def merged(self):
        """(times, kind, a, b, mark) in the global deterministic event order."""
        if self._merged is None:
            edges = directed_edges(self.lattice)
            n = self.lattice.n_sites
            parts_t = [self.death_times, self.basic_times, self.extra_times]
            m_death = len(self.death_times)
            m_basic = len(self.basic_times)
            m_extra = len(self.extra_times)
            kind = np.concatenate(
                [
                    np.zeros(m_death, np.int8),
                    np.ones(m_basic, np.int8),
                    np.full(m_extra, 2, np.int8),
                ]
            )
            death_site = np.repeat(
                np.arange(n, dtype=np.int32), np.diff(self.death_off)
            )
            basic_edge = np.repeat(
                np.arange(len(edges), dtype=np.int32), np.diff(self.basic_off)
            )
            extra_edge = np.repeat(
                np.arange(len(edges), dtype=np.int32), np.diff(self.extra_off)
            )
            a = np.concatenate([death_site, edges[basic_edge, 0], edges[extra_edge, 0]])
            b = np.concatenate(
                [
                    np.full(m_death, -1, np.int32),
                    edges[basic_edge, 1],
                    edges[extra_edge, 1],
                ]
            )
            chan_index = np.concatenate([death_site, basic_edge, extra_edge])
            times = np.concatenate(parts_t)
            order = np.lexsort((chan_index, kind, times))
            mark = np.concatenate(
                [np.zeros(m_death, np.uint8), self.basic_marks, self.extra_marks]
            )
            self._merged = (
                np.ascontiguousarray(times[order]),
                np.ascontiguousarray(kind[order]),
                np.ascontiguousarray(a[order].astype(np.int32)),
                np.ascontiguousarray(b[order].astype(np.int32)),
                np.ascontiguousarray(mark[order]),
            )
        return self._merged


def generate_window(lattice, lam, lam_prime=None, mark_prob=0.0, t_max=0.0, seed=0):
    """Draw a full event window; Poisson channels share one seeded stream.

    The per-channel draw order is fixed (death marks by site, then basic
    arrows by edge, then extra arrows by edge, then mutation flags), so the
    window is a pure function of (lattice, rates, mark_prob, t_max, seed).
    """
    if lam <= 0:
        raise ValidationError(f"lam must be positive, got {lam}")
    if lam_prime is not None and lam_prime < lam:
        raise ValidationError(
            "lam_prime < lam: swap the roles of the rates at the caller"
        )
    if not 0.0 <= mark_prob <= 1.0:
        raise ValidationError(f"mark_prob must lie in [0, 1], got {mark_prob}")
    if t_max < 0:
        raise ValidationError(f"t_max must be nonnegative, got {t_max}")

    n = lattice.n_sites
    edges = directed_edges(lattice)
    ne = len(edges)
    rates = np.concatenate(
        [
            np.ones(n),
            np.full(ne, float(lam)),
            np.full(ne, float(lam_prime) - float(lam)) if lam_prime is not None else np.empty(0),
        ]
    )
    nch = len(rates)
    mean = t_max * rates.sum()
    cap = int(mean + 12.0 * np.sqrt(mean + 1.0) + 64)
    state0 = make_state(seed)
    while True:
        state = state0.copy()
        out_t = np.empty(cap, dtype=np.float64)
        out_off = np.empty(nch + 1, dtype=np.int64)
        total = _kernels.gen_window_times(rates, float(t_max), state, out_t, out_off)
        if total >= 0:
            break
        cap *= 2

    death_off = out_off[: n + 1].copy()
    basic_off = out_off[n : n + ne + 1].copy() - out_off[n]
    death_times = out_t[: out_off[n]].copy()
    basic_times = out_t[out_off[n] : out_off[n + ne]].copy()
    if lam_prime is not None:
        extra_off = out_off[n + ne :].copy() - out_off[n + ne]
        extra_times = out_t[out_off[n + ne] : total].copy()
    else:
        extra_off = np.zeros(ne + 1, dtype=np.int64)
        extra_times = np.empty(0, dtype=np.float64)

    basic_marks = np.zeros(len(basic_times), dtype=np.uint8)
    extra_marks = np.zeros(len(extra_times), dtype=np.uint8)
    if mark_prob > 0.0:
        _kernels.gen_marks(len(basic_times), float(mark_prob), state, basic_marks)
        _kernels.gen_marks(len(extra_times), float(mark_prob), state, extra_marks)

    return EventWindow(
        lattice=lattice,
        lam=float(lam),
        lam_prime=None if lam_prime is None else float(lam_prime),
        mark_prob=float(mark_prob),
        t_max=float(t_max),
        seed=int(seed),
        death_off=death_off,
        death_times=death_times,
        basic_off=basic_off,
        basic_times=basic_times,
        basic_marks=basic_marks,
        extra_off=extra_off,
        extra_times=extra_times,
        extra_marks=extra_marks,
    )


def _site_mask(lattice, sites):
    mask = np.zeros(lattice.n_sites, dtype=np.uint8)
    for u in sites:
        mask[site_index(lattice, u)] = 1
    return mask


def reaches(window, query):
    """True iff an infection path realizes the query on this window."""
    if not 0 <= query.s <= query.t <= window.t_max:
        raise ValidationError(
            f"query times ({query.s}, {query.t}) outside [0, {window.t_max}]"
        )
    allowed = set(query.arrow_classes)
    if not allowed <= {"basic", "extra"}:
        raise ValidationError(f"unknown arrow classes {query.arrow_classes}")
    if "extra" in allowed and not window.has_extra:
        raise ValidationError("window has no extra arrow channel")
    if not query.from_set:
        return False
    occ = _site_mask(window.lattice, query.from_set)
    restrict = (
        _site_mask(window.lattice, query.restriction)
        if query.restriction is not None
        else np.empty(0, dtype=np.uint8)
    )
    if query.restriction is not None:
        occ &= restrict
    times, kind, a, b, _ = window.merged()
    empty_f = np.empty(0, dtype=np.float64)
    empty_i = np.empty(0, dtype=np.int32)
    empty_b = np.empty(0, dtype=np.uint8)
    out = np.zeros(1)
    _kernels.onetype_window_sweep(
        times,
        kind,
        a,
        b,
        occ,
        float(query.s),
        float(query.t),
        1 if "extra" in allowed else 0,
        restrict,
        empty_f,
        empty_i,
        empty_b,
        out,
    )
    target = _site_mask(window.lattice, query.to_set)
    return bool((occ & target).any())


@dataclass
class WindowTrajectory:
    """Event log of a trajectory driven by a window."""

    window: EventWindow
    times: np.ndarray
    sites: np.ndarray
    old: np.ndarray
    new: np.ndarray
    initial: np.ndarray
    final: np.ndarray
    t_end: float


def one_type_from_window(window, initial, t_end=None, allow_extra=False):
    """Contact process trajectory: occupied iff reached from initial x {0}."""
    t_end = window.t_max if t_end is None else float(t_end)
    occ = _site_mask(window.lattice, initial)
    init = occ.copy()
    times, kind, a, b, _ = window.merged()
    m = len(times)
    rec_t = np.empty(m, dtype=np.float64)
    rec_site = np.empty(m, dtype=np.int32)
    rec_new = np.empty(m, dtype=np.uint8)
    out = np.zeros(1)
    _kernels.onetype_window_sweep(
        times,
        kind,
        a,
        b,
        occ,
        0.0,
        t_end,
        1 if (allow_extra and window.has_extra) else 0,
        np.empty(0, dtype=np.uint8),
        rec_t,
        rec_site,
        rec_new,
        out,
    )
    k = int(out[0])
    new = rec_new[:k].copy()
    return WindowTrajectory(
        window=window,
        times=rec_t[:k].copy(),
        sites=rec_site[:k].copy(),
        old=(1 - new).astype(np.uint8),
        new=new,
        initial=init,
        final=occ,
        t_end=t_end,
    )


def as_two_type_state(lattice, initial):
    """Accept an int array, or a (type1_sites, type2_sites) pair of sets."""
    if isinstance(initial, np.ndarray):
        state = initial.astype(np.int8).copy()
        if state.shape != (lattice.n_sites,):
            raise ValidationError("state array has wrong length")
        if not np.isin(state, (0, 1, 2)).all():
            raise ValidationError("two-type state values must be in {0, 1, 2}")
        return state
    ones, twos = initial
    state = np.zeros(lattice.n_sites, dtype=np.int8)
    for u in ones:
        state[site_index(lattice, u)] = 1
    for u in twos:
        i = site_index(lattice, u)
        if state[i] == 1:
            raise ValidationError("a site cannot hold both types")
        state[i] = 2
    return state


def two_type_from_window(window, initial, t_end=None):
    """Two-type trajectory: basic arrows serve both types, extra only type 2."""
    t_end = window.t_max if t_end is None else float(t_end)
    state = as_two_type_state(window.lattice, initial)
    init = state.copy()
    times, kind, a, b, _ = window.merged()
    m = len(times)
    rec_t = np.empty(m, dtype=np.float64)
    rec_site = np.empty(m, dtype=np.int32)
    rec_old = np.empty(m, dtype=np.int8)
    rec_new = np.empty(m, dtype=np.int8)
    out = np.zeros(1)
    _kernels.twotype_window_sweep(
        times, kind, a, b, state, 0.0, t_end, rec_t, rec_site, rec_old, rec_new, out
    )
    k = int(out[0])
    return WindowTrajectory(
        window=window,
        times=rec_t[:k].copy(),
        sites=rec_site[:k].copy(),
        old=rec_old[:k].copy(),
        new=rec_new[:k].copy(),
        initial=init,
        final=state,
        t_end=t_end,
    )


def is_insulated(window, t, sub_radius=None):
    """True iff every infection path on Q x [0, t] stays within some sub-box
    of radius r/10 (override with sub_radius)."""
    lattice = window.lattice
    if not isinstance(lattice, BoxSpec):
        raise ValidationError("insulation is defined for windows on a box lattice")
    if t > window.t_max:
        raise ValidationError(f"t={t} exceeds window horizon {window.t_max}")
    rsub = lattice.radius / 10.0 if sub_radius is None else float(sub_radius)
    times, kind, a, b, _ = window.merged()
    keep = times <= t
    coords = coords_array(lattice)
    ok = _kernels.insulation_spread_ok(
        np.ascontiguousarray(times[keep]),
        np.ascontiguousarray(kind[keep]),
        np.ascontiguousarray(a[keep]),
        np.ascontiguousarray(b[keep]),
        lattice.n_sites,
        coords,
        2.0 * rsub,
    )
    return bool(ok)


def coupling_time(window, initial_a, initial_b, t_end=None):
    """First event time at which the two one-type states coincide, or None."""
    t_end = window.t_max if t_end is None else float(t_end)
    occ_a = _site_mask(window.lattice, initial_a)
    occ_b = _site_mask(window.lattice, initial_b)
    times, kind, a, b, _ = window.merged()
    out = np.zeros(1)
    _kernels.coupling_first_equal(times, kind, a, b, occ_a, occ_b, t_end, out)
    return None if out[0] < 0 else float(out[0])


def dump_window(window, path):
    """Write the documented binary format; round-trips bit-exactly."""
    lat = window.lattice
    kind = 0 if isinstance(lat, TorusSpec) else 1
    size = lat.N if kind == 0 else lat.radius
    lp = np.nan if window.lam_prime is None else window.lam_prime
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IBIIddddQ",
                _VERSION,
                kind,
                lat.d,
                size,
                window.lam,
                lp,
                window.mark_prob,
                window.t_max,
                window.seed,
            )
        )

        def channel(off, times, marks=None):
            for i in range(len(off) - 1):
                seg = times[off[i] : off[i + 1]]
                fh.write(struct.pack("<Q", len(seg)))
                fh.write(np.ascontiguousarray(seg, dtype="<f8").tobytes())
                if marks is not None:
                    fh.write(
                        np.ascontiguousarray(
                            marks[off[i] : off[i + 1]], dtype=np.uint8
                        ).tobytes()
                    )

        channel(window.death_off, window.death_times)
        channel(window.basic_off, window.basic_times, window.basic_marks)
        if window.has_extra:
            channel(window.extra_off, window.extra_times, window.extra_marks)


def load_window(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValidationError(f"{path}: not an event window dump")
        version, kind, d, size, lam, lp, mark_prob, t_max, seed = struct.unpack(
            "<IBIIddddQ", fh.read(struct.calcsize("<IBIIddddQ"))
        )
        if version != _VERSION:
            raise ValidationError(f"{path}: unsupported version {version}")
        lattice = TorusSpec(d, size) if kind == 0 else BoxSpec(d, size)
        lam_prime = None if np.isnan(lp) else lp
        n = lattice.n_sites
        ne = len(directed_edges(lattice))

        def channel(count, with_marks):
            off = np.zeros(count + 1, dtype=np.int64)
            times = []
            marks = []
            for i in range(count):
                (k,) = struct.unpack("<Q", fh.read(8))
                times.append(np.frombuffer(fh.read(8 * k), dtype="<f8"))
                if with_marks:
                    marks.append(np.frombuffer(fh.read(k), dtype=np.uint8))
                off[i + 1] = off[i] + k
            t = np.concatenate(times) if times else np.empty(0)
            mk = np.concatenate(marks) if (with_marks and marks) else np.empty(0, np.uint8)
            return off, t.astype(np.float64), mk

        death_off, death_times, _ = channel(n, False)
        basic_off, basic_times, basic_marks = channel(ne, True)
        if lam_prime is not None:
            extra_off, extra_times, extra_marks = channel(ne, True)
        else:
            extra_off = np.zeros(ne + 1, dtype=np.int64)
            extra_times = np.empty(0, dtype=np.float64)
            extra_marks = np.empty(0, dtype=np.uint8)
    return EventWindow(
        lattice=lattice,
        lam=lam,
        lam_prime=lam_prime,
        mark_prob=mark_prob,
        t_max=t_max,
        seed=seed,
        death_off=death_off,
        death_times=death_times,
        basic_off=basic_off,
        basic_times=basic_times,
        basic_marks=basic_marks,
        extra_off=extra_off,
        extra_times=extra_times,
        extra_marks=extra_marks,
    )
