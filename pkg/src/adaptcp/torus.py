"""Geometry of the discrete torus (Z/NZ)^d and of centered boxes of Z^d.

Sites are exposed as coordinate tuples (a bare int is accepted and returned
when d == 1); internally everything is flat row-major indices.  The torus
carries the periodic dynamics; ``BoxSpec`` describes a centered box of Z^d
whose complement is absorbing (the box graph simply has no outward edges).
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class TorusSpec:
    """The d-dimensional torus with side length N."""

    d: int
    N: int

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"dimension must be positive, got {self.d}")
        if self.N < 2:
            raise ValidationError(f"side length must be at least 2, got {self.N}")

    @property
    def n_sites(self):
        return self.N**self.d

    @property
    def shape(self):
        return (self.N,) * self.d


@dataclass(frozen=True)
class BoxSpec:
    """The box of Z^d centered at the origin with the given radius.

    Coordinates run over {-radius, ..., radius} in every axis.  There are no
    edges leaving the box, so dynamics on it have an absorbing complement.
    """

    d: int
    radius: int

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"dimension must be positive, got {self.d}")
        if self.radius < 0:
            raise ValidationError(f"radius must be nonnegative, got {self.radius}")

    @property
    def side(self):
        return 2 * self.radius + 1

    @property
    def n_sites(self):
        return self.side**self.d

    @property
    def shape(self):
        return (self.side,) * self.d


@dataclass(frozen=True)
class TorusBox:
    """A box of the torus: center site plus radius (radius < N/2)."""

    center: tuple
    radius: int


def as_coords(spec, u):
    """Normalize a site to a coordinate tuple, validating against the spec."""
    if isinstance(u, (int, np.integer)):
        u = (int(u),)
    u = tuple(int(c) for c in u)
    if len(u) != spec.d:
        raise ValidationError(f"site {u} has {len(u)} coordinates, expected {spec.d}")
    if isinstance(spec, TorusSpec):
        if any(c < 0 or c >= spec.N for c in u):
            raise ValidationError(f"site {u} outside [0, {spec.N})^{spec.d}")
    else:
        if any(abs(c) > spec.radius for c in u):
            raise ValidationError(f"site {u} outside box of radius {spec.radius}")
    return u


def as_site(spec, coords):
    """Return coordinates in the public form: bare int when d == 1."""
    if spec.d == 1:
        return int(coords[0])
    return tuple(int(c) for c in coords)


def site_index(spec, u):
    """Flat row-major index of a site."""
    c = as_coords(spec, u)
    if isinstance(spec, BoxSpec):
        c = tuple(x + spec.radius for x in c)
    idx = 0
    n = spec.N if isinstance(spec, TorusSpec) else spec.side
    for x in c:
        idx = idx * n + x
    return idx


def index_site(spec, idx):
    """Inverse of :func:`site_index`, in public site form."""
    n = spec.N if isinstance(spec, TorusSpec) else spec.side
    c = []
    for _ in range(spec.d):
        c.append(idx % n)
        idx //= n
    c = c[::-1]
    if isinstance(spec, BoxSpec):
        c = [x - spec.radius for x in c]
    return as_site(spec, c)


@lru_cache(maxsize=None)
def neighbor_table(spec):
    """int32 table of distinct neighbor indices, -1 padded.

    On the torus, u +- e_i mod N with duplicates collapsed (relevant only for
    N = 2, where both unit steps along an axis land on the same site).  On a
    box, steps leaving the box are dropped.
    """
    n = spec.n_sites
    table = np.full((n, 2 * spec.d), -1, dtype=np.int32)
    for idx in range(n):
        u = as_coords(spec, index_site(spec, idx))
        seen = []
        for axis in range(spec.d):
            for step in (1, -1):
                c = list(u)
                if isinstance(spec, TorusSpec):
                    c[axis] = (c[axis] + step) % spec.N
                else:
                    c[axis] = c[axis] + step
                    if abs(c[axis]) > spec.radius:
                        continue
                j = site_index(spec, tuple(c))
                if j not in seen:
                    seen.append(j)
        table[idx, : len(seen)] = seen
    return table


@lru_cache(maxsize=None)
def directed_edges(spec):
    """int32 array of all distinct ordered neighbor pairs, canonical order."""
    table = neighbor_table(spec)
    pairs = [(u, v) for u in range(spec.n_sites) for v in table[u] if v >= 0]
    return np.asarray(pairs, dtype=np.int32)


def neighbors(spec, u):
    """Distinct neighbors of a site, in public site form."""
    idx = site_index(spec, u)
    return [index_site(spec, int(j)) for j in neighbor_table(spec)[idx] if j >= 0]


def shift(spec, u, v):
    """theta_u(v) = v - u coordinatewise mod N."""
    if not isinstance(spec, TorusSpec):
        raise ValidationError("shift is defined on the torus")
    cu = as_coords(spec, u)
    cv = as_coords(spec, v)
    return as_site(spec, tuple((b - a) % spec.N for a, b in zip(cu, cv)))


def embed_domain(N):
    """Coordinate range of the embedding into the torus of side N."""
    if N % 2 == 0:
        return -(N // 2), N // 2 - 1
    return -(N // 2), N // 2


def embed(spec, x):
    """Map a centered-box point of Z^d onto the torus (coordinatewise mod N)."""
    if isinstance(x, (int, np.integer)):
        x = (int(x),)
    x = tuple(int(c) for c in x)
    if len(x) != spec.d:
        raise ValidationError(f"point {x} has {len(x)} coordinates, expected {spec.d}")
    lo, hi = embed_domain(spec.N)
    if any(c < lo or c > hi for c in x):
        raise ValidationError(f"point {x} outside embedding domain [{lo}, {hi}]^{spec.d}")
    return as_site(spec, tuple(c % spec.N for c in x))


def unembed(spec, u):
    """Inverse of :func:`embed`: the centered representative of a torus site."""
    c = as_coords(spec, u)
    lo, hi = embed_domain(spec.N)
    out = []
    for x in c:
        out.append(x if x <= hi else x - spec.N)
    return int(out[0]) if spec.d == 1 else tuple(out)


def box_sites(spec, box):
    """All torus sites of a box, i.e. the mod-N image of a centered Z^d box."""
    if isinstance(box, TorusBox):
        center, radius = box.center, box.radius
    else:
        center, radius = box
    if 2 * radius >= spec.N:
        raise DomainError(
            f"box radius {radius} >= N/2 = {spec.N / 2}: wrap-around ambiguity"
        )
    cc = as_coords(spec, center)
    out = set()
    for off in product(range(-radius, radius + 1), repeat=spec.d):
        out.add(as_site(spec, tuple((c + o) % spec.N for c, o in zip(cc, off))))
    return out


def occupancy_array(spec, occupied):
    """Boolean occupancy grid (shape spec.shape) from a collection of sites."""
    occ = np.zeros(spec.shape, dtype=bool)
    for u in occupied:
        occ[as_coords(spec, u)] = True
    return occ


def _dilate(occ, radius, periodic):
    out = occ
    for axis in range(occ.ndim):
        acc = out.copy()
        for step in range(1, radius + 1):
            for sign in (step, -step):
                if periodic:
                    acc |= np.roll(out, sign, axis=axis)
                else:
                    shifted = np.zeros_like(out)
                    src = [slice(None)] * out.ndim
                    dst = [slice(None)] * out.ndim
                    if sign > 0:
                        src[axis] = slice(0, out.shape[axis] - sign)
                        dst[axis] = slice(sign, None)
                    else:
                        src[axis] = slice(-sign, None)
                        dst[axis] = slice(0, out.shape[axis] + sign)
                    shifted[tuple(dst)] = out[tuple(src)]
                    acc |= shifted
        out = acc
    return out


def in_density_class(spec, occupied, window_radius):
    """True iff every torus box of the given radius intersects the occupied set.

    Equivalently, the L-infinity dilation of the occupied set by the window
    radius covers the whole torus.
    """
    if window_radius < 1:
        raise ValidationError("window_radius must be a positive integer")
    if 2 * window_radius >= spec.N:
        raise DomainError(f"window_radius {window_radius} >= N/2 = {spec.N / 2}")
    if isinstance(occupied, np.ndarray) and occupied.dtype != object:
        occ = occupied.reshape(spec.shape).astype(bool)
    else:
        occ = occupancy_array(spec, occupied)
    return bool(_dilate(occ, window_radius, periodic=True).all())


def default_density_radius(N):
    """Desk-scale stand-in for the asymptotic density-class radius N**(1/288)."""
    return max(1, int(N ** (1.0 / 288.0)))


def window_offsets(d, ell, include_origin=True):
    """Offsets of the centered window Q(o, ell), lexicographic order."""
    offs = [off for off in product(range(-ell, ell + 1), repeat=d)]
    if not include_origin:
        offs = [off for off in offs if any(c != 0 for c in off)]
    return offs


@lru_cache(maxsize=None)
def window_index_map(spec, ell, include_origin=True):
    """int32[n_sites, w] absolute site index of u + off for each window offset.

    On a box, offsets falling outside map to -1 (treated as empty).
    """
    offs = window_offsets(spec.d, ell, include_origin)
    n = spec.n_sites
    out = np.full((n, len(offs)), -1, dtype=np.int32)
    for idx in range(n):
        u = as_coords(spec, index_site(spec, idx))
        for j, off in enumerate(offs):
            if isinstance(spec, TorusSpec):
                c = tuple((a + o) % spec.N for a, o in zip(u, off))
                out[idx, j] = site_index(spec, c)
            else:
                c = tuple(a + o for a, o in zip(u, off))
                if all(abs(x) <= spec.radius for x in c):
                    out[idx, j] = site_index(spec, c)
    return out


def coords_array(spec):
    """int32[n_sites, d] coordinates of every site (centered for boxes)."""
    out = np.empty((spec.n_sites, spec.d), dtype=np.int32)
    for idx in range(spec.n_sites):
        c = as_coords(spec, index_site(spec, idx))
        out[idx] = c
    return out
