"""Exact transient distributions for small state spaces.

Enumerates the full configuration space of the one-type, two-type or
adaptive process on a tiny lattice, builds the generator, and computes the
law at time t by uniformization with an explicit truncation tolerance.
Deterministic; used as the independent oracle in validation tests.
"""

import numpy as np

from .errors import OracleCapError, ValidationError
from .torus import neighbor_table

DEFAULT_STATE_CAP = 3**6


def _check_cap(n_states, cap):
    if n_states > cap:
        raise OracleCapError(
            f"state space of size {n_states} exceeds the cap {cap}; "
            "refusing to build the generator"
        )


def _decode(code, n_sites, levels):
    out = np.empty(n_sites, dtype=np.int64)
    for i in range(n_sites):
        out[i] = code % levels
        code //= levels
    return out


def _encode(digits, levels):
    code = 0
    for d in reversed(digits):
        code = code * levels + int(d)
    return code


def enumerate_states(n_sites, levels, cap=DEFAULT_STATE_CAP):
    n_states = levels**n_sites
    _check_cap(n_states, cap)
    return n_states


def onetype_generator(spec, lam, cap=DEFAULT_STATE_CAP):
    """Dense generator of the rate-lam contact process on the lattice."""
    if lam < 0:
        raise ValidationError("lam must be nonnegative")
    n = spec.n_sites
    n_states = enumerate_states(n, 2, cap)
    nbr = neighbor_table(spec)
    Q = np.zeros((n_states, n_states))
    for code in range(n_states):
        occ = _decode(code, n, 2)
        for u in range(n):
            if occ[u] == 1:
                # death
                target = code - 2**u
                Q[code, target] += 1.0
                # births onto empty neighbors
                for v in nbr[u]:
                    if v >= 0 and occ[v] == 0:
                        Q[code, code + 2**v] += lam
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def twotype_generator(spec, lam, lam_prime, cap=DEFAULT_STATE_CAP):
    """Dense generator of the two-type process (codes base 3: 0 empty)."""
    if lam <= 0 or lam_prime <= 0:
        raise ValidationError("both rates must be positive")
    n = spec.n_sites
    n_states = enumerate_states(n, 3, cap)
    nbr = neighbor_table(spec)
    pow3 = [3**i for i in range(n)]
    Q = np.zeros((n_states, n_states))
    for code in range(n_states):
        st = _decode(code, n, 3)
        for u in range(n):
            if st[u] != 0:
                Q[code, code - st[u] * pow3[u]] += 1.0
                rate = lam if st[u] == 1 else lam_prime
                for v in nbr[u]:
                    if v >= 0 and st[v] == 0:
                        Q[code, code + int(st[u]) * pow3[v]] += rate
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def adaptive_generator(spec, delta, b, type_values, kernel_matrix, cap=DEFAULT_STATE_CAP):
    """Dense generator of the adaptive process on a declared finite type set.

    ``type_values[i]`` is the birth rate of level i+1 (level 0 is empty);
    ``kernel_matrix[i, j]`` is the mutation kernel mass from type i to type j
    and must have zero diagonal and unit row sums (the reachable type set
    must be closed).
    """
    types = np.asarray(type_values, dtype=np.float64)
    kt = len(types)
    K = np.asarray(kernel_matrix, dtype=np.float64)
    if delta > 0:
        if K.shape != (kt, kt):
            raise ValidationError("kernel matrix shape must match the type set")
        if np.any(np.abs(np.diag(K)) > 0):
            raise ValidationError("mutation kernel must have zero diagonal mass")
        if not np.allclose(K.sum(axis=1), 1.0):
            raise ValidationError(
                "kernel rows must sum to one: the declared type set must be "
                "closed under mutation"
            )
    n = spec.n_sites
    levels = kt + 1
    n_states = enumerate_states(n, levels, cap)
    nbr = neighbor_table(spec)
    powl = [levels**i for i in range(n)]
    Q = np.zeros((n_states, n_states))
    for code in range(n_states):
        st = _decode(code, n, levels)
        for u in range(n):
            if st[u] != 0:
                Q[code, code - int(st[u]) * powl[u]] += 1.0
                i = int(st[u]) - 1
                lam = types[i]
                db = delta * b(lam) if delta > 0 else 0.0
                plain = lam * max(0.0, 1.0 - db)
                mut = lam * min(db, 1.0)
                for v in nbr[u]:
                    if v >= 0 and st[v] == 0:
                        if plain > 0:
                            Q[code, code + (i + 1) * powl[v]] += plain
                        if mut > 0:
                            for j in range(kt):
                                if K[i, j] > 0:
                                    Q[code, code + (j + 1) * powl[v]] += mut * K[i, j]
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def transient_distribution(Q, p0, t, tol=1e-10):
    """Law at time t by uniformization, truncated once the Poisson tail < tol."""
    p0 = np.asarray(p0, dtype=np.float64)
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if t == 0:
        return p0.copy()
    rate = float(np.max(-np.diag(Q)))
    if rate == 0.0:
        return p0.copy()
    P = np.eye(Q.shape[0]) + Q / rate
    mu = rate * t
    # Poisson(mu) weights, accumulated until the remaining tail is below tol
    result = np.zeros_like(p0)
    term = p0.copy()
    log_w = -mu
    w = np.exp(log_w)
    cum = w
    result += w * term
    k = 0
    while 1.0 - cum > tol:
        k += 1
        term = term @ P
        w *= mu / k
        cum += w
        result += w * term
        if k > 100 * (mu + 10):
            raise RuntimeError("uniformization failed to converge")
    return result


def occupancy_marginal(spec, dist, site_index_, levels=2, level=None):
    """P(site in a given level set) under a state distribution.

    With the default arguments this is P(site occupied) for a one-type state
    space; pass ``level`` to pick out one type of a multi-level space.
    """
    n = spec.n_sites
    total = 0.0
    for code, p in enumerate(dist):
        if p == 0.0:
            continue
        digit = (code // levels**site_index_) % levels
        if level is None:
            if digit != 0:
                total += p
        elif digit == level:
            total += p
    return total


def full_start_distribution(spec, levels=2, level=1):
    """Point mass on the all-`level` configuration."""
    n_states = levels**spec.n_sites
    p0 = np.zeros(n_states)
    code = _encode([level] * spec.n_sites, levels)
    p0[code] = 1.0
    return p0


def point_distribution(spec, digits, levels):
    p0 = np.zeros(levels**spec.n_sites)
    p0[_encode(digits, levels)] = 1.0
    return p0


def expected_flip_flux(spec, lam, dist):
    """Expected instantaneous rate of 0 -> 1 flips per site under a one-type
    state distribution (exact counterpart of the flip-count estimator)."""
    n = spec.n_sites
    nbr = neighbor_table(spec)
    total = 0.0
    for code, p in enumerate(dist):
        if p == 0.0:
            continue
        occ = _decode(code, n, 2)
        rate = 0.0
        for u in range(n):
            if occ[u] == 0:
                k = sum(1 for v in nbr[u] if v >= 0 and occ[v] == 1)
                rate += lam * k
        total += p * rate
    return total / n
