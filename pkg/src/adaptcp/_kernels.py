"""Event-loop kernels.

Everything here is written against plain numpy arrays and scalar math so the
same source compiles under numba (default) or runs interpreted when the
``ADAPTCP_DISABLE_NUMBA`` flag is set.  State passed in is mutated in place;
kernels are resumable: they return a status code and leave the configuration
consistent, so wrappers re-enter after handling rare events (mutant type
draws, buffer growth) without touching the event statistics.

Status codes: 0 horizon reached, 1 mutation pending (birth not yet applied),
2 resolution (at most one live type remains), 3 empty configuration,
4 event cap or record buffer exhausted, 5 landscape buffer filled.
"""

import numpy as np

from ._backend import jit_inline, jit_kernel
from ._rng import next_exp, next_unit

STATUS_HORIZON = 0
STATUS_MUTATION = 1
STATUS_RESOLUTION = 2
STATUS_EMPTY = 3
STATUS_CAP = 4
STATUS_LANDSCAPES = 5

# out-array slots shared by the forward kernels
OUT_T = 0
OUT_STAR = 1
OUT_NEVENTS = 2
OUT_FLIPS = 3
OUT_NREC = 4
OUT_NLAND = 5
OUT_PEND_T = 6
OUT_PEND_SITE = 7
OUT_PEND_PARENT = 8
OUT_OCC = 9

FLAG_STOP_RESOLUTION = 2
FLAG_RECORD = 4
FLAG_STOP_LANDSCAPES = 8
FLAG_STOP_TYPEDROP = 16


@jit_inline
def _tree_set(tree, base, i, val):
    pos = base + i
    tree[pos] = val
    pos >>= 1
    while pos >= 1:
        tree[pos] = tree[2 * pos] + tree[2 * pos + 1]
        pos >>= 1


@jit_inline
def _tree_pick(tree, base, target):
    node = 1
    while node < base:
        node <<= 1
        if target >= tree[node]:
            target -= tree[node]
            node += 1
    return node - base


@jit_kernel
def adaptive_kernel(
    nbr,
    chi,
    t0,
    horizon,
    delta,
    b_kind,
    b_c,
    b_cap,
    type_vals,
    type_counts,
    flags,
    max_events,
    count_from,
    rng,
    rec_t,
    rec_site,
    rec_old,
    rec_new,
    rec_cause,
    rec_parent,
    land_map,
    land_out,
    land_burn,
    out,
):
    n = chi.shape[0]
    degmax = nbr.shape[1]
    kt = type_vals.shape[0]

    # rebuild bookkeeping from the configuration (cheap relative to a run)
    occ = 0
    for i in range(kt):
        type_counts[i] = 0
    for u in range(n):
        if chi[u] > 0.0:
            occ += 1
            for i in range(kt):
                if chi[u] == type_vals[i]:
                    type_counts[i] += 1
                    break
    n_live = 0
    for i in range(kt):
        if type_counts[i] > 0:
            n_live += 1

    e = np.zeros(n, dtype=np.int32)
    for u in range(n):
        cnt = 0
        for j in range(degmax):
            v = nbr[u, j]
            if v >= 0 and chi[v] == 0.0:
                cnt += 1
        e[u] = cnt

    base = 1
    while base < n:
        base <<= 1
    tree = np.zeros(2 * base, dtype=np.float64)
    for u in range(n):
        if chi[u] > 0.0:
            tree[base + u] = 1.0 + chi[u] * e[u]
    for node in range(base - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]

    record = (flags & FLAG_RECORD) != 0
    stop_res = (flags & FLAG_STOP_RESOLUTION) != 0
    stop_land = (flags & FLAG_STOP_LANDSCAPES) != 0
    stop_drop = (flags & FLAG_STOP_TYPEDROP) != 0
    land_cap = land_out.shape[0]
    w = land_map.shape[1]

    t = t0
    n_ev = 0
    flips = 0
    star = 0.0
    n_rec = int(out[OUT_NREC])
    n_land = int(out[OUT_NLAND])
    out[OUT_PEND_T] = -1.0
    out[OUT_PEND_SITE] = -1.0
    out[OUT_PEND_PARENT] = -1.0
    status = STATUS_HORIZON

    while True:
        if occ == 0:
            status = STATUS_EMPTY
            break
        if n_ev >= max_events or (record and n_rec >= rec_t.shape[0]):
            status = STATUS_CAP
            break
        total = tree[1]
        dt = next_exp(rng, total)
        tn = t + dt
        if tn > horizon:
            if n_live >= 2:
                star += horizon - t
            t = horizon
            status = STATUS_HORIZON
            break
        if n_live >= 2:
            star += dt
        t = tn

        u = _tree_pick(tree, base, next_unit(rng) * total)
        if u >= n or chi[u] <= 0.0:
            for q in range(n):
                if chi[q] > 0.0:
                    u = q
                    break
        ru = 1.0 + chi[u] * e[u]
        x = next_unit(rng) * ru

        if x < 1.0:
            # death
            old = chi[u]
            chi[u] = 0.0
            occ -= 1
            dropped = False
            for i in range(kt):
                if type_vals[i] == old:
                    type_counts[i] -= 1
                    if type_counts[i] == 0:
                        n_live -= 1
                        dropped = True
                    break
            for j in range(degmax):
                vv = nbr[u, j]
                if vv >= 0:
                    e[vv] += 1
                    if chi[vv] > 0.0:
                        _tree_set(tree, base, vv, 1.0 + chi[vv] * e[vv])
            _tree_set(tree, base, u, 0.0)
            n_ev += 1
            if record:
                rec_t[n_rec] = t
                rec_site[n_rec] = u
                rec_old[n_rec] = old
                rec_new[n_rec] = 0.0
                rec_cause[n_rec] = 0
                rec_parent[n_rec] = -1
                n_rec += 1
            if occ == 0:
                status = STATUS_EMPTY
                break
            if dropped and (stop_drop or (stop_res and n_live <= 1)):
                status = STATUS_RESOLUTION
                break
        else:
            # birth from u onto its j-th empty neighbor
            j = int((x - 1.0) / chi[u])
            if j >= e[u]:
                j = e[u] - 1
            cnt = -1
            v = -1
            for jj in range(degmax):
                vv = nbr[u, jj]
                if vv >= 0 and chi[vv] == 0.0:
                    cnt += 1
                    if cnt == j:
                        v = vv
                        break
            if delta > 0.0:
                if b_kind == 0:
                    blam = b_c
                else:
                    blam = b_c * chi[u]
                    if blam > b_cap:
                        blam = b_cap
                p = delta * blam
                if p > 1.0:
                    p = 1.0
                if next_unit(rng) < p:
                    out[OUT_PEND_T] = t
                    out[OUT_PEND_SITE] = float(v)
                    out[OUT_PEND_PARENT] = float(u)
                    status = STATUS_MUTATION
                    break
            if land_cap > 0 and t >= land_burn and n_land < land_cap:
                for q in range(w):
                    s = land_map[v, q]
                    if s >= 0 and chi[s] > 0.0:
                        land_out[n_land, q] = 1
                    else:
                        land_out[n_land, q] = 0
                n_land += 1
            chi[v] = chi[u]
            occ += 1
            for i in range(kt):
                if type_vals[i] == chi[v]:
                    type_counts[i] += 1
                    break
            if t >= count_from:
                flips += 1
            ev = 0
            for jj in range(degmax):
                vv = nbr[v, jj]
                if vv >= 0:
                    if chi[vv] == 0.0:
                        ev += 1
                    else:
                        e[vv] -= 1
                        _tree_set(tree, base, vv, 1.0 + chi[vv] * e[vv])
            e[v] = ev
            _tree_set(tree, base, v, 1.0 + chi[v] * ev)
            n_ev += 1
            if record:
                rec_t[n_rec] = t
                rec_site[n_rec] = v
                rec_old[n_rec] = 0.0
                rec_new[n_rec] = chi[v]
                rec_cause[n_rec] = 1
                rec_parent[n_rec] = u
                n_rec += 1
            if stop_land and land_cap > 0 and n_land >= land_cap:
                status = STATUS_LANDSCAPES
                break

    out[OUT_T] = t
    out[OUT_STAR] = star
    out[OUT_NEVENTS] = float(n_ev)
    out[OUT_FLIPS] = float(flips)
    out[OUT_NREC] = float(n_rec)
    out[OUT_NLAND] = float(n_land)
    out[OUT_OCC] = float(occ)
    return status


@jit_kernel
def twotype_kernel(
    nbr,
    state,
    lam1,
    lam2,
    t0,
    horizon,
    flags,
    max_events,
    rng,
    rec_t,
    rec_site,
    rec_old,
    rec_new,
    rec_parent,
    out,
):
    n = state.shape[0]
    degmax = nbr.shape[1]

    c1 = 0
    c2 = 0
    for u in range(n):
        if state[u] == 1:
            c1 += 1
        elif state[u] == 2:
            c2 += 1

    e = np.zeros(n, dtype=np.int32)
    for u in range(n):
        cnt = 0
        for j in range(degmax):
            v = nbr[u, j]
            if v >= 0 and state[v] == 0:
                cnt += 1
        e[u] = cnt

    base = 1
    while base < n:
        base <<= 1
    tree = np.zeros(2 * base, dtype=np.float64)
    for u in range(n):
        if state[u] == 1:
            tree[base + u] = 1.0 + lam1 * e[u]
        elif state[u] == 2:
            tree[base + u] = 1.0 + lam2 * e[u]
    for node in range(base - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]

    record = (flags & FLAG_RECORD) != 0
    stop_res = (flags & FLAG_STOP_RESOLUTION) != 0

    t = t0
    n_ev = 0
    n_rec = int(out[OUT_NREC])
    status = STATUS_HORIZON

    while True:
        if c1 + c2 == 0:
            status = STATUS_EMPTY
            break
        if stop_res and (c1 == 0 or c2 == 0):
            status = STATUS_RESOLUTION
            break
        if n_ev >= max_events or (record and n_rec >= rec_t.shape[0]):
            status = STATUS_CAP
            break
        total = tree[1]
        dt = next_exp(rng, total)
        tn = t + dt
        if tn > horizon:
            t = horizon
            status = STATUS_HORIZON
            break
        t = tn

        u = _tree_pick(tree, base, next_unit(rng) * total)
        if u >= n or state[u] == 0:
            for q in range(n):
                if state[q] != 0:
                    u = q
                    break
        lam = lam1 if state[u] == 1 else lam2
        ru = 1.0 + lam * e[u]
        x = next_unit(rng) * ru

        if x < 1.0:
            old = state[u]
            state[u] = 0
            if old == 1:
                c1 -= 1
            else:
                c2 -= 1
            for j in range(degmax):
                vv = nbr[u, j]
                if vv >= 0:
                    e[vv] += 1
                    if state[vv] == 1:
                        _tree_set(tree, base, vv, 1.0 + lam1 * e[vv])
                    elif state[vv] == 2:
                        _tree_set(tree, base, vv, 1.0 + lam2 * e[vv])
            _tree_set(tree, base, u, 0.0)
            n_ev += 1
            if record:
                rec_t[n_rec] = t
                rec_site[n_rec] = u
                rec_old[n_rec] = old
                rec_new[n_rec] = 0
                rec_parent[n_rec] = -1
                n_rec += 1
        else:
            j = int((x - 1.0) / lam)
            if j >= e[u]:
                j = e[u] - 1
            cnt = -1
            v = -1
            for jj in range(degmax):
                vv = nbr[u, jj]
                if vv >= 0 and state[vv] == 0:
                    cnt += 1
                    if cnt == j:
                        v = vv
                        break
            state[v] = state[u]
            if state[v] == 1:
                c1 += 1
            else:
                c2 += 1
            ev = 0
            for jj in range(degmax):
                vv = nbr[v, jj]
                if vv >= 0:
                    if state[vv] == 0:
                        ev += 1
                    else:
                        e[vv] -= 1
                        if state[vv] == 1:
                            _tree_set(tree, base, vv, 1.0 + lam1 * e[vv])
                        else:
                            _tree_set(tree, base, vv, 1.0 + lam2 * e[vv])
            e[v] = ev
            lamv = lam1 if state[v] == 1 else lam2
            _tree_set(tree, base, v, 1.0 + lamv * ev)
            n_ev += 1
            if record:
                rec_t[n_rec] = t
                rec_site[n_rec] = v
                rec_old[n_rec] = 0
                rec_new[n_rec] = state[v]
                rec_parent[n_rec] = u
                n_rec += 1

    out[OUT_T] = t
    out[OUT_NEVENTS] = float(n_ev)
    out[OUT_NREC] = float(n_rec)
    out[OUT_OCC] = float(c1 + c2)
    out[OUT_STAR] = float(c1)
    out[OUT_FLIPS] = float(c2)
    return status


@jit_kernel
def gen_window_times(rates, t_max, rng, out_t, out_off):
    """Fill per-channel arrival times (cumulative exponentials) sequentially.

    Returns the total count, or -1 if out_t is too small (caller restarts
    from the saved rng state with a bigger buffer, reproducing the draws).
    """
    pos = 0
    nch = rates.shape[0]
    for c in range(nch):
        out_off[c] = pos
        r = rates[c]
        if r > 0.0:
            t = 0.0
            while True:
                t += next_exp(rng, r)
                if t > t_max:
                    break
                if pos >= out_t.shape[0]:
                    return -1
                out_t[pos] = t
                pos += 1
    out_off[nch] = pos
    return pos


@jit_kernel
def gen_marks(k, p, rng, out):
    for i in range(k):
        if next_unit(rng) < p:
            out[i] = 1
        else:
            out[i] = 0
    return k


@jit_kernel
def onetype_window_sweep(
    ev_t,
    ev_kind,
    ev_a,
    ev_b,
    occ,
    t_start,
    t_end,
    allow_extra,
    restrict,
    rec_t,
    rec_site,
    rec_new,
    out,
):
    """Forward reachability sweep; occ is mutated to the state at t_end."""
    n_rec = 0
    res_on = restrict.shape[0] > 0
    rec_on = rec_t.shape[0] > 0
    for i in range(ev_t.shape[0]):
        t = ev_t[i]
        if t <= t_start:
            continue
        if t > t_end:
            break
        k = ev_kind[i]
        if k == 0:
            a = ev_a[i]
            if occ[a] == 1:
                occ[a] = 0
                if rec_on:
                    rec_t[n_rec] = t
                    rec_site[n_rec] = a
                    rec_new[n_rec] = 0
                    n_rec += 1
        else:
            if k == 2 and allow_extra == 0:
                continue
            a = ev_a[i]
            b = ev_b[i]
            if res_on and (restrict[a] == 0 or restrict[b] == 0):
                continue
            if occ[a] == 1 and occ[b] == 0:
                occ[b] = 1
                if rec_on:
                    rec_t[n_rec] = t
                    rec_site[n_rec] = b
                    rec_new[n_rec] = 1
                    n_rec += 1
    out[0] = float(n_rec)
    return 0


@jit_kernel
def twotype_window_sweep(
    ev_t,
    ev_kind,
    ev_a,
    ev_b,
    state,
    t_start,
    t_end,
    rec_t,
    rec_site,
    rec_old,
    rec_new,
    out,
):
    """Two-type update rules applied in event order; state mutated in place."""
    n_rec = 0
    rec_on = rec_t.shape[0] > 0
    for i in range(ev_t.shape[0]):
        t = ev_t[i]
        if t <= t_start:
            continue
        if t > t_end:
            break
        k = ev_kind[i]
        if k == 0:
            a = ev_a[i]
            if state[a] != 0:
                if rec_on:
                    rec_t[n_rec] = t
                    rec_site[n_rec] = a
                    rec_old[n_rec] = state[a]
                    rec_new[n_rec] = 0
                    n_rec += 1
                state[a] = 0
        else:
            a = ev_a[i]
            b = ev_b[i]
            if state[b] != 0:
                continue
            sa = state[a]
            if sa == 0:
                continue
            if sa == 1 and k == 2:
                continue
            state[b] = sa
            if rec_on:
                rec_t[n_rec] = t
                rec_site[n_rec] = b
                rec_old[n_rec] = 0
                rec_new[n_rec] = sa
                n_rec += 1
    out[0] = float(n_rec)
    return 0


@jit_kernel
def insulation_spread_ok(ev_t, ev_kind, ev_a, ev_b, n, coords, max_spread):
    """True iff no infection path (any start time) links two sites farther
    than max_spread apart in L-infinity distance.

    One forward sweep per source site; the source is always re-seedable since
    a constant path may start at any instant.
    """
    d = coords.shape[1]
    m = ev_t.shape[0]
    occ = np.zeros(n, dtype=np.uint8)
    for y in range(n):
        for q in range(n):
            occ[q] = 0
        occ[y] = 1
        for i in range(m):
            k = ev_kind[i]
            if k == 0:
                v = ev_a[i]
                if v == y:
                    occ[v] = 1
                else:
                    occ[v] = 0
            else:
                a = ev_a[i]
                b = ev_b[i]
                if occ[a] == 1 and occ[b] == 0:
                    occ[b] = 1
                    for c in range(d):
                        dist = coords[b, c] - coords[y, c]
                        if dist < 0:
                            dist = -dist
                        if dist > max_spread:
                            return 0
    return 1


@jit_kernel
def coupling_first_equal(ev_t, ev_kind, ev_a, ev_b, occ_a, occ_b, t_end, out):
    """First event time at which the two reachability states coincide."""
    n = occ_a.shape[0]
    diff = 0
    for u in range(n):
        if occ_a[u] != occ_b[u]:
            diff += 1
    if diff == 0:
        out[0] = 0.0
        return 0
    for i in range(ev_t.shape[0]):
        t = ev_t[i]
        if t > t_end:
            break
        k = ev_kind[i]
        if k == 0:
            s = ev_a[i]
            was = occ_a[s] != occ_b[s]
            occ_a[s] = 0
            occ_b[s] = 0
            if was:
                diff -= 1
        else:
            a = ev_a[i]
            b = ev_b[i]
            was = occ_a[b] != occ_b[b]
            if occ_a[a] == 1 and occ_a[b] == 0:
                occ_a[b] = 1
            if occ_b[a] == 1 and occ_b[b] == 0:
                occ_b[b] = 1
            now = occ_a[b] != occ_b[b]
            if was and not now:
                diff -= 1
            elif now and not was:
                diff += 1
        if diff == 0:
            out[0] = t
            return 0
    out[0] = -1.0
    return 0


@jit_kernel
def jump_compensator_sweep(
    ev_t,
    ev_site,
    ev_birth,
    occ,
    win_map,
    affect_map,
    f_tab,
    q_tab,
    lam,
    t0,
    t_end,
    out,
):
    """Jump-sum and its exact piecewise-constant compensator along one path.

    win_map[u, j] is the site at window offset j from u; affect_map[s, j] is
    the site whose offset-j window slot is s.  Tables are indexed by the
    window bit pattern.
    """
    n = occ.shape[0]
    w = win_map.shape[1]
    code = np.zeros(n, dtype=np.int64)
    for u in range(n):
        c = 0
        for j in range(w):
            s = win_map[u, j]
            if s >= 0 and occ[s] == 1:
                c |= 1 << j
        code[u] = c
    big_s = 0.0
    for u in range(n):
        big_s += q_tab[code[u]] * f_tab[code[u]]
    jump_total = 0.0
    comp = 0.0
    t_prev = t0
    for i in range(ev_t.shape[0]):
        t = ev_t[i]
        comp += (t - t_prev) * big_s
        t_prev = t
        s = ev_site[i]
        if ev_birth[i] == 1:
            jump_total += f_tab[code[s]]
            occ[s] = 1
        else:
            occ[s] = 0
        for j in range(w):
            u2 = affect_map[s, j]
            if u2 >= 0:
                big_s -= q_tab[code[u2]] * f_tab[code[u2]]
                if ev_birth[i] == 1:
                    code[u2] |= 1 << j
                else:
                    code[u2] &= ~(1 << j)
                big_s += q_tab[code[u2]] * f_tab[code[u2]]
    comp += (t_end - t_prev) * big_s
    out[0] = jump_total
    out[1] = lam * comp
    return 0
