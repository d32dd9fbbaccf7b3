"""Event-driven Monte Carlo kernels.

All kernels simulate piecewise-linear paths (drift between isolated jumps)
exactly, one path after another from a single ``numpy.random.Generator``.
They are compiled by numba when available (see ``_accel``); the same source
runs in the interpreter otherwise.

Phase dynamics are passed as flat arrays:

``c[i]``          compound Poisson rate in phase ``i``
``jl[i]``         law index of the jump sizes in the sampling table (-1: none)
``qout[i]``       total switching rate out of phase ``i``
``tgt, tcum, ntg`` switch targets of phase ``i`` with cumulative probabilities
``fl[i, j]``      law index of the transitional jump ``i -> j`` (-1: zero jump)
``kill[i]``       killing rate
"""

import math

import numpy as np

from ._accel import njit
from .laws import draw_from_table


@njit
def _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng):
    """Holding time and type of the next event: 0 jump, 1 switch, 2 kill, -1 none."""
    tot = c[ph] + qout[ph] + kill[ph]
    if tot <= 0.0:
        return math.inf, -1, ph
    tau = rng.exponential(1.0 / tot)
    u = rng.random() * tot
    if u < c[ph]:
        return tau, 0, ph
    u -= c[ph]
    if u < qout[ph]:
        v = u / qout[ph]
        m = 0
        while m < ntg[ph] - 1 and tcum[ph, m] < v:
            m += 1
        return tau, 1, tgt[ph, m]
    return tau, 2, ph


@njit
def _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng):
    if kind == 0:
        return draw_from_table(cumw, lkind, params, sign, ulo, uhi, start, stop, jl[ph], rng)
    law = fl[ph, new]
    if law < 0:
        return 0.0
    return draw_from_table(cumw, lkind, params, sign, ulo, uhi, start, stop, law, rng)


@njit
def _expint(delta, w):
    """``(1 - exp(-delta w)) / delta``, continuous at ``delta = 0``."""
    z = delta * w
    if abs(z) < 1e-12:
        return w
    return -math.expm1(-z) / delta


# --------------------------------------------------------------------------
# ladder subordinator: sawtooth overshoots, resolvent integrals, occupation
# --------------------------------------------------------------------------


@njit
def ladder_sawtooth(n_paths, x0, i0, d, c, jl, qout, tgt, tcum, ntg, fl, kill,
                    cumw, lkind, params, sign, ulo, uhi, start, stop,
                    levels, res_lam, res_kappa, res_coef, occ_edges, h_stop, rng):
    """Simulate the ladder MAP subordinator started at height ``x0`` in phase ``i0``.

    For each path returns the overshoot and phase at every level (phase -1
    once killed), the resolvent integral
    ``int_0^inf exp(-res_lam t) f(O_t, J_t) dt`` for
    ``f(y, j) = sum_k res_coef[j, k] exp(-res_kappa[k] y)`` and the local time
    spent with the height in each cell of ``occ_edges`` per phase.
    """
    n_lev = levels.shape[0]
    n_cells = occ_edges.shape[0] - 1
    n_ph = d.shape[0]
    n_k = res_kappa.shape[0]
    O = np.zeros((n_paths, n_lev))
    J = np.full((n_paths, n_lev), -1, dtype=np.int64)
    res = np.zeros(n_paths)
    occ = np.zeros((n_paths, max(n_cells, 0), n_ph))
    do_res = res_lam > 0.0
    for p in range(n_paths):
        h = 0.0
        ph = i0
        li = 0
        acc = 0.0
        # start: a virtual jump from 0 to x0 into phase i0
        if x0 > 0.0:
            while li < n_lev and levels[li] < x0:
                O[p, li] = x0 - levels[li]
                J[p, li] = i0
                li += 1
            if do_res:
                for k in range(n_k):
                    acc += res_coef[i0, k] * math.exp(-res_lam * x0) * _expint(res_kappa[k] - res_lam, x0)
            h = x0
        while h < h_stop:
            tau, kind, new = _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng)
            # sojourn in phase ph for local time tau
            if d[ph] > 0.0:
                hb = h + d[ph] * tau
                while li < n_lev and levels[li] < hb:
                    O[p, li] = 0.0
                    J[p, li] = ph
                    li += 1
                if do_res:
                    hb_eff = min(hb, h_stop)
                    f0 = 0.0
                    for k in range(n_k):
                        f0 += res_coef[ph, k]
                    acc += f0 * math.exp(-res_lam * h) * _expint(res_lam, hb_eff - h)
                for cell in range(n_cells):
                    lo = max(h, occ_edges[cell])
                    hi = min(hb, occ_edges[cell + 1])
                    if hi > lo:
                        occ[p, cell, ph] += (hi - lo) / d[ph]
                h = hb
            elif n_cells > 0 and tau < math.inf:
                for cell in range(n_cells):
                    if occ_edges[cell] <= h < occ_edges[cell + 1]:
                        occ[p, cell, ph] += tau
                        break
            if h >= h_stop or kind < 0:
                break
            if kind == 2:
                break
            size = _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng)
            hb = h + size
            while li < n_lev and levels[li] < hb:
                O[p, li] = hb - levels[li]
                J[p, li] = new
                li += 1
            if do_res and size > 0.0:
                for k in range(n_k):
                    acc += res_coef[new, k] * math.exp(-res_lam * hb) * _expint(res_kappa[k] - res_lam, size)
            h = hb
            ph = new
        res[p] = acc
    return O, J, res, occ


# --------------------------------------------------------------------------
# parent MAP (drift + compound Poisson, no Gaussian part)
# --------------------------------------------------------------------------


@njit
def map_endpoints(n_paths, i0, T, a, c, jl, qout, tgt, tcum, ntg, fl,
                  cumw, lkind, params, sign, ulo, uhi, start, stop, rng):
    """Value, phase, switch count and phase occupation times at horizon ``T``."""
    n_ph = a.shape[0]
    xi = np.zeros(n_paths)
    ph_out = np.zeros(n_paths, dtype=np.int64)
    nsw = np.zeros(n_paths, dtype=np.int64)
    occ = np.zeros((n_paths, n_ph))
    kill = np.zeros(n_ph)
    for p in range(n_paths):
        t = 0.0
        x = 0.0
        ph = i0
        while True:
            tau, kind, new = _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng)
            if t + tau >= T:
                x += a[ph] * (T - t)
                occ[p, ph] += T - t
                break
            x += a[ph] * tau
            occ[p, ph] += tau
            t += tau
            x += _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng)
            if kind == 1:
                nsw[p] += 1
            ph = new
        xi[p] = x
        ph_out[p] = ph
    return xi, ph_out, nsw, occ


@njit
def map_passage(n_paths, i0, levels, max_horizon, a, c, jl, qout, tgt, tcum, ntg, fl,
                cumw, lkind, params, sign, ulo, uhi, start, stop, rng):
    """First passage above each level (sorted) on one path per replicate.

    Returns passage times (inf when censored), overshoots, phases (-1 when
    censored) and a creeping flag.
    """
    n_lev = levels.shape[0]
    n_ph = a.shape[0]
    Tp = np.full((n_paths, n_lev), math.inf)
    O = np.full((n_paths, n_lev), math.nan)
    J = np.full((n_paths, n_lev), -1, dtype=np.int64)
    crept = np.zeros((n_paths, n_lev), dtype=np.bool_)
    kill = np.zeros(n_ph)
    for p in range(n_paths):
        t = 0.0
        x = 0.0
        ph = i0
        li = 0
        while li < n_lev and levels[li] < 0.0:
            Tp[p, li] = 0.0
            O[p, li] = -levels[li]
            J[p, li] = i0
            li += 1
        while li < n_lev:
            tau, kind, new = _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng)
            dur = min(tau, max_horizon - t)
            if a[ph] > 0.0:
                xe = x + a[ph] * dur
                while li < n_lev and levels[li] < xe:
                    lv = levels[li]
                    Tp[p, li] = t + max(lv - x, 0.0) / a[ph]
                    O[p, li] = 0.0
                    J[p, li] = ph
                    crept[p, li] = True
                    li += 1
                x = xe
            else:
                x += a[ph] * dur
            t += dur
            if t >= max_horizon or kind < 0:
                break
            size = _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng)
            x += size
            ph = new
            while li < n_lev and levels[li] < x:
                Tp[p, li] = t
                O[p, li] = x - levels[li]
                J[p, li] = ph
                crept[p, li] = O[p, li] == 0.0
                li += 1
    return Tp, O, J, crept


@njit
def map_ladder_creeping(n_paths, i0, local_target, max_horizon, a, c, jl, qout, tgt, tcum, ntg, fl,
                        cumw, lkind, params, sign, ulo, uhi, start, stop, edges, rng):
    """Ladder statistics for a MAP whose phases all drift upward (time at the maximum is local time).

    Each path runs until its total time at the maximum reaches
    ``local_target`` (or ``max_horizon`` real time). A ladder event happens
    whenever the running maximum is reached again or exceeded; it is
    attributed to the pair (phase at the last time at the maximum, current
    phase) with size equal to the increase of the maximum.

    Returns per-phase local time, same-phase jump histograms ``pi_counts[i, bin]``
    (sizes > 0, last bin is overflow), transitional histograms
    ``f_counts[i, j, bin]`` with zero-size events in ``f_zero[i, j]``,
    first and second moment sums of sizes and per-path censoring flags.
    """
    n_ph = a.shape[0]
    nb = edges.shape[0] - 1
    ell = np.zeros((n_paths, n_ph))
    pi_counts = np.zeros((n_ph, nb + 1))
    f_counts = np.zeros((n_ph, n_ph, nb + 1))
    f_zero = np.zeros((n_ph, n_ph))
    pi_sum = np.zeros(n_ph)
    f_sum = np.zeros((n_ph, n_ph))
    n_pi = np.zeros((n_paths, n_ph))
    n_f = np.zeros((n_paths, n_ph, n_ph))
    censored = np.zeros(n_paths, dtype=np.bool_)
    kill = np.zeros(n_ph)
    for p in range(n_paths):
        t = 0.0
        x = 0.0
        mx = 0.0
        ph = i0
        last = i0
        ltot = 0.0
        while True:
            tau, kind, new = _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng)
            gap = mx - x
            # time needed to climb back to the maximum, then time spent at it
            climb = gap / a[ph]
            at_max = tau - climb
            if at_max >= 0.0:
                if gap > 0.0:
                    # creeping return to the maximum
                    if last != ph:
                        f_zero[last, ph] += 1.0
                        n_f[p, last, ph] += 1.0
                    last = ph
                use = min(at_max, local_target - ltot)
                ell[p, ph] += use
                ltot += use
                if ltot >= local_target:
                    break
                x = mx + a[ph] * at_max
                mx = x
            else:
                x += a[ph] * tau
            t += tau
            if t >= max_horizon:
                censored[p] = True
                break
            size = _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng)
            x += size
            ph = new
            if x >= mx:
                h = x - mx
                if h > 0.0 or last != ph:
                    b = nb
                    for k in range(nb):
                        if h < edges[k + 1]:
                            b = k
                            break
                    if last == ph:
                        pi_counts[ph, b] += 1.0
                        pi_sum[ph] += h
                        n_pi[p, ph] += 1.0
                    elif h == 0.0:
                        f_zero[last, ph] += 1.0
                        n_f[p, last, ph] += 1.0
                    else:
                        f_counts[last, ph, b] += 1.0
                        f_sum[last, ph] += h
                        n_f[p, last, ph] += 1.0
                mx = x
                last = ph
    return ell, pi_counts, f_counts, f_zero, pi_sum, f_sum, n_pi, n_f, censored


@njit
def map_ladder_epochs(n_paths, i0, max_epochs, max_horizon, gap_cap, height_cap, a, c, jl, qout, tgt, tcum,
                      ntg, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, edges, occ_edges, rng):
    """Ladder epochs of a MAP that cannot creep upward (all drifts <= 0).

    Every new (weak) maximum is one ladder epoch, including the start.
    Each path stops after ``max_epochs`` ladder events, when it falls more
    than ``gap_cap`` below its maximum, when the maximum exceeds
    ``height_cap`` or at ``max_horizon``.

    Returns completed epochs per phase (those followed by a ladder event or
    by a drop below ``gap_cap``, which counts as killing), kill counts,
    event histograms as in :func:`map_ladder_creeping`, the epoch occupation
    ``occ[path, cell, phase]`` of the maximum over ``occ_edges`` (the start
    epoch lands in the cell containing 0) and the stop reason per path
    (1 horizon, 2 gap, 3 height cap, 4 epoch budget).
    """
    n_ph = a.shape[0]
    nb = edges.shape[0] - 1
    n_cells = occ_edges.shape[0] - 1
    expo = np.zeros((n_paths, n_ph))
    pi_counts = np.zeros((n_ph, nb + 1))
    f_counts = np.zeros((n_ph, n_ph, nb + 1))
    f_zero = np.zeros((n_ph, n_ph))
    occ = np.zeros((n_paths, max(n_cells, 0), n_ph))
    kills = np.zeros((n_paths, n_ph))
    stop_reason = np.zeros(n_paths, dtype=np.int64)
    kill = np.zeros(n_ph)
    for p in range(n_paths):
        t = 0.0
        x = 0.0
        mx = 0.0
        ph = i0
        last = i0
        n_ev = 0
        if n_cells > 0 and occ_edges[0] <= 0.0 < occ_edges[n_cells]:
            occ[p, 0, ph] += 1.0
        while True:
            tau, kind, new = _next_event(ph, c, qout, kill, tgt, tcum, ntg, rng)
            x += a[ph] * tau
            t += tau
            if t >= max_horizon:
                stop_reason[p] = 1
                break
            if mx - x > gap_cap:
                stop_reason[p] = 2
                expo[p, last] += 1.0
                kills[p, last] += 1.0
                break
            size = _jump_size(kind, ph, new, jl, fl, cumw, lkind, params, sign, ulo, uhi, start, stop, rng)
            x += size
            ph = new
            if x >= mx and kind >= 0:
                h = x - mx
                expo[p, last] += 1.0
                b = nb
                for k in range(nb):
                    if h < edges[k + 1]:
                        b = k
                        break
                if last == ph:
                    pi_counts[ph, b] += 1.0
                elif h == 0.0:
                    f_zero[last, ph] += 1.0
                else:
                    f_counts[last, ph, b] += 1.0
                mx = x
                last = ph
                n_ev += 1
                if mx >= height_cap:
                    stop_reason[p] = 3
                    break
                for cell in range(n_cells):
                    if occ_edges[cell] <= mx < occ_edges[cell + 1]:
                        occ[p, cell, ph] += 1.0
                        break
                if n_ev >= max_epochs:
                    stop_reason[p] = 4
                    break
            if mx - x > gap_cap:
                stop_reason[p] = 2
                expo[p, last] += 1.0
                kills[p, last] += 1.0
                break
    return expo, kills, pi_counts, f_counts, f_zero, occ, stop_reason
