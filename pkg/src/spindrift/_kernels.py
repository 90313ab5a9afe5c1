"""Jit-compiled inner loops for the jump-process samplers and the integrator.

All kernels draw randomness exclusively through ``gen.random()`` on a
numpy Generator passed in by the caller; exponential waiting times are
formed as -log1p(-u).  This keeps every sampler reproducible from a
seeded stream and lets the kernels run with the GIL released, so replica
ensembles parallelise across threads without affecting results.

Rate models are dispatched by ``mode``: 0 evaluates the exponential
mean-field family from (alpha, a); 1 uses the constant tables
(lam0, mu0).  Status codes returned by samplers: 0 = reached the
horizon, 1 = event capacity exhausted, 2 = thinning envelope violated.
"""

import math

import numpy as np
from numba import njit

_INIT_CAP = 4096


@njit(inline="always")
def _rates_into(mode, alpha, a, lam0, mu0, x, lam, mu):
    k = x.shape[0]
    if mode == 0:
        for i in range(k):
            e = a[i]
            for j in range(k):
                e += alpha[j, i] * x[j]
            lam[i] = math.exp(e)
            mu[i] = math.exp(-e)
    else:
        for i in range(k):
            lam[i] = lam0[i]
            mu[i] = mu0[i]


@njit(inline="always")
def _fg_clamped_into(mode, alpha, a, lam0, mu0, x, f, g):
    # Total-function form of the birth/death fields: outside [0,1] the
    # offending coordinate is replaced by the nearest endpoint inside its
    # own rate (self-interaction correction alpha[i,i]).
    k = x.shape[0]
    for i in range(k):
        xi = x[i]
        if mode == 0:
            e = a[i]
            for j in range(k):
                e += alpha[j, i] * x[j]
            if xi <= 0.0:
                f[i] = math.exp(e + alpha[i, i] * (0.0 - xi))
                g[i] = 0.0
            elif xi >= 1.0:
                f[i] = 0.0
                g[i] = math.exp(-(e + alpha[i, i] * (1.0 - xi)))
            else:
                f[i] = (1.0 - xi) * math.exp(e)
                g[i] = xi * math.exp(-e)
        else:
            if xi <= 0.0:
                f[i] = lam0[i]
                g[i] = 0.0
            elif xi >= 1.0:
                f[i] = 0.0
                g[i] = mu0[i]
            else:
                f[i] = (1.0 - xi) * lam0[i]
                g[i] = xi * mu0[i]


@njit(cache=True, nogil=True)
def rk4_path(mode, alpha, a, lam0, mu0, x0, interval_lengths, substeps, out):
    """Classical fixed-step RK4 for xdot = f(x) - g(x), sampled per interval.

    out[0] must hold x0 on entry; out[j+1] receives the state after
    interval j.  Returns 0, or 1 if the state leaves [-1e-6, 1+1e-6]^k.
    """
    k = x0.shape[0]
    x = x0.copy()
    f = np.empty(k)
    g = np.empty(k)
    k1 = np.empty(k)
    k2 = np.empty(k)
    k3 = np.empty(k)
    k4 = np.empty(k)
    xs = np.empty(k)
    for j in range(interval_lengths.shape[0]):
        n_sub = substeps[j]
        h = interval_lengths[j] / n_sub
        for _ in range(n_sub):
            _fg_clamped_into(mode, alpha, a, lam0, mu0, x, f, g)
            for i in range(k):
                k1[i] = f[i] - g[i]
                xs[i] = x[i] + 0.5 * h * k1[i]
            _fg_clamped_into(mode, alpha, a, lam0, mu0, xs, f, g)
            for i in range(k):
                k2[i] = f[i] - g[i]
                xs[i] = x[i] + 0.5 * h * k2[i]
            _fg_clamped_into(mode, alpha, a, lam0, mu0, xs, f, g)
            for i in range(k):
                k3[i] = f[i] - g[i]
                xs[i] = x[i] + h * k3[i]
            _fg_clamped_into(mode, alpha, a, lam0, mu0, xs, f, g)
            for i in range(k):
                k4[i] = f[i] - g[i]
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(k):
                if x[i] < -1e-6 or x[i] > 1.0 + 1e-6:
                    return 1
        for i in range(k):
            out[j + 1, i] = x[i]
    return 0


@njit(cache=True, nogil=True)
def gillespie_graphical(mode, alpha, a, lam0, mu0, N, counts, horizon, gen, max_events):
    """Exact event-driven walk on the grid {0..N}^k in graphical time.

    Channel rates are the unscaled fields f_i, g_i evaluated at
    x = counts / N; the caller converts to density-profile time by
    dividing recorded times by N.  ``counts`` is updated in place.
    Channels are ordered (+1..+k, -1..-k) for selection.
    """
    k = counts.shape[0]
    Nf = float(N)
    x = np.empty(k)
    lam = np.empty(k)
    mu = np.empty(k)
    f = np.empty(k)
    g = np.empty(k)
    cap = _INIT_CAP
    times = np.empty(cap)
    types = np.empty(cap, dtype=np.int16)
    dirs = np.empty(cap, dtype=np.int8)
    n_ev = 0
    t = 0.0
    while True:
        for i in range(k):
            x[i] = counts[i] / Nf
        _rates_into(mode, alpha, a, lam0, mu0, x, lam, mu)
        total = 0.0
        for i in range(k):
            f[i] = (1.0 - x[i]) * lam[i]
            g[i] = x[i] * mu[i]
            total += f[i] + g[i]
        if total <= 0.0:
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 0
        t += -math.log1p(-gen.random()) / total
        if t > horizon:
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 0
        u = gen.random() * total
        sel = -1
        direction = 0
        acc = 0.0
        for i in range(k):
            acc += f[i]
            if u < acc:
                sel = i
                direction = 1
                break
        if sel < 0:
            for i in range(k):
                acc += g[i]
                if u < acc:
                    sel = i
                    direction = -1
                    break
        if sel < 0:
            # u landed on the rounding sliver at the top of the cumulative
            # sum; take the last channel with positive rate
            for i in range(k - 1, -1, -1):
                if g[i] > 0.0:
                    sel = i
                    direction = -1
                    break
                if f[i] > 0.0:
                    sel = i
                    direction = 1
                    break
        counts[sel] += direction
        if n_ev == cap:
            if cap >= max_events:
                return times[:n_ev], types[:n_ev], dirs[:n_ev], 1
            cap = min(cap * 2, max_events)
            nt = np.empty(cap)
            nt[:n_ev] = times[:n_ev]
            times = nt
            ny = np.empty(cap, dtype=np.int16)
            ny[:n_ev] = types[:n_ev]
            types = ny
            nd = np.empty(cap, dtype=np.int8)
            nd[:n_ev] = dirs[:n_ev]
            dirs = nd
        times[n_ev] = t
        types[n_ev] = sel + 1
        dirs[n_ev] = direction
        n_ev += 1


@njit(cache=True, nogil=True)
def spin_full(mode, alpha, a, lam0, mu0, N, spins, up_counts, horizon, gen, max_events):
    """Explicit k x N spin-array dynamics; records magnetization jumps.

    Each down spin of type i flips up at rate lam_i(m) and each up spin
    flips down at rate mu_i(m), m = up_counts / N.  The flipped site is
    drawn uniformly among the eligible ones.  Times are in density-profile
    units (total rates carry the factor N through the multiplicities).
    """
    k = up_counts.shape[0]
    Nf = float(N)
    x = np.empty(k)
    lam = np.empty(k)
    mu = np.empty(k)
    up_rate = np.empty(k)
    dn_rate = np.empty(k)
    cap = _INIT_CAP
    times = np.empty(cap)
    types = np.empty(cap, dtype=np.int16)
    dirs = np.empty(cap, dtype=np.int8)
    n_ev = 0
    t = 0.0
    while True:
        for i in range(k):
            x[i] = up_counts[i] / Nf
        _rates_into(mode, alpha, a, lam0, mu0, x, lam, mu)
        total = 0.0
        for i in range(k):
            up_rate[i] = (N - up_counts[i]) * lam[i]
            dn_rate[i] = up_counts[i] * mu[i]
            total += up_rate[i] + dn_rate[i]
        if total <= 0.0:
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 0
        t += -math.log1p(-gen.random()) / total
        if t > horizon:
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 0
        u = gen.random() * total
        sel = -1
        direction = 0
        acc = 0.0
        for i in range(k):
            acc += up_rate[i]
            if u < acc:
                sel = i
                direction = 1
                break
        if sel < 0:
            for i in range(k):
                acc += dn_rate[i]
                if u < acc:
                    sel = i
                    direction = -1
                    break
        if sel < 0:
            for i in range(k - 1, -1, -1):
                if dn_rate[i] > 0.0:
                    sel = i
                    direction = -1
                    break
                if up_rate[i] > 0.0:
                    sel = i
                    direction = 1
                    break
        # uniform eligible site: the c-th spin with value -direction in row sel
        target = -direction
        n_elig = N - up_counts[sel] if direction == 1 else up_counts[sel]
        c = int(gen.random() * n_elig)
        if c >= n_elig:
            c = n_elig - 1
        seen = 0
        for site in range(N):
            if spins[sel, site] == target:
                if seen == c:
                    spins[sel, site] = -target
                    break
                seen += 1
        up_counts[sel] += direction
        if n_ev == cap:
            if cap >= max_events:
                return times[:n_ev], types[:n_ev], dirs[:n_ev], 1
            cap = min(cap * 2, max_events)
            nt = np.empty(cap)
            nt[:n_ev] = times[:n_ev]
            times = nt
            ny = np.empty(cap, dtype=np.int16)
            ny[:n_ev] = types[:n_ev]
            types = ny
            nd = np.empty(cap, dtype=np.int8)
            nd[:n_ev] = dirs[:n_ev]
            dirs = nd
        times[n_ev] = t
        types[n_ev] = sel + 1
        dirs[n_ev] = direction
        n_ev += 1


@njit(inline="always")
def _interp_tab(tab, idx, frac, i):
    return tab[idx, i] + frac * (tab[idx + 1, i] - tab[idx, i])


@njit(cache=True, nogil=True)
def thinning_aux(N, up_counts, horizon, grid_dt, lam_tab, mu_tab, envelope, gen, max_events):
    """Aggregated birth-death chain with time-dependent tabulated rates.

    Up channel i has rate (N - U_i) * lam_i(t), down channel U_i * mu_i(t),
    with the rate tables linearly interpolated on their uniform grid.
    Proposals arrive at the constant envelope rate and are accepted with
    probability (total rate) / envelope; accepted proposals are exact
    events of the target law.  Times are density-profile times.
    """
    k = up_counts.shape[0]
    n_grid = lam_tab.shape[0]
    up_rate = np.empty(k)
    dn_rate = np.empty(k)
    cap = _INIT_CAP
    times = np.empty(cap)
    types = np.empty(cap, dtype=np.int16)
    dirs = np.empty(cap, dtype=np.int8)
    n_ev = 0
    t = 0.0
    while True:
        t += -math.log1p(-gen.random()) / envelope
        if t > horizon:
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 0
        pos = t / grid_dt
        idx = int(pos)
        if idx > n_grid - 2:
            idx = n_grid - 2
        frac = pos - idx
        total = 0.0
        for i in range(k):
            li = _interp_tab(lam_tab, idx, frac, i)
            mi = _interp_tab(mu_tab, idx, frac, i)
            up_rate[i] = (N - up_counts[i]) * li
            dn_rate[i] = up_counts[i] * mi
            total += up_rate[i] + dn_rate[i]
        if total > envelope * (1.0 + 1e-9):
            return times[:n_ev], types[:n_ev], dirs[:n_ev], 2
        u = gen.random() * envelope
        if u >= total:
            continue
        sel = -1
        direction = 0
        acc = 0.0
        for i in range(k):
            acc += up_rate[i]
            if u < acc:
                sel = i
                direction = 1
                break
        if sel < 0:
            for i in range(k):
                acc += dn_rate[i]
                if u < acc:
                    sel = i
                    direction = -1
                    break
        if sel < 0:
            continue
        up_counts[sel] += direction
        if n_ev == cap:
            if cap >= max_events:
                return times[:n_ev], types[:n_ev], dirs[:n_ev], 1
            cap = min(cap * 2, max_events)
            nt = np.empty(cap)
            nt[:n_ev] = times[:n_ev]
            times = nt
            ny = np.empty(cap, dtype=np.int16)
            ny[:n_ev] = types[:n_ev]
            types = ny
            nd = np.empty(cap, dtype=np.int8)
            nd[:n_ev] = dirs[:n_ev]
            dirs = nd
        times[n_ev] = t
        types[n_ev] = sel + 1
        dirs[n_ev] = direction
        n_ev += 1


@njit(cache=True, nogil=True)
def thinning_coupled(mode, alpha, a, lam0, mu0, N, m_counts, h_counts, horizon,
                     grid_dt, lam_tab, mu_tab, envelope, gen, max_events):
    """Joint chain of the density-profile process m and the auxiliary m-hat.

    Per coordinate and direction, both processes share a synchronized
    channel at the minimum of their rates; the rate excesses drive
    private channels that move exactly one of the two and are recorded as
    discrepancies.  m uses state-dependent rates at y = m_counts / N;
    m-hat uses the interpolated time tables.  Channel order per
    coordinate: sync-up, m-up, mhat-up, sync-down, m-down, mhat-down.

    Returns the m event list, the m-hat event list, the discrepancy list
    (times, types, which [0 = m moved alone, 1 = m-hat moved alone],
    directions, and the k-vector h_counts - m_counts after each
    discrepancy), plus a status code.
    """
    k = m_counts.shape[0]
    Nf = float(N)
    n_grid = lam_tab.shape[0]
    y = np.empty(k)
    lam_y = np.empty(k)
    mu_y = np.empty(k)
    cap_m = _INIT_CAP
    mt = np.empty(cap_m)
    my = np.empty(cap_m, dtype=np.int16)
    md = np.empty(cap_m, dtype=np.int8)
    n_m = 0
    cap_h = _INIT_CAP
    ht = np.empty(cap_h)
    hy = np.empty(cap_h, dtype=np.int16)
    hd = np.empty(cap_h, dtype=np.int8)
    n_h = 0
    cap_d = 256
    dt_ = np.empty(cap_d)
    dy = np.empty(cap_d, dtype=np.int16)
    dw = np.empty(cap_d, dtype=np.int8)
    dd = np.empty(cap_d, dtype=np.int8)
    dsep = np.empty((cap_d, k), dtype=np.int64)
    n_d = 0
    t = 0.0
    while True:
        t += -math.log1p(-gen.random()) / envelope
        if t > horizon:
            break
        for i in range(k):
            y[i] = m_counts[i] / Nf
        _rates_into(mode, alpha, a, lam0, mu0, y, lam_y, mu_y)
        pos = t / grid_dt
        idx = int(pos)
        if idx > n_grid - 2:
            idx = n_grid - 2
        frac = pos - idx
        total = 0.0
        for i in range(k):
            li = _interp_tab(lam_tab, idx, frac, i)
            mi = _interp_tab(mu_tab, idx, frac, i)
            rm_up = (N - m_counts[i]) * lam_y[i]
            rh_up = (N - h_counts[i]) * li
            rm_dn = m_counts[i] * mu_y[i]
            rh_dn = h_counts[i] * mi
            total += rm_up + rh_up - min(rm_up, rh_up)
            total += rm_dn + rh_dn - min(rm_dn, rh_dn)
        if total > envelope * (1.0 + 1e-9):
            return (mt[:n_m], my[:n_m], md[:n_m], ht[:n_h], hy[:n_h], hd[:n_h],
                    dt_[:n_d], dy[:n_d], dw[:n_d], dd[:n_d], dsep[:n_d], 2)
        u = gen.random() * envelope
        if u >= total:
            continue
        sel = -1
        direction = 0
        move_m = False
        move_h = False
        acc = 0.0
        for i in range(k):
            li = _interp_tab(lam_tab, idx, frac, i)
            mi = _interp_tab(mu_tab, idx, frac, i)
            rm_up = (N - m_counts[i]) * lam_y[i]
            rh_up = (N - h_counts[i]) * li
            sync_up = min(rm_up, rh_up)
            rm_dn = m_counts[i] * mu_y[i]
            rh_dn = h_counts[i] * mi
            sync_dn = min(rm_dn, rh_dn)
            acc += sync_up
            if u < acc:
                sel = i
                direction = 1
                move_m = True
                move_h = True
                break
            acc += rm_up - sync_up
            if u < acc:
                sel = i
                direction = 1
                move_m = True
                break
            acc += rh_up - sync_up
            if u < acc:
                sel = i
                direction = 1
                move_h = True
                break
            acc += sync_dn
            if u < acc:
                sel = i
                direction = -1
                move_m = True
                move_h = True
                break
            acc += rm_dn - sync_dn
            if u < acc:
                sel = i
                direction = -1
                move_m = True
                break
            acc += rh_dn - sync_dn
            if u < acc:
                sel = i
                direction = -1
                move_h = True
                break
        if sel < 0:
            continue
        if move_m:
            m_counts[sel] += direction
            if n_m == cap_m:
                if cap_m >= max_events:
                    return (mt[:n_m], my[:n_m], md[:n_m], ht[:n_h], hy[:n_h], hd[:n_h],
                            dt_[:n_d], dy[:n_d], dw[:n_d], dd[:n_d], dsep[:n_d], 1)
                cap_m = min(cap_m * 2, max_events)
                w = np.empty(cap_m)
                w[:n_m] = mt[:n_m]
                mt = w
                wy = np.empty(cap_m, dtype=np.int16)
                wy[:n_m] = my[:n_m]
                my = wy
                wd = np.empty(cap_m, dtype=np.int8)
                wd[:n_m] = md[:n_m]
                md = wd
            mt[n_m] = t
            my[n_m] = sel + 1
            md[n_m] = direction
            n_m += 1
        if move_h:
            h_counts[sel] += direction
            if n_h == cap_h:
                if cap_h >= max_events:
                    return (mt[:n_m], my[:n_m], md[:n_m], ht[:n_h], hy[:n_h], hd[:n_h],
                            dt_[:n_d], dy[:n_d], dw[:n_d], dd[:n_d], dsep[:n_d], 1)
                cap_h = min(cap_h * 2, max_events)
                w = np.empty(cap_h)
                w[:n_h] = ht[:n_h]
                ht = w
                wy = np.empty(cap_h, dtype=np.int16)
                wy[:n_h] = hy[:n_h]
                hy = wy
                wd = np.empty(cap_h, dtype=np.int8)
                wd[:n_h] = hd[:n_h]
                hd = wd
            ht[n_h] = t
            hy[n_h] = sel + 1
            hd[n_h] = direction
            n_h += 1
        if move_m != move_h:
            if n_d == cap_d:
                cap_d = cap_d * 2
                w = np.empty(cap_d)
                w[:n_d] = dt_[:n_d]
                dt_ = w
                wy = np.empty(cap_d, dtype=np.int16)
                wy[:n_d] = dy[:n_d]
                dy = wy
                ww = np.empty(cap_d, dtype=np.int8)
                ww[:n_d] = dw[:n_d]
                dw = ww
                wd = np.empty(cap_d, dtype=np.int8)
                wd[:n_d] = dd[:n_d]
                dd = wd
                ws = np.empty((cap_d, k), dtype=np.int64)
                ws[:n_d] = dsep[:n_d]
                dsep = ws
            dt_[n_d] = t
            dy[n_d] = sel + 1
            dw[n_d] = 0 if move_m else 1
            dd[n_d] = direction
            for i in range(k):
                dsep[n_d, i] = h_counts[i] - m_counts[i]
            n_d += 1
    return (mt[:n_m], my[:n_m], md[:n_m], ht[:n_h], hy[:n_h], hd[:n_h],
            dt_[:n_d], dy[:n_d], dw[:n_d], dd[:n_d], dsep[:n_d], 0)
