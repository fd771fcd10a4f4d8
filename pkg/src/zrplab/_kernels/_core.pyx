# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; the contract lives in _pure.py.

Draw order and accumulation order match the pure backend, so integer
sample output is bitwise identical for a fixed Generator state.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, exp, log, log1p
from numpy.random cimport bitgen_t

BACKEND = "compiled"

# exp(v) == 0 below this anyway; skipping keeps -inf entries cheap
cdef double _EXP_FLOOR = -745.0


cdef inline bitgen_t *_bitgen(gen) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


def convolve_log(const double[::1] p, const double[::1] q, Py_ssize_t nmax):
    """Direct quadratic log-domain convolution truncated to totals <= nmax."""
    cdef Py_ssize_t kp = p.shape[0] - 1
    cdef Py_ssize_t kq = q.shape[0] - 1
    out_arr = np.full(nmax + 1, -np.inf)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n, j, jlo, jhi, top
    cdef double m, s, v
    top = kp + kq
    if top > nmax:
        top = nmax
    for n in range(top + 1):
        jlo = n - kq if n > kq else 0
        jhi = n if n < kp else kp
        m = -INFINITY
        for j in range(jlo, jhi + 1):
            v = p[j] + q[n - j]
            if v > m:
                m = v
        if m == -INFINITY:
            continue
        s = 0.0
        for j in range(jlo, jhi + 1):
            v = p[j] + q[n - j] - m
            if v > _EXP_FLOOR:
                s += exp(v)
        out[n] = m + log(s)
    return out_arr


cdef inline Py_ssize_t _draw_site(const double[::1] logw, const double[:, ::1] suffix,
                                  Py_ssize_t row_prev, double denom,
                                  Py_ssize_t rem, double u) nogil:
    cdef Py_ssize_t k = 0
    cdef double acc = 0.0
    while True:
        acc += exp(logw[k] + suffix[row_prev, rem - k] - denom)
        if acc > u or k >= rem:
            break
        k += 1
    if k > rem:
        k = rem
    return k


def sample_canonical_batch(const double[::1] logw, const double[:, ::1] suffix,
                           Py_ssize_t n_samples, gen):
    """Exact canonical samples, (n_samples, L) int64; L-1 uniforms each."""
    cdef Py_ssize_t L = suffix.shape[0]
    cdef Py_ssize_t N = suffix.shape[1] - 1
    out_arr = np.zeros((n_samples, L), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef bitgen_t *rng = _bitgen(gen)
    cdef Py_ssize_t i, ell, k, rem
    cdef double u
    for i in range(n_samples):
        rem = N
        for ell in range(L, 1, -1):
            u = rng.next_double(rng.state)
            k = _draw_site(logw, suffix, ell - 2, suffix[ell - 1, rem], rem, u)
            out[i, L - ell] = k
            rem -= k
        out[i, L - 1] = rem
    return out_arr


def sample_background_batch(const double[::1] logw, const double[:, ::1] suffix,
                            Py_ssize_t d, Py_ssize_t n_samples, gen):
    """First d coordinates after deleting the tie-broken max site."""
    cdef Py_ssize_t L = suffix.shape[0]
    cdef Py_ssize_t N = suffix.shape[1] - 1
    out_arr = np.zeros((n_samples, d), dtype=np.int64)
    max_arr = np.zeros(n_samples, dtype=np.int64)
    config_arr = np.zeros(L, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] out_max = max_arr
    cdef cnp.int64_t[::1] config = config_arr
    cdef bitgen_t *rng = _bitgen(gen)
    cdef Py_ssize_t i, ell, k, rem, j, pos, ties, target
    cdef cnp.int64_t m
    cdef double u
    for i in range(n_samples):
        rem = N
        for ell in range(L, 1, -1):
            u = rng.next_double(rng.state)
            k = _draw_site(logw, suffix, ell - 2, suffix[ell - 1, rem], rem, u)
            config[L - ell] = k
            rem -= k
        config[L - 1] = rem

        m = config[0]
        for j in range(1, L):
            if config[j] > m:
                m = config[j]
        ties = 0
        for j in range(L):
            if config[j] == m:
                ties += 1
        if ties == 1:
            pos = 0
            for j in range(L):
                if config[j] == m:
                    pos = j
                    break
        else:
            u = rng.next_double(rng.state)
            target = <Py_ssize_t> (u * ties)
            if target > ties - 1:
                target = ties - 1
            pos = 0
            for j in range(L):
                if config[j] == m:
                    if target == 0:
                        pos = j
                        break
                    target -= 1
        out_max[i] = m
        for j in range(d):
            out[i, j] = config[j] if j < pos else config[j + 1]
    return out_arr, max_arr


cdef inline void _fen_add(double[::1] tree, Py_ssize_t n, Py_ssize_t i, double delta) nogil:
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


cdef inline Py_ssize_t _fen_find(double[::1] tree, Py_ssize_t n, Py_ssize_t top_bit, double r) nogil:
    cdef Py_ssize_t idx = 0
    cdef Py_ssize_t bit = top_bit
    cdef Py_ssize_t nxt
    while bit:
        nxt = idx + bit
        if nxt <= n and tree[nxt] <= r:
            idx = nxt
            r -= tree[nxt]
        bit >>= 1
    if idx > n - 1:
        idx = n - 1
    return idx


def ctmc_simulate(cnp.int64_t[::1] occ, const double[::1] g_table, gen,
                  long long max_events=-1, double max_time=INFINITY,
                  bint time_weighted=True,
                  site_time=None, state_acc=None, long long state_base=0,
                  flux=None, dir_counts=None,
                  long long resync_every=(1 << 20)):
    """Event-driven dynamics; see _pure.ctmc_simulate for the contract."""
    cdef Py_ssize_t L = occ.shape[0]
    cdef bint has_site = site_time is not None
    cdef bint has_state = state_acc is not None
    cdef bint has_flux = flux is not None
    cdef bint has_dirs = dir_counts is not None
    cdef double[::1] site_time_v = site_time if has_site else np.zeros(1)
    cdef double[::1] state_acc_v = state_acc if has_state else np.zeros(1)
    cdef double[:, ::1] flux_v = flux if has_flux else np.zeros((1, 1))
    cdef cnp.int64_t[::1] dir_counts_v = dir_counts if has_dirs else np.zeros(2, dtype=np.int64)

    tree_arr = np.zeros(L + 1)
    cdef double[::1] tree = tree_arr
    cdef Py_ssize_t top_bit = 1
    while top_bit * 2 <= L:
        top_bit *= 2
    cdef Py_ssize_t i, x, y
    cdef double total = 0.0
    for i in range(L):
        _fen_add(tree, L, i, g_table[occ[i]])
        total += g_table[occ[i]]

    cdef bitgen_t *rng = _bitgen(gen)
    cdef double t = 0.0, dt = 0.0, t_event, u, max_drift = 0.0, fresh, drift
    cdef long long events = 0
    cdef bint absorbed = False

    site_last_arr = np.zeros(L)
    cdef double[::1] site_last = site_last_arr
    cdef cnp.int64_t max_occ = occ[0]
    for i in range(1, L):
        if occ[i] > max_occ:
            max_occ = occ[i]
    cdef double max_last = 0.0, max_integral = 0.0
    cdef long long code = 0, old_code
    pow_arr = np.ones(L, dtype=np.int64)
    cdef cnp.int64_t[::1] pows = pow_arr
    if has_state:
        for i in range(1, L):
            pows[i] = pows[i - 1] * state_base
        for i in range(L):
            code += occ[i] * pows[i]

    cdef double rx_old, ry_old, delta_x, delta_y
    cdef cnp.int64_t new_max

    while True:
        if max_events >= 0 and events >= max_events:
            break
        if total <= 0.0:
            absorbed = True
            break
        if time_weighted:
            u = rng.next_double(rng.state)
            dt = -log1p(-u) / total
            if t + dt > max_time:
                if has_state:
                    state_acc_v[code] += max_time - t
                t = max_time
                break
            if has_state:
                state_acc_v[code] += dt
            t_event = t + dt
        else:
            if has_state:
                state_acc_v[code] += 1.0
            t_event = t

        u = rng.next_double(rng.state)
        x = _fen_find(tree, L, top_bit, u * total)
        if g_table[occ[x]] <= 0.0:
            for i in range(L):
                if g_table[occ[i]] > 0.0:
                    x = i
                    break
        u = rng.next_double(rng.state)
        if u < 0.5:
            y = x - 1 if x > 0 else L - 1
            if has_dirs:
                dir_counts_v[0] += 1
        else:
            y = x + 1 if x < L - 1 else 0
            if has_dirs:
                dir_counts_v[1] += 1

        if has_site:
            site_time_v[x] += occ[x] * (t_event - site_last[x])
            site_last[x] = t_event
            site_time_v[y] += occ[y] * (t_event - site_last[y])
            site_last[y] = t_event

        old_code = code
        rx_old = g_table[occ[x]]
        ry_old = g_table[occ[y]]
        occ[x] -= 1
        occ[y] += 1
        delta_x = g_table[occ[x]] - rx_old
        delta_y = g_table[occ[y]] - ry_old
        _fen_add(tree, L, x, delta_x)
        _fen_add(tree, L, y, delta_y)
        total += delta_x + delta_y
        if has_state:
            code += pows[y] - pows[x]
        if has_flux:
            flux_v[old_code, code] += 1.0

        new_max = max_occ
        if occ[y] > new_max:
            new_max = occ[y]
        elif occ[x] + 1 == max_occ:
            new_max = occ[0]
            for i in range(1, L):
                if occ[i] > new_max:
                    new_max = occ[i]
        if new_max != max_occ:
            max_integral += max_occ * (t_event - max_last)
            max_last = t_event
            max_occ = new_max

        t = t_event
        events += 1
        if resync_every > 0 and events % resync_every == 0:
            fresh = 0.0
            for i in range(L):
                fresh += g_table[occ[i]]
            if fresh > 0.0:
                drift = abs(fresh - total) / fresh
                if drift > max_drift:
                    max_drift = drift
            for i in range(L + 1):
                tree[i] = 0.0
            for i in range(L):
                _fen_add(tree, L, i, g_table[occ[i]])
            total = fresh

    if has_site:
        for i in range(L):
            site_time_v[i] += occ[i] * (t - site_last[i])
    max_integral += max_occ * (t - max_last)
    fresh = 0.0
    for i in range(L):
        fresh += g_table[occ[i]]
    if fresh > 0.0 and total > 0.0:
        drift = abs(fresh - total) / fresh
        if drift > max_drift:
            max_drift = drift
    return events, t, max_integral, max_drift, absorbed
