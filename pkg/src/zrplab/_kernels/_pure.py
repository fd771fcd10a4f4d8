"""Pure numpy fallback for the hot kernels.

Mirrors zrplab._kernels._core (the Cython extension) operation for
operation: identical uniform-draw order and identical accumulation order,
so a fixed Generator state yields the same samples from either backend.
Integer outputs (samples, trajectories) agree bitwise; log tables agree to
a few ulps (numpy reduces with pairwise summation, the C loops serially).
"""

import numpy as np

BACKEND = "pure"


def convolve_log(p: np.ndarray, q: np.ndarray, nmax: int) -> np.ndarray:
    """Direct quadratic log-domain convolution, truncated to totals <= nmax.

    out[n] = log sum_j exp(p[j] + q[n-j]), computed against the window
    maximum so entries hundreds of nats below scale do not underflow.
    """
    kp = p.shape[0] - 1
    kq = q.shape[0] - 1
    out = np.full(nmax + 1, -np.inf)
    for n in range(min(nmax, kp + kq) + 1):
        jlo = max(0, n - kq)
        jhi = min(n, kp)
        vals = p[jlo : jhi + 1] + q[n - jlo : n - jhi - 1 if n - jhi > 0 else None : -1]
        m = vals.max()
        if m == -np.inf:
            continue
        out[n] = m + np.log(np.exp(vals - m).sum())
    return out


def _draw_site(logw, row_prev, log_denom, rem, u):
    """First k whose conditional cdf exceeds u; sequential cumsum order."""
    terms = np.exp(logw[: rem + 1] + row_prev[rem::-1] - log_denom)
    cum = np.cumsum(terms)
    k = int(np.searchsorted(cum, u, side="right"))
    return min(k, rem)


def sample_canonical_batch(logw: np.ndarray, suffix: np.ndarray, n_samples: int, gen) -> np.ndarray:
    """Exact samples of the canonical measure; (n_samples, L) int64.

    Site ell (1-based, counting down from L) is drawn by inverse cdf from
    P(k) = exp(logw[k] + logZ[rem-k, ell-1] - logZ[rem, ell]); the last
    site takes the remainder.  Consumes exactly L-1 uniforms per sample.
    """
    L = suffix.shape[0]
    N = suffix.shape[1] - 1
    out = np.zeros((n_samples, L), dtype=np.int64)
    for i in range(n_samples):
        rem = N
        for ell in range(L, 1, -1):
            u = gen.random()
            k = _draw_site(logw, suffix[ell - 2], suffix[ell - 1][rem], rem, u)
            out[i, L - ell] = k
            rem -= k
        out[i, L - 1] = rem
    return out


def _pick_max(config, gen):
    """(max value, tie-broken argmax); consumes one uniform iff >=2 ties."""
    m = config.max()
    ties = np.flatnonzero(config == m)
    if ties.shape[0] == 1:
        return int(m), int(ties[0])
    u = gen.random()
    j = min(int(u * ties.shape[0]), ties.shape[0] - 1)
    return int(m), int(ties[j])


def sample_background_batch(logw, suffix, d: int, n_samples: int, gen):
    """First d coordinates after deleting the (tie-broken) max site.

    Returns (background (n_samples, d) int64, max values (n_samples,) int64).
    """
    L = suffix.shape[0]
    N = suffix.shape[1] - 1
    out = np.zeros((n_samples, d), dtype=np.int64)
    out_max = np.zeros(n_samples, dtype=np.int64)
    config = np.zeros(L, dtype=np.int64)
    for i in range(n_samples):
        rem = N
        for ell in range(L, 1, -1):
            u = gen.random()
            k = _draw_site(logw, suffix[ell - 2], suffix[ell - 1][rem], rem, u)
            config[L - ell] = k
            rem -= k
        config[L - 1] = rem
        m, pos = _pick_max(config, gen)
        out_max[i] = m
        for j in range(d):
            out[i, j] = config[j] if j < pos else config[j + 1]
    return out, out_max


class _Fenwick:
    """Binary indexed tree over site rates; deterministic descent order."""

    def __init__(self, rates):
        n = rates.shape[0]
        self.n = n
        self.tree = np.zeros(n + 1)
        self.top_bit = 1
        while self.top_bit * 2 <= n:
            self.top_bit *= 2
        for i, r in enumerate(rates):
            self.add(i, r)

    def add(self, i, delta):
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & (-i)

    def total(self):
        s = 0.0
        i = self.n
        while i > 0:
            s += self.tree[i]
            i -= i & (-i)
        return s

    def find(self, r):
        """Smallest 0-based i with prefix(i+1) > r."""
        idx = 0
        bit = self.top_bit
        while bit:
            nxt = idx + bit
            if nxt <= self.n and self.tree[nxt] <= r:
                idx = nxt
                r -= self.tree[nxt]
            bit >>= 1
        return min(idx, self.n - 1)


def ctmc_simulate(
    occ,
    g_table,
    gen,
    max_events=-1,
    max_time=np.inf,
    time_weighted=True,
    site_time=None,
    state_acc=None,
    state_base=0,
    flux=None,
    dir_counts=None,
    resync_every=1 << 20,
):
    """Event-driven zero range dynamics on the torus; occ is updated in place.

    Per event the draws are: holding-time uniform (time_weighted mode only,
    dt = -log1p(-u)/total_rate), departure-site uniform, direction uniform.
    Collectors weight the pre-jump state by dt (or by 1 in event-count
    mode, which follows the jump chain and is not mu-stationary).

    Returns (n_events, elapsed_time, max_share_integral, max_rate_drift,
    absorbed).
    """
    L = occ.shape[0]
    rates = g_table[occ]
    fen = _Fenwick(rates)
    total = float(rates.sum())
    t = 0.0
    events = 0
    max_drift = 0.0
    absorbed = False

    site_last = np.zeros(L)
    max_occ = int(occ.max())
    max_last = 0.0
    max_integral = 0.0
    code = 0
    if state_acc is not None:
        code = int(np.dot(occ, state_base ** np.arange(L, dtype=np.int64)))

    while True:
        if max_events >= 0 and events >= max_events:
            break
        if total <= 0.0:
            absorbed = True
            break
        if time_weighted:
            u = gen.random()
            dt = -np.log1p(-u) / total
            if t + dt > max_time:
                if state_acc is not None:
                    state_acc[code] += max_time - t
                t = max_time
                break
            if state_acc is not None:
                state_acc[code] += dt
            t_event = t + dt
        else:
            if state_acc is not None:
                state_acc[code] += 1.0
            t_event = t

        u2 = gen.random()
        x = fen.find(u2 * total)
        if g_table[occ[x]] <= 0.0:
            nz = np.flatnonzero(g_table[occ] > 0.0)
            x = int(nz[0])
        u3 = gen.random()
        if u3 < 0.5:
            y = x - 1 if x > 0 else L - 1
            if dir_counts is not None:
                dir_counts[0] += 1
        else:
            y = x + 1 if x < L - 1 else 0
            if dir_counts is not None:
                dir_counts[1] += 1

        if site_time is not None:
            site_time[x] += occ[x] * (t_event - site_last[x])
            site_last[x] = t_event
            site_time[y] += occ[y] * (t_event - site_last[y])
            site_last[y] = t_event

        old_code = code
        rx_old = g_table[occ[x]]
        ry_old = g_table[occ[y]]
        occ[x] -= 1
        occ[y] += 1
        delta_x = g_table[occ[x]] - rx_old
        delta_y = g_table[occ[y]] - ry_old
        fen.add(x, delta_x)
        fen.add(y, delta_y)
        total += delta_x + delta_y
        if state_acc is not None:
            code += (state_base**y) - (state_base**x)
        if flux is not None:
            flux[old_code, code] += 1.0

        new_max = max_occ
        if occ[y] > new_max:
            new_max = int(occ[y])
        elif occ[x] + 1 == max_occ:
            new_max = int(occ.max())
        if new_max != max_occ:
            max_integral += max_occ * (t_event - max_last)
            max_last = t_event
            max_occ = new_max

        t = t_event
        events += 1
        if resync_every > 0 and events % resync_every == 0:
            fresh = float(g_table[occ].sum())
            if fresh > 0.0:
                drift = abs(fresh - total) / fresh
                if drift > max_drift:
                    max_drift = drift
            fen = _Fenwick(g_table[occ])
            total = fresh

    if site_time is not None:
        for x in range(L):
            site_time[x] += occ[x] * (t - site_last[x])
    max_integral += max_occ * (t - max_last)
    fresh = float(g_table[occ].sum())
    if fresh > 0.0 and total > 0.0:
        drift = abs(fresh - total) / fresh
        if drift > max_drift:
            max_drift = drift
    return events, t, max_integral, max_drift, absorbed
