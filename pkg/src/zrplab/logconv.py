"""Log-domain probability tables and convolutions.

Tables are vectors of log-masses over occupancies/totals 0..K with -inf
for zero mass; sub-normalized tables (capped supports) are first class and
compose under convolution without renormalization.

Two convolution paths exist.  The reference is the direct quadratic
log-domain kernel (exact for any dynamic range).  Above a size threshold
an FFT fast path takes over: inputs are rescaled by their maxima,
convolved linearly, and mapped back to log space.  The fast path is
validated once per process against the reference at small sizes and is
guaranteed to 1e-9 relative on masses within 1e-6 of the table maximum;
entries hundreds of nats below the maximum can fall to -inf there, so
deep-tail single entries go through power_entry_log (exponential tilting)
or an explicit method="direct".

All reductions run in a fixed deterministic order; repeated calls are
bitwise reproducible.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .ensemble import log_weight_table, truncated_site_law

# above this many window cells the direct quadratic pass is no longer cheap
DIRECT_CELLS_MAX = 1 << 26
# fast-path guarantee: relative accuracy on masses within this factor of max
FFT_SAFE_RELATIVE = 1e-6
FFT_MATCH_RTOL = 1e-9
# linear-space junk far below the max is trimmed back to zero mass
_FFT_TRIM = 1e-280

_fft_validated = False


def log_sum_exp(values) -> float:
    """log sum exp against the running maximum; -inf for empty/all -inf."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return -np.inf
    m = arr.max()
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.exp(arr - m).sum()))


@dataclass(frozen=True)
class LogPmf:
    """Log-mass table over 0..K; possibly sub-normalized.

    cap records an occupancy cap (entries at k >= cap are -inf); normalized
    is True only when the masses are known to sum to 1.
    """

    log_masses: np.ndarray = field(repr=False)
    cap: int | None = None
    normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.log_masses, dtype=np.float64)
        object.__setattr__(self, "log_masses", arr)
        arr.setflags(write=False)

    @classmethod
    def from_masses(cls, masses, normalized: bool = False) -> "LogPmf":
        masses = np.asarray(masses, dtype=np.float64)
        if (masses < 0).any():
            raise ValueError("masses must be non-negative")
        with np.errstate(divide="ignore"):
            return cls(np.log(masses), normalized=normalized)

    @classmethod
    def point_mass(cls, k: int) -> "LogPmf":
        arr = np.full(k + 1, -np.inf)
        arr[k] = 0.0
        return cls(arr, normalized=True)

    @property
    def support_max(self) -> int:
        return self.log_masses.shape[0] - 1

    def log_mass(self, k: int) -> float:
        """log mass at k; queries outside 0..K return -inf."""
        if 0 <= k <= self.support_max:
            return float(self.log_masses[k])
        return -np.inf

    def log_total(self) -> float:
        return log_sum_exp(self.log_masses)

    def total(self) -> float:
        return float(np.exp(self.log_total()))

    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)


def _finite_span(arr: np.ndarray):
    idx = np.flatnonzero(arr > -np.inf)
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def _window_cells(kp: int, kq: int, nmax: int) -> int:
    return (min(kp, kq, nmax) + 1) * (min(nmax, kp + kq) + 1)


def _convolve_fft(p: np.ndarray, q: np.ndarray, nmax: int) -> np.ndarray:
    span_p = _finite_span(p)
    span_q = _finite_span(q)
    if span_p is None or span_q is None:
        return np.full(nmax + 1, -np.inf)
    offp = p.max()
    offq = q.max()
    a = np.exp(p - offp)
    b = np.exp(q - offq)
    lin = fftconvolve(a, b)[: nmax + 1]
    out = np.full(nmax + 1, -np.inf)
    got = lin.shape[0]
    # spectral junk shows up as tiny or negative values where the true
    # mass is zero; keep strictly positive cells above the trim floor and
    # inside the structural support of the convolution
    floor = max(lin.max() * _FFT_TRIM, 0.0)
    ok = lin > floor
    n = np.arange(got)
    ok &= (n >= span_p[0] + span_q[0]) & (n <= span_p[1] + span_q[1])
    out[:got][ok] = np.log(lin[ok]) + (offp + offq)
    return out


def _validate_fast_path() -> None:
    """One-shot per process: fast path must reproduce the reference."""
    global _fft_validated
    if _fft_validated:
        return
    rng = np.random.Generator(np.random.Philox(20240917))
    for kp, kq, capped in ((257, 383, False), (300, 300, True), (64, 511, False)):
        p = np.log(rng.random(kp + 1) + 1e-6) - 0.002 * np.arange(kp + 1.0)
        q = np.log(rng.random(kq + 1) + 1e-6) - 0.003 * np.arange(kq + 1.0)
        if capped:
            p[kp // 2 :] = -np.inf
        nmax = kp + kq
        ref = _kernels.convolve_log(p, q, nmax)
        fast = _convolve_fft(p, q, nmax)
        scale = ref.max()
        check = ref >= scale + np.log(FFT_SAFE_RELATIVE)
        rel = np.abs(np.expm1(fast[check] - ref[check]))
        worst = float(rel.max()) if rel.size else np.inf
        if worst > FFT_MATCH_RTOL:
            raise RuntimeError(
                "FFT convolution fast path failed validation against the "
                f"direct reference (worst relative error {worst:.3e})"
            )
    _fft_validated = True


def convolve(p: LogPmf, q: LogPmf, max_total: int, method: str = "auto") -> LogPmf:
    """Convolution truncated to totals <= max_total.

    Sub-normalization propagates: capped inputs yield capped-event
    sub-probabilities.  method is 'auto', 'direct' or 'fft'.
    """
    if max_total < 0:
        raise ValueError(f"max_total must be >= 0, got {max_total}")
    kp = p.support_max
    kq = q.support_max
    if method == "auto":
        method = "direct" if _window_cells(kp, kq, max_total) <= DIRECT_CELLS_MAX else "fft"
    if method == "fft":
        _validate_fast_path()
        out = _convolve_fft(p.log_masses, q.log_masses, max_total)
    elif method == "direct":
        out = _kernels.convolve_log(p.log_masses, q.log_masses, max_total)
    else:
        raise ValueError(f"unknown method {method!r}")
    normalized = p.normalized and q.normalized and max_total >= kp + kq
    return LogPmf(out, normalized=normalized)


def cap_support(p: LogPmf, cap: int) -> LogPmf:
    """Zero the mass at occupancies k >= cap; flagged sub-normalized.

    The retained mass is P[eta < cap]; the table is not renormalized, so
    capped-event sub-probabilities compose by convolution.
    """
    if cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")
    if cap > p.support_max:
        arr = p.log_masses.copy()
    elif cap == 0:
        arr = np.array([-np.inf])
    else:
        # shrink the table; queries at k >= cap return -inf either way
        arr = p.log_masses[:cap].copy()
    return LogPmf(arr, cap=cap, normalized=False)


def self_convolve_power(p: LogPmf, L: int, max_total: int, method: str = "auto", strategy: str = "auto") -> LogPmf:
    """L-fold self-convolution truncated to totals <= max_total.

    strategy 'fold' left-folds L-1 convolutions, 'double' uses binary
    powering; both are algebraically identical (tested) and 'auto' picks
    by L.  Intermediate truncation at max_total is exact for all queried
    totals.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if strategy == "auto":
        strategy = "fold" if L <= 4 else "double"
    base_arr = p.log_masses[: max_total + 1]
    base = LogPmf(base_arr, normalized=p.normalized and p.support_max <= max_total)
    if L == 1:
        return base
    if strategy == "fold":
        acc = base
        for _ in range(L - 1):
            acc = convolve(acc, base, max_total, method=method)
    elif strategy == "double":
        acc = None
        sq = base
        n = L
        while n:
            if n & 1:
                acc = sq if acc is None else convolve(acc, sq, max_total, method=method)
            n >>= 1
            if n:
                sq = convolve(sq, sq, max_total, method=method)
        assert acc is not None
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    normalized = p.normalized and L * p.support_max <= max_total
    return LogPmf(acc.log_masses, normalized=normalized)


def canonical_partition_log(alpha: float, N: int, L: int, method: str = "auto") -> float:
    """log Z_{N,L}: the L-fold convolution of the stationary weights at N."""
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    w = LogPmf(log_weight_table(alpha, N), normalized=False)
    return float(self_convolve_power(w, L, N, method=method).log_masses[N])


def canonical_partition_table(alpha: float, N: int, L: int, method: str = "auto") -> LogPmf:
    """Table of log Z_{n,L} for n = 0..N."""
    w = LogPmf(log_weight_table(alpha, N), normalized=False)
    return self_convolve_power(w, L, N, method=method)


def sum_law(alpha: float, N: int, L: int, method: str = "auto") -> LogPmf:
    """Law of the sum of L iid nu_{1,N} sites, restricted to totals 0..N.

    Satisfies sum_law[N] = exp(log Z_{N,L} - L log Z_N(1)); sub-normalized
    for L >= 2 since totals above N are dropped.
    """
    site = truncated_site_law(alpha, N)
    p = LogPmf(site.log_masses, normalized=True)
    return self_convolve_power(p, L, N, method=method)


def _tilted_mean(p: np.ndarray, k: np.ndarray, theta: float) -> float:
    v = p + theta * k
    m = v.max()
    w = np.exp(v - m)
    return float((k * w).sum() / w.sum())


def power_entry_log(p: LogPmf | np.ndarray, L: int, n: int, method: str = "auto") -> float:
    """Exact log of (p^{*L})[n] for a single total n.

    Cheap cases run the direct reference.  Large cases use exponential
    tilting: the table is tilted so the L-fold mode sits at n, convolved
    linearly (FFT), and the entry is un-tilted.  Tilting is algebraically
    exact, so deep-tail entries far below the untilted maximum come out
    with full relative accuracy.
    """
    arr = p.log_masses if isinstance(p, LogPmf) else np.asarray(p, dtype=np.float64)
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    span = _finite_span(arr)
    if span is None:
        return -np.inf
    kmin, kmax = span
    if n < L * kmin or n > L * kmax:
        return -np.inf
    if n == L * kmin:
        return float(L * arr[kmin])
    if n == L * kmax:
        return float(L * arr[kmax])
    if np.isinf(arr[kmin : kmax + 1]).any():
        method = "direct"  # tilting assumes contiguous support
    cells = _window_cells(kmax, kmax, n) * max(int(np.ceil(np.log2(L))), 1)
    if method == "direct" or (method == "auto" and cells <= DIRECT_CELLS_MAX):
        pm = LogPmf(arr) if not isinstance(p, LogPmf) else p
        return float(self_convolve_power(pm, L, n, method="direct").log_masses[n])

    k = np.arange(arr.shape[0], dtype=np.float64)
    target = n / L
    lo, hi = -1.0, 1.0
    for _ in range(200):
        if _tilted_mean(arr, k, lo) <= target:
            break
        lo *= 2.0
    for _ in range(200):
        if _tilted_mean(arr, k, hi) >= target:
            break
        hi *= 2.0
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if _tilted_mean(arr, k, mid) < target:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    v = arr + theta * k
    log_k_theta = log_sum_exp(v)
    tilted = LogPmf(v - log_k_theta, normalized=True)
    _validate_fast_path()
    entry = self_convolve_power(tilted, L, n, method="fft").log_masses[n]
    return float(entry + L * log_k_theta - theta * n)
