"""The canonical measure mu_{N,L} as an executable object.

Exact single-site marginals, exact sampling by backward dynamic
programming over partial partition functions, the maximum statistic with
random tie-breaking, the background map that deletes the maximum site,
and the exact law of the maximum.

Sampling draws exactly L-1 uniforms per configuration (the last site is
forced) plus one uniform per tie-broken maximum when at least two sites
share it; given the same Generator state the compiled and pure backends
return identical samples.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .ensemble import log_weight_table
from .logconv import LogPmf, convolve, power_entry_log, self_convolve_power


@dataclass(frozen=True)
class OccupancyConfig:
    """Cyclic sequence of L non-negative occupancies with maintained total."""

    occupancies: np.ndarray = field(repr=False)
    total: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.occupancies, dtype=np.int64)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError("need at least one site")
        if (arr < 0).any():
            raise ValueError("occupancies must be non-negative")
        if int(arr.sum()) != self.total:
            raise ValueError(f"total {self.total} != sum of occupancies {int(arr.sum())}")
        object.__setattr__(self, "occupancies", arr)
        arr.setflags(write=False)

    @classmethod
    def from_occupancies(cls, seq) -> "OccupancyConfig":
        arr = np.asarray(seq, dtype=np.int64)
        return cls(arr, int(arr.sum()))

    @property
    def n_sites(self) -> int:
        return self.occupancies.shape[0]


@dataclass(frozen=True)
class SuffixTables:
    """Partial canonical partition functions log Z_{n,ell}.

    partial[ell-1][n] = log Z_{n,ell} for ell = 1..L, n = 0..N, so
    partial[0] is the single-site weight table and partial[L-1][N] is
    log Z_{N,L}.  Immutable after build; safe to share across threads.
    """

    alpha: float
    N: int
    L: int
    log_weights: np.ndarray = field(repr=False)
    partial: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.log_weights.setflags(write=False)
        self.partial.setflags(write=False)

    @property
    def log_z(self) -> float:
        """log Z_{N,L}."""
        return float(self.partial[self.L - 1, self.N])


def build_suffix_tables(alpha: float, N: int, L: int, method: str = "auto") -> SuffixTables:
    """All L partial convolutions; O(L*N) memory, amortized over samples."""
    if N < 0 or L < 1:
        raise ValueError(f"need N >= 0 and L >= 1, got N={N}, L={L}")
    logw = log_weight_table(alpha, N)
    partial = np.empty((L, N + 1))
    partial[0] = logw
    w = LogPmf(logw)
    row = w
    for ell in range(1, L):
        row = convolve(row, w, N, method=method)
        partial[ell] = row.log_masses
    return SuffixTables(alpha, N, L, logw, partial)


def exact_marginal_table(alpha: float, N: int, L: int, tables: SuffixTables | None = None) -> np.ndarray:
    """P[eta_1 = k] for k = 0..N; identical at every site by translation
    invariance.  Uses mu_{N,L}[eta_1 = k] = (1/a(k)) Z_{N-k,L-1} / Z_{N,L}."""
    if L < 2:
        raise ValueError(f"marginals need L >= 2, got L={L}")
    if tables is None:
        tables = build_suffix_tables(alpha, N, L)
    logw = tables.log_weights
    z_rest = tables.partial[L - 2][::-1]  # Z_{N-k, L-1}
    return np.exp(logw + z_rest - tables.log_z)


def exact_marginal(alpha: float, N: int, L: int, k: int, tables: SuffixTables | None = None) -> float:
    """Single-site canonical marginal probability at occupancy k."""
    if k < 0:
        raise ValueError(f"occupancy must be >= 0, got {k}")
    if k > N:
        return 0.0
    return float(exact_marginal_table(alpha, N, L, tables)[k])


def sample_canonical_batch(tables: SuffixTables, n_samples: int, rng) -> np.ndarray:
    """(n_samples, L) exact samples of mu_{N,L}; deterministic given rng."""
    return _kernels.sample_canonical_batch(tables.log_weights, tables.partial, n_samples, rng)


def sample_canonical(tables: SuffixTables, rng) -> OccupancyConfig:
    """One exact sample of mu_{N,L}."""
    row = sample_canonical_batch(tables, 1, rng)[0]
    return OccupancyConfig(row.copy(), tables.N)


def max_site(config: OccupancyConfig, rng) -> tuple[int, int]:
    """(max occupancy, argmax site index, 0-based).

    Ties are broken by one uniform draw, uniform over the argmax sites; no
    draw is consumed when the maximum is unique.
    """
    occ = config.occupancies
    m = int(occ.max())
    ties = np.flatnonzero(occ == m)
    if ties.shape[0] == 1:
        return m, int(ties[0])
    u = rng.random()
    j = min(int(u * ties.shape[0]), ties.shape[0] - 1)
    return m, int(ties[j])


def remove_max(config: OccupancyConfig, rng) -> OccupancyConfig:
    """Delete the (tie-broken) argmax coordinate, preserving order."""
    if config.n_sites < 2:
        raise ValueError("remove_max needs at least two sites")
    m, pos = max_site(config, rng)
    kept = np.delete(config.occupancies, pos)
    return OccupancyConfig(kept, config.total - m)


def sample_background_projection(tables: SuffixTables, d: int, rng) -> np.ndarray:
    """First d coordinates of T(eta) for one exact canonical sample."""
    out, _ = sample_background_batch(tables, d, 1, rng)
    return out[0]


def sample_background_batch(tables: SuffixTables, d: int, n_samples: int, rng):
    """Batch background projections; returns (tuples (n, d), max values (n,))."""
    if not 1 <= d <= tables.L - 1:
        raise ValueError(f"need 1 <= d <= L-1, got d={d}, L={tables.L}")
    return _kernels.sample_background_batch(tables.log_weights, tables.partial, d, n_samples, rng)


def max_law_exact(alpha: float, N: int, L: int, tail_cut: float = 1e-30) -> LogPmf:
    """Exact law of the maximum M_L under mu_{N,L}, as a LogPmf over 0..N.

    P[M <= m] = Zcap(m+1)_{N,L} / Z_{N,L} with all sites capped below m+1.
    For m on the upper half (at most one site can exceed m) the cdf and
    pmf come from one suffix-summed series with no cancellation; below
    that, per-m capped convolution powers are evaluated downward until the
    cdf drops under tail_cut, where remaining entries are left at zero
    mass (they are below 1e-30 of the total).
    """
    if N < 0 or L < 1:
        raise ValueError(f"need N >= 0 and L >= 1, got N={N}, L={L}")
    if L == 1:
        arr = np.full(N + 1, -np.inf)
        arr[N] = 0.0
        return LogPmf(arr, normalized=True)
    logw = log_weight_table(alpha, N)
    w = LogPmf(logw)
    z_rest = self_convolve_power(w, L - 1, N).log_masses  # log Z_{n, L-1}
    log_z = float(convolve(LogPmf(z_rest), w, N).log_masses[N])

    # v[k]: one site at k, the other L-1 unrestricted summing to N-k
    v = logw + z_rest[::-1]
    rev = np.logaddexp.accumulate(v[::-1])[::-1]  # rev[j] = LSE_{k >= j} v[k]
    log_l = np.log(L)

    m_min = -(-N // L)  # smallest achievable maximum
    m_half = N // 2  # from here up, at most one site can exceed m
    start = max(m_half, m_min)
    log_cdf = np.full(N + 1, -np.inf)
    need_exact = True  # cdf is tiny at the low end; recompute those exactly
    for m in range(start, N + 1):
        s = rev[m + 1] if m + 1 <= N else -np.inf
        frac = np.exp(log_l + s - log_z)
        if frac < 1.0:
            log_cdf[m] = np.log1p(-frac)
        if need_exact:
            if log_cdf[m] < np.log(1e-13):
                log_cdf[m] = _capped_cdf_log(logw, m, N, L, log_z)
            else:
                need_exact = False
    for m in range(start - 1, m_min - 1, -1):
        cur = _capped_cdf_log(logw, m, N, L, log_z)
        log_cdf[m] = cur
        if cur < np.log(tail_cut):
            break

    log_pmf = np.full(N + 1, -np.inf)
    for m in range(m_min, N + 1):
        if m >= start + 1:
            # telescoped complement difference: exact, cancellation-free
            log_pmf[m] = log_l + v[m] - log_z
        else:
            prev = log_cdf[m - 1] if m >= 1 else -np.inf
            log_pmf[m] = _log_diff(float(log_cdf[m]), float(prev))
    return LogPmf(log_pmf, normalized=True)


def _capped_cdf_log(logw: np.ndarray, m: int, N: int, L: int, log_z: float) -> float:
    """log P[M <= m] via the capped partition function."""
    if m < 0 or m * L < N:
        return -np.inf
    return power_entry_log(logw[: m + 1], L, N) - log_z


def _log_diff(log_a: float, log_b: float) -> float:
    """log(exp(log_a) - exp(log_b)), clamped at -inf for fp-negative."""
    if log_b == -np.inf:
        return log_a
    if log_a <= log_b:
        return -np.inf
    return log_a + np.log1p(-np.exp(log_b - log_a))
