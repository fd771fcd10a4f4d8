"""Condensation statements as numerical experiments.

Schedules realize the theorem hypotheses at finite size: the strict
asymptotic dominations are replaced by a margin multiplier (default 2)
and trend assertions along ladders of L.  All event masses are computed
exactly in log domain; Monte Carlo enters only for the projected
total-variation checks of the condensation theorem.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .canonical import max_law_exact, sample_background_batch
from .ensemble import (
    log_z_truncated,
    rho_c,
    rho_c_truncated,
    second_moment_truncated,
    truncated_site_law,
)
from .logconv import LogPmf, cap_support, convolve, log_sum_exp, power_entry_log, self_convolve_power, sum_law

ROUNDING_RULE = "half-away-from-zero"
BUDGET_CELLS = 2_000_000_000  # governor: N*L log-domain cells streamed
TABLE_CELLS = 100_000_000  # governor: single-table length cap
DEFAULT_MARGIN = 2.0
DEFAULT_DELTA = 1.5


class InfeasibleScheduleError(RuntimeError):
    """Schedule would exceed the memory/time governor; carries required N."""

    def __init__(self, msg: str, required_n: int):
        super().__init__(msg)
        self.required_n = required_n


class ScheduleRangeError(ValueError):
    """The rounded index N - (L-1) rho_{c,N} fell outside [1, N]."""


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero (fixed project-wide)."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class Schedule:
    """Finite-size realization of the theorem hypotheses at one (alpha, L).

    N = L*rho_L + k_L with k_L = ceil(sqrt(L*rho_L)); B_L, C_L, a_L follow
    the per-alpha tables with this N plugged in; t_L / t_L_plus bracket
    the condensate window around idx = round(N - (L-1) rho_{c,N}).

    bullet_ratio is rho_L over the margin-scaled density requirement; it
    is enforced (>= 1) for alpha > 1.  For alpha = 1 the exact requirement
    has no reachable fixed point at sane sizes (it sits beyond N ~ 1e9
    even at L = 4), so the schedule realizes the documented
    N ~ exp(margin * L * (log L)**delta) scale and records the ratio.
    """

    alpha: float
    L: int
    rho_L: int
    k_L: int
    N: int
    B_L: int
    C_L: int
    a_L: float
    t_L: int
    t_L_plus: int
    delta: float
    margin: float
    rho_cN: float
    idx: int
    bullet_ratio: float
    bullet_satisfied: bool


def _density_requirement(alpha: float, N: int, margin: float, delta: float) -> float:
    """Margin-scaled lower bound the theorem places on rho_L."""
    if alpha > 2.0:
        return margin * rho_c(alpha)
    r = rho_c_truncated(alpha, N)
    if alpha == 2.0:
        return margin * r
    if alpha > 1.0:
        return margin * r * math.log(N)
    return margin * r * math.log(math.log(N)) ** delta


def _schedule_n(L: int, rho: int) -> tuple[int, int]:
    k_l = math.ceil(math.sqrt(L * rho))
    return L * rho + k_l, k_l


def build_schedule(
    alpha: float,
    L: int,
    margin: float = DEFAULT_MARGIN,
    delta: float = DEFAULT_DELTA,
    budget_cells: int = BUDGET_CELLS,
    table_cells: int = TABLE_CELLS,
) -> Schedule:
    """Solve the self-referential density constraint and fill the tables.

    rho_L is the least integer satisfying the alpha-appropriate bullet
    with the margin factor, found by fixed-point iteration from the
    closed-form asymptotic seed; every structural invariant is verified
    before returning.  Raises InfeasibleScheduleError when N*L would
    exceed budget_cells or a table would exceed table_cells.
    """
    if L < 3:
        raise ValueError(f"schedules need L >= 3, got {L}")
    if margin < 1.0:
        raise ValueError(f"margin must be >= 1, got {margin}")
    if delta <= 1.0:
        raise ValueError(f"delta must be > 1, got {delta}")
    if alpha < 1.0:
        raise ValueError(f"theorem schedules need alpha >= 1, got {alpha}")

    log_l = math.log(L)
    if alpha > 2.0:
        rho = math.ceil(margin * rho_c(alpha))
        n, k_l = _schedule_n(L, rho)
    elif alpha == 1.0:
        n_seed = math.exp(margin * L * log_l**delta)
        if n_seed * L > 64 * budget_cells:
            raise InfeasibleScheduleError(
                f"alpha=1 schedule needs N ~ {n_seed:.3e} at L={L}", int(min(n_seed, 2**62))
            )
        rho = max(1, math.ceil(n_seed / L))
        n, k_l = _schedule_n(L, rho)
    else:
        if alpha == 2.0:
            rho = max(1, math.ceil(margin * math.log(L * margin + math.e)))
        else:
            rho = max(1, math.ceil((margin * L ** (2.0 - alpha) * log_l) ** (1.0 / (alpha - 1.0))))
        # rho -> ceil(requirement(N(rho))) is monotone, so iterating it
        # converges monotonically to the least admissible integer density
        for _ in range(500):
            n, k_l = _schedule_n(L, rho)
            if (n + 1) > 64 * table_cells:
                raise InfeasibleScheduleError(f"schedule diverged at L={L}", n)
            need = _density_requirement(alpha, n, margin, delta)
            new_rho = max(1, math.ceil(need))
            if new_rho == rho:
                break
            rho = new_rho
        else:
            raise InfeasibleScheduleError(f"density fixed point did not settle at L={L}", n)
        n, k_l = _schedule_n(L, rho)

    if n * L > budget_cells or (n + 1) > table_cells:
        raise InfeasibleScheduleError(
            f"schedule (alpha={alpha}, L={L}) needs N={n}: exceeds governor "
            f"(N*L <= {budget_cells}, table <= {table_cells})",
            n,
        )

    log_n = math.log(n)
    loglog_n = math.log(log_n)
    if alpha > 3.0:
        a_l = math.sqrt(L)
    elif alpha == 3.0:
        a_l = math.sqrt(L * log_n)
    elif alpha > 1.0:
        a_l = math.sqrt(L * n ** (3.0 - alpha))
    else:
        a_l = n * math.sqrt(L / log_n)

    if alpha > 2.0:
        b_div = log_n**2
    elif alpha == 2.0:
        b_div = rho**0.25 * log_n**0.75
    elif alpha > 1.0:
        b_div = 3.0 * log_n
    else:
        b_div = log_n * loglog_n ** (delta / 2.0)
    b_l = min(n, max(1, round_half_away(n / b_div)))

    if alpha > 2.0:
        c_l = math.ceil(math.sqrt(n * a_l))
    elif alpha == 2.0:
        c_l = round_half_away(n * (log_n / rho) ** 0.2)
    elif alpha > 1.0:
        c_l = round_half_away(n / math.sqrt(log_n))
    else:
        c_l = round_half_away(n * loglog_n ** (-delta / 3.0))
    # the proof needs a_L << C_L << N; at small L the tabulated C_L can dip
    # just below a_L, so pin the lower end
    c_l = min(n, max(c_l, math.ceil(a_l)))

    rho_cn = rho_c_truncated(alpha, n)
    idx = round_half_away(n - (L - 1) * rho_cn)
    need = _density_requirement(alpha, n, margin, delta)
    ratio = rho / need
    satisfied = ratio >= 1.0 - 1e-12

    if n != L * rho + k_l:
        raise AssertionError("schedule arithmetic violated N = L*rho_L + k_L")
    if not k_l < L * rho:
        raise AssertionError("k_L must be o(L rho_L); got k_L >= L*rho_L")
    if not a_l <= c_l <= n:
        raise AssertionError(f"need a_L <= C_L <= N, got a_L={a_l}, C_L={c_l}, N={n}")
    if alpha > 1.0 and not satisfied:
        raise AssertionError(f"density bullet violated: rho_L={rho} < required {need:.6g}")

    return Schedule(
        alpha=alpha,
        L=L,
        rho_L=rho,
        k_L=k_l,
        N=n,
        B_L=b_l,
        C_L=c_l,
        a_L=a_l,
        t_L=idx - c_l,
        t_L_plus=idx + c_l,
        delta=delta,
        margin=margin,
        rho_cN=rho_cn,
        idx=idx,
        bullet_ratio=ratio,
        bullet_satisfied=satisfied,
    )


@dataclass(frozen=True)
class LltReport:
    """Local limit theorem ratio nu^L[sum = N] / (L nu[idx])."""

    alpha: float
    N: int
    L: int
    rho_cN: float
    idx: int
    log_numerator: float
    log_denominator: float
    ratio: float
    rounding: str = ROUNDING_RULE


def llt_ratio(alpha: float, N: int, L: int, allow_degenerate: bool = False) -> LltReport:
    """Exact LLT ratio; the pmf index is rounded half away from zero.

    allow_degenerate=True admits L=1, where the ratio is exactly 1 (a
    self-test of the mechanics, not of the limit).
    """
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    if L < 2 and not allow_degenerate:
        raise ValueError(f"need L >= 2 (allow_degenerate for L=1), got {L}")
    site = truncated_site_law(alpha, N)
    idx = round_half_away(N - (L - 1) * site.mean)
    if not 1 <= idx <= N:
        raise ScheduleRangeError(
            f"rounded index {idx} outside [1, {N}]: schedule hypotheses violated"
        )
    log_num = float(sum_law(alpha, N, L).log_masses[N])
    log_den = float(np.log(L) + site.log_masses[idx])
    return LltReport(
        alpha=alpha,
        N=N,
        L=L,
        rho_cN=site.mean,
        idx=idx,
        log_numerator=log_num,
        log_denominator=log_den,
        ratio=float(np.exp(log_num - log_den)),
    )


@dataclass(frozen=True)
class DecompositionReport:
    """Exact masses of E0/E1/E2 and their one-large-site comparators.

    E0/E1 come from capped-table convolutions; E2 is the residual
    total - E0 - E1.  total_series rebuilds the total through the
    independent binomial decomposition over the number of sites at or
    above B_L, giving the two-path completeness check series_rel_err.
    ratios are E_i / (L nu[idx]); two_site_bound is the crude
    two-large-site estimate L**2 nu[B_L]**2 / (L nu[idx]).
    """

    alpha: float
    N: int
    L: int
    B_L: int
    idx: int
    log_total: float
    log_e0: float
    log_e1: float
    log_e2: float
    log_comparator: float
    log_total_series: float
    series_rel_err: float
    ratio0: float
    ratio1: float
    ratio2: float
    two_site_bound: float
    rounding: str = ROUNDING_RULE

    @property
    def e0(self) -> float:
        return float(np.exp(self.log_e0))

    @property
    def e1(self) -> float:
        return float(np.exp(self.log_e1))

    @property
    def e2(self) -> float:
        return float(np.exp(self.log_e2))

    @property
    def total(self) -> float:
        return float(np.exp(self.log_total))


def _log_diff(log_a: float, log_b: float) -> float:
    if log_b == -np.inf:
        return log_a
    if log_a <= log_b:
        return -np.inf
    return log_a + float(np.log1p(-np.exp(log_b - log_a)))


def event_decomposition(alpha: float, N: int, L: int, B_L: int, series_terms: bool = True) -> DecompositionReport:
    """Split {sum = N} by the count of sites holding >= B_L particles.

    E0: no site at B_L or above (capped sum law at N); E1: exactly one
    (L * sum_m nu[m] * capped (L-1)-fold sum law at N-m over m >= B_L);
    E2: the remainder.  All masses are exact in log domain; B_L = N+1 is
    admitted as the degenerate cap-above-support case.
    """
    if not 1 <= B_L <= N + 1:
        raise ValueError(f"need 1 <= B_L <= N+1, got B_L={B_L}, N={N}")
    if L < 2:
        raise ValueError(f"need L >= 2, got {L}")
    site = truncated_site_law(alpha, N)
    nu = LogPmf(site.log_masses, normalized=True)
    idx = round_half_away(N - (L - 1) * site.mean)
    low = cap_support(nu, B_L)
    high_arr = nu.log_masses.copy()
    high_arr[:B_L] = -np.inf
    log_total = float(sum_law(alpha, N, L).log_masses[N])
    log_e0 = power_entry_log(low, L, N)

    lowpow_prev = self_convolve_power(low, L - 1, N)
    log_e1 = float(np.log(L)) + _mixed_entry_tables(high_arr, lowpow_prev.log_masses, N)
    log_e01 = np.logaddexp(log_e0, log_e1)
    log_e2 = _log_diff(log_total, float(log_e01))

    if series_terms:
        log_total_series = _binomial_series_total(high_arr, low, N, L, B_L, log_e0, log_e1)
        series_rel_err = abs(float(np.expm1(log_total_series - log_total)))
    else:
        log_total_series = np.nan
        series_rel_err = np.nan

    # the ratio comparators presume a supercritical schedule; outside that
    # range the decomposition itself stands and the ratios degrade to nan
    if 1 <= idx <= N:
        log_comp = float(np.log(L) + site.log_masses[idx])
        nu_b = site.log_mass(B_L)
        two_site = float(np.exp(2.0 * np.log(L) + 2.0 * nu_b - log_comp))
        ratio0 = float(np.exp(log_e0 - log_comp))
        ratio1 = float(np.exp(log_e1 - log_comp))
        ratio2 = float(np.exp(log_e2 - log_comp))
    else:
        log_comp = np.nan
        two_site = np.nan
        ratio0 = ratio1 = ratio2 = np.nan
    return DecompositionReport(
        alpha=alpha,
        N=N,
        L=L,
        B_L=B_L,
        idx=idx,
        log_total=log_total,
        log_e0=float(log_e0),
        log_e1=float(log_e1),
        log_e2=float(log_e2),
        log_comparator=log_comp,
        log_total_series=float(log_total_series),
        series_rel_err=float(series_rel_err),
        ratio0=ratio0,
        ratio1=ratio1,
        ratio2=ratio2,
        two_site_bound=two_site,
    )


def _binomial_series_total(high_arr, low, N, L, B_L, log_e0, log_e1) -> float:
    """Total of {sum=N} as sum_j C(L,j) high^{*j} * low^{*(L-j)} at N.

    Independent reconstruction of sum_law[N] by the exact count j of
    sites at or above B_L; terms decay factorially (the count of large
    sites is nearly Poisson with mean lam = (L-1) P[eta >= B_L]), so the
    series is cut when a term falls 1e-18 below the running total.  The
    low-table powers are built once at the deepest planned level and
    extended upward by single convolutions.
    """
    high = LogPmf(high_arr)
    terms = [log_e0]
    if log_e1 > -np.inf:
        terms.append(log_e1)  # == log C(L,1) + high * low^{L-1} at N
    running = log_sum_exp(terms)

    j_struct = min(L, N // B_L) if B_L >= 1 else L
    if j_struct < 2:
        return float(running)
    lam = (L - 1) * float(np.exp(log_sum_exp(high_arr[B_L:])))
    # terms scale like lam**j / j!; plan two terms past the 1e-21 point
    term, j = 1.0, 0
    while (term > 1e-21 or j < lam + 2.0) and j < j_struct + 64:
        j += 1
        term *= lam / j
    j_plan = min(j_struct, max(4, j + 2))

    while True:
        # lowpows[i] = low^{*(L - j_plan + i)} for i = 0 .. j_plan - 2
        lowpows = [self_convolve_power(low, L - j_plan, N)] if L - j_plan >= 1 else [LogPmf.point_mass(0)]
        for _ in range(j_plan - 2):
            lowpows.append(convolve(lowpows[-1], low, N))
        highpow = high
        converged = False
        for j in range(2, j_plan + 1):
            highpow = convolve(highpow, high, N)
            lowpow = lowpows[j_plan - j]
            entry = _mixed_entry_tables(highpow.log_masses, lowpow.log_masses, N)
            log_comb = float(gammaln(L + 1) - gammaln(j + 1) - gammaln(L - j + 1))
            term = log_comb + entry
            terms.append(term)
            running = np.logaddexp(running, term)
            if term < running + np.log(1e-18):
                converged = True
                break
        if converged or j_plan >= j_struct:
            return float(log_sum_exp(terms))
        # rare: the Poisson estimate undershot; widen and redo the tail
        terms = terms[: 2 if log_e1 > -np.inf else 1]
        running = log_sum_exp(terms)
        j_plan = min(j_struct, j_plan * 2)


def _mixed_entry_tables(a_log: np.ndarray, b_log: np.ndarray, N: int) -> float:
    """log sum_m a[m] * b[N-m] over the overlapping range."""
    ka = a_log.shape[0] - 1
    kb = b_log.shape[0] - 1
    m_lo = max(0, N - kb)
    m_hi = min(N, ka)
    if m_lo > m_hi:
        return -np.inf
    a = a_log[m_lo : m_hi + 1]
    b = b_log[N - m_lo : N - m_hi - 1 if N - m_hi > 0 else None : -1]
    return log_sum_exp(a + b)


@dataclass(frozen=True)
class TvReport:
    """Monte Carlo projected total variation against the product law."""

    alpha: float
    N: int
    L: int
    d: int
    n_samples: int
    tv: float
    se: float
    tail_cutoff: int
    sample_from: str


def background_tv_estimate(
    alpha: float,
    N: int,
    L: int,
    d: int,
    n_samples: int,
    rng,
    tables=None,
    sample_from: str = "background",
    tail_quantile: float = 1e-4,
    n_bootstrap: int = 200,
) -> TvReport:
    """Projected TV between d background coordinates and nu_{1,N}^d.

    Draws exact canonical samples, deletes the maximum site, projects to
    the first d coordinates, and compares the empirical pmf (occupancies
    above the 1-tail_quantile point of nu are tail-bucketed) against the
    exact d-fold product.  The projected TV lower-bounds the full
    sigma-algebra TV of the condensation theorem; the supremum itself is
    not observable by Monte Carlo.  Bootstrap SE over multinomial
    resamples of the bucket counts.

    sample_from='product' draws from the comparator itself (test mode).
    """
    if d < 1 or d > L - 1:
        raise ValueError(f"need 1 <= d <= L-1, got d={d}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    site = truncated_site_law(alpha, N)
    masses = site.masses
    cdf = np.cumsum(masses)
    tail = 1.0 - cdf
    cut = int(np.searchsorted(tail <= tail_quantile, True))
    cut = max(cut, 1)
    cell_p = np.append(masses[:cut], max(1.0 - float(cdf[cut - 1]), 0.0))

    if sample_from == "background":
        if tables is None:
            from .canonical import build_suffix_tables

            tables = build_suffix_tables(alpha, N, L)
        draws, _ = sample_background_batch(tables, d, n_samples, rng)
    elif sample_from == "product":
        u = rng.random((n_samples, d))
        draws = np.searchsorted(cdf, u, side="right")
        draws = np.minimum(draws, N)
    else:
        raise ValueError(f"unknown sample_from {sample_from!r}")

    clipped = np.minimum(draws, cut)
    n_cells = cut + 1
    if d == 1:
        counts = np.bincount(clipped[:, 0], minlength=n_cells).astype(np.float64)
        exact = cell_p
    elif d == 2:
        flat = clipped[:, 0] * n_cells + clipped[:, 1]
        counts = np.bincount(flat, minlength=n_cells * n_cells).astype(np.float64)
        exact = np.outer(cell_p, cell_p).ravel()
    else:
        raise ValueError("projected TV is implemented for d in {1, 2}")

    tv = 0.5 * np.abs(counts / n_samples - exact).sum()
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        re = rng.multinomial(n_samples, counts / n_samples)
        boots[b] = 0.5 * np.abs(re / n_samples - exact).sum()
    return TvReport(
        alpha=alpha,
        N=N,
        L=L,
        d=d,
        n_samples=n_samples,
        tv=float(tv),
        se=float(boots.std(ddof=1)),
        tail_cutoff=cut,
        sample_from=sample_from,
    )


@dataclass(frozen=True)
class ProfileReport:
    """Summary of the exact law of the maximum under mu_{N,L}."""

    alpha: float
    N: int
    L: int
    rho_cN: float
    idx: int
    mean: float
    mean_centered: float
    mean_share: float
    quantiles: dict
    window_halfwidth: int | None
    window_prob: float | None


def condensate_profile(
    alpha: float,
    N: int,
    L: int,
    C_L: int | None = None,
    quantile_levels=(0.05, 0.25, 0.5, 0.75, 0.95),
) -> ProfileReport:
    """Mean, quantiles and condensate-window mass of M_L from its exact law."""
    law = max_law_exact(alpha, N, L)
    pmf = np.exp(law.log_masses)
    m = np.arange(N + 1)
    mean = float((m * pmf).sum())
    cdf = np.cumsum(pmf)
    site_mean = rho_c_truncated(alpha, N)
    idx = round_half_away(N - (L - 1) * site_mean)
    quantiles = {q: int(np.searchsorted(cdf, q)) for q in quantile_levels}
    window_prob = None
    if C_L is not None:
        hi = min(idx + C_L, N)
        lo = idx - C_L
        upper = cdf[hi]
        lower = cdf[lo - 1] if lo >= 1 else 0.0
        window_prob = float(upper - lower)
    return ProfileReport(
        alpha=alpha,
        N=N,
        L=L,
        rho_cN=site_mean,
        idx=idx,
        mean=mean,
        mean_centered=mean - idx,
        mean_share=mean / N if N else 0.0,
        quantiles=quantiles,
        window_halfwidth=C_L,
        window_prob=window_prob,
    )


@dataclass(frozen=True)
class OrderRow:
    quantity: str
    alpha: float
    N: int
    value: float
    predictor: float
    ratio: float


_ORDER_VALUES = {
    "rho_cN": rho_c_truncated,
    "Z_N": lambda a, n: math.exp(log_z_truncated(a, n)),
    "second_moment": second_moment_truncated,
}


def order_check(quantity: str, alpha: float, N_grid) -> list[OrderRow]:
    """Exact value / Theta-predictor ratios across an increasing N grid."""
    from .ensemble import asymptotic_predictor

    grid = list(N_grid)
    if any(n < 2 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("N_grid must be increasing with every N >= 2")
    if quantity not in _ORDER_VALUES:
        raise ValueError(f"unknown quantity {quantity!r}")
    fn = _ORDER_VALUES[quantity]
    rows = []
    for n in grid:
        value = float(fn(alpha, n))
        pred = asymptotic_predictor(quantity, alpha, n)
        rows.append(OrderRow(quantity, alpha, n, value, pred, value / pred))
    return rows
