"""Single-site ensemble quantities for the zero range process.

The jump rate family is g(0)=0, g(1)=1, g(k)=(k/(k-1))**alpha for k>=2,
so the stationary weight of occupancy k is 1/a(k) with a(k)=k**alpha and
a(0)=1.  Everything downstream (truncated grand-canonical laws, canonical
partition functions, densities) is built from these weights.

All functions here are pure; returned objects are immutable after
construction and safe to share across threads.
"""

from dataclasses import dataclass, field

import numpy as np

CRITICAL_FUGACITY = 1.0  # radius of convergence of the weight series, any alpha

THEOREM_ALPHA_MIN = 1.0


class DivergentDensityError(ValueError):
    """Density requested at the critical fugacity where it is infinite."""


class OutOfScopeError(ValueError):
    """Parameter outside the regime the asymptotic tables cover."""


def alpha_scope(alpha: float) -> str:
    """Classify alpha: 'theorem' for alpha >= 1, else 'outside-theorem-scope'.

    Raw weight evaluation works for any real alpha; the condensation
    results need alpha >= 1, so callers doing theorem-mode work should
    check this flag.
    """
    return "theorem" if alpha >= THEOREM_ALPHA_MIN else "outside-theorem-scope"


def jump_rate(alpha: float, k: int) -> float:
    """Rate g(k) at which a particle leaves a site holding k particles."""
    if k < 0:
        raise ValueError(f"occupancy must be >= 0, got {k}")
    if k == 0:
        return 0.0
    if k == 1:
        return 1.0
    return (k / (k - 1.0)) ** alpha


def log_stationary_weight(alpha: float, k: int) -> float:
    """log of the stationary weight 1/a(k); a(0)=1, a(k)=k**alpha."""
    if k < 0:
        raise ValueError(f"occupancy must be >= 0, got {k}")
    if k == 0:
        return 0.0
    return -alpha * np.log(k)


def log_weight_table(alpha: float, cutoff: int, fugacity: float = CRITICAL_FUGACITY) -> np.ndarray:
    """Vector of log(phi**k / a(k)) for k = 0..cutoff."""
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    if not 0.0 < fugacity <= CRITICAL_FUGACITY:
        raise ValueError(f"fugacity must lie in (0, 1], got {fugacity}")
    table = np.zeros(cutoff + 1)
    if cutoff >= 1:
        k = np.arange(1, cutoff + 1, dtype=np.float64)
        table[1:] = k * np.log(fugacity) - alpha * np.log(k)
    return table


@dataclass(frozen=True)
class TruncatedSiteLaw:
    """The single-site law nu_{phi,N}[k] = phi**k / (Z_N(phi) a(k)), k <= N.

    log_z is log Z_N(phi); mean equals the finite-size critical density
    rho_{c,N} when phi = 1.  The mass table is normalized and, at phi = 1,
    non-increasing in k (strictly decreasing from k = 1 on).
    """

    alpha: float
    cutoff: int
    fugacity: float
    log_masses: np.ndarray = field(repr=False)
    log_z: float
    mean: float
    second_moment: float

    def __post_init__(self):
        self.log_masses.setflags(write=False)

    @property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)

    def log_mass(self, k: int) -> float:
        """log nu[k], -inf outside the support 0..cutoff."""
        if 0 <= k <= self.cutoff:
            return float(self.log_masses[k])
        return -np.inf


def truncated_site_law(alpha: float, cutoff: int, fugacity: float = CRITICAL_FUGACITY) -> TruncatedSiteLaw:
    """Build nu_{phi,N} with its normalizer and first two moments.

    The normalizer is accumulated with a log-sum-exp against the running
    maximum, so cutoffs up to 10**7 stay exact to ~1e-15 relative.
    """
    logw = log_weight_table(alpha, cutoff, fugacity)
    shift = logw.max()
    lin = np.exp(logw - shift)
    z = lin.sum()
    log_z = shift + np.log(z)
    log_masses = logw - log_z
    k = np.arange(cutoff + 1, dtype=np.float64)
    mean = float((k * lin).sum() / z)
    second = float((k * k * lin).sum() / z)
    return TruncatedSiteLaw(alpha, cutoff, fugacity, log_masses, float(log_z), mean, second)


def rho_c_truncated(alpha: float, cutoff: int) -> float:
    """rho_{c,N}: the mean of nu_{1,N}, the background density surrogate."""
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    if cutoff == 0:
        return 0.0
    k = np.arange(1, cutoff + 1, dtype=np.float64)
    w = k ** (-alpha)
    return float((k * w).sum() / (1.0 + w.sum()))


def log_z_truncated(alpha: float, cutoff: int) -> float:
    """log Z_N(1) = log(1 + sum_{k=1}^{N} k**(-alpha))."""
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    if cutoff == 0:
        return 0.0
    k = np.arange(1, cutoff + 1, dtype=np.float64)
    return float(np.log1p((k ** (-alpha)).sum()))


def second_moment_truncated(alpha: float, cutoff: int) -> float:
    """E[eta**2] under nu_{1,N}."""
    if cutoff <= 0:
        return 0.0
    k = np.arange(1, cutoff + 1, dtype=np.float64)
    w = k ** (-alpha)
    return float((k * k * w).sum() / (1.0 + w.sum()))


def _tail_bound_power_series(c: float, phi: float, k_next: int) -> float:
    """Upper bound for sum_{k >= k_next} k**c * phi**k, valid for phi < 1.

    Uses (k_next + j)**c <= k_next**c * exp(c*j/k_next) for c >= 0 and
    (k_next + j)**c <= k_next**c for c < 0, then sums the geometric series.
    """
    if phi >= 1.0:
        raise ValueError("geometric tail bound needs phi < 1")
    head = phi**k_next * k_next**c
    if c > 0:
        ratio = phi * np.exp(c / k_next)
        if ratio >= 1.0:
            return np.inf
        return head / (1.0 - ratio)
    return head / (1.0 - phi)


def _zeta_tail(s: float, k_next: int) -> tuple[float, float]:
    """(midpoint-rule tail, rigorous error bound) for sum_{k >= k_next} k**-s.

    The tail is approximated by int_{k_next-1/2}^inf x**-s dx; the midpoint
    rule on unit intervals has per-interval error f''(xi)/24, which sums to
    at most s * (k_next-1)**(-s-1) / 24.
    """
    tail = (k_next - 0.5) ** (1.0 - s) / (s - 1.0)
    err = s * (k_next - 1.0) ** (-s - 1.0) / 24.0
    return tail, err


def fugacity_density(alpha: float, fugacity: float, tail_tol: float = 1e-10) -> float:
    """Expected particles per site rho(phi) under the untruncated law nu_phi.

    The series numerator sum k*phi**k/a(k) and normalizer Z(phi) are summed
    explicitly over a prefix; the remainder is closed with an explicit tail
    estimate (geometric bound for phi < 1, integral midpoint correction with
    a rigorous error bound for phi = 1) iterated until the tail error drops
    below tail_tol relative to the running values.

    Raises DivergentDensityError for phi = 1 with alpha <= 2, where the
    critical density is infinite.
    """
    if not 0.0 < fugacity <= CRITICAL_FUGACITY:
        raise ValueError(f"fugacity must lie in (0, 1], got {fugacity}")
    at_critical = fugacity == CRITICAL_FUGACITY
    if at_critical and alpha <= 2.0:
        raise DivergentDensityError(
            f"rho_c is finite only for alpha > 2 (got alpha={alpha}); "
            "rho(1) diverges in this regime"
        )
    num = 0.0  # sum k**(1-alpha) phi**k
    den = 1.0  # Z(phi), k=0 term included (a(0)=1)
    block = 4096
    k_lo = 1
    while True:
        k = np.arange(k_lo, k_lo + block, dtype=np.float64)
        w = fugacity**k * k ** (-alpha)
        num += float((k * w).sum())
        den += float(w.sum())
        k_next = k_lo + block
        if at_critical:
            num_tail, num_err = _zeta_tail(alpha - 1.0, k_next)
            den_tail, den_err = _zeta_tail(alpha, k_next)
            if num_err <= tail_tol * (num + num_tail) and den_err <= tail_tol * (den + den_tail):
                return (num + num_tail) / (den + den_tail)
        else:
            num_tail = _tail_bound_power_series(1.0 - alpha, fugacity, k_next)
            den_tail = _tail_bound_power_series(-alpha, fugacity, k_next)
            if num_tail <= tail_tol * num and den_tail <= tail_tol * den:
                return num / den
        k_lo = k_next
        block = min(block * 2, 1 << 22)


def rho_c(alpha: float, tail_tol: float = 1e-10) -> float:
    """Critical density rho_c = lim_{phi -> 1} rho(phi); finite iff alpha > 2."""
    return fugacity_density(alpha, CRITICAL_FUGACITY, tail_tol)


_PREDICTOR_QUANTITIES = ("rho_cN", "Z_N", "second_moment")


def asymptotic_predictor(quantity: str, alpha: float, cutoff: int) -> float:
    """Theta-class representative (constant 1) for the growth of a quantity.

    rho_cN:         1 (alpha>2), log N (alpha=2), N**(2-alpha) (1<alpha<2),
                    N/log N (alpha=1)
    Z_N:            1 (alpha>1), log N (alpha=1)
    second_moment:  1 (alpha>3), log N (alpha=3), N**(3-alpha) (1<alpha<3),
                    N**2/log N (alpha=1)

    Tests against these must assert bounded ratios, never equality; the
    hidden constants are unspecified.
    """
    if quantity not in _PREDICTOR_QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}, expected one of {_PREDICTOR_QUANTITIES}")
    if alpha < THEOREM_ALPHA_MIN:
        raise OutOfScopeError(f"asymptotic orders are tabulated for alpha >= 1, got {alpha}")
    if cutoff < 2:
        raise ValueError(f"cutoff must be >= 2, got {cutoff}")
    n = float(cutoff)
    log_n = np.log(n)
    if quantity == "rho_cN":
        if alpha > 2.0:
            return 1.0
        if alpha == 2.0:
            return log_n
        if alpha > 1.0:
            return n ** (2.0 - alpha)
        return n / log_n
    if quantity == "Z_N":
        return 1.0 if alpha > 1.0 else log_n
    # second_moment
    if alpha > 3.0:
        return 1.0
    if alpha == 3.0:
        return log_n
    if alpha > 1.0:
        return n ** (3.0 - alpha)
    return n * n / log_n
