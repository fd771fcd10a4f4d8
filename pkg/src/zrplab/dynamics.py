"""Event-driven continuous-time simulation of the zero range process.

A particle leaves a site holding k particles at rate g(k) and lands on
one of its two torus neighbours with probability 1/2 each (the generator
attaches rate g/2 per directed edge; total departure rate per site is
g).  Site selection runs over a binary-indexed aggregate of the rates,
O(log L) per event, with a full rate resynchronization every
`resync_every` events to cap floating-point drift.

Per event the draws are: holding-time uniform (time-weighted mode only),
site uniform, direction uniform.  Event-count mode skips the clock draw;
its per-state weights follow the jump chain, which is not mu-stationary,
so time-weighted mode is the default for stationarity checks.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .canonical import OccupancyConfig

STATE_SPACE_CAP = 10**6
RESYNC_EVERY = 1 << 20


class AbsorbingStateError(RuntimeError):
    """Step requested from a configuration with zero total rate (N=0)."""


class StateSpaceTooLarge(ValueError):
    """Enumeration refused; carries the size estimate."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"state space has {size} configurations, above the cap {cap}")
        self.size = size
        self.cap = cap


def enumerate_state_space(N: int, L: int, cap: int = STATE_SPACE_CAP):
    """All compositions of N into L ordered non-negative parts.

    Canonical order: lexicographic in (eta_1, ..., eta_L), eta_1 ascending
    first.  Refuses when binom(N+L-1, L-1) exceeds the cap.
    """
    if N < 0 or L < 1:
        raise ValueError(f"need N >= 0 and L >= 1, got N={N}, L={L}")
    size = math.comb(N + L - 1, L - 1)
    if size > cap:
        raise StateSpaceTooLarge(size, cap)
    out = []

    def rec(prefix, rem, slots):
        if slots == 1:
            out.append(prefix + (rem,))
            return
        for k in range(rem + 1):
            rec(prefix + (k,), rem - k, slots - 1)

    rec((), N, L)
    return out


def jump_rate_table(alpha: float, max_occupancy: int) -> np.ndarray:
    """g(k) for k = 0..max_occupancy, as one shared lookup table.

    Both kernel backends read rates from this table, so trajectories are
    reproducible across backends for a fixed rng stream.
    """
    g = np.empty(max_occupancy + 1)
    g[0] = 0.0
    if max_occupancy >= 1:
        g[1] = 1.0
    if max_occupancy >= 2:
        k = np.arange(2, max_occupancy + 1, dtype=np.float64)
        g[2:] = (k / (k - 1.0)) ** alpha
    return g


@dataclass
class DynState:
    """Mutable simulation state for single-stepping.

    total_rate is maintained incrementally and resynchronized against a
    fresh sum on demand; config keeps its particle total by construction.
    """

    occupancies: np.ndarray
    g_table: np.ndarray
    total_rate: float
    time: float = 0.0
    event_count: int = 0

    @classmethod
    def from_config(cls, config: OccupancyConfig, alpha: float) -> "DynState":
        occ = config.occupancies.copy()
        g = jump_rate_table(alpha, config.total)
        return cls(occ, g, float(g[occ].sum()))

    @property
    def n_sites(self) -> int:
        return self.occupancies.shape[0]

    def resync_total_rate(self) -> float:
        """Recompute the rate sum; returns relative drift of the old value."""
        fresh = float(self.g_table[self.occupancies].sum())
        drift = abs(fresh - self.total_rate) / fresh if fresh > 0 else 0.0
        self.total_rate = fresh
        return drift


def step_event(state: DynState, rng) -> DynState:
    """Advance one event in place: holding time, departure site, direction.

    Raises AbsorbingStateError when the total rate is zero (all sites
    empty); the state is then absorbing and the step is refused.
    """
    if state.n_sites < 2:
        raise ValueError("dynamics need at least two sites")
    if state.total_rate <= 0.0:
        raise AbsorbingStateError("zero total rate: no occupied site to jump from")
    occ = state.occupancies
    rates = state.g_table[occ]
    u = rng.random()
    dt = -np.log1p(-u) / state.total_rate
    r = rng.random() * state.total_rate
    acc = 0.0
    x = state.n_sites - 1
    for i in range(state.n_sites):
        acc += rates[i]
        if acc > r:
            x = i
            break
    if rates[x] <= 0.0:
        x = int(np.flatnonzero(rates > 0)[0])
    u3 = rng.random()
    L = state.n_sites
    y = (x - 1) % L if u3 < 0.5 else (x + 1) % L
    state.total_rate += state.g_table[occ[x] - 1] - state.g_table[occ[x]]
    state.total_rate += state.g_table[occ[y] + 1] - state.g_table[occ[y]]
    occ[x] -= 1
    occ[y] += 1
    state.time += dt
    state.event_count += 1
    return state


@dataclass
class TrajectoryStats:
    """Collectors from one trajectory.

    state_weights (when the encoded space is small enough) accumulates
    time in each state in time-weighted mode, or visit counts in
    event-count mode; its entries sum to the elapsed time (resp. event
    count).  site_means are time-weighted mean occupancies; max_share_mean
    is the time average of M_L/N.
    """

    alpha: float
    n_sites: int
    total: int
    time_weighted: bool
    n_events: int
    elapsed_time: float
    absorbed: bool
    max_share_mean: float
    max_rate_drift: float
    site_means: np.ndarray | None = None
    dir_counts: np.ndarray | None = None
    state_weights: np.ndarray | None = field(default=None, repr=False)
    flux_counts: np.ndarray | None = field(default=None, repr=False)
    final_config: np.ndarray | None = None

    def state_distribution(self) -> np.ndarray:
        """Normalized occupation over encoded states (base N+1 encoding)."""
        if self.state_weights is None:
            raise ValueError("state weights were not collected")
        w = self.state_weights
        return w / w.sum()


def encode_states(configs, base: int) -> np.ndarray:
    """Mixed-radix codes sum_i eta_i * base**i for each configuration."""
    powers = base ** np.arange(len(configs[0]), dtype=np.int64)
    return np.array([int(np.dot(np.asarray(c, dtype=np.int64), powers)) for c in configs])


def simulate(
    initial: OccupancyConfig,
    alpha: float,
    rng,
    max_events: int | None = None,
    max_time: float | None = None,
    time_weighted: bool = True,
    collect_states: bool = False,
    collect_flux: bool = False,
    resync_every: int = RESYNC_EVERY,
) -> TrajectoryStats:
    """Run the dynamics to an event-count or simulated-time horizon.

    Deterministic given the rng stream.  State/flux collection requires
    (N+1)**L encodable states (at most 2**20).
    """
    if initial.n_sites < 2:
        raise ValueError("dynamics need at least two sites")
    if max_events is None and max_time is None:
        raise ValueError("need an event-count or time horizon")
    if max_events is not None and max_events < 0:
        raise ValueError("max_events must be >= 0")
    if max_time is not None and max_time <= 0:
        raise ValueError("max_time must be positive")
    N, L = initial.total, initial.n_sites
    occ = initial.occupancies.copy()
    g = jump_rate_table(alpha, N)
    base = N + 1
    state_acc = None
    flux = None
    if collect_states or collect_flux:
        size = base**L
        if size > 1 << 20:
            raise StateSpaceTooLarge(size, 1 << 20)
        if collect_states:
            state_acc = np.zeros(size)
        if collect_flux:
            flux = np.zeros((size, size))
    site_time = np.zeros(L)
    dir_counts = np.zeros(2, dtype=np.int64)
    n_events, elapsed, max_integral, max_drift, absorbed = _kernels.ctmc_simulate(
        occ,
        g,
        rng,
        max_events=-1 if max_events is None else max_events,
        max_time=np.inf if max_time is None else max_time,
        time_weighted=time_weighted,
        site_time=site_time,
        state_acc=state_acc,
        state_base=base,
        flux=flux,
        dir_counts=dir_counts,
        resync_every=resync_every,
    )
    site_means = site_time / elapsed if elapsed > 0 else np.zeros(L)
    if time_weighted and elapsed > 0 and N > 0:
        share = max_integral / elapsed / N
    else:
        # no clock in event-count mode: report the final snapshot share
        share = occ.max() / N if N else 0.0
    return TrajectoryStats(
        alpha=alpha,
        n_sites=L,
        total=N,
        time_weighted=time_weighted,
        n_events=int(n_events),
        elapsed_time=float(elapsed),
        absorbed=bool(absorbed),
        max_share_mean=float(share),
        max_rate_drift=float(max_drift),
        site_means=site_means,
        dir_counts=dir_counts,
        state_weights=state_acc,
        flux_counts=flux,
        final_config=occ,
    )


def balanced_config(N: int, L: int) -> OccupancyConfig:
    """floor(N/L) everywhere plus one extra on the first N mod L sites."""
    occ = np.full(L, N // L, dtype=np.int64)
    occ[: N % L] += 1
    return OccupancyConfig(occ, N)


def condensed_config(N: int, L: int) -> OccupancyConfig:
    """All N particles on site 0."""
    occ = np.zeros(L, dtype=np.int64)
    occ[0] = N
    return OccupancyConfig(occ, N)
