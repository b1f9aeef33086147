"""Continuous-time simulation of the zero-range chain on the torus.

The process runs directly in macroscopic time: every site weight carries
the diffusive factor N^2, so observation times need no unit conversion.
States are single-threaded; independent replicas get independent seeds
(base seed XOR replica index) and may run on separate threads since the
kernels drop the GIL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .defects import SUPER, DefectSet
from .measures import InvariantMeasureSpec, SiteMarginals
from .thermo import GrandCanonical

CONSERVATION_CHECK_EVERY = 1_000_000


class SimulationError(RuntimeError):
    pass


@dataclass
class EventRecord:
    site: int
    direction: int
    dt_macro: float


@dataclass
class EmpiricalMeasure:
    """Mass measure (1/N) sum occ(k) delta_{k/N}, super-slow sites excluded.

    Raw counts at super-slow sites are reported separately: their mass is
    superlinear and would swamp the scaled measure.
    """

    points: np.ndarray
    weights: np.ndarray
    super_slow_counts: dict[int, int]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass
class SimState:
    N: int
    occ: np.ndarray
    defects: DefectSet
    gc: GrandCanonical
    divisors: np.ndarray
    tree: np.ndarray
    cap: int
    t: float
    events: int
    rng_state: np.uint64
    seed: int
    total: int
    _rate_args: tuple = field(repr=False, default=())

    @property
    def t_macro(self) -> float:
        return self.t

    def rebuild_tree(self) -> np.ndarray:
        """Recompute all weights from occupancies (consistency oracle)."""
        leaves = K.leaves_from_occ(self.occ, self.divisors, *self._rate_args,
                                   2.0 * self.N * self.N)
        fresh = np.zeros_like(self.tree)
        K.tree_build(fresh, self.cap, leaves)
        return fresh

    def check_consistency(self):
        if int(self.occ.sum()) != self.total:
            raise SimulationError(
                f"particle count drifted: {self.occ.sum()} != {self.total}"
            )
        if np.any(self.occ < 0):
            raise SimulationError("negative occupancy")

    def snapshot(self) -> np.ndarray:
        return self.occ.copy()


def _rate_args(gc: GrandCanonical):
    r = gc.rate
    a, b = r.tail_coeffs
    return (np.int64(r.kind), float(r.alpha), r.table, float(a), float(b))


def _capacity(n: int) -> int:
    cap = 1
    while cap < n:
        cap *= 2
    return cap


def init_state(gc: GrandCanonical, defects: DefectSet, measure, seed: int) -> SimState:
    """Build a simulation state from an initial measure.

    ``measure`` may be a SiteMarginals, an InvariantMeasureSpec, or an
    explicit integer occupancy array.  Sampling uses a numpy generator
    keyed by the seed; the event stream uses an independent splitmix
    stream from the same seed, so runs are reproducible end to end.
    """
    if isinstance(measure, InvariantMeasureSpec):
        marginals = measure.marginals
    else:
        marginals = measure
    if isinstance(marginals, SiteMarginals):
        rng = np.random.default_rng(seed)
        occ = marginals.sample(gc, rng)
    else:
        occ = np.asarray(marginals, dtype=np.int64).copy()
        if np.any(occ < 0):
            raise ValueError("occupancies must be nonnegative")
    N = len(occ)
    site_of = defects.sites(N)  # validates separation at this N
    divisors = np.ones(N)
    for k, j in site_of.items():
        divisors[k] = defects.defects[j].divisor(N)
    cap = _capacity(N)
    rate_args = _rate_args(gc)
    state = SimState(
        N=N, occ=occ, defects=defects, gc=gc, divisors=divisors,
        tree=np.zeros(2 * cap), cap=cap, t=0.0, events=0,
        rng_state=K.seed_state(seed), seed=seed, total=int(occ.sum()),
        _rate_args=rate_args,
    )
    leaves = K.leaves_from_occ(occ, divisors, *rate_args, 2.0 * N * N)
    K.tree_build(state.tree, cap, leaves)
    return state


def step(state: SimState) -> EventRecord | None:
    """Execute one event; None if the configuration is empty (absorbed)."""
    if state.total == 0:
        return None
    log_t = np.empty(1)
    log_site = np.empty(1, dtype=np.int64)
    log_dir = np.empty(1, dtype=np.int8)
    t0 = state.t
    t, ev, rng, absorbed = K.run_until(
        state.occ, state.tree, state.cap, state.divisors, *state._rate_args,
        2.0 * state.N * state.N, state.t, np.inf, 1, state.rng_state,
        log_t, log_site, log_dir,
    )
    state.t, state.rng_state = t, np.uint64(rng)
    state.events += int(ev)
    return EventRecord(int(log_site[0]), int(log_dir[0]), t - t0)


def advance_to(state: SimState, t_target: float, event_log=None) -> SimState:
    """Run the chain up to macroscopic time t_target (exact CTMC semantics).

    Conservation is verified every million events and at the end.  If
    ``event_log`` is a list, (t, site, dir) triples are appended for audit.
    """
    if t_target < state.t:
        raise ValueError("t_target must not be behind the clock")
    two_n2 = 2.0 * state.N * state.N
    while state.t < t_target:
        want_log = event_log is not None
        log_t = np.empty(CONSERVATION_CHECK_EVERY if want_log else 0)
        log_site = np.empty(len(log_t), dtype=np.int64)
        log_dir = np.empty(len(log_t), dtype=np.int8)
        t, ev, rng, absorbed = K.run_until(
            state.occ, state.tree, state.cap, state.divisors, *state._rate_args,
            two_n2, state.t, t_target, CONSERVATION_CHECK_EVERY, state.rng_state,
            log_t, log_site, log_dir,
        )
        state.t, state.rng_state = t, np.uint64(rng)
        state.events += int(ev)
        if want_log:
            for i in range(int(ev)):
                event_log.append((log_t[i], int(log_site[i]), int(log_dir[i])))
        state.check_consistency()
        if absorbed or t >= t_target:
            break
    return state


def run_events(state: SimState, n_events: int) -> SimState:
    """Execute exactly n_events (or until absorbed), ignoring the clock."""
    done = 0
    two_n2 = 2.0 * state.N * state.N
    empty = K.no_log()
    while done < n_events:
        chunk = min(CONSERVATION_CHECK_EVERY, n_events - done)
        t, ev, rng, absorbed = K.run_until(
            state.occ, state.tree, state.cap, state.divisors, *state._rate_args,
            two_n2, state.t, np.inf, chunk, state.rng_state, *empty,
        )
        state.t, state.rng_state = t, np.uint64(rng)
        state.events += int(ev)
        done += int(ev)
        state.check_consistency()
        if absorbed:
            break
    return state


def empirical_measure(state: SimState) -> EmpiricalMeasure:
    """Scaled mass empirical measure, super-slow defect sites excluded."""
    mask = np.ones(state.N, dtype=bool)
    super_counts: dict[int, int] = {}
    for j, d, cls in state.defects.indexed(SUPER):
        k = d.site(state.N)
        mask[k] = False
        super_counts[k] = int(state.occ[k])
    idx = np.nonzero(mask)[0]
    return EmpiricalMeasure(
        points=idx / state.N,
        weights=state.occ[idx] / state.N,
        super_slow_counts=super_counts,
    )


def block_average(state: SimState, k: int, l: int, side: str = "centered") -> float:
    """Average occupancy over a window of 2l+1 sites.

    centered: sites k-l .. k+l.  right: sites k+1 .. k+2l+1, the one-sided
    window used next to slow sites (the defect itself is excluded).
    """
    if 2 * l + 1 >= state.N:
        raise ValueError("window exceeds the torus")
    if side == "centered":
        span = np.arange(k - l, k + l + 1)
    elif side == "right":
        span = np.arange(k + 1, k + 2 * l + 2)
    else:
        raise ValueError("side must be 'centered' or 'right'")
    return float(state.occ[np.mod(span, state.N)].mean())


@dataclass
class CoupledPair:
    """Two sitewise-ordered copies driven by the basic coupling."""

    lo: np.ndarray
    hi: np.ndarray
    defects: DefectSet
    gc: GrandCanonical
    divisors: np.ndarray
    tree: np.ndarray
    cap: int
    t: float
    events: int
    rng_state: np.uint64
    _rate_args: tuple = field(repr=False, default=())

    @classmethod
    def create(cls, gc: GrandCanonical, defects: DefectSet, occ_lo, occ_hi,
               seed: int) -> "CoupledPair":
        lo = np.asarray(occ_lo, dtype=np.int64).copy()
        hi = np.asarray(occ_hi, dtype=np.int64).copy()
        if lo.shape != hi.shape:
            raise ValueError("copies must share the torus size")
        if np.any(lo > hi):
            raise ValueError("initial pair violates sitewise order")
        N = len(lo)
        site_of = defects.sites(N)
        divisors = np.ones(N)
        for k, j in site_of.items():
            divisors[k] = defects.defects[j].divisor(N)
        cap = _capacity(N)
        rate_args = _rate_args(gc)
        tree = np.zeros(2 * cap)
        leaves = K.leaves_from_occ(hi, divisors, *rate_args, 2.0 * N * N)
        K.tree_build(tree, cap, leaves)
        return cls(lo=lo, hi=hi, defects=defects, gc=gc, divisors=divisors,
                   tree=tree, cap=cap, t=0.0, events=0,
                   rng_state=K.seed_state(seed), _rate_args=rate_args)

    def run(self, n_events: int) -> None:
        """Advance n_events coupled events; raises on any order violation."""
        N = len(self.lo)
        done = 0
        while done < n_events:
            chunk = min(CONSERVATION_CHECK_EVERY, n_events - done)
            t, ev, rng, violation = K.coupled_run(
                self.lo, self.hi, self.tree, self.cap, self.divisors,
                *self._rate_args, 2.0 * N * N, self.t, np.inf, chunk,
                self.rng_state,
            )
            self.t, self.rng_state = t, np.uint64(rng)
            self.events += int(ev)
            done += int(ev)
            if violation >= 0:
                raise SimulationError(
                    f"coupling order violated at event {self.events}"
                )
            if ev == 0:  # both copies empty
                break

    def ordered(self) -> bool:
        return bool(np.all(self.lo <= self.hi))


def sample_ordered_pair(gc: GrandCanonical, phi_lo: float, phi_hi: float,
                        N: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sitewise-ordered occupancies via shared-uniform inverse CDF draws."""
    if phi_lo > phi_hi:
        raise ValueError("phi_lo must not exceed phi_hi")
    d_lo = gc.occupancy_distribution(phi_lo)
    d_hi = gc.occupancy_distribution(phi_hi)
    u = rng.random(N)
    lo = d_lo.n0 + np.searchsorted(d_lo.cdf, u, side="right")
    hi = d_hi.n0 + np.searchsorted(d_hi.cdf, u, side="right")
    return lo.astype(np.int64), hi.astype(np.int64)
