"""Microscopic-vs-macroscopic comparison machinery.

A scenario bundles one physical setup (rate family, defects, initial
profile) with the numerical knobs on both sides: the lattice ladder and
replica count for the simulator, the grid and CFL factor for the solver,
and the box-kernel half-width theta used to turn an empirical measure
into a density on the solver grid.

Densities are compared in L1 on the solver grid.  Two flavours are
reported: the per-replica distance (mean and standard error across
replicas) and the pooled distance, i.e. the L1 error of the
replica-averaged density, which is the quantity whose Monte-Carlo noise
shrinks like 1/sqrt(replicas).  Mass sitting on critical defects is
compared separately as occ(k_j)/N against the solver atom, with no kernel
widening at the defect.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import simulator as sim
from ._kernels import _mix
from .defects import CRITICAL, SUPER, DefectSet, empty_defects
from .measures import build_invariant, build_local_equilibrium
from .profiles import Profile
from .rates import RateFunction
from .solver import Solver, SolverConfig, SolveResult, shared_tables, total_mass
from .thermo import GrandCanonical

_GC_CACHE: dict[str, GrandCanonical] = {}


def grand_canonical(rate: RateFunction) -> GrandCanonical:
    gc = _GC_CACHE.get(rate.name)
    if gc is None:
        gc = GrandCanonical(rate)
        _GC_CACHE[rate.name] = gc
    return gc


def derive_seed(base: int, N: int, replica: int) -> int:
    """Per-(N, replica) seed: a lane per N, replica r XOR-ed on top."""
    lane = int(_mix(np.uint64((base * 0x9E3779B97F4A7C15 + N) & (2**64 - 1))))
    return (lane ^ replica) & (2**63 - 1)


@dataclass
class Scenario:
    name: str
    rate: RateFunction
    defects: DefectSet
    rho0: Profile
    n_ladder: tuple[int, ...]
    obs_times: tuple[float, ...] = (0.01, 0.05, 0.1)
    atoms0: dict[int, float] = field(default_factory=dict)
    c0: float = 0.0
    replicas: int = 8
    theta: float = 1.0 / 32.0
    M: int = 512
    cfl: float = 0.5
    seed: int = 20260808
    l1_max: float | None = None
    trend_factor: float | None = None

    def __post_init__(self):
        if not self.obs_times:
            raise ValueError("scenario needs at least one observation time")
        if self.n_ladder and self.theta * min(self.n_ladder) < 4:
            raise ValueError(
                f"theta*N = {self.theta * min(self.n_ladder):g} < 4 at the "
                "smallest N: the smoothing window is too narrow"
            )
        if self.replicas < 2 and self.n_ladder:
            raise ValueError("at least 2 replicas are needed for error bars")

    @property
    def gc(self) -> GrandCanonical:
        return grand_canonical(self.rate)

    @property
    def t_end(self) -> float:
        return max(self.obs_times)

    def solver_config(self, M: int | None = None) -> SolverConfig:
        return SolverConfig(
            gc=self.gc, defects=self.defects, rho0=self.rho0,
            M=M or self.M, cfl=self.cfl, t_end=self.t_end,
            snapshot_times=tuple(self.obs_times), atoms0=dict(self.atoms0),
            c0=self.c0,
        )

    def canonical_dict(self) -> dict:
        """Stable description used for hashing and manifests."""
        return {
            "name": self.name,
            "rate": self.rate.name,
            "defects": [
                {"x": d.x, "beta": d.beta, "lam": d.lam, "class": c}
                for d, c in self.defects
            ],
            "rho0": repr(self.rho0),
            "atoms0": {str(k): v for k, v in sorted(self.atoms0.items())},
            "c0": self.c0,
            "obs_times": list(self.obs_times),
            "n_ladder": list(self.n_ladder),
            "replicas": self.replicas,
            "theta": self.theta,
            "M": self.M,
            "cfl": self.cfl,
            "seed": self.seed,
        }


# -- box-kernel smoothing ------------------------------------------------------


def box_smooth(occ: np.ndarray, include: np.ndarray, theta: float,
               grid: np.ndarray) -> np.ndarray:
    """Box-kernel density estimate at the grid points.

    For each x in grid, averages occ over the lattice sites k with
    |k/N - x| <= theta on the torus, counting only sites where ``include``
    is true (excluded sites carry defect mass reported elsewhere).
    """
    N = len(occ)
    vals = np.where(include, occ, 0).astype(np.float64)
    cnts = include.astype(np.float64)
    # tripled prefix sums make periodic windows branch-free on either edge
    cv = np.concatenate([[0.0], np.cumsum(np.tile(vals, 3))])
    cc = np.concatenate([[0.0], np.cumsum(np.tile(cnts, 3))])
    lo = np.ceil((grid - theta) * N - 1e-9).astype(np.int64) + N
    hi = np.floor((grid + theta) * N + 1e-9).astype(np.int64) + N
    tot = cv[hi + 1] - cv[lo]
    cnt = cc[hi + 1] - cc[lo]
    if np.any(cnt <= 0):
        raise ValueError("smoothing window contains no included sites")
    return tot / cnt


def smoothed_density(state: sim.SimState, theta: float, grid: np.ndarray) -> np.ndarray:
    """Smoothed bulk density; super and critical defect sites excluded."""
    include = np.ones(state.N, dtype=bool)
    for j, d, cls in state.defects.indexed():
        if cls in (SUPER, CRITICAL):
            include[d.site(state.N)] = False
    return box_smooth(state.occ, include, theta, grid)


# -- convergence study ---------------------------------------------------------


@dataclass
class DefectObservation:
    defect: int
    cls: str
    value: float          # occ/N (critical) or occ * N^(-beta/alpha) (super)
    target: float         # solver atom m(t) or (lam Phi(c0))^(1/alpha)


@dataclass
class ReplicaObservation:
    t: float
    l1: float
    density: np.ndarray
    defects: list[DefectObservation]


@dataclass
class ReplicaRun:
    N: int
    replica: int
    seed: int
    ok: bool
    error: str | None
    observations: list[ReplicaObservation] = field(default_factory=list)
    final_total: int = 0
    initial_total: int = 0


@dataclass
class LadderEntry:
    N: int
    t: float
    l1_mean: float
    l1_se: float
    l1_pooled: float
    replicas_ok: int
    critical: dict[int, dict[str, float]]
    super_slow: dict[int, dict[str, float]]


@dataclass
class ConvergenceReport:
    scenario: dict
    entries: list[LadderEntry]
    failures: list[dict]
    solver_mass_drift: float

    def entry(self, N: int, t: float) -> LadderEntry:
        for e in self.entries:
            if e.N == N and abs(e.t - t) < 1e-12:
                return e
        raise KeyError(f"no entry for N={N}, t={t}")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "entries": [asdict(e) for e in self.entries],
            "failures": self.failures,
            "solver_mass_drift": self.solver_mass_drift,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _run_replica(scenario: Scenario, N: int, replica: int,
                 pde: SolveResult, grid: np.ndarray) -> ReplicaRun:
    seed = derive_seed(scenario.seed, N, replica)
    run = ReplicaRun(N=N, replica=replica, seed=seed, ok=True, error=None)
    try:
        gc = scenario.gc
        marginals = build_local_equilibrium(
            gc, scenario.rho0, scenario.atoms0, scenario.c0, N, scenario.defects
        )
        state = sim.init_state(gc, scenario.defects, marginals, seed)
        run.initial_total = state.total
        for t in scenario.obs_times:
            sim.advance_to(state, t)
            snap = pde.snapshot_at(t)
            dens = smoothed_density(state, scenario.theta, grid)
            l1 = float(np.mean(np.abs(dens - snap.rho)))
            defs: list[DefectObservation] = []
            for j, d, cls in scenario.defects.indexed():
                k = d.site(N)
                if cls == CRITICAL:
                    defs.append(DefectObservation(
                        j, cls, state.occ[k] / N, snap.atoms[j]))
                elif cls == SUPER:
                    scale = N ** (-d.beta / gc.rate.alpha)
                    target = (d.lam * gc.fugacity(scenario.c0)) ** (1.0 / gc.rate.alpha)
                    defs.append(DefectObservation(
                        j, cls, state.occ[k] * scale, target))
            run.observations.append(ReplicaObservation(t, l1, dens, defs))
        run.final_total = state.total
    except Exception as exc:  # isolate replica failures
        run.ok = False
        run.error = f"{type(exc).__name__}: {exc}"
    return run


def run_convergence(scenario: Scenario, workers: int | None = None) -> ConvergenceReport:
    """Full ladder study: solve the PDE once, then compare each (N, replica)."""
    pde = Solver(scenario.solver_config()).solve()
    grid = np.arange(scenario.M) / scenario.M
    jobs = [(N, r) for N in scenario.n_ladder for r in range(scenario.replicas)]
    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(
                lambda nr: _run_replica(scenario, nr[0], nr[1], pde, grid), jobs))
    else:
        runs = [_run_replica(scenario, N, r, pde, grid) for N, r in jobs]

    entries: list[LadderEntry] = []
    failures = [
        {"N": r.N, "replica": r.replica, "seed": r.seed, "error": r.error}
        for r in runs if not r.ok
    ]
    for N in scenario.n_ladder:
        good = [r for r in runs if r.N == N and r.ok]
        for ti, t in enumerate(scenario.obs_times):
            obs = [r.observations[ti] for r in good]
            if not obs:
                continue
            l1s = np.array([o.l1 for o in obs])
            pooled_density = np.mean([o.density for o in obs], axis=0)
            snap = pde.snapshot_at(t)
            l1_pooled = float(np.mean(np.abs(pooled_density - snap.rho)))
            crit: dict[int, dict[str, float]] = {}
            sup: dict[int, dict[str, float]] = {}
            for j, d, cls in scenario.defects.indexed():
                per = [
                    do for o in obs for do in o.defects if do.defect == j
                ]
                if not per:
                    continue
                vals = np.array([p.value for p in per])
                gaps = np.abs(vals - per[0].target)
                stats = {
                    "value_mean": float(vals.mean()),
                    "value_se": float(vals.std(ddof=1) / np.sqrt(len(vals)))
                    if len(vals) > 1 else 0.0,
                    "target": float(per[0].target),
                    "abs_gap_mean": float(gaps.mean()),
                }
                (crit if cls == CRITICAL else sup)[j] = stats
            entries.append(LadderEntry(
                N=N, t=t,
                l1_mean=float(l1s.mean()),
                l1_se=float(l1s.std(ddof=1) / np.sqrt(len(l1s)))
                if len(l1s) > 1 else 0.0,
                l1_pooled=l1_pooled,
                replicas_ok=len(obs),
                critical=crit, super_slow=sup,
            ))
    return ConvergenceReport(
        scenario=scenario.canonical_dict(), entries=entries, failures=failures,
        solver_mass_drift=pde.mass_drift,
    )


def report_thresholds_met(scenario: Scenario, report: ConvergenceReport) -> bool:
    """Apply the declared acceptance thresholds at the final time."""
    if report.failures:
        return False
    t = scenario.obs_times[-1]
    ladder = sorted(scenario.n_ladder)
    ok = True
    if scenario.l1_max is not None:
        ok &= report.entry(ladder[-1], t).l1_pooled < scenario.l1_max
    if scenario.trend_factor is not None and len(ladder) > 1:
        lo = report.entry(ladder[0], t).l1_pooled
        hi = report.entry(ladder[-1], t).l1_pooled
        ok &= lo >= scenario.trend_factor * hi
    return bool(ok)


# -- static limit --------------------------------------------------------------


@dataclass
class StaticLimitResult:
    N: int
    c: float
    samples: int
    bulk_mean: float
    bulk_target: float
    defects: dict[int, dict[str, float]]
    occupancy_samples: dict[int, list[int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def static_limit_check(gc: GrandCanonical, c: float, defects: DefectSet,
                       N: int, samples: int, seed: int = 1) -> StaticLimitResult:
    """Sample the invariant measure and report defect condensation orders.

    Power rates: a defect with divisor lam*N^beta carries occ ~ N^(beta/alpha)
    particles; occ*N^(-beta/alpha) should concentrate at (lam Phi(c))^(1/alpha)
    when beta >= alpha and the scaled count occ/N should vanish when
    beta < alpha.  Bounded rates: all sites stay O(1), the bulk mean is c.
    """
    spec = build_invariant(gc, c, N, defects)
    rng = np.random.default_rng(seed)
    phi_c = gc.fugacity(c)
    defect_sites = defects.sites(N)
    n_bulk = N - len(defect_sites)
    # draw full bulk fields so the bulk estimate has se ~ sigma/sqrt(samples*N)
    bulk = gc.sample_occupancy(phi_c, rng, size=samples * n_bulk)
    out: dict[int, dict[str, float]] = {}
    raw: dict[int, list[int]] = {}
    for j, d, cls in defects.indexed():
        k = d.site(N)
        phi_k = float(spec.marginals.fugacity[k])
        occ = gc.sample_occupancy(phi_k, rng, size=samples).astype(np.float64)
        raw[j] = [int(v) for v in occ]
        entry = {"class": cls, "site": k, "mean_occ": float(occ.mean())}
        if gc.rate.is_bounded:
            entry["scaled"] = float(occ.mean() / N)
            entry["target"] = 0.0
        else:
            alpha = gc.rate.alpha
            if d.beta >= alpha:
                scale = N ** (-d.beta / alpha)
                entry["scaled"] = float((occ * scale).mean())
                entry["scaled_se"] = float((occ * scale).std(ddof=1) / np.sqrt(samples))
                entry["target"] = (d.lam * phi_c) ** (1.0 / alpha)
            else:
                entry["scaled"] = float(occ.mean() / N)
                entry["target"] = 0.0
        out[j] = entry
    return StaticLimitResult(
        N=N, c=c, samples=samples,
        bulk_mean=float(bulk.mean()), bulk_target=c, defects=out,
        occupancy_samples=raw,
    )


# -- attractiveness ------------------------------------------------------------


@dataclass
class CouplingAudit:
    events: int
    ordered: bool
    violation_event: int | None

    def to_dict(self) -> dict:
        return asdict(self)


def attractiveness_check(gc: GrandCanonical, defects: DefectSet, N: int,
                         events: int, seed: int, rho_lo: float = 0.5,
                         rho_hi: float = 2.0) -> CouplingAudit:
    """Run the basic coupling on an ordered pair; order must never break."""
    rng = np.random.default_rng(seed)
    lo, hi = sim.sample_ordered_pair(
        gc, gc.fugacity(rho_lo), gc.fugacity(rho_hi), N, rng)
    pair = sim.CoupledPair.create(gc, defects, lo, hi, seed)
    try:
        pair.run(events)
    except sim.SimulationError:
        return CouplingAudit(events=pair.events, ordered=False,
                             violation_event=pair.events)
    return CouplingAudit(events=pair.events, ordered=pair.ordered(),
                         violation_event=None)


# -- local one-block diagnostic --------------------------------------------------


def one_block_diagnostic(gc: GrandCanonical, c: float, N: int, half_widths,
                         t_avg: float, seed: int = 5, n_samples: int = 1500,
                         panel: int = 8) -> dict[int, float]:
    """Stationary check that g at a site tracks Phi of its block average.

    Starting from the invariant measure at density c, time-averages
    g(eta(k)) and Phi(eta^l(k)) over one trajectory at a panel of sites and
    reports the absolute deviation per half-width l (averaged over the
    panel).  Deviations shrink as l grows.
    """
    defects = empty_defects(gc.rate)
    spec = build_invariant(gc, c, N, defects)
    state = sim.init_state(gc, defects, spec, seed)
    tables = shared_tables(gc, max(2.0 * c, 1.0) + 2.0)
    sites = np.linspace(0, N, panel, endpoint=False).astype(np.int64)
    ls = sorted(half_widths)
    g_acc = np.zeros(panel)
    phi_acc = {l: np.zeros(panel) for l in ls}
    burn = 0.05 * t_avg
    sim.advance_to(state, burn)
    ts = np.linspace(burn, burn + t_avg, n_samples + 1)[1:]
    for t in ts:
        sim.advance_to(state, float(t))
        g_acc += state.gc.rate(state.occ[sites])
        ext = np.concatenate([[0], np.cumsum(np.tile(state.occ, 3))])
        for l in ls:
            lo = sites - l + N
            hi = sites + l + N
            block = (ext[hi + 1] - ext[lo]) / (2 * l + 1)
            phi_acc[l] += tables.phi(np.minimum(block, tables.rho_max))
    g_mean = g_acc / n_samples
    out = {}
    for l in ls:
        out[int(l)] = float(np.mean(np.abs(g_mean - phi_acc[l] / n_samples)))
    return out


# -- mass budget ----------------------------------------------------------------


def mass_budget_check(sim_states, initial_totals, result: SolveResult,
                      t: float, cross_tol: float = 0.05) -> dict:
    """Exact lattice conservation, solver drift, and the cross-system budget.

    The simulator side counts bulk/N plus defect piles/N, averaged over the
    given replicas (a single replica's total carries the O(1/sqrt(N))
    fluctuation of its initial draw, so the cross comparison needs the
    replica mean); the solver side integrates the density and adds atoms.
    Super-slow piles stay out of both sides: they exchange with their
    reservoir, not with the tracked mass.
    """
    if isinstance(sim_states, sim.SimState):
        sim_states = [sim_states]
        initial_totals = [initial_totals]
    exact = True
    masses = []
    for state, total0 in zip(sim_states, initial_totals):
        state.check_consistency()
        exact &= state.total == total0
        include = np.ones(state.N, dtype=bool)
        for j, d, cls in state.defects.indexed(SUPER):
            include[d.site(state.N)] = False
        masses.append(float(state.occ[include].sum()) / state.N)
    sim_mass = float(np.mean(masses))
    solver_mass = total_mass(result.snapshot_at(t))
    return {
        "simulator_exact": bool(exact),
        "solver_drift": result.mass_drift,
        "solver_drift_ok": result.mass_drift < 1e-6,
        "sim_mass": sim_mass,
        "solver_mass": solver_mass,
        "cross_gap": abs(sim_mass - solver_mass),
        "cross_ok": abs(sim_mass - solver_mass) < cross_tol,
    }
