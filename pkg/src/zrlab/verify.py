"""Property-verification suites behind `zrlab verify`.

Each suite runs a fixed-seed batch of invariant checks and returns
machine-readable results.  The suites double as the implementation of the
acceptance test module, so the numbers here are the binding tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rates
from . import simulator as sim
from .defects import DefectSet, DefectSpec, empty_defects
from .harness import (attractiveness_check, grand_canonical,
                      one_block_diagnostic, static_limit_check)
from .measures import build_invariant
from .profiles import CosineProfile, constant
from .solver import Solver, SolverConfig


@dataclass
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


def _z99() -> float:
    return 2.3263478740408408


def chi2_critical(dof: int, z: float | None = None) -> float:
    """Upper quantile via the Wilson-Hilferty cube approximation."""
    z = _z99() if z is None else z
    k = float(dof)
    return k * (1.0 - 2.0 / (9.0 * k) + z * np.sqrt(2.0 / (9.0 * k))) ** 3


def chi2_test(counts: np.ndarray, probs: np.ndarray, min_expected: float = 5.0):
    """(statistic, critical99, pass) with sparse bins pooled from both ends."""
    n = counts.sum()
    expected = probs * n
    lo = 0
    hi = len(expected)
    while hi - lo > 2 and expected[lo] < min_expected:
        expected[lo + 1] += expected[lo]
        counts = counts.copy()
        counts[lo + 1] += counts[lo]
        lo += 1
    while hi - lo > 2 and expected[hi - 1] < min_expected:
        expected[hi - 2] += expected[hi - 1]
        counts[hi - 2] += counts[hi - 1]
        hi -= 1
    obs = counts[lo:hi]
    exp = expected[lo:hi]
    stat = float((((obs - exp) ** 2) / exp).sum())
    crit = chi2_critical(len(exp) - 1)
    return stat, crit, stat < crit


# ---------------------------------------------------------------------------
# toolkit suite
# ---------------------------------------------------------------------------


def suite_toolkit() -> list[Check]:
    checks: list[Check] = []
    gi = grand_canonical(rates.identity())
    gr = grand_canonical(rates.bounded_ratio())
    gh = grand_canonical(rates.power(0.5))

    # closed forms, identity: Z = e^phi, R = phi, Phi = rho
    grid = np.linspace(0.0, 50.0, 26)
    worst = 0.0
    for v in grid:
        worst = max(worst,
                    abs(gi.log_partition(v) - v),
                    abs(gi.mean_density(v) - v),
                    abs(gi.fugacity(v) - v))
    checks.append(Check("toolkit.closed_form_identity", worst < 1e-10,
                        f"max dev {worst:.2e} (tol 1e-10)"))

    # closed forms, g = n/(n+1): Z=(1-phi)^-2, R=2phi/(1-phi), Phi=rho/(rho+2)
    worst = 0.0
    for phi in np.linspace(0.0, 0.9, 19):
        worst = max(worst,
                    abs(gr.log_partition(phi) + 2.0 * np.log1p(-phi)),
                    abs(gr.mean_density(phi) - 2.0 * phi / (1.0 - phi)))
    for rho in np.linspace(0.0, 18.0, 19):
        worst = max(worst, abs(gr.fugacity(rho) - rho / (rho + 2.0)))
    checks.append(Check("toolkit.closed_form_ratio", worst < 1e-8,
                        f"max dev {worst:.2e} (tol 1e-8)"))

    # round trip R(Phi(rho)) = rho, 100 random densities per family
    rng = np.random.default_rng(91)
    worst = 0.0
    for gc, hi in ((gi, 50.0), (gr, 30.0), (gh, 20.0)):
        for rho in rng.uniform(0.0, hi, 100):
            worst = max(worst,
                        abs(gc.mean_density(gc.fugacity(rho)) - rho) / (1.0 + rho))
    checks.append(Check("toolkit.roundtrip", worst < 1e-8,
                        f"max relative dev {worst:.2e} (tol 1e-8)"))

    # asymptotics ln Z(phi) ~ alpha phi^(1/alpha) once phi^(1/alpha) >= 1e4
    r1 = gi.log_partition(1e4) / 1e4
    r2 = gh.log_partition(100.0) / 100.0**2
    ok = abs(r1 - 1.0) / 1.0 < 0.05 and abs(r2 - 0.5) / 0.5 < 0.05
    checks.append(Check("toolkit.lnZ_asymptotics", ok,
                        f"alpha=1: {r1:.4f}, alpha=1/2: {r2:.4f} (5% of alpha)"))

    # Var/phi^(2/alpha) decreasing along a fugacity ladder
    ok = True
    detail = []
    for gc, alpha, ladder in ((gi, 1.0, [16, 64, 256, 1024]),
                              (gh, 0.5, [8, 16, 32, 64])):
        ratios = [gc.variance(p) / p ** (2.0 / alpha) for p in ladder]
        ok &= all(a > b for a, b in zip(ratios, ratios[1:]))
        detail.append(f"alpha={alpha:g}: " +
                      "->".join(f"{r:.3g}" for r in ratios))
    checks.append(Check("toolkit.variance_ladder", ok, "; ".join(detail)))

    # shared-uniform inverse CDF is monotone in phi
    rng = np.random.default_rng(17)
    ok = True
    for gc, rho_pairs in ((gi, [(0.3, 2.5)]), (gr, [(0.5, 4.0)])):
        for r_lo, r_hi in rho_pairs:
            d_lo = gc.occupancy_distribution(gc.fugacity(r_lo))
            d_hi = gc.occupancy_distribution(gc.fugacity(r_hi))
            for u in rng.random(500):
                if d_lo.quantile(u) > d_hi.quantile(u):
                    ok = False
    checks.append(Check("toolkit.monotone_marginals", ok,
                        "500 shared uniforms per pair, order held" if ok
                        else "order violated"))

    # sampler empirical law vs P_phi, chi-square at 99%
    rng = np.random.default_rng(23)
    all_ok = True
    details = []
    for gc, phi in ((gi, 3.0), (gr, 0.6), (gh, 4.0)):
        dist = gc.occupancy_distribution(phi)
        draws = dist.sample(rng, 100_000)
        counts = np.bincount(draws - dist.n0, minlength=len(dist.probs))
        stat, crit, ok = chi2_test(counts.astype(np.float64), dist.probs)
        all_ok &= ok
        details.append(f"phi={phi:g}: chi2 {stat:.1f} < {crit:.1f}")
    checks.append(Check("toolkit.sampler_chi2", all_ok, "; ".join(details)))
    return checks


# ---------------------------------------------------------------------------
# simulator suite
# ---------------------------------------------------------------------------


def suite_simulator(conservation_events: int = 100_000_000) -> list[Check]:
    checks: list[Check] = []
    gi = grand_canonical(rates.identity())
    nodef = empty_defects(gi.rate)

    # exact conservation over a long event budget
    spec = build_invariant(gi, 1.0, 512, nodef)
    st = sim.init_state(gi, nodef, spec, seed=41)
    total0 = st.total
    sim.run_events(st, conservation_events)
    ok = int(st.occ.sum()) == total0
    checks.append(Check("simulator.conservation", ok,
                        f"{st.events} events, total {st.occ.sum()} == {total0}"))

    # incremental rate index vs full rebuild, bit for bit
    fresh = st.rebuild_tree()
    ok = bool(np.array_equal(fresh, st.tree))
    checks.append(Check("simulator.rate_index_bitwise", ok,
                        "rebuild matches incremental tree" if ok else "mismatch"))

    # same seed, same config => identical stream
    a = sim.init_state(gi, nodef, build_invariant(gi, 1.0, 256, nodef), seed=7)
    b = sim.init_state(gi, nodef, build_invariant(gi, 1.0, 256, nodef), seed=7)
    log_a: list = []
    log_b: list = []
    sim.advance_to(a, 0.005, event_log=log_a)
    sim.advance_to(b, 0.005, event_log=log_b)
    ok = log_a == log_b and np.array_equal(a.occ, b.occ)
    checks.append(Check("simulator.determinism", ok,
                        f"{len(log_a)} logged events identical" if ok else "diverged"))

    # stationarity: time-averaged single-site law matches P_Phi(c)
    st2 = sim.init_state(gi, nodef, build_invariant(gi, 1.0, 256, nodef), seed=57)
    phi_c = gi.fugacity(1.0)
    dist = gi.occupancy_distribution(phi_c)
    samples = []
    t = 0.0
    for _ in range(3000):
        t += 2e-4
        sim.advance_to(st2, t)
        samples.append(st2.occ[17])
    counts = np.bincount(np.array(samples) - dist.n0,
                         minlength=len(dist.probs)).astype(np.float64)
    stat, crit, ok = chi2_test(counts[: len(dist.probs)], dist.probs)
    checks.append(Check("simulator.stationary_site_law", ok,
                        f"chi2 {stat:.1f} < {crit:.1f} (99%)"))

    # empirical one-block: g at a site tracks Phi of the block average
    devs = one_block_diagnostic(gi, 1.0, 512, (2, 8, 16, 32), t_avg=0.4, seed=5)
    trend = devs[32] <= devs[2] + 0.01
    ok = trend and devs[16] < 0.05 and devs[32] < 0.05
    checks.append(Check("simulator.one_block", ok,
                        ", ".join(f"l={l}: {d:.4f}" for l, d in devs.items())))
    return checks


# ---------------------------------------------------------------------------
# solver suite
# ---------------------------------------------------------------------------


def _fourier_reference(t: float, M: int) -> np.ndarray:
    x = np.arange(M) / M
    return 1.0 + np.exp(-4.0 * np.pi**2 * t) * np.cos(2.0 * np.pi * x)


def suite_solver() -> list[Check]:
    checks: list[Check] = []
    gi = grand_canonical(rates.identity())
    gb = grand_canonical(rates.bounded_ratio())
    nodef = empty_defects(gi.rate)

    # defect-free stepper against the exact Fourier solution
    ok = True
    details = []
    for M in (128, 256, 512):
        cfg = SolverConfig(gi, nodef, CosineProfile(1.0, (1.0,)), M=M,
                           t_end=0.05, snapshot_times=(0.05,))
        res = Solver(cfg).solve()
        err = float(np.abs(res.snapshot_at(0.05).rho
                           - _fourier_reference(0.05, M)).max())
        ok &= err < 5.0 / M**2
        details.append(f"M={M}: {err:.2e} < {5.0 / M**2:.2e}")
    checks.append(Check("solver.heat_oracle", ok, "; ".join(details)))

    # discrete conservation without pins
    cfg = SolverConfig(gi, nodef, CosineProfile(1.0, (1.0,)), M=512,
                       t_end=1.0, snapshot_times=(1.0,))
    res = Solver(cfg).solve()
    checks.append(Check("solver.conservation", res.mass_drift < 1e-8,
                        f"drift {res.mass_drift:.2e} over unit time (tol 1e-8)"))

    # nodewise comparison principle (ordered data stay ordered)
    dset = DefectSet.build([DefectSpec(0.5, 1.0, 2.0)], gi.rate)
    lo_cfg = SolverConfig(gi, dset, constant(0.8), M=128, t_end=0.05,
                          snapshot_times=(0.01, 0.05), atoms0={0: 0.2})
    hi_cfg = SolverConfig(gi, dset, CosineProfile(1.2, (0.2,)), M=128,
                          t_end=0.05, snapshot_times=(0.01, 0.05),
                          atoms0={0: 0.5})
    lo_res, hi_res = Solver(lo_cfg).solve(), Solver(hi_cfg).solve()
    ok = all(
        bool(np.all(lo_res.snapshot_at(t).rho <= hi_res.snapshot_at(t).rho + 1e-12))
        for t in (0.01, 0.05)
    )
    checks.append(Check("solver.comparison_principle", ok,
                        "ordered data stayed ordered" if ok else "order broke"))

    # bounded threshold and complementarity
    dsb = DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], gb.rate)
    cfgb = SolverConfig(gb, dsb, constant(3.0), M=512, t_end=0.05,
                        snapshot_times=(0.01, 0.02, 0.05))
    resb = Solver(cfgb).solve()
    node = 256
    worst_phi, worst_comp = 0.0, 0.0
    for s in resb.snapshots:
        phi_j = gb.fugacity(float(s.rho[node]))
        worst_phi = max(worst_phi, phi_j - 0.5)
        worst_comp = max(worst_comp, s.atoms[0] * (0.5 - phi_j))
    checks.append(Check("solver.bounded_threshold", worst_phi <= 1e-8,
                        f"max Phi(rho(x_j)) - 1/lam = {worst_phi:.2e} (tol 1e-8)"))
    checks.append(Check("solver.complementarity", worst_comp <= 1e-6,
                        f"max m*(1/lam - Phi) = {worst_comp:.2e} (tol 1e-6)"))

    # critical-atom algebraic relation at M=512
    dsc = DefectSet.build([DefectSpec(0.5, 1.0, 2.0)], gi.rate)
    cfgc = SolverConfig(gi, dsc, constant(1.0), M=512, t_end=0.05,
                        snapshot_times=(0.01, 0.05), atoms0={0: 0.0})
    resc = Solver(cfgc).solve()
    worst = 0.0
    for s in resc.snapshots:
        m = s.atoms[0]
        worst = max(worst, abs(m - 2.0 * gi.fugacity(float(s.rho[node]))))
    checks.append(Check("solver.critical_relation", worst < 5e-3,
                        f"max |m^a - lam Phi(rho)| = {worst:.2e} (tol 5e-3)"))

    # grid self-convergence (uniqueness proxy): first order or better
    suites = [
        ("heat", SolverConfig(gi, nodef, CosineProfile(1.0, (1.0,)),
                              M=64, t_end=0.05, snapshot_times=(0.05,))),
        ("critical", SolverConfig(gi, dsc, constant(1.0), M=64, t_end=0.05,
                                  snapshot_times=(0.05,), atoms0={0: 0.0})),
        ("bounded", SolverConfig(gb, dsb, constant(3.0), M=64, t_end=0.05,
                                 snapshot_times=(0.05,))),
        ("super", SolverConfig(
            gi, DefectSet.build([DefectSpec(0.5, 2.0, 1.0)], gi.rate),
            constant(2.0), M=64, t_end=0.05, snapshot_times=(0.05,), c0=1.0)),
    ]
    ok = True
    details = []
    for name, base in suites:
        sols = {}
        for M in (64, 128, 256):
            c = SolverConfig(base.gc, base.defects, base.rho0, M=M,
                             cfl=base.cfl, t_end=base.t_end,
                             snapshot_times=base.snapshot_times,
                             atoms0=dict(base.atoms0), c0=base.c0)
            sols[M] = Solver(c).solve().snapshot_at(0.05).rho
        d1 = float(np.abs(sols[64] - sols[128][::2]).mean())
        d2 = float(np.abs(sols[128] - sols[256][::2]).mean())
        factor = d1 / d2 if d2 > 0 else np.inf
        ok &= factor >= 1.8
        details.append(f"{name}: {factor:.2f}")
    checks.append(Check("solver.self_convergence", ok,
                        "L1 reduction per doubling: " + "; ".join(details)
                        + " (need >= 1.8)"))
    return checks


# ---------------------------------------------------------------------------
# static suite
# ---------------------------------------------------------------------------


def suite_static() -> list[Check]:
    checks: list[Check] = []
    gi = grand_canonical(rates.identity())
    gb = grand_canonical(rates.bounded_ratio())

    ds = DefectSet.build([DefectSpec(0.25, 1.0, 2.0), DefectSpec(0.75, 0.5, 1.0)],
                         gi.rate)
    r = static_limit_check(gi, 1.0, ds, 512, 1000, seed=101)
    crit = r.defects[0]
    sub = r.defects[1]
    ok = abs(crit["scaled"] - crit["target"]) <= 0.05 * crit["target"]
    checks.append(Check("static.critical_condensation", ok,
                        f"occ/N = {crit['scaled']:.4f} vs {crit['target']:.1f} (5%)"))
    checks.append(Check("static.subcritical_vanishes", sub["scaled"] < 0.1,
                        f"occ/N = {sub['scaled']:.4f} (< 0.1)"))

    dsb = DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], gb.rate)
    rb = static_limit_check(gb, 1.0, dsb, 512, 1000, seed=103)
    ok = abs(rb.bulk_mean - 1.0) <= 0.02
    checks.append(Check("static.bounded_bulk_density", ok,
                        f"bulk mean {rb.bulk_mean:.4f} vs 1.0 (2%)"))

    # unbiasedness: the target sits in the 3-sigma band in >= 19 of 20 reps
    hits = 0
    for rep in range(20):
        rr = static_limit_check(gi, 1.0,
                                DefectSet.build([DefectSpec(0.25, 1.0, 2.0)], gi.rate),
                                256, 400, seed=200 + rep)
        d = rr.defects[0]
        if abs(d["scaled"] - d["target"]) <= 3.0 * d["scaled_se"]:
            hits += 1
    checks.append(Check("static.unbiased_estimator", hits >= 19,
                        f"{hits}/20 inside the 3-sigma band"))
    return checks


# ---------------------------------------------------------------------------
# coupling suite
# ---------------------------------------------------------------------------


def suite_coupling(events: int = 1_000_000) -> list[Check]:
    checks: list[Check] = []
    gi = grand_canonical(rates.identity())
    gb = grand_canonical(rates.bounded_ratio())
    ds = DefectSet.build([DefectSpec(0.25, 1.0, 2.0)], gi.rate)
    audit = attractiveness_check(gi, ds, 128, events, seed=77)
    checks.append(Check("coupling.order_preserved", audit.ordered,
                        f"{audit.events} coupled events, order held"
                        if audit.ordered else
                        f"violated at event {audit.violation_event}"))
    dsb = DefectSet.build([DefectSpec(0.25, 0.0, 2.0)], gb.rate)
    audit_b = attractiveness_check(gb, dsb, 128, events // 4, seed=78,
                                   rho_lo=0.5, rho_hi=3.0)
    checks.append(Check("coupling.order_preserved_bounded", audit_b.ordered,
                        f"{audit_b.events} coupled events, order held"
                        if audit_b.ordered else
                        f"violated at event {audit_b.violation_event}"))

    # corrupted order must be rejected before stepping
    rng = np.random.default_rng(5)
    lo, hi = sim.sample_ordered_pair(gi, 0.5, 2.0, 64, rng)
    lo[3] = hi[3] + 1
    try:
        sim.CoupledPair.create(gi, ds, lo, hi, seed=1)
        rejected = False
    except ValueError:
        rejected = True
    checks.append(Check("coupling.rejects_bad_input", rejected,
                        "unordered pair rejected" if rejected else "accepted!"))
    return checks


SUITES = {
    "toolkit": suite_toolkit,
    "simulator": suite_simulator,
    "solver": suite_solver,
    "static": suite_static,
    "coupling": suite_coupling,
}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        out: list[Check] = []
        for key in ("toolkit", "static", "coupling", "solver", "simulator"):
            out.extend(SUITES[key]())
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choices: "
                       f"{sorted(SUITES) + ['all']}")
    return SUITES[name]()
