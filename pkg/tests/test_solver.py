import numpy as np
import pytest

from zrlab.defects import DefectSet, DefectSpec, empty_defects
from zrlab.profiles import CosineProfile, PiecewiseProfile, constant
from zrlab.solver import (CFLError, Solver, SolverConfig, SolverError, solve,
                          total_mass)


def fourier_reference(t, M, base=1.0, amp=1.0):
    x = np.arange(M) / M
    return base + amp * np.exp(-4 * np.pi**2 * t) * np.cos(2 * np.pi * x)


def test_constant_profile_stationary(gc_identity):
    cfg = SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                       constant(1.7), M=64, t_end=0.1, snapshot_times=(0.1,))
    res = solve(cfg)
    assert np.allclose(res.snapshot_at(0.1).rho, 1.7, atol=1e-13)


def test_heat_oracle(gc_identity):
    for M in (128, 256, 512):
        cfg = SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                           CosineProfile(1.0, (1.0,)), M=M, t_end=0.05,
                           snapshot_times=(0.05,))
        err = np.abs(solve(cfg).snapshot_at(0.05).rho
                     - fourier_reference(0.05, M)).max()
        assert err < 5.0 / M**2


def test_point_perturbation_conserves_mass(gc_identity):
    # single-cell bump: the periodic stencil telescopes exactly
    cfg = SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                       PiecewiseProfile((0.0, 0.5, 0.52), (1.0, 9.0, 1.0)),
                       M=50, t_end=0.02, snapshot_times=(0.02,))
    res = solve(cfg)
    assert res.mass_drift < 1e-12


def test_cfl_validation(gc_identity):
    with pytest.raises(CFLError):
        SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                     constant(1.0), M=32, cfl=0.6, t_end=0.1)
    cfg = SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                       constant(1.0), M=32, cfl=0.5, t_end=0.1)
    sv = Solver(cfg)
    with pytest.raises(CFLError):
        sv.step(sv.initial_state(), 10 * cfg.dt, [])


def test_snapshot_beyond_horizon_rejected(gc_identity):
    with pytest.raises(SolverError):
        SolverConfig(gc_identity, empty_defects(gc_identity.rate),
                     constant(1.0), M=32, t_end=0.1, snapshot_times=(0.2,))


# -- super-slow pins ---------------------------------------------------------


def _super(gc):
    return DefectSet.build([DefectSpec(0.5, 2.0, 1.0)], gc.rate)


def test_pin_noop_at_c0(gc_identity):
    cfg = SolverConfig(gc_identity, _super(gc_identity), constant(1.0),
                       M=64, t_end=0.05, snapshot_times=(0.05,), c0=1.0)
    res = solve(cfg)
    s = res.snapshot_at(0.05)
    assert np.allclose(s.rho, 1.0, atol=1e-13)
    assert s.reservoirs[0] == pytest.approx(0.0, abs=1e-13)


def test_pin_relaxes_and_reservoir_grows(gc_identity):
    cfg = SolverConfig(gc_identity, _super(gc_identity), constant(2.0),
                       M=64, t_end=1.5, snapshot_times=(0.2, 0.6, 1.5), c0=1.0)
    res = solve(cfg)
    r_prev = 0.0
    for t in (0.2, 0.6, 1.5):
        s = res.snapshot_at(t)
        assert s.reservoirs[0] > r_prev  # pin keeps absorbing
        r_prev = s.reservoirs[0]
    final = res.snapshot_at(1.5)
    assert np.abs(final.rho - 1.0).max() < 5e-3
    # maximum principle: solution stays between c0 and the initial level
    for s in res.snapshots:
        assert np.all(s.rho <= 2.0 + 1e-12) and np.all(s.rho >= 1.0 - 1e-12)
    assert res.mass_drift < 1e-10


def test_two_pins_steady_state(gc_identity):
    ds = DefectSet.build([DefectSpec(0.25, 2.0, 1.0), DefectSpec(0.75, 1.5, 1.0)],
                         gc_identity.rate)
    cfg = SolverConfig(gc_identity, ds, constant(1.5), M=64, t_end=2.0,
                       snapshot_times=(2.0,), c0=1.0)
    assert np.abs(solve(cfg).snapshot_at(2.0).rho - 1.0).max() < 1e-3


# -- critical atoms (power rates) ----------------------------------------------


def _critical(gc, lam=2.0):
    return DefectSet.build([DefectSpec(0.5, 1.0, lam)], gc.rate)


def test_stationary_compatible_pair(gc_identity):
    # rho0 = c, m0 = (lam Phi(c))^(1/alpha): nothing moves
    c, lam = 1.0, 2.0
    m0 = lam * gc_identity.fugacity(c)
    cfg = SolverConfig(gc_identity, _critical(gc_identity, lam), constant(c),
                       M=64, t_end=0.1, snapshot_times=(0.1,), atoms0={0: m0})
    s = solve(cfg).snapshot_at(0.1)
    assert np.allclose(s.rho, c, atol=1e-12)
    assert s.atoms[0] == pytest.approx(m0, abs=1e-12)


def test_incompatible_atom_jumps_on(gc_identity):
    cfg = SolverConfig(gc_identity, _critical(gc_identity), constant(1.0),
                       M=128, t_end=0.02, snapshot_times=(0.001, 0.02),
                       atoms0={0: 0.0})
    res = solve(cfg)
    early = res.snapshot_at(0.001)
    assert early.atoms[0] > 0.0  # mass starts accumulating immediately
    late = res.snapshot_at(0.02)
    node = 64
    m, rho_j = late.atoms[0], float(late.rho[node])
    assert abs(m - 2.0 * gc_identity.fugacity(rho_j)) < 5e-3


def test_atom_mass_audit(gc_identity):
    # m(t) - m0 equals the bulk mass the defect swallowed, to scheme accuracy
    cfg = SolverConfig(gc_identity, _critical(gc_identity), constant(1.0),
                       M=512, t_end=0.05, snapshot_times=(0.05,), atoms0={0: 0.0})
    res = solve(cfg)
    s = res.snapshot_at(0.05)
    gap = abs(s.atoms[0] - (1.0 - s.rho.mean()))
    assert gap < 1e-3
    assert res.mass_drift < 1e-10


# -- bounded complementarity ------------------------------------------------------


def _slow(gc, lam=2.0):
    return DefectSet.build([DefectSpec(0.5, 0.0, lam)], gc.rate)


def test_quiet_defect_matches_free_run(gc_ratio):
    prof = CosineProfile(1.0, (0.5,))
    with_defect = SolverConfig(gc_ratio, _slow(gc_ratio), prof, M=128,
                               t_end=0.05, snapshot_times=(0.05,))
    free = SolverConfig(gc_ratio, empty_defects(gc_ratio.rate), prof, M=128,
                        t_end=0.05, snapshot_times=(0.05,))
    a = solve(with_defect).snapshot_at(0.05)
    b = solve(free).snapshot_at(0.05)
    assert np.abs(a.rho - b.rho).mean() < 1e-10
    assert a.atoms[0] == 0.0


def test_supercritical_start_pins_immediately(gc_ratio):
    cfg = SolverConfig(gc_ratio, _slow(gc_ratio), constant(3.0), M=128,
                       t_end=0.05, snapshot_times=(0.001, 0.05))
    res = solve(cfg)
    node = 64
    for t in (0.001, 0.05):
        s = res.snapshot_at(t)
        assert s.rho[node] == pytest.approx(2.0, abs=1e-9)  # c_max = 2
        assert s.atoms[0] > 0.0
    # mass audit from the single-defect closed form
    s = res.snapshot_at(0.05)
    assert s.atoms[0] == pytest.approx(3.0 - s.rho.mean(), abs=1e-10)
    assert res.regime_log[0][2] == "pinned"


def test_bounce_switch_sequence(gc_ratio):
    cfg = SolverConfig(gc_ratio, _slow(gc_ratio),
                       PiecewiseProfile((0.0, 0.38, 0.48), (1.0, 7.0, 1.0)),
                       M=256, t_end=0.5, snapshot_times=(0.5,))
    res = solve(cfg)
    kinds = [regime for _, _, regime in res.regime_log]
    assert kinds == ["pinned", "transparent"]
    final = res.snapshot_at(0.5)
    assert final.atoms[0] == 0.0
    assert final.rho[128] < 2.0  # strictly below threshold after release
    assert res.mass_drift < 1e-10


def test_threshold_never_exceeded(gc_ratio):
    cfg = SolverConfig(gc_ratio, _slow(gc_ratio), constant(3.0), M=128,
                       t_end=0.05, snapshot_times=tuple(np.linspace(0.005, 0.05, 10)))
    res = solve(cfg)
    for s in res.snapshots:
        phi_j = gc_ratio.fugacity(float(s.rho[64]))
        assert phi_j <= 0.5 + 1e-8
        assert s.atoms[0] * (0.5 - phi_j) <= 1e-6


# -- cross-cutting ---------------------------------------------------------------


def test_total_mass_examples(gc_identity):
    cfg = SolverConfig(gc_identity, _critical(gc_identity), constant(1.0),
                       M=16, t_end=0.01, atoms0={0: 0.3})
    state = Solver(cfg).initial_state()
    assert total_mass(state) == pytest.approx(1.3)


def test_comparison_principle(gc_identity):
    ds = _critical(gc_identity)
    lo = SolverConfig(gc_identity, ds, constant(0.8), M=64, t_end=0.05,
                      snapshot_times=(0.01, 0.05), atoms0={0: 0.1})
    hi = SolverConfig(gc_identity, ds, CosineProfile(1.3, (0.3,)), M=64,
                      t_end=0.05, snapshot_times=(0.01, 0.05), atoms0={0: 0.4})
    ra, rb = solve(lo), solve(hi)
    for t in (0.01, 0.05):
        assert np.all(ra.snapshot_at(t).rho <= rb.snapshot_at(t).rho + 1e-12)


def test_self_convergence_first_order_or_better(gc_identity):
    ds = _critical(gc_identity)
    sols = {}
    for M in (64, 128, 256):
        cfg = SolverConfig(gc_identity, ds, constant(1.0), M=M, t_end=0.05,
                           snapshot_times=(0.05,), atoms0={0: 0.0})
        sols[M] = solve(cfg).snapshot_at(0.05).rho
    d1 = np.abs(sols[64] - sols[128][::2]).mean()
    d2 = np.abs(sols[128] - sols[256][::2]).mean()
    assert d1 / d2 >= 1.8
