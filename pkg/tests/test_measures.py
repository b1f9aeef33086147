import numpy as np
import pytest

from zrlab import rates
from zrlab.defects import DefectSet, DefectSpec, empty_defects
from zrlab.measures import build_invariant, build_local_equilibrium
from zrlab.profiles import constant
from zrlab.thermo import FugacityOverflowError


def test_invariant_fugacities(gc_identity):
    ds = DefectSet.build([DefectSpec(0.0, 1.0, 2.0)], gc_identity.rate)
    spec = build_invariant(gc_identity, 1.0, 100, ds)
    fug = spec.marginals.fugacity
    assert fug[0] == pytest.approx(200.0, rel=1e-9)
    assert np.allclose(fug[1:], 1.0, atol=1e-9)


def test_invariant_zero_density(gc_identity):
    spec = build_invariant(gc_identity, 0.0, 32, empty_defects(gc_identity.rate))
    assert np.all(spec.marginals.fugacity == 0.0)


def test_invariant_bounded_overflow_rejected(gc_ratio):
    # c = R(0.6) = 3: defect fugacity 2 * 0.6 = 1.2 >= r_g = 1
    ds = DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], gc_ratio.rate)
    c = gc_ratio.mean_density(0.6)
    assert c == pytest.approx(3.0, rel=1e-9)
    with pytest.raises(FugacityOverflowError, match="defect 0"):
        build_invariant(gc_ratio, c, 64, ds)


def test_invariant_sampling_iid(gc_identity, rng):
    spec = build_invariant(gc_identity, 2.0, 4096, empty_defects(gc_identity.rate))
    occ = spec.marginals.sample(gc_identity, rng)
    assert abs(occ.mean() - 2.0) < 0.1
    assert abs(occ.var() - 2.0) < 0.2  # Poisson: var = mean


def test_local_equilibrium_flat(gc_identity):
    marg = build_local_equilibrium(gc_identity, constant(1.0), {}, 0.0, 8,
                                   empty_defects(gc_identity.rate))
    assert np.allclose(marg.fugacity, 1.0, atol=1e-10)


def test_local_equilibrium_critical_power(gc_identity):
    ds = DefectSet.build([DefectSpec(0.0, 1.0, 1.0)], gc_identity.rate)
    marg = build_local_equilibrium(gc_identity, constant(1.0), {0: 2.0}, 1.0,
                                   100, ds)
    assert marg.fugacity[0] == pytest.approx((100 * 2.0) ** 1.0)


def test_local_equilibrium_super(gc_identity):
    ds = DefectSet.build([DefectSpec(0.0, 2.0, 1.0)], gc_identity.rate)
    marg = build_local_equilibrium(gc_identity, constant(1.0), {}, 1.0, 10, ds)
    assert marg.fugacity[0] == pytest.approx(100.0, rel=1e-9)


def test_local_equilibrium_sub_starts_empty(gc_identity):
    ds = DefectSet.build([DefectSpec(0.0, 0.5, 1.0)], gc_identity.rate)
    marg = build_local_equilibrium(gc_identity, constant(1.0), {}, 1.0, 64, ds)
    assert marg.fugacity[0] == 0.0


def test_local_equilibrium_bounded_poisson_marker(gc_ratio):
    ds = DefectSet.build([DefectSpec(0.0, 0.0, 2.0)], gc_ratio.rate)
    marg = build_local_equilibrium(gc_ratio, constant(0.5), {0: 1.5}, 0.5, 64, ds)
    assert marg.poisson == {0: 1.5 * 64}
    assert marg.fugacity[0] == 0.0


def test_local_equilibrium_bounded_poisson_sampling(gc_ratio, rng):
    ds = DefectSet.build([DefectSpec(0.0, 0.0, 2.0)], gc_ratio.rate)
    marg = build_local_equilibrium(gc_ratio, constant(0.5), {0: 2.0}, 0.5,
                                   256, ds)
    means = [marg.sample(gc_ratio, rng)[0] for _ in range(200)]
    assert abs(np.mean(means) - 512.0) / 512.0 < 0.02


def test_negative_atom_rejected(gc_identity):
    ds = DefectSet.build([DefectSpec(0.0, 1.0, 1.0)], gc_identity.rate)
    with pytest.raises(ValueError):
        build_local_equilibrium(gc_identity, constant(1.0), {0: -1.0}, 1.0,
                                64, ds)
