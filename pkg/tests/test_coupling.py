import numpy as np
import pytest

from zrlab import simulator as sim
from zrlab.defects import DefectSet, DefectSpec, empty_defects
from zrlab.harness import attractiveness_check


def test_equal_copies_stay_locked(gc_identity):
    occ = np.array([2, 0, 1, 3], dtype=np.int64)
    pair = sim.CoupledPair.create(gc_identity, empty_defects(gc_identity.rate),
                                  occ, occ, seed=1)
    pair.run(5000)
    assert np.array_equal(pair.lo, pair.hi)


def test_empty_lower_copy_never_moves(gc_identity):
    lo = np.zeros(6, dtype=np.int64)
    hi = np.array([1, 2, 0, 0, 1, 0], dtype=np.int64)
    pair = sim.CoupledPair.create(gc_identity, empty_defects(gc_identity.rate),
                                  lo, hi, seed=2)
    pair.run(5000)
    assert np.all(pair.lo == 0)
    assert pair.hi.sum() == 4


def test_order_preserved_random_pair(gc_identity, rng):
    lo, hi = sim.sample_ordered_pair(gc_identity, 0.5, 2.0, 64, rng)
    pair = sim.CoupledPair.create(gc_identity, empty_defects(gc_identity.rate),
                                  lo, hi, seed=3)
    pair.run(100_000)
    assert pair.ordered()


def test_order_preserved_with_defects(gc_identity):
    ds = DefectSet.build([DefectSpec(0.25, 1.0, 2.0)], gc_identity.rate)
    audit = attractiveness_check(gc_identity, ds, 64, 50_000, seed=4)
    assert audit.ordered and audit.violation_event is None


def test_bounded_rate_coupling(gc_ratio):
    ds = DefectSet.build([DefectSpec(0.25, 0.0, 2.0)], gc_ratio.rate)
    audit = attractiveness_check(gc_ratio, ds, 64, 50_000, seed=5,
                                 rho_lo=0.5, rho_hi=3.0)
    assert audit.ordered


def test_bad_input_rejected(gc_identity):
    lo = np.array([2, 0], dtype=np.int64)
    hi = np.array([1, 5], dtype=np.int64)
    with pytest.raises(ValueError):
        sim.CoupledPair.create(gc_identity, empty_defects(gc_identity.rate),
                               lo, hi, seed=6)


def test_sample_ordered_pair_is_ordered(gc_identity, gc_ratio, rng):
    for gc, (p1, p2) in ((gc_identity, (0.5, 2.0)), (gc_ratio, (0.2, 0.7))):
        lo, hi = sim.sample_ordered_pair(gc, p1, p2, 256, rng)
        assert np.all(lo <= hi)


def test_coupling_across_super_slow_defect(gc_identity):
    ds = DefectSet.build([DefectSpec(0.5, 2.0, 1.0)], gc_identity.rate)
    audit = attractiveness_check(gc_identity, ds, 64, 50_000, seed=9)
    assert audit.ordered
