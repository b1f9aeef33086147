import numpy as np
import pytest

from zrlab import rates


ALL_BUILTINS = [
    rates.identity(),
    rates.power(0.5),
    rates.power(0.25),
    rates.bounded_ratio(),
    rates.bounded_geometric(),
]


@pytest.mark.parametrize("g", ALL_BUILTINS, ids=lambda g: g.name)
def test_builtin_invariants(g):
    ns = np.arange(0, 5000)
    vals = g(ns)
    assert vals[0] == 0.0
    assert np.all(vals[1:] > 0.0)
    inc = np.diff(vals)
    assert np.all(inc >= -1e-15)
    assert np.all(inc <= g.gstar + 1e-12)


@pytest.mark.parametrize("g,alpha", [(rates.identity(), 1.0),
                                     (rates.power(0.5), 0.5),
                                     (rates.power(0.25), 0.25)])
def test_power_tail(g, alpha):
    n = 10**6
    assert abs(g(n) / n**alpha - 1.0) < 1e-3


def test_bounded_limit_is_one():
    for g in (rates.bounded_ratio(), rates.bounded_geometric()):
        assert abs(g(10**6) - 1.0) < 1e-3
        assert g.r_g == 1.0


def test_identity_values():
    g = rates.identity()
    assert g(5) == 5.0
    assert g(0) == 0.0


def test_ratio_value():
    assert rates.bounded_ratio()(3) == 0.75


def test_table_crossover_consistency():
    # formula tail must continue the cached table without a jump
    for g in ALL_BUILTINS:
        n = len(g.table)
        lo, hi = g(n - 1), g(n)
        assert hi - lo <= g.gstar + 1e-12
        assert hi >= lo


def test_power_alpha_range():
    with pytest.raises(rates.RateFunctionError):
        rates.power(0.0)
    with pytest.raises(rates.RateFunctionError):
        rates.power(1.5)


def test_from_table_affine_tail():
    vals = [0.0, 0.5, 1.5, 2.5]
    g = rates.from_table(vals, rates.POWER, alpha=1.0, tail_slope=1.0)
    assert g(3) == 2.5
    assert g(5) == pytest.approx(4.5)
    assert g(10**5) == pytest.approx(2.5 + (10**5 - 3))


def test_from_table_tail_must_match_declared_power():
    # slope 0.25 with alpha=1 contradicts g(n)/n -> 1 and must be rejected
    with pytest.raises(rates.RateFunctionError):
        rates.from_table([0.0, 1.0, 1.5, 1.75], rates.POWER, alpha=1.0,
                         tail_slope=0.25)


def test_from_table_rejects_decreasing():
    with pytest.raises(rates.RateFunctionError):
        rates.from_table([0.0, 1.0, 0.5], rates.POWER)


def test_from_table_rejects_positive_g0():
    with pytest.raises(rates.RateFunctionError):
        rates.from_table([0.5, 1.0, 1.5], rates.POWER)


def test_bounded_table_rejects_wrong_limit():
    # limit 0.8 != 1: must be rejected, not rescaled
    vals = 0.8 * (1.0 - 2.0 ** -np.arange(200))
    with pytest.raises(rates.RateFunctionError):
        rates.from_table(vals, rates.BOUNDED, tail_slope=0.0)


def test_load_table_roundtrip(tmp_path):
    ns = np.arange(50)
    path = tmp_path / "rate.txt"
    np.savetxt(path, np.column_stack([ns, ns.astype(float)]))
    g = rates.load_table(path, rates.POWER, alpha=1.0)
    assert g(7) == 7.0
    assert g(6000) == 6000.0  # affine tail with slope 1


def test_load_table_requires_contiguous(tmp_path):
    path = tmp_path / "rate.txt"
    np.savetxt(path, np.array([[0, 0.0], [2, 1.0]]))
    with pytest.raises(rates.RateFunctionError):
        rates.load_table(path, rates.POWER)
