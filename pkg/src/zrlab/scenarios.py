"""Bundled scenarios: the configurations the verification suites run.

Each returns a fresh Scenario; seeds are fixed so every report is
reproducible byte for byte.
"""

from __future__ import annotations

from . import rates
from .defects import DefectSet, DefectSpec, empty_defects
from .harness import Scenario
from .profiles import CosineProfile, PiecewiseProfile, constant


def heat_free() -> Scenario:
    """Defect-free diffusion of a cosine bump, identity rates."""
    rate = rates.identity()
    return Scenario(
        name="heat-free",
        rate=rate,
        defects=empty_defects(rate),
        rho0=CosineProfile(1.0, (1.0,)),
        obs_times=(0.05,),
        n_ladder=(128, 512),
        replicas=8,
        seed=1003,
        l1_max=0.10,
        trend_factor=1.5,
    )


def critical_atom() -> Scenario:
    """Single critical defect (beta = alpha = 1, lam = 2), flat start."""
    rate = rates.identity()
    return Scenario(
        name="critical-atom",
        rate=rate,
        defects=DefectSet.build([DefectSpec(0.5, 1.0, 2.0)], rate),
        rho0=constant(1.0),
        atoms0={0: 0.0},
        obs_times=(0.05,),
        n_ladder=(128, 256, 512),
        replicas=8,
        seed=1005,
        l1_max=0.12,
        trend_factor=1.5,
    )


def super_slow() -> Scenario:
    """Super-slow defect (beta=2, alpha=1) pinning the density at c0=1."""
    rate = rates.identity()
    return Scenario(
        name="super-slow",
        rate=rate,
        defects=DefectSet.build([DefectSpec(0.5, 2.0, 1.0)], rate),
        rho0=constant(2.0),
        c0=1.0,
        obs_times=(0.05,),
        n_ladder=(512,),
        replicas=8,
        seed=1007,
    )


def bounded_pinned() -> Scenario:
    """Bounded rates, slow site lam=2: supercritical start rho0=3 > c_max=2."""
    rate = rates.bounded_ratio()
    return Scenario(
        name="bounded-pinned",
        rate=rate,
        defects=DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], rate),
        rho0=constant(3.0),
        obs_times=(0.01, 0.05),
        n_ladder=(512,),
        replicas=8,
        seed=1009,
    )


def bounded_bounce() -> Scenario:
    """A drifting bump pushes the slow site over threshold, then recedes.

    Total mass 1.6 < c_max = 2, so after mixing the pin must release:
    the regime log shows transparent -> pinned -> transparent.
    """
    rate = rates.bounded_ratio()
    return Scenario(
        name="bounded-bounce",
        rate=rate,
        defects=DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], rate),
        rho0=PiecewiseProfile((0.0, 0.38, 0.48), (1.0, 7.0, 1.0)),
        obs_times=(0.02, 0.2, 0.4),
        n_ladder=(512,),
        replicas=8,
        seed=1011,
    )


def bounded_quiet() -> Scenario:
    """Bounded rates below threshold everywhere: the defect must be invisible."""
    rate = rates.bounded_ratio()
    return Scenario(
        name="bounded-quiet",
        rate=rate,
        defects=DefectSet.build([DefectSpec(0.5, 0.0, 2.0)], rate),
        rho0=constant(1.0),
        obs_times=(0.05,),
        n_ladder=(512,),
        replicas=8,
        seed=1013,
    )


def bounded_quiet_free() -> Scenario:
    """The defect-free twin of bounded_quiet (same seed: paired comparison)."""
    rate = rates.bounded_ratio()
    s = bounded_quiet()
    return Scenario(
        name="bounded-quiet-free",
        rate=rate,
        defects=empty_defects(rate),
        rho0=s.rho0,
        obs_times=s.obs_times,
        n_ladder=s.n_ladder,
        replicas=s.replicas,
        seed=2222,
    )


BUNDLED = {
    "heat-free": heat_free,
    "critical-atom": critical_atom,
    "super-slow": super_slow,
    "bounded-pinned": bounded_pinned,
    "bounded-bounce": bounded_bounce,
    "bounded-quiet": bounded_quiet,
    "bounded-quiet-free": bounded_quiet_free,
}


def bundled(name: str) -> Scenario:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled scenario {name!r}; "
                       f"choices: {sorted(BUNDLED)}") from None
