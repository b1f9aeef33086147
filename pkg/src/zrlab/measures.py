"""Product initial measures: invariant and local-equilibrium builders.

An initial measure assigns each lattice site an independent marginal.
Regular sites always carry the grand-canonical occupancy law at some
fugacity; critical defects under a bounded rate instead carry a plain
Poisson marginal, which is the one family that allows order-N pile-ups
there while keeping the entropy of the measure under control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .defects import CRITICAL, SUB, SUPER, DefectSet
from .profiles import Profile
from .thermo import FugacityOverflowError, GrandCanonical


@dataclass(frozen=True)
class SiteMarginals:
    """Per-site marginal table: fugacities plus Poisson overrides.

    ``fugacity[k]`` is the grand-canonical fugacity at site k; sites listed
    in ``poisson`` are sampled Poisson(mean) instead.
    """

    N: int
    fugacity: np.ndarray
    poisson: dict[int, float] = field(default_factory=dict)

    def sample(self, gc: GrandCanonical, rng) -> np.ndarray:
        occ = np.zeros(self.N, dtype=np.int64)
        # group sites by fugacity so each distinct law is materialised once
        uniq, inverse = np.unique(self.fugacity, return_inverse=True)
        for i, phi in enumerate(uniq):
            sites = np.nonzero(inverse == i)[0]
            if phi == 0.0:
                continue
            occ[sites] = gc.sample_occupancy(float(phi), rng, size=len(sites))
        for k, mean in self.poisson.items():
            occ[k] = rng.poisson(mean)
        return occ


@dataclass(frozen=True)
class InvariantMeasureSpec:
    """Product invariant measure at density parameter c."""

    c: float
    N: int
    marginals: SiteMarginals


def _check_fugacity(gc: GrandCanonical, phi: float, where: str):
    if phi >= gc.r_g:
        raise FugacityOverflowError(
            f"fugacity {phi:g} at {where} reaches the radius r_g = {gc.r_g:g}"
        )


def build_invariant(
    gc: GrandCanonical, c: float, N: int, defects: DefectSet
) -> InvariantMeasureSpec:
    """Invariant product measure: fugacity Phi(c) at regular sites and
    lam * N**beta * Phi(c) at each defect site."""
    phi_c = gc.fugacity(c)
    fug = np.full(N, phi_c)
    for j, d, _ in defects.indexed():
        k = d.site(N)
        phi_k = d.divisor(N) * phi_c
        _check_fugacity(gc, phi_k, f"defect {j} (x={d.x}, site {k})")
        fug[k] = phi_k
    defects.sites(N)  # raises on site collisions
    return InvariantMeasureSpec(c=c, N=N, marginals=SiteMarginals(N, fug))


def build_local_equilibrium(
    gc: GrandCanonical,
    rho0: Profile,
    atoms: dict[int, float],
    c0: float,
    N: int,
    defects: DefectSet,
) -> SiteMarginals:
    """Local-equilibrium product measure tracking the profile rho0.

    Regular site k gets fugacity Phi of the cell average of rho0; sub
    defects start empty; critical defects get (N*m0)**alpha for power rates
    or a Poisson(N*m0) marginal for bounded rates; super defects get the
    invariant-level fugacity lam * N**beta * Phi(c0).

    ``atoms`` maps defect index -> initial atom mass m0 (critical only).
    """
    cells = rho0.cell_averages(N)
    if np.any(cells < 0):
        raise ValueError("density profile must be nonnegative")
    fug = np.array([gc.fugacity(float(r)) for r in np.unique(cells)])
    lookup = {float(r): f for r, f in zip(np.unique(cells), fug)}
    fugacities = np.array([lookup[float(r)] for r in cells])
    poisson: dict[int, float] = {}
    site_of = defects.sites(N)
    for j in atoms:
        if not 0 <= j < len(defects):
            raise ValueError(f"atom mass for unknown defect index {j}")
        if atoms[j] > 0 and defects.classes[j] != CRITICAL:
            raise ValueError(
                f"defect {j} is {defects.classes[j]}, it cannot carry an atom"
            )
    for j, d, cls in defects.indexed():
        k = d.site(N)
        m0 = float(atoms.get(j, 0.0))
        if m0 < 0:
            raise ValueError("initial atom masses must be nonnegative")
        if cls == SUB:
            fugacities[k] = 0.0
        elif cls == CRITICAL:
            if gc.rate.is_bounded:
                fugacities[k] = 0.0
                poisson[k] = m0 * N
            else:
                phi_k = (N * m0) ** gc.rate.alpha
                _check_fugacity(gc, phi_k, f"critical defect {j}")
                fugacities[k] = phi_k
        else:  # SUPER
            phi_k = d.divisor(N) * gc.fugacity(c0)
            _check_fugacity(gc, phi_k, f"super defect {j}")
            fugacities[k] = phi_k
    assert len(site_of) == len(defects)
    return SiteMarginals(N, fugacities, poisson)
