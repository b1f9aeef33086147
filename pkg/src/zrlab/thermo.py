"""Grand-canonical function family attached to a rate function.

For a rate g the single-site weights are w(n) = phi**n / g(n)! where
g(n)! = g(1) g(2) ... g(n).  This module evaluates, in log space,

* Z(phi)      the normaliser (partition function),
* R(phi)      the mean occupancy under the normalised weights,
* sigma2(phi) the occupancy variance,
* Phi(rho)    the inverse of R, obtained by bracketed bisection,

together with exact inverse-CDF occupancy sampling and fast tabulated
Phi / Phi^-1 callables for grid solvers.  The series domain is
phi in [0, r_g) where r_g = lim g(n): infinity for power rates, 1 for
bounded rates.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .rates import RateFunction

_LOG_TOL_DEFAULT = 1e-16
_MAX_TERMS = 50_000_000


class FugacityOverflowError(ValueError):
    """Fugacity at or beyond the convergence radius r_g."""


@dataclass(frozen=True)
class OccupancyDistribution:
    """Window of P_phi around its mode covering all but ~1e-15 of the mass."""

    phi: float
    n0: int
    probs: np.ndarray       # normalised over the window
    cdf: np.ndarray

    def sample(self, rng, size=None):
        u = rng.random(size)
        idx = np.searchsorted(self.cdf, u, side="right")
        return self.n0 + idx

    def quantile(self, u):
        """Inverse CDF at u in [0,1); monotone in both u and phi."""
        return self.n0 + int(np.searchsorted(self.cdf, u, side="right"))

    @property
    def mean(self) -> float:
        n = self.n0 + np.arange(len(self.probs))
        return float(np.dot(n, self.probs))


class GrandCanonical:
    """Derived thermodynamic functions for one rate function.

    Logically immutable: internal caches only grow, under a lock, so one
    instance is safe to share across threads.  Samplers take an externally
    owned numpy Generator.
    """

    def __init__(self, rate: RateFunction, truncation_tol: float = _LOG_TOL_DEFAULT):
        self.rate = rate
        self.truncation_tol = float(truncation_tol)
        self.r_g = rate.r_g
        self.gstar = rate.gstar
        self._lgf = np.zeros(1024)
        self._lgf_valid = 1
        self._lgf_lock = threading.Lock()
        self._grow_lgf(1024)
        self._dist_cache: dict[float, OccupancyDistribution] = {}

    # -- series plumbing ---------------------------------------------------

    def _grow_lgf(self, n_hi: int) -> None:
        """Extend the cached cumulative log factorial sum(ln g(k), k<=n).

        Locked: replica threads share one instance and may trigger growth
        simultaneously.  Readers are safe without the lock because the
        backing array is only ever swapped for a longer copy of itself.
        """
        if n_hi < self._lgf_valid:
            return
        with self._lgf_lock:
            if n_hi < self._lgf_valid:
                return
            size = len(self._lgf)
            while size <= n_hi:
                size *= 2
            lgf = self._lgf
            if size > len(lgf):
                new = np.zeros(size)
                new[: self._lgf_valid] = lgf[: self._lgf_valid]
                lgf = new
            lo = self._lgf_valid
            ks = np.arange(lo, n_hi + 1)
            lgf[lo : n_hi + 1] = lgf[lo - 1] + np.cumsum(np.log(self.rate(ks)))
            self._lgf = lgf
            self._lgf_valid = n_hi + 1

    def _check_phi(self, phi: float) -> None:
        if phi < 0:
            raise ValueError("fugacity must be nonnegative")
        if phi >= self.r_g:
            raise FugacityOverflowError(
                f"fugacity {phi:g} >= convergence radius r_g = {self.r_g:g}"
            )

    def mode(self, phi: float) -> int:
        """Largest n with g(n) <= phi: the mode of the occupancy weights."""
        if phi <= 0:
            return 0
        g = self.rate
        if g(1) > phi:
            return 0
        hi = 2
        while g(hi) <= phi:
            hi *= 2
            if hi > 2**62:
                raise FugacityOverflowError("mode search diverged")
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if g(mid) <= phi:
                lo = mid
            else:
                hi = mid
        return lo

    def _log_weights(self, phi: float, n_hi: int) -> np.ndarray:
        self._grow_lgf(n_hi)
        n = np.arange(n_hi + 1)
        with np.errstate(divide="ignore"):
            lphi = np.log(phi) if phi > 0 else -np.inf
        return n * lphi - self._lgf[: n_hi + 1]

    def _series_extent(self, phi: float) -> int:
        """Upper index past which the weight tail is below truncation_tol."""
        mode = self.mode(phi)
        if mode > _MAX_TERMS:
            raise FugacityOverflowError(
                f"series mode at phi={phi:g} exceeds {_MAX_TERMS} terms"
            )
        tol = self.truncation_tol
        pad = 64 + 8 * int(np.sqrt(mode + 1.0))
        n_hi = mode + pad
        for _ in range(60):
            lw = self._log_weights(phi, n_hi)
            peak = lw.max()
            ratio = phi / self.rate(n_hi + 1)
            # geometric tail bound: remaining mass <= last * ratio/(1-ratio)
            if ratio < 1.0:
                tail = np.exp(lw[-1] - peak) * ratio / (1.0 - ratio)
                if tail < tol:
                    return n_hi
            n_hi = mode + (n_hi - mode) * 2
            if n_hi > _MAX_TERMS:
                raise FugacityOverflowError(
                    f"series at phi={phi:g} needs more than {_MAX_TERMS} terms"
                )
        raise FugacityOverflowError(f"series at phi={phi:g} failed to converge")

    def _series_stats(self, phi: float):
        """(ln Z, mean, variance) of the normalised weights at phi."""
        if phi == 0.0:
            return 0.0, 0.0, 0.0
        n_hi = self._series_extent(phi)
        lw = self._log_weights(phi, n_hi)
        peak = lw.max()
        w = np.exp(lw - peak)
        s0 = w.sum()
        n = np.arange(n_hi + 1, dtype=np.float64)
        mean = float((n * w).sum() / s0)
        var = float(((n - mean) ** 2 * w).sum() / s0)
        return float(peak + np.log(s0)), mean, var

    # -- public thermodynamics ----------------------------------------------

    def log_partition(self, phi: float) -> float:
        """ln Z(phi), the log normaliser of the occupancy weights."""
        self._check_phi(phi)
        return self._series_stats(phi)[0]

    def mean_density(self, phi: float) -> float:
        """R(phi): mean occupancy at fugacity phi."""
        self._check_phi(phi)
        return self._series_stats(phi)[1]

    def variance(self, phi: float) -> float:
        """sigma^2(phi): occupancy variance at fugacity phi."""
        self._check_phi(phi)
        return self._series_stats(phi)[2]

    def fugacity(self, rho: float) -> float:
        """Phi(rho) = R^-1(rho) by bisection on [0, min(gstar*rho, r_g)].

        Newton is avoided on purpose: near rho = 0 and near the bounded
        saturation the derivative degenerates, bisection does not.
        """
        if rho < 0:
            raise ValueError("density must be nonnegative")
        if rho == 0.0:
            return 0.0
        hi = self.gstar * rho
        if self.rate.is_bounded and hi >= 0.5:
            # approach the saturation point geometrically; the series cost
            # per probe stays O(1/(1-phi)) instead of blowing up at 1-eps
            hi = 0.5
            while self.mean_density(hi) < rho:
                gap = 1.0 - hi
                if gap <= 1e-12:
                    raise FugacityOverflowError(
                        f"density {rho:g} outside the invertible range"
                    )
                hi = 1.0 - gap / 2
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.mean_density(mid) < rho:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        phi = 0.5 * (lo + hi)
        if abs(self.mean_density(phi) - rho) > 1e-10 * (1.0 + rho):
            raise ArithmeticError(
                f"fugacity inversion residual too large at rho={rho:g}"
            )
        return phi

    # -- sampling ------------------------------------------------------------

    def occupancy_distribution(self, phi: float) -> OccupancyDistribution:
        """Occupancy law P_phi on a window around its mode.

        The window expands symmetrically from the mode until the captured
        mass exceeds 1 - 1e-12 of the total (terms below 1e-300 of the peak
        are treated as zero).  Exact for both families; no normal
        approximation is involved, so defect-site marginals with huge means
        stay unbiased.
        """
        self._check_phi(phi)
        cached = self._dist_cache.get(phi)
        if cached is not None:
            return cached
        if phi == 0.0:
            dist = OccupancyDistribution(0.0, 0, np.array([1.0]), np.array([1.0]))
            self._dist_cache[phi] = dist
            return dist
        mode = self.mode(phi)
        lo, hi = mode, mode
        pad = 32 + 4 * int(np.sqrt(mode + 1.0))
        while True:
            lo = max(0, lo - pad)
            hi = hi + pad
            self._grow_lgf(hi + 1)
            n = np.arange(lo, hi + 1)
            lw = n * np.log(phi) - self._lgf[lo : hi + 1]
            peak = lw.max()
            # underflow past the window edges rounds to 0.0, which is the intent
            w = np.exp(lw - peak)
            total = w.sum()
            left_ok = lo == 0 or w[0] < 1e-13 * total
            ratio = phi / self.rate(hi + 1)
            right_ok = ratio < 1.0 and w[-1] * ratio / (1.0 - ratio) < 1e-13 * total
            if left_ok and right_ok:
                break
            pad *= 2
            if hi - lo > _MAX_TERMS:
                raise FugacityOverflowError("occupancy window failed to close")
        probs = w / total
        dist = OccupancyDistribution(phi, int(lo), probs, np.cumsum(probs))
        self._dist_cache[phi] = dist
        return dist

    def sample_occupancy(self, phi: float, rng, size=None):
        """Draw occupancies from P_phi using the window inverse CDF."""
        return self.occupancy_distribution(phi).sample(rng, size=size)

    # -- fast tabulated transforms -------------------------------------------

    def tabulate(self, rho_max: float, n_knots: int = 8193) -> "FugacityTables":
        """Monotone interpolation tables for Phi and Phi^-1 on [0, rho_max].

        Knots are (R(phi_k), phi_k) pairs on a uniform phi grid, so the two
        directions are exact inverses of each other on the piecewise-linear
        interpolant.  Grid solvers evaluate these instead of the series.
        """
        phi_max = self.fugacity(rho_max)
        phis = np.linspace(0.0, phi_max, n_knots)
        rhos = np.empty_like(phis)
        rhos[0] = 0.0
        for i, p in enumerate(phis[1:], start=1):
            rhos[i] = self._series_stats(p)[1]
        return FugacityTables(self, rho_knots=rhos, phi_knots=phis)


@dataclass(frozen=True)
class FugacityTables:
    """Vectorised Phi and Phi^-1 backed by shared interpolation knots."""

    gc: GrandCanonical
    rho_knots: np.ndarray
    phi_knots: np.ndarray

    @property
    def rho_max(self) -> float:
        return float(self.rho_knots[-1])

    def phi(self, rho):
        """Phi(rho), linear interpolation on the knots; rho may be an array."""
        r = np.asarray(rho, dtype=np.float64)
        if np.any(r > self.rho_knots[-1] * (1 + 1e-12)) or np.any(r < 0):
            raise ValueError(
                f"density outside table range [0, {self.rho_knots[-1]:g}]"
            )
        return np.interp(r, self.rho_knots, self.phi_knots)

    def rho(self, phi):
        """Phi^-1(phi) on the same knots (exact inverse of .phi)."""
        p = np.asarray(phi, dtype=np.float64)
        if np.any(p > self.phi_knots[-1] * (1 + 1e-12)) or np.any(p < 0):
            raise ValueError("fugacity outside table range")
        return np.interp(p, self.phi_knots, self.rho_knots)

    def max_error(self, n_probe: int = 17) -> float:
        """Largest |R(phi(rho)) - rho| over probe points, a table self-check."""
        probes = np.linspace(0.0, self.rho_max, n_probe)
        worst = 0.0
        for r in probes:
            worst = max(worst, abs(self.gc.mean_density(float(self.phi(r))) - r))
        return worst
