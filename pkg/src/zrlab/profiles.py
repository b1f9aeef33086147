"""Initial density profiles on the unit torus.

Two declarative families cover every bundled scenario: piecewise-constant
segments and a cosine series.  Both integrate exactly over lattice cells,
which keeps local-equilibrium initial measures reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Profile:
    def cell_averages(self, n: int) -> np.ndarray:
        """Averages over the n cells ((k-1)/n, k/n], k = 0..n-1 (periodic).

        This left-cell convention is the one the lattice initial measures
        use: site k tracks the density mass just behind it.
        """
        raise NotImplementedError

    def node_averages(self, n: int) -> np.ndarray:
        """Averages over cells centered at the nodes i/n (solver convention)."""
        raise NotImplementedError

    def __call__(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class CosineProfile(Profile):
    """rho0(x) = mean + sum_m amps[m-1] * cos(2 pi m x)."""

    base: float
    amps: tuple[float, ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.full_like(x, self.base)
        for m, a in enumerate(self.amps, start=1):
            out = out + a * np.cos(2 * np.pi * m * x)
        return out

    def _window_averages(self, lo: np.ndarray, hi: np.ndarray, n: int) -> np.ndarray:
        out = np.full(len(lo), self.base, dtype=np.float64)
        for m, a in enumerate(self.amps, start=1):
            w = 2 * np.pi * m
            out += a * (np.sin(w * hi) - np.sin(w * lo)) / (w / n)
        return out

    def cell_averages(self, n: int) -> np.ndarray:
        k = np.arange(n)
        return self._window_averages((k - 1) / n, k / n, n)

    def node_averages(self, n: int) -> np.ndarray:
        k = np.arange(n)
        return self._window_averages((k - 0.5) / n, (k + 0.5) / n, n)

    def mean(self) -> float:
        return self.base


@dataclass(frozen=True)
class PiecewiseProfile(Profile):
    """Constant values on [breaks[i], breaks[i+1]); breaks[0] must be 0."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        b = np.asarray(self.breaks)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0) or b[-1] >= 1.0:
            raise ValueError("breaks must start at 0, increase, and stay below 1")
        if len(self.breaks) != len(self.values):
            raise ValueError("one value per segment")
        if min(self.values) < 0:
            raise ValueError("densities must be nonnegative")

    def __call__(self, x):
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        return np.asarray(self.values, dtype=np.float64)[idx]

    def _integral(self, a: float, b: float) -> float:
        """Integral over [a, b] for 0 <= a <= b <= 1."""
        edges = np.asarray(self.breaks + (1.0,))
        vals = np.asarray(self.values)
        total = 0.0
        for i in range(len(vals)):
            lo, hi = max(a, edges[i]), min(b, edges[i + 1])
            if hi > lo:
                total += vals[i] * (hi - lo)
        return total

    def _wrapped_average(self, lo: float, hi: float, n: int) -> float:
        if lo < 0:
            return n * (self._integral(lo + 1.0, 1.0) + self._integral(0.0, hi))
        if hi > 1.0:
            return n * (self._integral(lo, 1.0) + self._integral(0.0, hi - 1.0))
        return n * self._integral(lo, hi)

    def cell_averages(self, n: int) -> np.ndarray:
        return np.array([self._wrapped_average((k - 1) / n, k / n, n)
                         for k in range(n)])

    def node_averages(self, n: int) -> np.ndarray:
        return np.array([self._wrapped_average((k - 0.5) / n, (k + 0.5) / n, n)
                         for k in range(n)])

    def mean(self) -> float:
        return self._integral(0.0, 1.0)


def constant(value: float) -> PiecewiseProfile:
    return PiecewiseProfile((0.0,), (float(value),))
