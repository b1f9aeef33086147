"""Jump-rate functions.

A rate function g maps the occupancy n of a site to the total departure
rate of particles from that site.  Two families are supported:

* power rates, g(n) ~ n**alpha with 0 < alpha <= 1, unbounded;
* bounded rates, increasing to 1 (the limit is normalised to 1; tables
  with a different limit are rejected rather than rescaled).

Every rate must vanish exactly at n = 0, be nondecreasing, and have
increments bounded by a Lipschitz constant gstar.  Monotonicity is what
makes two-copy couplings order-preserving, so it is enforced, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POWER = "power"
BOUNDED = "bounded"

# dispatch codes shared with the jit kernels
KIND_POWER = 0
KIND_RATIO = 1       # n / (n + 1)
KIND_GEOMETRIC = 2   # 1 - 2**-n
KIND_TABLE = 3       # explicit table with affine tail

TABLE_N = 4096


class RateFunctionError(ValueError):
    """Raised when a rate table violates the admissibility conditions."""


def _power_eval(n, alpha):
    n = np.asarray(n, dtype=np.float64)
    return n**alpha


@dataclass(frozen=True)
class RateFunction:
    """A jump-rate function g with its family tag and Lipschitz bound.

    ``table`` caches g(0..TABLE_N-1); beyond the table the analytic tail
    identified by ``kind`` applies (for user tables, the declared affine
    extension).  The cached table is what the simulation kernels read.
    """

    name: str
    family: str
    alpha: float                 # exponent for power rates, 0.0 for bounded
    gstar: float                 # Lipschitz bound on increments
    kind: int
    table: np.ndarray = field(repr=False)
    tail_coeffs: tuple[float, float] = (0.0, 0.0)   # g(n) = a + b*n past the table

    def __call__(self, n):
        """Evaluate g(n) for scalar or array n (nonnegative integers)."""
        arr = np.asarray(n)
        if np.any(arr < 0):
            raise ValueError("occupancy must be nonnegative")
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr).astype(np.int64)
        out = np.empty(arr.shape, dtype=np.float64)
        small = arr < len(self.table)
        out[small] = self.table[arr[small]]
        big = ~small
        if np.any(big):
            nb = arr[big].astype(np.float64)
            if self.kind == KIND_POWER:
                out[big] = nb**self.alpha
            elif self.kind == KIND_RATIO:
                out[big] = nb / (nb + 1.0)
            elif self.kind == KIND_GEOMETRIC:
                out[big] = 1.0 - np.exp2(-nb)
            else:
                a, b = self.tail_coeffs
                out[big] = a + b * nb
        return float(out[0]) if scalar else out

    @property
    def is_bounded(self) -> bool:
        return self.family == BOUNDED

    @property
    def r_g(self) -> float:
        """Convergence radius of the normaliser series: lim g(n)."""
        return 1.0 if self.is_bounded else np.inf

    def validate(self, n_check: int = 2000) -> None:
        """Check the admissibility conditions on the cached range."""
        g = self.table[: min(n_check, len(self.table))]
        if g[0] != 0.0:
            raise RateFunctionError("g(0) must be 0")
        if np.any(g[1:] <= 0.0):
            raise RateFunctionError("g(n) must be positive for n >= 1")
        inc = np.diff(g)
        if np.any(inc < -1e-15):
            raise RateFunctionError("g must be nondecreasing")
        if np.any(inc > self.gstar + 1e-12):
            raise RateFunctionError(
                f"increment {inc.max():.6g} exceeds declared Lipschitz bound {self.gstar:.6g}"
            )
        if self.family == POWER:
            n_big = 10**6
            ratio = self(n_big) / n_big**self.alpha
            if abs(ratio - 1.0) >= 1e-3:
                raise RateFunctionError(
                    f"power tail check failed: g(1e6)/1e6^alpha = {ratio:.6f}"
                )
        else:
            tail = self(10**6)
            if abs(tail - 1.0) >= 1e-3:
                raise RateFunctionError(
                    f"bounded rates must increase to 1, found limit near {tail:.6f}"
                )


def _finish(name, family, alpha, kind, values, tail=(0.0, 0.0)) -> RateFunction:
    table = np.asarray(values, dtype=np.float64)
    gstar = float(np.max(np.diff(table))) if len(table) > 1 else 1.0
    rf = RateFunction(
        name=name, family=family, alpha=alpha, gstar=gstar, kind=kind,
        table=table, tail_coeffs=tail,
    )
    rf.validate()
    return rf


def identity() -> RateFunction:
    """g(n) = n: independent random walks, Poisson marginals."""
    return power(1.0)


def power(alpha: float) -> RateFunction:
    """g(n) = n**alpha for alpha in (0, 1]."""
    if not 0.0 < alpha <= 1.0:
        raise RateFunctionError("power exponent must lie in (0, 1]")
    n = np.arange(TABLE_N, dtype=np.float64)
    return _finish(f"power[{alpha:g}]", POWER, alpha, KIND_POWER, n**alpha)


def bounded_ratio() -> RateFunction:
    """g(n) = n/(n+1), increasing to 1."""
    n = np.arange(TABLE_N, dtype=np.float64)
    return _finish("bounded[n/(n+1)]", BOUNDED, 0.0, KIND_RATIO, n / (n + 1.0))


def bounded_geometric() -> RateFunction:
    """g(n) = 1 - 2**-n, increasing to 1."""
    n = np.arange(TABLE_N, dtype=np.float64)
    return _finish("bounded[1-2^-n]", BOUNDED, 0.0, KIND_GEOMETRIC, 1.0 - np.exp2(-n))


def from_table(
    values,
    family: str,
    alpha: float = 0.0,
    tail_slope: float | None = None,
    name: str = "table",
) -> RateFunction:
    """Build a rate from explicit values g(0), g(1), ...

    Past the last tabulated point the rate continues affinely with
    ``tail_slope`` (default: the last observed increment).  Bounded tables
    must already level off at 1 within the table; a different limit is an
    error, since rescaling would silently change the time unit.
    """
    vals = np.asarray(values, dtype=np.float64)
    if len(vals) < 2:
        raise RateFunctionError("rate table needs at least g(0) and g(1)")
    if family not in (POWER, BOUNDED):
        raise RateFunctionError(f"unknown rate family {family!r}")
    if tail_slope is None:
        tail_slope = float(vals[-1] - vals[-2])
    if tail_slope < 0:
        raise RateFunctionError("tail slope must be nonnegative")
    if family == BOUNDED:
        if tail_slope != 0.0:
            raise RateFunctionError("bounded tables must declare a flat tail")
        if abs(vals[-1] - 1.0) >= 1e-3:
            raise RateFunctionError(
                f"bounded table must level off at 1, last value {vals[-1]:.6f}"
            )
    n0 = len(vals)
    # affine continuation: a + b*n matching the declared tail at n0-1
    a = float(vals[-1]) - tail_slope * (n0 - 1)
    b = tail_slope
    if n0 < TABLE_N:
        ext = a + b * np.arange(n0, TABLE_N, dtype=np.float64)
        vals = np.concatenate([vals, ext])
    return _finish(name, family, alpha, KIND_TABLE, vals[:TABLE_N], tail=(a, b))


def load_table(path, family: str, alpha: float = 0.0, tail_slope=None) -> RateFunction:
    """Load a two-column text file (n, g(n)); n must be 0,1,2,... contiguous."""
    data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if data.shape[1] != 2:
        raise RateFunctionError("rate table file must have two columns: n, g(n)")
    ns = data[:, 0].astype(np.int64)
    if not np.array_equal(ns, np.arange(len(ns))):
        raise RateFunctionError("rate table must list n = 0, 1, 2, ... contiguously")
    return from_table(data[:, 1], family, alpha=alpha, tail_slope=tail_slope,
                      name=f"table[{path}]")


_BUILTINS = {
    "identity": identity,
    "power:0.25": lambda: power(0.25),
    "power:0.5": lambda: power(0.5),
    "power:1": identity,
    "bounded:ratio": bounded_ratio,
    "bounded:geometric": bounded_geometric,
}


def builtin(name: str) -> RateFunction:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise RateFunctionError(
            f"unknown builtin rate {name!r}; choices: {sorted(_BUILTINS)}"
        ) from None
