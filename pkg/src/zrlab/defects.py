"""Defect sites: locations, strengths, and their strength classes.

A defect at macroscopic position x divides the departure rate at the
lattice site floor(x*N) by lam * N**beta.  Against a given rate family the
defect is classified super, critical, or sub depending on how that divisor
compares with the growth of g.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rates import RateFunction

SUPER = "super"
CRITICAL = "critical"
SUB = "sub"


class DefectError(ValueError):
    """Invalid defect specification."""


@dataclass(frozen=True)
class DefectSpec:
    x: float
    beta: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.x < 1.0:
            raise DefectError(f"defect position {self.x} outside [0, 1)")
        if self.lam <= 0:
            raise DefectError("defect strength lam must be positive")

    def site(self, N: int) -> int:
        return int(self.x * N) % N

    def divisor(self, N: int) -> float:
        return self.lam * float(N) ** self.beta


def classify(defect: DefectSpec, rate: RateFunction) -> str:
    if rate.is_bounded:
        if defect.beta > 0:
            raise DefectError(
                "bounded rates admit no invariant measure with beta > 0 defects"
            )
        if defect.beta == 0.0 and defect.lam > 1.0:
            return CRITICAL
        return SUB
    if defect.beta > rate.alpha:
        return SUPER
    if defect.beta == rate.alpha:
        return CRITICAL
    return SUB


@dataclass(frozen=True)
class DefectSet:
    """Ordered defects with their classes against a fixed rate family."""

    defects: tuple[DefectSpec, ...]
    classes: tuple[str, ...]

    @classmethod
    def build(cls, defects, rate: RateFunction) -> "DefectSet":
        defects = tuple(defects)
        xs = [d.x for d in defects]
        if len(set(xs)) != len(xs):
            raise DefectError("defect positions must be pairwise distinct")
        return cls(defects, tuple(classify(d, rate) for d in defects))

    def __len__(self):
        return len(self.defects)

    def __iter__(self):
        return iter(zip(self.defects, self.classes))

    def indexed(self, cls_filter: str | None = None):
        for j, (d, c) in enumerate(zip(self.defects, self.classes)):
            if cls_filter is None or c == cls_filter:
                yield j, d, c

    def sites(self, N: int) -> dict[int, int]:
        """Map lattice site -> defect index; rejects site collisions."""
        out: dict[int, int] = {}
        for j, d, _ in self.indexed():
            k = d.site(N)
            if k in out:
                other = self.defects[out[k]]
                raise DefectError(
                    f"defects at x={other.x} and x={d.x} collide on site {k} "
                    f"at N={N}; increase N"
                )
            out[k] = j
        return out

    def grid_nodes(self, M: int) -> dict[int, int]:
        """Map solver grid node (nearest) -> defect index; rejects collisions."""
        out: dict[int, int] = {}
        for j, d, _ in self.indexed():
            i = int(round(d.x * M)) % M
            if i in out:
                other = self.defects[out[i]]
                raise DefectError(
                    f"defects at x={other.x} and x={d.x} share grid node {i} "
                    f"at M={M}; refine the grid"
                )
            out[i] = j
        return out


def empty_defects(rate: RateFunction) -> DefectSet:
    return DefectSet.build((), rate)
