"""Scenario config files (TOML) and their validation.

One file describes one scenario: the rate family, the defects, the
initial condition, and the numerical sections for the solver, the
simulator, and the comparison harness.  Parse problems raise ConfigError
naming the offending table and field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import rates
from .defects import DefectError, DefectSet, DefectSpec
from .harness import Scenario
from .profiles import CosineProfile, PiecewiseProfile, Profile, constant
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing field '{key}' in [{where}]")
    return table[key]


def _parse_rate(tab: dict) -> rates.RateFunction:
    family = _need(tab, "family", "rate")
    if family == "power":
        alpha = float(tab.get("alpha", 1.0))
        try:
            return rates.power(alpha)
        except rates.RateFunctionError as e:
            raise ConfigError(f"[rate] {e}") from None
    if family == "bounded":
        form = tab.get("form", "ratio")
        if form == "ratio":
            return rates.bounded_ratio()
        if form == "geometric":
            return rates.bounded_geometric()
        raise ConfigError(f"[rate] unknown bounded form '{form}'")
    if family == "table":
        path = _need(tab, "path", "rate")
        kind = _need(tab, "table_family", "rate")
        try:
            return rates.load_table(path, kind, alpha=float(tab.get("alpha", 0.0)),
                                    tail_slope=tab.get("tail_slope"))
        except (OSError, rates.RateFunctionError) as e:
            raise ConfigError(f"[rate] table load failed: {e}") from None
    raise ConfigError(f"[rate] unknown family '{family}'")


def _parse_profile(tab: dict) -> Profile:
    kind = _need(tab, "kind", "initial")
    try:
        if kind == "constant":
            return constant(float(_need(tab, "value", "initial")))
        if kind == "cosine":
            return CosineProfile(float(_need(tab, "base", "initial")),
                                 tuple(float(a) for a in tab.get("amps", ())))
        if kind == "piecewise":
            return PiecewiseProfile(
                tuple(float(b) for b in _need(tab, "breaks", "initial")),
                tuple(float(v) for v in _need(tab, "values", "initial")),
            )
    except ValueError as e:
        raise ConfigError(f"[initial] {e}") from None
    raise ConfigError(f"[initial] unknown profile kind '{kind}'")


@dataclass
class ScenarioFile:
    """Everything a config file declares, ready to drive any subcommand."""

    name: str
    rate: rates.RateFunction
    defects: DefectSet
    rho0: Profile
    atoms0: dict[int, float]
    c0: float
    solver: dict
    simulate: dict
    harness: dict
    static: dict
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def load(cls, path) -> "ScenarioFile":
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"TOML parse error in {path}: {e}") from None
        return cls.parse(raw, default_name=path.stem)

    @classmethod
    def parse(cls, raw: dict, default_name: str = "scenario") -> "ScenarioFile":
        if "rate" not in raw:
            raise ConfigError("missing [rate] table")
        rate = _parse_rate(raw["rate"])
        try:
            specs = [
                DefectSpec(float(_need(d, "x", "defect")),
                           float(_need(d, "beta", "defect")),
                           float(_need(d, "lam", "defect")))
                for d in raw.get("defect", ())
            ]
            defects = DefectSet.build(specs, rate)
        except DefectError as e:
            raise ConfigError(f"[defect] {e}") from None
        init = raw.get("initial")
        if init is None:
            raise ConfigError("missing [initial] table")
        rho0 = _parse_profile(init)
        atoms_tab = init.get("atoms", {})
        try:
            atoms0 = {int(k): float(v) for k, v in atoms_tab.items()}
        except ValueError:
            raise ConfigError("[initial.atoms] keys must be defect indices") from None
        for j in atoms0:
            if not 0 <= j < len(defects):
                raise ConfigError(f"[initial.atoms] defect index {j} out of range")
        return cls(
            name=str(raw.get("name", default_name)),
            rate=rate, defects=defects, rho0=rho0, atoms0=atoms0,
            c0=float(init.get("c0", 0.0)),
            solver=dict(raw.get("solver", {})),
            simulate=dict(raw.get("simulate", {})),
            harness=dict(raw.get("harness", {})),
            static=dict(raw.get("static", {})),
            raw=raw,
        )

    # -- per-subcommand views --------------------------------------------------

    def solver_config(self) -> SolverConfig:
        from .harness import grand_canonical
        tab = self.solver
        t_end = float(_need(tab, "t_end", "solver"))
        snaps = tuple(float(t) for t in tab.get("snapshots", (t_end,)))
        try:
            return SolverConfig(
                gc=grand_canonical(self.rate), defects=self.defects,
                rho0=self.rho0, M=int(tab.get("M", 512)),
                cfl=float(tab.get("cfl", 0.5)), t_end=t_end,
                snapshot_times=snaps, atoms0=dict(self.atoms0), c0=self.c0,
            )
        except ValueError as e:
            raise ConfigError(f"[solver] {e}") from None

    def sim_settings(self) -> dict:
        tab = self.simulate
        n = int(_need(tab, "N", "simulate"))
        times = tuple(float(t) for t in _need(tab, "times", "simulate"))
        if not times:
            raise ConfigError("[simulate] times must be nonempty")
        return {"N": n, "times": times, "seed": int(tab.get("seed", 0))}

    def scenario(self) -> Scenario:
        tab = self.harness
        ladder = tuple(int(n) for n in _need(tab, "ladder", "harness"))
        if not ladder:
            raise ConfigError("[harness] ladder must be nonempty")
        times = tuple(float(t) for t in _need(tab, "times", "harness"))
        try:
            return Scenario(
                name=self.name, rate=self.rate, defects=self.defects,
                rho0=self.rho0, atoms0=dict(self.atoms0), c0=self.c0,
                obs_times=times, n_ladder=ladder,
                replicas=int(tab.get("replicas", 8)),
                theta=float(tab.get("theta", 1.0 / 32.0)),
                M=int(tab.get("M", self.solver.get("M", 512))),
                cfl=float(tab.get("cfl", self.solver.get("cfl", 0.5))),
                seed=int(tab.get("seed", 20260808)),
                l1_max=tab.get("l1_max"),
                trend_factor=tab.get("trend_factor"),
            )
        except ValueError as e:
            raise ConfigError(f"[harness] {e}") from None

    def content_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()
