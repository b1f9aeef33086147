"""The four figure kinds: profiles, atoms, static, convergence."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "zrviz"  # deterministic element ids

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import (ArtifactError, load_density_csv, load_json,
                        load_profiles_csv, load_report_csv, validate_run)


def _defect_positions(run_dir: Path) -> list[tuple[float, str]]:
    """(x, class) pairs from whichever sidecar the run wrote."""
    atoms = run_dir / "atoms.json"
    if atoms.exists():
        side = load_json(atoms)
        return [(d["x"], d["class"]) for d in side.get("defects", [])]
    report = run_dir / "report.json"
    if report.exists():
        rep = load_json(report)
        return [(d["x"], d["class"]) for d in
                rep.get("scenario", {}).get("defects", [])]
    return []


def _mark_defects(ax, defects) -> None:
    for x, cls in defects:
        ax.axvline(x, color="crimson", ls="--", lw=0.8, alpha=0.7)
        ax.annotate(cls, (x, 1.0), xycoords=("data", "axes fraction"),
                    ha="center", va="bottom", fontsize=7, color="crimson")


def plot_profiles(run_dir, out=None) -> Path:
    """Overlay PDE and smoothed empirical densities per snapshot time."""
    run_dir = Path(run_dir)
    validate_run(run_dir)
    defects = _defect_positions(run_dir)
    curves: dict[float, dict[str, tuple]] = {}
    prof_csv = run_dir / "profiles.csv"
    dens_csv = run_dir / "density.csv"
    if prof_csv.exists():
        for (kind, t), xy in load_profiles_csv(prof_csv).items():
            curves.setdefault(t, {})[kind] = xy
    elif dens_csv.exists():
        for t, xy in load_density_csv(dens_csv).items():
            curves.setdefault(t, {})["pde"] = xy
    else:
        raise ArtifactError(f"no density artifacts in {run_dir}")
    times = sorted(curves)
    fig, axes = plt.subplots(1, len(times), figsize=(4.2 * len(times), 3.2),
                             sharey=True, squeeze=False)
    for ax, t in zip(axes[0], times):
        for kind, (x, v) in sorted(curves[t].items()):
            style = dict(lw=1.6) if kind == "pde" else dict(lw=1.0, alpha=0.8)
            ax.plot(x, v, label=kind, **style)
        _mark_defects(ax, defects)
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("density")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    out = Path(out) if out else run_dir / "profiles.svg"
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    return out


def plot_atoms(run_dir, out=None) -> Path:
    """Atom mass trajectories with regime-switch markers."""
    run_dir = Path(run_dir)
    validate_run(run_dir)
    side_path = run_dir / "atoms.json"
    if not side_path.exists():
        raise ArtifactError(f"no atoms.json in {run_dir}")
    side = load_json(side_path)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for j, trace in sorted(side.get("atoms", {}).items()):
        ax.plot(trace["t"], trace["m"], lw=1.4, label=f"defect {j}")
    for t, j, regime in side.get("regime_log", []):
        ax.axvline(t, color="gray", ls=":", lw=0.9)
        ax.annotate(regime, (t, 0.98), xycoords=("data", "axes fraction"),
                    rotation=90, fontsize=7, va="top", ha="right", color="gray")
    # microscopic occ/N overlay, when a comparison run sits alongside
    defects_csv = run_dir / "defects.csv"
    if defects_csv.exists():
        rows = [r for r in load_report_csv(defects_csv)
                if r["class"] == "critical"]
        if rows:
            n_max = max(int(r["N"]) for r in rows)
            pts = [(float(r["t"]), float(r["value_mean"]), float(r["value_se"]))
                   for r in rows if int(r["N"]) == n_max]
            ts, vals, errs = zip(*sorted(pts))
            ax.errorbar(ts, vals, yerr=errs, fmt="o", ms=4, capsize=3,
                        label=f"occ/N at N={n_max}")
    ax.set_xlabel("t")
    ax.set_ylabel("atom mass")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out) if out else run_dir / "atoms.svg"
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    return out


def plot_static(run_dir, out=None) -> Path:
    """Histograms of defect-site occupancy under the invariant measure."""
    run_dir = Path(run_dir)
    validate_run(run_dir)
    path = run_dir / "static.json"
    if not path.exists():
        raise ArtifactError(f"no static.json in {run_dir}")
    data = load_json(path)
    samples = data.get("occupancy_samples", {})
    if not samples:
        raise ArtifactError("static.json carries no occupancy samples")
    fig, axes = plt.subplots(1, len(samples), figsize=(4.0 * len(samples), 3.2),
                             squeeze=False)
    for ax, (j, occ) in zip(axes[0], sorted(samples.items())):
        occ = np.asarray(occ, dtype=float)
        info = data["defects"][str(j)]
        ax.hist(occ, bins=40, color="steelblue", alpha=0.85)
        ax.axvline(occ.mean(), color="k", lw=1.0)
        ax.set_title(f"defect {j} ({info['class']}), mean {occ.mean():.1f}")
        ax.set_xlabel("occupancy")
    fig.tight_layout()
    out = Path(out) if out else run_dir / "static.svg"
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    return out


def plot_convergence(run_dir, out=None) -> Path:
    """Log-log L1 distance vs N with error bars, one line per time."""
    run_dir = Path(run_dir)
    validate_run(run_dir)
    path = run_dir / "report.json"
    if not path.exists():
        raise ArtifactError(f"no report.json in {run_dir}")
    entries = load_json(path).get("entries", [])
    if not entries:
        raise ArtifactError("report has an empty ladder")
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    times = sorted({e["t"] for e in entries})
    for t in times:
        rows = sorted((e for e in entries if e["t"] == t), key=lambda e: e["N"])
        ns = [e["N"] for e in rows]
        l1 = [e["l1_mean"] for e in rows]
        se = [e["l1_se"] for e in rows]
        pooled = [e["l1_pooled"] for e in rows]
        if len(ns) > 1:
            ax.errorbar(ns, l1, yerr=se, marker="o", ms=4, capsize=3,
                        label=f"per replica, t={t:g}")
            ax.plot(ns, pooled, marker="s", ms=4, ls="--",
                    label=f"pooled, t={t:g}")
        else:
            ax.errorbar(ns, l1, yerr=se, marker="o", ms=5, capsize=3, ls="",
                        label=f"t={t:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("L1 distance")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = Path(out) if out else run_dir / "convergence.svg"
    fig.savefig(out, metadata={"Date": None})
    plt.close(fig)
    return out


KINDS = {
    "profiles": plot_profiles,
    "atoms": plot_atoms,
    "static": plot_static,
    "convergence": plot_convergence,
}
