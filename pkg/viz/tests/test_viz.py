"""Figure regeneration from artifacts alone (no physics recomputation).

Fixture runs are produced by driving the zrlab command line, which is the
interface this package consumes; everything after that reads files only.
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from zrviz.artifacts import ArtifactError, validate_run
from zrviz.cli import main as zrviz_main
from zrviz.plots import plot_atoms, plot_convergence, plot_profiles, plot_static

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"

MINI_COMPARE = """
name = "mini-critical"

[rate]
family = "power"
alpha = 1.0

[[defect]]
x = 0.5
beta = 1.0
lam = 2.0

[initial]
kind = "constant"
value = 1.0

[initial.atoms]
0 = 0.0

[solver]
M = 128
t_end = 0.02
snapshots = [0.005, 0.02]

[simulate]
N = 128
times = [0.02]
seed = 3

[harness]
ladder = [64, 128]
replicas = 3
theta = 0.0625
times = [0.02]
seed = 11
"""


def _zrlab(*args) -> None:
    proc = subprocess.run([sys.executable, "-m", "zrlab.cli", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def _only_run(root: Path) -> Path:
    (d,) = Path(root).iterdir()
    return d


@pytest.fixture(scope="module")
def compare_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("compare")
    cfg = tmp / "mini.toml"
    cfg.write_text(MINI_COMPARE)
    _zrlab("compare", str(cfg), "--out", str(tmp / "runs"), "--workers", "2")
    return _only_run(tmp / "runs")


@pytest.fixture(scope="module")
def solve_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("solves")
    out = {}
    for name in ("heat-free", "critical-atom", "super-slow", "bounded-pinned",
                 "bounded-bounce"):
        _zrlab("solve", str(SCENARIOS / f"{name}.toml"),
               "--out", str(tmp / name))
        out[name] = _only_run(tmp / name)
    return out


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("static")
    _zrlab("static", str(SCENARIOS / "static-demo.toml"),
           "--out", str(tmp / "runs"))
    return _only_run(tmp / "runs")


def test_profiles_from_compare_run(compare_run):
    out = plot_profiles(compare_run)
    assert out.exists() and out.suffix == ".svg"
    body = out.read_text()
    assert "<svg" in body


def test_profiles_from_every_solver_scenario(solve_runs):
    # figures for the bundled hydrodynamic scenarios, artifacts only
    for name, run in solve_runs.items():
        out = plot_profiles(run)
        assert out.exists(), name


def test_atoms_figures(solve_runs, compare_run):
    for name in ("critical-atom", "bounded-pinned", "bounded-bounce"):
        out = plot_atoms(solve_runs[name])
        assert out.exists(), name
    assert plot_atoms(compare_run).exists()


def test_bounce_figure_marks_switches(solve_runs):
    side = json.loads((solve_runs["bounded-bounce"] / "atoms.json").read_text())
    assert [r for _, _, r in side["regime_log"]] == ["pinned", "transparent"]
    assert plot_atoms(solve_runs["bounded-bounce"]).exists()


def test_static_histograms(static_run):
    out = plot_static(static_run)
    assert out.exists()


def test_convergence_figure(compare_run):
    out = plot_convergence(compare_run)
    assert out.exists()


@pytest.fixture(scope="module")
def single_n_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("single")
    cfg = tmp / "single.toml"
    cfg.write_text(MINI_COMPARE.replace("ladder = [64, 128]", "ladder = [128]"))
    _zrlab("compare", str(cfg), "--out", str(tmp / "runs"), "--workers", "2")
    return _only_run(tmp / "runs")


def test_single_point_ladder_plots(single_n_run):
    # single-N report: one point with error bar, no trend line
    out = plot_convergence(single_n_run)
    assert out.exists()


def test_tampered_report_refused(compare_run, tmp_path):
    report = json.loads((compare_run / "report.json").read_text())
    report["entries"] = [e for e in report["entries"] if e["N"] == 128]
    run2 = tmp_path / "tampered"
    shutil.copytree(compare_run, run2)
    (run2 / "report.json").write_text(json.dumps(report))
    # manifest no longer matches the edited report: plotting must refuse
    with pytest.raises(ArtifactError):
        plot_convergence(run2)


def test_empty_ladder_is_error(compare_run, tmp_path):
    run2 = tmp_path / "empty"
    shutil.copytree(compare_run, run2)
    report = json.loads((run2 / "report.json").read_text())
    report["entries"] = []
    (run2 / "report.json").write_text(json.dumps(report))
    with pytest.raises(ArtifactError):
        plot_convergence(run2)  # fails manifest validation first, still an error


def test_corrupt_manifest_aborts(compare_run, tmp_path):
    run2 = tmp_path / "corrupt"
    shutil.copytree(compare_run, run2)
    (run2 / "report.csv").write_text("tampered\n")
    with pytest.raises(ArtifactError, match="hash mismatch"):
        plot_profiles(run2)


def test_missing_manifest_aborts(tmp_path):
    with pytest.raises(ArtifactError, match="manifest"):
        plot_profiles(tmp_path)


def test_cli_all_kinds(compare_run):
    assert zrviz_main([str(compare_run)]) == 0
    for name in ("profiles.svg", "atoms.svg", "convergence.svg"):
        assert (compare_run / name).exists()


def test_cli_single_kind_out(compare_run, tmp_path):
    target = tmp_path / "fig.svg"
    assert zrviz_main([str(compare_run), "--kind", "profiles",
                       "--out", str(target)]) == 0
    assert target.exists()


def test_plots_are_pure_functions_of_artifacts(compare_run):
    # regenerating the same figure from the same artifacts is byte-identical
    a = plot_convergence(compare_run).read_bytes()
    b = plot_convergence(compare_run).read_bytes()
    assert a == b


def test_all_runs_manifest_validated(solve_runs, compare_run, static_run):
    for run in [*solve_runs.values(), compare_run, static_run]:
        validate_run(run)


def test_criterion_8_figures_from_artifacts(solve_runs, compare_run, static_run):
    """Release gate: every figure regenerates from artifacts alone."""
    import time

    t0 = time.time()
    produced = []
    for run in solve_runs.values():
        produced.append(plot_profiles(run))
    for name in ("critical-atom", "bounded-pinned", "bounded-bounce"):
        produced.append(plot_atoms(solve_runs[name]))
    produced += [plot_profiles(compare_run), plot_atoms(compare_run),
                 plot_convergence(compare_run), plot_static(static_run)]
    ok = all(p.exists() and p.stat().st_size > 0 for p in produced)
    for run in [*solve_runs.values(), compare_run, static_run]:
        validate_run(run)  # artifacts untouched by plotting
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion 8 (figures from artifacts): "
          f"{len(produced)} figures, manifests validated "
          f"({time.time() - t0:.0f}s)")
    assert ok
