"""Post-hoc plots for zrlab run directories.

Pure functions of the run artifacts: everything is read back from the
CSV/JSON files a run wrote, nothing is recomputed, and the run manifest
must hash-validate before any figure is drawn.
"""

from .plots import plot_atoms, plot_convergence, plot_profiles, plot_static

__version__ = "0.1.0"

__all__ = ["plot_profiles", "plot_atoms", "plot_static", "plot_convergence"]
