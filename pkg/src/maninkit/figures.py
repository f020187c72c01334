"""Residual versus tolerance bar chart for a report."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import IOFailure  # noqa: E402


def residual_chart(report, directory, filename="residuals.png"):
    """Write log10 residuals next to their tolerances; returns the file path."""
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {directory}: {exc}") from exc
    checks = report.checks
    names = [c.name for c in checks]
    floor = 1e-18
    res = np.log10([max(c.max_residual, floor) for c in checks]) if checks else np.zeros(0)
    tol = np.log10([max(c.tolerance, floor) for c in checks]) if checks else np.zeros(0)
    x = np.arange(len(checks))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(checks) + 2), 3.5))
    colors = ["tab:green" if c.passed else "tab:red" for c in checks]
    ax.bar(x - 0.2, res - np.log10(floor), 0.4, bottom=np.log10(floor), color=colors, label="residual")
    ax.bar(x + 0.2, tol - np.log10(floor), 0.4, bottom=np.log10(floor), color="tab:gray", alpha=0.5,
           label="tolerance")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("log10 value")
    ax.set_title(f"{report.config.get('recipe')} on {report.config.get('model')}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(directory, filename)
    try:
        fig.savefig(path, dpi=100)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
