"""Deterministic run reports (JSON or a fixed-width text table)."""
import json
from dataclasses import dataclass, field

from . import __version__
from .errors import IOFailure

SCHEMA = "manin-kit/report-v1"


@dataclass
class Report:
    config: dict
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        n = len(self.checks)
        failed = sum(not c.passed for c in self.checks)
        word = "check" if n == 1 else "checks"
        text = f"{n} {word}" if not n else f"{n} {word}, {failed} failed"
        return {"total": n, "passed": n - failed, "failed": failed, "text": text}

    def as_dict(self):
        return {
            "schema": SCHEMA,
            "version": __version__,
            "config": self.config,
            "checks": [{
                "id": c.name,
                "anchor": c.anchor,
                "max_residual": float(c.max_residual),
                "tolerance": float(c.tolerance),
                "passed": bool(c.passed),
                "worst_point": list(c.worst_point),
            } for c in self.checks],
            "notes": list(self.notes),
            "summary": self.summary(),
        }


def _sci(x):
    return f"{x:.2e}"


def render_text(report):
    rows = [("check", "residual", "tolerance", "status", "anchor")]
    for c in report.checks:
        rows.append((c.name, _sci(c.max_residual), _sci(c.tolerance), "PASS" if c.passed else "FAIL",
                     c.anchor))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = [f"manin-kit report {__version__}  model={report.config.get('model')}  "
             f"recipe={report.config.get('recipe')}  points={report.config.get('points')}  "
             f"seed={report.config.get('seed')}"]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r[:4], widths)) + "  " + r[4])
    for note in report.notes:
        lines.append(f"note: {note}")
    lines.append(f"summary: {report.summary()['text']}")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt="json"):
    """Report as bytes; equal reports give identical bytes."""
    if fmt == "json":
        text = json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"
    elif fmt == "text":
        text = render_text(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return text.encode("utf-8")


def write_report(report, path, fmt="json"):
    data = emit_report(report, fmt)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IOFailure(f"cannot write report to {path}: {exc}") from exc
    return data
