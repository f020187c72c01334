"""Central numerical tolerances.

Every threshold used by validators and verification sweeps lives here so a
run can override them in one place (``Tolerances.with_overrides``).
"""
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # algebra validation
    jacobi: float = 1e-12
    ad_invariance: float = 1e-12
    rank_rel: float = 1e-9
    subalgebra: float = 1e-10
    duality: float = 1e-10
    # group models
    bracket_match: float = 1e-10
    exp_log: float = 1e-9
    ad_metric: float = 1e-9
    on_manifold: float = 1e-9
    basis_expansion: float = 1e-8
    log_radius: float = 0.5
    # calculus
    fd_step: float = 1e-5
    min_step: float = 1e-8
    kernel_rel: float = 1e-7
    # linear Dirac geometry
    angle: float = 1e-8
    # verification sweeps
    section: float = 1e-6
    isotropy: float = 1e-8
    beta_zero: float = 1e-7
    cocycle: float = 1e-5
    closed_fd: float = 1e-4
    moment: float = 1e-6
    equivariance: float = 1e-7
    evaluator: float = 1e-8
    regular_value: float = 1e-6
    newton_tol: float = 1e-12
    newton_iter: int = 50
    nondegenerate: float = 1e-6

    def with_overrides(self, overrides):
        """Return a copy with selected fields replaced (values coerced to the field type)."""
        known = {f.name: f.type for f in fields(self)}
        clean = {}
        for key, value in dict(overrides or {}).items():
            if key not in known:
                raise KeyError(f"unknown tolerance '{key}'")
            clean[key] = int(value) if key == "newton_iter" else float(value)
        return replace(self, **clean)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT = Tolerances()
