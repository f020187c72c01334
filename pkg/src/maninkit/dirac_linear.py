"""Lagrangian relations between metrized vector spaces.

A relation ``V1 -> V2`` is a column span inside ``V2 + V1`` (target block
first), Lagrangian for the metric ``diag(B2, -B1)``.  Dirac morphisms are
checked pointwise: the relation restricted to ``E2 x E1`` has to be the graph
of a linear map ``E2 -> E1``.
"""
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT
from .errors import (ActionNotTransitive, DimensionMismatch, ExistenceFailure, NonCleanComposition,
                     UniquenessFailure)
from .liealg import Subspace, dual_pair_basis, null_space, numerical_rank, orthonormal_basis


@dataclass(frozen=True, eq=False)
class MetrizedSpace:
    metric: np.ndarray

    @property
    def dim(self):
        return self.metric.shape[0]


@dataclass(frozen=True, eq=False)
class LagrangianRelation:
    source: MetrizedSpace
    target: MetrizedSpace
    span: np.ndarray

    @property
    def metric(self):
        n2, n1 = self.target.dim, self.source.dim
        out = np.zeros((n1 + n2, n1 + n2))
        out[:n2, :n2] = self.target.metric
        out[n2:, n2:] = -self.source.metric
        return out

    def target_part(self):
        return self.span[:self.target.dim]

    def source_part(self):
        return self.span[self.target.dim:]


def graph(mat, source, target):
    """Relation ``{(A x, x)}`` of a linear map ``A: V1 -> V2``."""
    n1 = source.dim
    return LagrangianRelation(source, target, np.vstack([mat, np.eye(n1)]))


def identity_relation(space):
    return graph(np.eye(space.dim), space, space)


def check_lagrangian_relation(rel, tol=DEFAULT):
    n = rel.source.dim + rel.target.dim
    if rel.span.shape[0] != n:
        raise DimensionMismatch(f"span has {rel.span.shape[0]} rows, expected {n}")
    q = orthonormal_basis(rel.span, tol.rank_rel)
    iso = float(np.abs(q.T @ rel.metric @ q).max()) if q.size else 0.0
    scale = max(1.0, np.abs(rel.metric).max())
    ok = 2 * q.shape[1] == n and iso < tol.isotropy * scale
    return ok, {"isotropy": iso, "rank": q.shape[1], "expected_rank": n // 2}


def compose(rel2, rel1, tol=DEFAULT):
    """Composite ``rel2 o rel1`` by eliminating the shared middle factor."""
    if rel1.target.dim != rel2.source.dim:
        raise DimensionMismatch("middle spaces differ")
    y1, x1 = rel1.target_part(), rel1.source_part()
    z2, y2 = rel2.target_part(), rel2.source_part()
    k1 = y1.shape[1]
    coef = null_space(np.hstack([y1, -y2]), tol.rank_rel)
    a, b = coef[:k1], coef[k1:]
    out = orthonormal_basis(np.vstack([z2 @ b, x1 @ a]), tol.rank_rel)
    expected = (rel1.source.dim + rel2.target.dim) // 2
    if out.shape[1] != expected:
        raise NonCleanComposition(f"composite has rank {out.shape[1]}, expected {expected}")
    return LagrangianRelation(rel1.source, rel2.target, out)


def backward_image(rel, lag, tol=DEFAULT):
    """``{x : (y, x) in rel for some y in lag}`` as a Subspace of the source."""
    y, x = rel.target_part(), rel.source_part()
    resid = (np.eye(rel.target.dim) - lag.projector()) @ y
    coef = null_space(resid, tol.rank_rel) if resid.size else np.eye(y.shape[1])
    cols = orthonormal_basis(x @ coef, tol.rank_rel)
    return Subspace(rel.source.dim, cols, cols)


def subspace_lagrangian_residual(space, sub):
    q = sub.orthonormal
    iso = float(np.abs(q.T @ space.metric @ q).max()) if q.size else 0.0
    return iso, 2 * sub.k == space.dim


def check_dirac_morphism(rel, e1, e2, tol=DEFAULT):
    """Check that ``rel`` restricted to ``E2 x E1`` is the graph of a map ``E2 -> E1``.

    Returns ``(True, A)`` with ``A`` the induced map in the coordinates of the
    given bases of E2 and E1.  Raises ExistenceFailure or UniquenessFailure
    with a witness vector.
    """
    y, x = rel.target_part(), rel.source_part()
    p2 = np.eye(rel.target.dim) - e2.projector()
    p1 = np.eye(rel.source.dim) - e1.projector()
    coef = null_space(np.vstack([p2 @ y, p1 @ x]), tol.rank_rel)
    ys, xs = y @ coef, x @ coef
    scale = max(1.0, np.abs(rel.span).max())
    # uniqueness: nothing with vanishing E2 part may survive
    kern = null_space(ys, tol.rank_rel) if ys.size else np.eye(coef.shape[1])
    if kern.size:
        w = xs @ kern
        norms = np.linalg.norm(w, axis=0)
        if norms.max() > tol.rank_rel * scale:
            raise UniquenessFailure("a nonzero e1 is related to 0", w[:, np.argmax(norms)])
    # existence: image of ys must contain E2
    img = orthonormal_basis(ys, tol.rank_rel) if ys.size else np.zeros((rel.target.dim, 0))
    miss = e2.basis - img @ (img.T @ e2.basis)
    norms = np.linalg.norm(miss, axis=0)
    if norms.size and norms.max() > 1e3 * tol.rank_rel * max(1.0, np.abs(e2.basis).max()):
        raise ExistenceFailure("some e2 has no related e1", e2.basis[:, np.argmax(norms)])
    induced = xs @ np.linalg.pinv(ys)
    a = np.linalg.lstsq(e1.basis, induced @ e2.basis, rcond=None)[0]
    return True, a


def bivector_from_splitting(pair, m, action_matrix, tol=DEFAULT):
    """Matrix ``P`` of the bivector ``-a o p o a*`` with ``pi(mu, nu) = nu . P mu``.

    ``action_matrix`` sends algebra coordinates to tangent coordinates at q;
    ``p`` is the projection onto g along m and ``a*`` uses the metric.
    """
    a = np.asarray(action_matrix, dtype=float)
    nq = a.shape[0]
    if numerical_rank(a, tol.rank_rel) < nq:
        raise ActionNotTransitive(f"action has rank {numerical_rank(a, tol.rank_rel)} < {nq}")
    e, f = dual_pair_basis(pair, m, tol)
    B = pair.d.B
    proj = e @ f.T @ B
    return -a @ proj @ np.linalg.solve(B, a.T)


def bivector_from_generators(pair, m, action_matrix, tol=DEFAULT):
    """Same bivector assembled as 1/2 sum_a (e_a)_Q ^ (f^a)_Q."""
    e, f = dual_pair_basis(pair, m, tol)
    eq = action_matrix @ e
    fq = action_matrix @ f
    return 0.5 * (fq @ eq.T - eq @ fq.T)
