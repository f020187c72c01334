"""Metrized Lie algebras, Manin pairs and Lagrangian subspaces.

Algebras are stored as structure constants ``c[a, b, k]`` with
``[e_a, e_b] = sum_k c[a, b, k] e_k`` together with a symmetric invariant
metric ``B``.  Subspaces are column spans.  Rank and equality decisions use the
Euclidean inner product on coordinates, never the (indefinite) metric.
"""
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .config import DEFAULT
from .errors import (AdInvarianceViolation, DimensionMismatch, JacobiViolation, MetricDegenerate,
                     NotComplementary, NotLagrangian)


def levi_civita():
    eps = np.zeros((3, 3, 3))
    for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[a, b, c] = 1.0
        eps[b, a, c] = -1.0
    return eps


@dataclass(frozen=True, eq=False)
class MetrizedLieAlgebra:
    dim: int
    structure_constants: np.ndarray
    metric: np.ndarray
    label: str = "algebra"

    @property
    def c(self):
        return self.structure_constants

    @property
    def B(self):
        return self.metric

    def bracket(self, x, y):
        return np.einsum("a,b,abk->k", x, y, self.c)

    def pair(self, x, y):
        return np.asarray(x) @ self.B @ np.asarray(y)

    def ad(self, x):
        """Matrix of ad_x acting on coordinate columns."""
        return np.einsum("a,abk->kb", x, self.c)

    def to_json(self):
        return json.dumps({"dim": self.dim, "c": self.c.reshape(-1).tolist(),
                           "B": self.B.tolist(), "label": self.label}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        n = int(data["dim"])
        return make_metrized_algebra(n, np.array(data["c"], dtype=float).reshape(n, n, n),
                                     np.array(data["B"], dtype=float), data.get("label", "algebra"))


def jacobi_residual(c):
    """Largest Jacobi defect over basis triples, with the worst triple."""
    t = np.einsum("abk,kcm->abcm", c, c)
    jac = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
    norms = np.abs(jac).max(axis=3)
    idx = np.unravel_index(np.argmax(norms), norms.shape)
    return float(norms[idx]), tuple(int(i) for i in idx)


def ad_invariance_residual(c, B):
    """Largest value of <[x,y],z> + <y,[x,z]> over basis triples."""
    f = np.einsum("xyk,kz->xyz", c, B)
    res = np.abs(f + np.transpose(f, (0, 2, 1)))
    idx = np.unravel_index(np.argmax(res), res.shape)
    return float(res[idx]), tuple(int(i) for i in idx)


def make_metrized_algebra(dim, structure_constants, metric, label="algebra", tol=DEFAULT):
    c = np.array(structure_constants, dtype=float)
    B = np.array(metric, dtype=float)
    if c.shape != (dim, dim, dim) or B.shape != (dim, dim):
        raise DimensionMismatch(f"expected c of shape {(dim,) * 3} and B of shape {(dim, dim)}")
    anti = np.abs(c + np.transpose(c, (1, 0, 2)))
    if anti.max() > tol.jacobi:
        a, b, k = np.unravel_index(np.argmax(anti), anti.shape)
        raise JacobiViolation(f"structure constants not antisymmetric at ({a},{b},{k})")
    res, worst = jacobi_residual(c)
    if res > tol.jacobi:
        raise JacobiViolation(f"Jacobi identity fails by {res:.3e} at triple {worst}")
    if np.abs(B - B.T).max() > tol.jacobi:
        raise MetricDegenerate("metric is not symmetric")
    sv = np.linalg.svd(B, compute_uv=False) if dim else np.zeros(0)
    if dim and sv.min() <= tol.rank_rel * sv.max():
        raise MetricDegenerate(f"metric degenerate: singular values {sv}")
    res, worst = ad_invariance_residual(c, B)
    if res > tol.ad_invariance:
        raise AdInvarianceViolation(f"metric not ad-invariant: residual {res:.3e} at triple {worst}")
    return MetrizedLieAlgebra(dim, c, B, label)


def numerical_rank(mat, rel=DEFAULT.rank_rel):
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel * sv[0]))


def orthonormal_basis(mat, rel=DEFAULT.rank_rel):
    """Euclidean orthonormal basis of the column span."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.size == 0:
        return np.zeros((mat.shape[0], 0))
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    k = int(np.sum(s > rel * s[0])) if s.size and s[0] > 0 else 0
    return u[:, :k]


def null_space(mat, rel=DEFAULT.rank_rel):
    mat = np.atleast_2d(mat)
    n = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(mat)
    k = int(np.sum(s > rel * s[0])) if s.size and s[0] > 0 else 0
    return vt[k:].T


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span in ``ambient_dim`` coordinates.  ``basis`` keeps the caller's columns."""
    ambient_dim: int
    basis: np.ndarray
    orthonormal: np.ndarray = field(repr=False, default=None)

    @classmethod
    def span(cls, columns, tol=DEFAULT):
        cols = np.array(columns, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        q = orthonormal_basis(cols, tol.rank_rel)
        if q.shape[1] != cols.shape[1]:
            raise DimensionMismatch(f"columns have rank {q.shape[1]}, expected {cols.shape[1]}")
        return cls(cols.shape[0], cols, q)

    @property
    def k(self):
        return self.basis.shape[1]

    def projector(self):
        return self.orthonormal @ self.orthonormal.T

    def contains(self, vec, tol=1e-10):
        v = np.asarray(vec, dtype=float)
        return np.linalg.norm(v - self.projector() @ v) <= tol * max(1.0, np.linalg.norm(v))


def principal_angles(a, b):
    """Principal angles (radians) between two column spans."""
    qa = a.orthonormal if isinstance(a, Subspace) else orthonormal_basis(a)
    qb = b.orthonormal if isinstance(b, Subspace) else orthonormal_basis(b)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return np.zeros(0)
    # scipy mixes sine and cosine formulas, so tiny angles stay accurate
    return np.sort(scipy.linalg.subspace_angles(qa, qb))


def same_subspace(a, b, tol=DEFAULT.angle):
    qa = a.orthonormal if isinstance(a, Subspace) else orthonormal_basis(a)
    qb = b.orthonormal if isinstance(b, Subspace) else orthonormal_basis(b)
    if qa.shape[1] != qb.shape[1]:
        return False
    ang = principal_angles(qa, qb)
    return bool(ang.size == 0 or ang.max() < tol)


@dataclass(frozen=True, eq=False)
class ManinPair:
    d: MetrizedLieAlgebra
    g: Subspace
    complement: Subspace = None
    label: str = "pair"


def is_lagrangian_subalgebra(d, s, tol=DEFAULT):
    """Return ``(ok, diagnostics)`` with isotropy, dimension and closure residuals."""
    if s.ambient_dim != d.dim:
        raise DimensionMismatch(f"subspace lives in dimension {s.ambient_dim}, algebra has {d.dim}")
    q = s.orthonormal
    iso = float(np.abs(q.T @ d.B @ q).max()) if q.size else 0.0
    proj = np.eye(d.dim) - q @ q.T
    closure = 0.0
    for i in range(q.shape[1]):
        for j in range(i + 1, q.shape[1]):
            closure = max(closure, float(np.linalg.norm(proj @ d.bracket(q[:, i], q[:, j]))))
    half = 2 * s.k == d.dim
    ok = half and iso < tol.subalgebra and closure < tol.subalgebra
    return ok, {"isotropy": iso, "closure": closure, "dim": s.k, "half_dimensional": half}


def dual_pair_basis(pair, m, tol=DEFAULT):
    """Bases ``e`` of g and ``f`` of m (as columns) with <e_a, f^b> = delta."""
    d = pair.d
    e = pair.g.basis
    if m.ambient_dim != d.dim:
        raise DimensionMismatch("complement lives in the wrong dimension")
    if numerical_rank(np.hstack([e, m.basis]), tol.rank_rel) != d.dim or m.k != pair.g.k:
        raise NotComplementary("m is not complementary to g")
    q = m.orthonormal
    iso = np.abs(q.T @ d.B @ q).max()
    if iso > tol.subalgebra:
        raise NotLagrangian(f"m is not isotropic (residual {iso:.3e})")
    pairing = e.T @ d.B @ m.basis
    f = m.basis @ np.linalg.inv(pairing).T
    return e, f


def direct_sum(algebras, signs=None, label=None):
    """Block-diagonal sum; ``signs`` flips the metric of individual summands."""
    signs = signs or [1.0] * len(algebras)
    n = sum(a.dim for a in algebras)
    c = np.zeros((n, n, n))
    B = np.zeros((n, n))
    off = 0
    for a, sgn in zip(algebras, signs):
        sl = slice(off, off + a.dim)
        c[sl, sl, sl] = a.c
        B[sl, sl] = sgn * a.B
        off += a.dim
    return MetrizedLieAlgebra(n, c, B, label or "+".join(a.label for a in algebras))


def double_of(g_alg, tol=DEFAULT):
    """The Manin pair (gbar + g, diagonal) with metric block-diag(-B, B)."""
    d = direct_sum([g_alg, g_alg], [-1.0, 1.0], label=f"double-{g_alg.label}")
    d = make_metrized_algebra(d.dim, d.c, d.B, d.label, tol)
    n = g_alg.dim
    eye = np.eye(n)
    diag = Subspace.span(np.vstack([eye, eye]), tol)
    anti = Subspace.span(np.vstack([eye, -eye]), tol)
    return ManinPair(d, diag, anti, label=d.label)


# ---------------------------------------------------------------- catalog

def _so3():
    return make_metrized_algebra(3, levi_civita(), np.eye(3), "so3")


def _su2():
    # basis u_k = -(i/2) sigma_k, metric -2 tr
    return make_metrized_algebra(3, levi_civita(), np.eye(3), "su2")


def _sl2r():
    # basis (h, e, f): [h,e]=2e, [h,f]=-2f, [e,f]=h; trace form
    c = np.zeros((3, 3, 3))
    c[0, 1, 1], c[1, 0, 1] = 2.0, -2.0
    c[0, 2, 2], c[2, 0, 2] = -2.0, 2.0
    c[1, 2, 0], c[2, 1, 0] = 1.0, -1.0
    B = np.array([[2.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0]])
    return make_metrized_algebra(3, c, B, "sl2r")


def _sl2c():
    # real basis (u_1..u_3, v_1..v_3), v_k = i u_k; metric Im tr
    eps = levi_civita()
    c = np.zeros((6, 6, 6))
    c[:3, :3, :3] = eps
    c[:3, 3:, 3:] = eps
    c[3:, :3, 3:] = eps
    c[3:, 3:, :3] = -eps
    B = np.zeros((6, 6))
    B[:3, 3:] = -0.5 * np.eye(3)
    B[3:, :3] = -0.5 * np.eye(3)
    return make_metrized_algebra(6, c, B, "sl2c")


ALGEBRAS = {"so3": _so3, "su2": _su2, "sl2r": _sl2r, "sl2c": _sl2c}


def catalog_algebra(key):
    if key in ALGEBRAS:
        return ALGEBRAS[key]()
    if key.startswith("double-") and key[7:] in ALGEBRAS:
        return double_of(ALGEBRAS[key[7:]]()).d
    raise KeyError(f"unknown algebra '{key}'")


def catalog_pair(key):
    """Manin pairs by key: ``double-so3``, ``double-su2``, ``double-sl2r``, ``sl2c-su2``."""
    if key.startswith("double-") and key[7:] in ALGEBRAS:
        return double_of(ALGEBRAS[key[7:]]())
    if key == "sl2c-su2":
        d = _sl2c()
        eye = np.eye(3)
        g = Subspace.span(np.vstack([eye, np.zeros((3, 3))]))
        m = Subspace.span(np.vstack([np.zeros((3, 3)), eye]))
        return ManinPair(d, g, m, label="sl2c-su2")
    raise KeyError(f"unknown Manin pair '{key}'")


CATALOG_KEYS = ("double-so3", "double-su2", "double-sl2r", "sl2c-su2")
