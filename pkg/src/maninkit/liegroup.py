"""Matrix Lie group models of group pairs (D, G).

Every model realizes the ambient group D as real square matrices (complex
groups use the real block encoding ``X + iY -> [[X, -Y], [Y, X]]``).  The
Lie algebra basis is a stack of matrices; coordinates of an algebra element
are recovered by least squares against that stack.
"""
import numpy as np
from scipy.linalg import expm

from . import liealg
from .config import DEFAULT
from .errors import BasisExpansionFailure, LogDomain, NotTangent, OffManifold

SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
J_ENC = np.array([[0.0, -1.0], [1.0, 0.0]])


def real_encoding(z):
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return np.block([[x, -y], [y, x]])


def complex_decoding(r):
    n = r.shape[-1] // 2
    return r[..., :n, :n] + 1j * r[..., n:, :n]


def block_diag(*mats):
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=np.result_type(*mats))
    off = 0
    for m in mats:
        k = m.shape[0]
        out[off:off + k, off:off + k] = m
        off += k
    return out


def so3_generators():
    eps = liealg.levi_civita()
    return np.array([-eps[a] for a in range(3)])


def su2_generators():
    return np.array([-0.5j * SIGMA[a] for a in range(3)])


def sl2r_generators():
    return np.array([[[1.0, 0], [0, -1.0]], [[0, 1.0], [0, 0]], [[0, 0], [1.0, 0]]])


class GroupModel:
    """A matrix group realization of a Manin pair ``(d, g)``.

    ``basis_matrices[a]`` represents ``e_a``; ``pair.g`` and ``pair.complement``
    are given in the same coordinates.  ``manifold_residual`` and
    ``subgroup_residual`` are model-specific membership tests for D and G.
    """

    def __init__(self, pair, basis_matrices, label, manifold_residual, subgroup_residual,
                 matrix_metric):
        self.pair = pair
        self.algebra = pair.d
        self.basis_matrices = np.asarray(basis_matrices, dtype=float)
        self.dim = self.algebra.dim
        self.matrix_dim = self.basis_matrices.shape[1]
        self.label = label
        self.subgroup_basis = pair.g
        self._manifold_residual = manifold_residual
        self._subgroup_residual = subgroup_residual
        self.matrix_metric = matrix_metric
        n = self.matrix_dim
        flat = self.basis_matrices.reshape(self.dim, n * n).T
        self._pinv = np.linalg.pinv(flat)
        self._flat = flat
        self.identity = np.eye(n)
        # g and m bases as algebra coordinates and as matrices
        self.g_coords = pair.g.basis
        self.m_coords = pair.complement.basis if pair.complement is not None else None
        self.g_matrices = self.mats(self.g_coords.T)
        self.m_matrices = self.mats(self.m_coords.T) if self.m_coords is not None else None
        if self.m_coords is not None:
            split = np.hstack([self.g_coords, self.m_coords])
            self._split_inv = np.linalg.inv(split)
        else:
            self._split_inv = None

    # ------------------------------------------------------------ algebra side
    def mat(self, xi):
        return np.tensordot(np.asarray(xi, dtype=float), self.basis_matrices, axes=(0, 0))

    def mats(self, xis):
        """Stack of matrices for a (k, dim) array of coordinate rows."""
        return np.tensordot(np.asarray(xis, dtype=float), self.basis_matrices, axes=(-1, 0))

    def coords(self, X, tol=DEFAULT):
        c, res = self.coords_many(np.asarray(X)[None], with_residual=True)
        if res > tol.basis_expansion * max(1.0, np.abs(X).max()):
            raise BasisExpansionFailure(f"matrix not in the algebra span (residual {res:.3e})")
        return c[0]

    def coords_many(self, Xs, with_residual=False):
        Xs = np.asarray(Xs)
        k = Xs.shape[0]
        flat = Xs.reshape(k, self.matrix_dim ** 2)
        c = flat @ self._pinv.T
        if with_residual:
            res = float(np.abs(c @ self._flat.T - flat).max()) if k else 0.0
            return c, res
        return c

    def split(self, xi):
        """Components ``(a, b)`` with ``xi = g_coords @ a + m_coords @ b``."""
        ab = self._split_inv @ np.asarray(xi).T
        k = self.g_coords.shape[1]
        return ab[:k].T, ab[k:].T

    def pr_g(self, xi):
        a, _ = self.split(xi)
        return a @ self.g_coords.T

    def pr_m(self, xi):
        _, b = self.split(xi)
        return b @ self.m_coords.T

    # ------------------------------------------------------------ group side
    def mul(self, a, b):
        return a @ b

    def inv(self, a):
        return np.linalg.inv(a)

    def exp(self, xi):
        return expm(self.mat(xi))

    def log(self, g, tol=DEFAULT):
        """Principal logarithm by the Mercator series, valid for ``||g - I|| < log_radius``."""
        x = np.asarray(g, dtype=float) - self.identity
        r = np.linalg.norm(x, 2)
        if r >= tol.log_radius:
            raise LogDomain(f"||g - I|| = {r:.3f} outside the log chart (radius {tol.log_radius})")
        out = np.zeros_like(x)
        power = np.eye(self.matrix_dim)
        nterms = int(np.ceil(np.log(1e-18) / np.log(max(r, 1e-300)))) + 2 if r > 0 else 1
        for k in range(1, max(nterms, 2) + 1):
            power = power @ x
            out += ((-1.0) ** (k + 1) / k) * power
        c, res = self.coords_many(out[None], with_residual=True)
        if res > tol.basis_expansion:
            raise OffManifold(f"logarithm leaves the algebra span (residual {res:.3e})")
        return c[0]

    def manifold_residual(self, g):
        return float(self._manifold_residual(np.asarray(g)))

    def subgroup_residual(self, g):
        return float(self._subgroup_residual(np.asarray(g)))

    def check_on_manifold(self, g, tol=DEFAULT):
        r = self.manifold_residual(g)
        if r > tol.on_manifold:
            raise OffManifold(f"point off the group manifold (residual {r:.3e})")

    def adjoint(self, g, tol=DEFAULT):
        gi = np.linalg.inv(g)
        conj = g @ self.basis_matrices @ gi
        c, res = self.coords_many(conj, with_residual=True)
        if res > tol.basis_expansion * max(1.0, np.abs(conj).max()):
            raise BasisExpansionFailure(f"Ad_g leaves the algebra span (residual {res:.3e})")
        return c.T

    def maurer_cartan(self, g, v, side="left", tol=DEFAULT):
        g = np.asarray(g)
        gi = np.linalg.inv(g)
        w = gi @ v if side == "left" else v @ gi
        c, res = self.coords_many(w[None], with_residual=True)
        if res > tol.basis_expansion * max(1.0, np.abs(w).max()):
            raise NotTangent(f"vector not tangent at g (residual {res:.3e})")
        return c[0]

    def cartan_3form(self, g, u, v, w, tol=DEFAULT):
        """Cartan 3-form, evaluated as 1/2 <theta(u), [theta(v), theta(w)]>."""
        a, b, c = (self.maurer_cartan(g, t, "left", tol) for t in (u, v, w))
        return 0.5 * self.algebra.pair(a, self.algebra.bracket(b, c))

    def random_point(self, rng, scale=0.5):
        return self.exp(scale * rng.standard_normal(self.dim))

    def random_subgroup_point(self, rng, scale=0.5):
        xi = self.g_coords @ (scale * rng.standard_normal(self.g_coords.shape[1]))
        return self.exp(xi)

    def commutator_constants(self):
        """Structure constants recomputed from matrix commutators."""
        X = self.basis_matrices
        comm = np.einsum("aij,bjk->abik", X, X) - np.einsum("bij,ajk->abik", X, X)
        n = self.dim
        return self.coords_many(comm.reshape(n * n, self.matrix_dim, self.matrix_dim)).reshape(n, n, n)

    def metric_from_matrices(self):
        X = self.basis_matrices
        return np.array([[self.matrix_metric(X[a], X[b]) for b in range(self.dim)]
                         for a in range(self.dim)])


# ---------------------------------------------------------------- residual helpers

def _det_residual(m):
    return abs(np.linalg.det(m) - 1.0)


def _orth_residual(m):
    return np.abs(m.T @ m - np.eye(m.shape[0])).max()


def _complex_structure_residual(r):
    n = r.shape[0] // 2
    j = np.kron(J_ENC, np.eye(n))
    return np.abs(r @ j - j @ r).max()


def _complex_det_residual(r):
    return abs(np.linalg.det(complex_decoding(r)) - 1.0)


def _blocks(g, sizes):
    out, off = [], 0
    for s in sizes:
        out.append(g[off:off + s, off:off + s])
        off += s
    return out


def _offblock_residual(g, sizes):
    mask = np.ones_like(g, dtype=bool)
    off = 0
    for s in sizes:
        mask[off:off + s, off:off + s] = False
        off += s
    return np.abs(g[mask]).max() if mask.any() else 0.0


def _double_model(key, gens, simple_residual, simple_metric):
    pair = liealg.catalog_pair(key)
    n = gens.shape[1]
    zero = np.zeros((n, n))
    basis = [block_diag(x, zero) for x in gens] + [block_diag(zero, x) for x in gens]
    sizes = (n, n)

    def manifold(g):
        a, b = _blocks(g, sizes)
        return max(_offblock_residual(g, sizes), simple_residual(a), simple_residual(b))

    def subgroup(g):
        a, b = _blocks(g, sizes)
        return max(manifold(g), np.abs(a - b).max())

    def metric(x, y):
        xa, xb = _blocks(x, sizes)
        ya, yb = _blocks(y, sizes)
        return -simple_metric(xa, ya) + simple_metric(xb, yb)

    return GroupModel(pair, np.array(basis), key, manifold, subgroup, metric)


def _so3_residual(a):
    return max(_orth_residual(a), _det_residual(a))


def _su2_enc_residual(r):
    return max(_orth_residual(r), _complex_structure_residual(r), _complex_det_residual(r))


def _sl2r_residual(a):
    return _det_residual(a)


def model_double_so3():
    return _double_model("double-so3", so3_generators(), _so3_residual,
                         lambda x, y: -0.5 * np.trace(x @ y))


def model_double_su2():
    gens = np.array([real_encoding(u) for u in su2_generators()])
    # -2 tr on complex 2x2 equals -tr on the real 4x4 encoding
    return _double_model("double-su2", gens, _su2_enc_residual, lambda x, y: -np.trace(x @ y))


def model_double_sl2r():
    return _double_model("double-sl2r", sl2r_generators(), _sl2r_residual,
                         lambda x, y: np.trace(x @ y))


def model_sl2c_su2():
    pair = liealg.catalog_pair("sl2c-su2")
    us = su2_generators()
    basis = [real_encoding(u) for u in us] + [real_encoding(1j * u) for u in us]
    minus_i = real_encoding(-1j * np.eye(2))

    def manifold(r):
        return max(_complex_structure_residual(r), _complex_det_residual(r))

    def subgroup(r):
        return max(manifold(r), _orth_residual(r))

    def metric(x, y):
        # Im tr(zw) = Re tr(-i zw) = tr(R(-i) R(z) R(w)) / 2
        return 0.5 * np.trace(minus_i @ x @ y)

    return GroupModel(pair, np.array(basis), "sl2c-su2", manifold, subgroup, metric)


MODELS = {
    "double-so3": model_double_so3,
    "double-su2": model_double_su2,
    "double-sl2r": model_double_sl2r,
    "sl2c-su2": model_sl2c_su2,
}

_CACHE = {}


def catalog_model(key):
    if key not in MODELS:
        raise KeyError(f"unknown model '{key}'")
    if key not in _CACHE:
        _CACHE[key] = MODELS[key]()
    return _CACHE[key]
