"""Numerical exterior calculus on charted products of matrix groups.

Points of a charted space are tuples of group matrices.  Tangent vectors are
chart-coordinate vectors; their images as matrix velocities are carried along
by ``Jet`` objects (first-order forward differentiation through products and
inverses), so pushforwards along closed-form group maps are exact.  Exterior
derivatives, and pushforwards along black-box coordinate maps, use central
differences.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, expm_frechet

from .config import DEFAULT
from .errors import IllConditioned, LogDomain, OutOfChart, StepUnderflow


class Jet:
    """A matrix value ``v`` with derivatives ``d[j]`` along k tangent directions."""
    __slots__ = ("v", "d")
    __array_ufunc__ = None  # let numpy defer to __rmatmul__

    def __init__(self, v, d):
        self.v = v
        self.d = d

    @classmethod
    def const(cls, v, k):
        v = np.asarray(v, dtype=float)
        return cls(v, np.zeros((k,) + v.shape))

    @property
    def k(self):
        return self.d.shape[0]

    def __matmul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v @ other.v, self.d @ other.v + self.v @ other.d)
        return Jet(self.v @ other, self.d @ other)

    def __rmatmul__(self, other):
        return Jet(other @ self.v, other @ self.d)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v + other.v, self.d + other.d)
        return Jet(self.v + other, self.d)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v - other.v, self.d - other.d)
        return Jet(self.v - other, self.d)

    def __neg__(self):
        return Jet(-self.v, -self.d)

    def __mul__(self, s):
        return Jet(self.v * s, self.d * s)

    __rmul__ = __mul__

    def inv(self):
        vi = np.linalg.inv(self.v)
        return Jet(vi, -(vi @ self.d @ vi))

    def select(self, cols):
        """Keep only some derivative directions."""
        return Jet(self.v, self.d[list(cols)])


def inv(x):
    return x.inv() if isinstance(x, Jet) else np.linalg.inv(x)


def value(x):
    return x.v if isinstance(x, Jet) else x


def left_velocity(j):
    """Left-trivialized velocities ``v^{-1} d`` of a jet, shape (k, n, n)."""
    return np.linalg.solve(j.v, j.d) if j.k else j.d


def right_velocity(j):
    vi = np.linalg.inv(j.v)
    return j.d @ vi


def mc_left(model, j):
    """Left Maurer-Cartan form on each direction, as (k, dim) coordinates."""
    return model.coords_many(left_velocity(j))


def mc_right(model, j):
    return model.coords_many(right_velocity(j))


def wedge_pair(B, a, b):
    """2-form <a ^ b>(u, v) = <a(u), b(v)> - <a(v), b(u)> as a (k, k) array."""
    m = a @ B @ b.T
    return m - m.T


def group_jet(model, xi, k, slot):
    """Jet of ``exp(-t xi)`` at t = 0 along direction ``slot`` of k (generator convention)."""
    j = Jet.const(model.identity, k)
    j.d[slot] = -model.mat(xi)
    return j


# ---------------------------------------------------------------- charts

def factor_basis(model, kind):
    if kind == "D":
        return model.basis_matrices
    if kind == "G":
        return model.g_matrices
    if kind == "M":
        return model.m_matrices
    raise ValueError(f"unknown factor kind '{kind}'")


def factor_dim(model, kind):
    return factor_basis(model, kind).shape[0]


def frame_coords(model, kind, p, vel):
    """Coordinates of velocities ``vel`` (k, n, n) at ``p`` in the chart recentred at ``p``.

    ``M`` factors stand for D/G through the section ``p exp(m)``; their
    coordinates are the m-components of the left-trivialized velocity.
    """
    xi = model.coords_many(np.linalg.solve(p, vel)) if len(vel) else np.zeros((0, model.dim))
    if kind == "D":
        return xi
    if kind == "G":
        return np.linalg.lstsq(model.g_coords, xi.T, rcond=None)[0].T
    _, b = model.split(xi)
    return b


class ExpChart:
    """Exponential chart ``x -> (b_i exp(sum_a x_{i,a} E_{i,a}))_i`` on a product of factors."""

    def __init__(self, model, kinds, base):
        self.model = model
        self.kinds = tuple(kinds)
        self.base = tuple(np.asarray(b, dtype=float) for b in base)
        self.sizes = [factor_dim(model, k) for k in self.kinds]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.param_dim = int(self.offsets[-1])
        self._bases = [factor_basis(model, k) for k in self.kinds]

    def _blocks(self, x):
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.kinds))]

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return tuple(b @ expm(np.tensordot(xi, E, axes=(0, 0))) if np.any(xi) else b.copy()
                     for b, xi, E in zip(self.base, self._blocks(x), self._bases))

    def jets(self, x, U):
        x = np.asarray(x, dtype=float)
        U = np.asarray(U, dtype=float).reshape(self.param_dim, -1)
        k = U.shape[1]
        out = []
        for i, (b, E) in enumerate(zip(self.base, self._bases)):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            xi = x[sl]
            dX = np.tensordot(U[sl].T, E, axes=(1, 0))
            if not np.any(xi):
                out.append(Jet(b.copy(), b @ dX))
                continue
            X = np.tensordot(xi, E, axes=(0, 0))
            ex = expm(X)
            d = np.empty((k,) + X.shape)
            for j in range(k):
                d[j] = expm_frechet(X, dX[j], compute_expm=False) if np.any(dX[j]) else 0.0
            out.append(Jet(b @ ex, b @ d))
        return tuple(out)

    def velocity_coords(self, p, vels):
        """Chart coordinates (k, param_dim) of factor velocities, valid at the chart centre."""
        k = len(vels[0]) if len(vels) else 0
        cols = [frame_coords(self.model, kind, pi, vi) for kind, pi, vi in zip(self.kinds, p, vels)]
        return np.hstack(cols) if cols else np.zeros((k, 0))

    def chart_coords(self, p, tol=DEFAULT):
        """Inverse chart for D and G factors (logarithm relative to the base)."""
        out = []
        for kind, b, q in zip(self.kinds, self.base, p):
            if kind == "M":
                raise OutOfChart("inverse section charts are not available")
            try:
                xi = self.model.log(np.linalg.solve(b, q), tol)
            except LogDomain as exc:
                raise OutOfChart(str(exc)) from exc
            out.append(xi if kind == "D" else
                       np.linalg.lstsq(self.model.g_coords, xi, rcond=None)[0])
        return np.concatenate(out) if out else np.zeros(0)

    def recenter(self, x):
        return ExpChart(self.model, self.kinds, self.embed(x))


@dataclass
class ChartedSpace:
    """A manifold presented through an exponential chart on group factors."""
    chart: ExpChart
    chart_radius: float = 0.5
    label: str = "space"

    @property
    def param_dim(self):
        return self.chart.param_dim

    @property
    def basepoint(self):
        return self.chart.base

    def embed(self, x):
        return self.chart.embed(x)

    def jets(self, x, U):
        return self.chart.jets(x, U)

    def recenter(self, x):
        return ChartedSpace(self.chart.recenter(x), self.chart_radius, self.label)


@dataclass
class TangentVector:
    base: np.ndarray
    coords: np.ndarray


class FormField:
    """A differential form given by an evaluator on jets.

    ``fn(P)`` receives the tuple of point jets carrying k tangent directions
    and returns: a (k,) array for degree 1, a (k, k) array for degree 2, and a
    scalar for degree 3 (with exactly three directions).
    """

    def __init__(self, degree, space, fn, provenance=""):
        self.degree = degree
        self.space = space
        self.fn = fn
        self.provenance = provenance

    def gram(self, x, U):
        return self.fn(self.space.jets(x, U))

    def __call__(self, x, *vectors):
        if len(vectors) != self.degree:
            raise ValueError(f"{self.degree}-form needs {self.degree} vectors")
        U = np.column_stack(vectors)
        out = self.gram(x, U)
        if self.degree == 1:
            return float(out[0])
        if self.degree == 2:
            return float(out[0, 1])
        return float(out)


def TwoFormField(space, fn, provenance=""):
    return FormField(2, space, fn, provenance)


class SmoothMap:
    """A map between charted spaces given on points (``point_fn``) with jet support."""

    def __init__(self, source, target, point_fn, label="map"):
        self.source = source
        self.target = target
        self.point_fn = point_fn
        self.label = label

    def eval(self, x):
        """Chart coordinates of the image in the target chart."""
        return self.target.chart.chart_coords(self.point_fn(self.source.embed(x)))

    def jets(self, x, U):
        return self.point_fn(self.source.jets(x, U))

    def jacobian(self, x):
        """Target frame coordinates of the image of the chart basis, shape (m, n)."""
        n = self.source.param_dim
        img = self.jets(x, np.eye(n))
        p = tuple(j.v for j in img)
        return self.target.chart.velocity_coords(p, [j.d for j in img]).T


# ---------------------------------------------------------------- finite differences

def fd_step(x, tol=DEFAULT):
    scale = 1.0 + float(np.linalg.norm(x))
    h = tol.fd_step * scale
    if h < tol.min_step * scale:
        raise StepUnderflow(f"step {h:.2e} below {tol.min_step:.0e} x scale")
    return h


def exterior_derivative_fd(form, x, vectors, tol=DEFAULT, h=None):
    """FD value of d(form) on k+1 constant chart vectors (k = 1 or 2)."""
    k = form.degree
    if k not in (1, 2) or len(vectors) != k + 1:
        raise ValueError("exterior_derivative_fd needs a 1- or 2-form and k+1 vectors")
    x = np.asarray(x, dtype=float)
    h = fd_step(x, tol) if h is None else h
    if h < tol.min_step * (1.0 + np.linalg.norm(x)):
        raise StepUnderflow("finite-difference step underflow")
    total = 0.0
    for i, vi in enumerate(vectors):
        rest = [v for j, v in enumerate(vectors) if j != i]
        vi = np.asarray(vi, dtype=float)
        plus = form(x + h * vi, *rest)
        minus = form(x - h * vi, *rest)
        total += (-1) ** i * (plus - minus) / (2.0 * h)
    return total


def pushforward_fd(smap, x, v, tol=DEFAULT, h=None):
    x = np.asarray(x, dtype=float)
    h = fd_step(x, tol) if h is None else h
    try:
        return (smap.eval(x + h * v) - smap.eval(x - h * v)) / (2.0 * h)
    except LogDomain as exc:
        raise OutOfChart(str(exc)) from exc


def pullback(smap, form, x, vectors, tol=DEFAULT):
    """Evaluate ``smap^* form`` using finite-difference pushforwards of the vectors."""
    y = smap.eval(x)
    pushed = [pushforward_fd(smap, x, np.asarray(v, dtype=float), tol) for v in vectors]
    return form(y, *pushed)


def generating_vector_field(action, model, xi, space, x, tol=DEFAULT):
    """Chart vector of xi_M at ``embed(x)``: derivative of ``action(exp(-t xi), p)`` at t = 0.

    ``space`` must be centred at ``embed(x)`` (x = 0) for the returned
    coordinates to be chart coordinates; the derivative is a central difference.
    """
    p = space.embed(x)
    h = tol.fd_step
    plus = action(model.exp(-h * np.asarray(xi)), p)
    minus = action(model.exp(h * np.asarray(xi)), p)
    vel = [((a - b) / (2.0 * h))[None] for a, b in zip(plus, minus)]
    return TangentVector(np.asarray(x, dtype=float), space.chart.velocity_coords(p, vel)[0])


@dataclass
class KernelReport:
    nullity: int
    singular_values: np.ndarray
    ill_conditioned: bool


def kernel_report(omega_matrix, jacobian, tol=DEFAULT):
    """Nullity of ker(omega) intersected with ker(J) via SVD of the stacked matrix."""
    n = omega_matrix.shape[0]
    stack = np.vstack([omega_matrix, jacobian]) if jacobian is not None and jacobian.size else omega_matrix
    if n == 0:
        return KernelReport(0, np.zeros(0), False)
    s = np.linalg.svd(stack, compute_uv=False)
    s = np.concatenate([s, np.zeros(max(0, n - s.size))])
    # forms here are O(1); the floor keeps a vanishing form fully degenerate
    cut = tol.kernel_rel * max(s[0], 1.0)
    rank = int(np.sum(s > cut))
    above = s[s > cut]
    below = s[s <= cut]
    gap_lo = above.min() if above.size else np.inf
    gap_hi = below.max() if below.size else 0.0
    ill = bool((above.size and gap_lo < 10 * cut) or (below.size and gap_hi > cut / 10 and gap_hi > 0))
    return KernelReport(n - rank, s, ill)


def kernel_intersection(x, omega, phi, tol=DEFAULT, strict=False):
    """Dimension of ker(omega_x) intersected with ker(T_x phi) on the chart frame."""
    n = omega.space.param_dim
    om = omega.gram(x, np.eye(n))
    jac = phi.jacobian(x) if phi is not None else np.zeros((0, n))
    rep = kernel_report(om, jac, tol)
    if strict and rep.ill_conditioned:
        raise IllConditioned(f"singular-value gap too small: {rep.singular_values}")
    return rep.nullity


def point_rngs(seed, num_points):
    """Independent generators per sample point, split from one root seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(num_points)]


def unit_vectors(rng, n, k):
    v = rng.standard_normal((k, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
