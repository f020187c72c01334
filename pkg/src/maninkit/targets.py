"""Moment map targets with their splittings.

Two targets are supported: ``D`` itself, acted on by ``dbar + d`` through
``(a1, a2) . d = a1 d a2^-1``, and the homogeneous space ``D/G`` acted on by
``d`` through left multiplication.  Elements of the acting algebra are stored
slot by slot: a ``D`` target has two slots (metric signs -1, +1), ``D/G`` one.
Generating vector fields follow the ``exp(-t zeta)`` convention.
"""
import numpy as np

from .config import DEFAULT
from .errors import ComplementNotInvariant, NotBasic, NotConnection, NotInvariant, SolveSingular
from .geomcalc import (ExpChart, FormField, Jet, exterior_derivative_fd, frame_coords, inv,
                       mc_left, mc_right, unit_vectors, value)
from .liealg import Subspace, dual_pair_basis


class TargetD:
    """``Q = D`` with the two-sided action of ``dbar + d``."""
    chart_kind = "D"
    nslots = 2
    signs = (-1.0, 1.0)
    label = "D"

    def __init__(self, model):
        self.model = model
        self.dim = model.dim

    def act(self, elems, p):
        a1, a2 = elems
        return a1 @ p @ inv(a2)

    def zeta_velocity(self, p, zeta):
        n = self.model.dim
        z1, z2 = self.model.mat(zeta[:n]), self.model.mat(zeta[n:])
        return -z1 @ p + p @ z2

    def distance(self, p, q):
        return float(np.abs(p - q).max())

    def random_point(self, rng, scale=0.5):
        return self.model.random_point(rng, scale)


class TargetDG:
    """``Q = D/G`` through representatives; tangent vectors may be any lifts."""
    chart_kind = "M"
    nslots = 1
    signs = (1.0,)
    label = "D/G"

    def __init__(self, model):
        self.model = model
        self.dim = model.m_coords.shape[1]

    def act(self, elems, p):
        return elems[0] @ p

    def zeta_velocity(self, p, zeta):
        return -self.model.mat(zeta) @ p

    def distance(self, p, q):
        return self.model.subgroup_residual(np.linalg.solve(p, q))

    def random_point(self, rng, scale=0.5):
        m = self.model
        return m.exp(m.m_coords @ (scale * rng.standard_normal(self.dim)))


class Splitting:
    """A splitting ``alpha`` with 3-form ``eta`` over one target factor.

    ``alpha(j)`` maps a point jet to (k, nslots * dim d) slot coordinates and
    ``eta(j)`` a jet with three directions to a scalar.  ``signs`` are the
    metric signs of the slots (flipped for the opposite structure).
    """

    def __init__(self, target, alpha, eta, label, signs=None, invariant=True):
        self.target = target
        self.alpha = alpha
        self.eta = eta
        self.label = label
        self.signs = tuple(signs) if signs is not None else target.signs
        self.invariant = invariant

    @property
    def model(self):
        return self.target.model


def canonical_splitting_D(model):
    """``alpha = 1/2 (-theta^R, theta^L)`` with the Cartan 3-form."""
    target = TargetD(model)

    def alpha(j):
        return 0.5 * np.hstack([-mc_right(model, j), mc_left(model, j)])

    def eta(j):
        a, b, c = mc_left(model, j)
        alg = model.algebra
        return 0.5 * alg.pair(a, alg.bracket(b, c))

    return Splitting(target, alpha, eta, f"{model.label}:D")


def check_complement_invariant(model, m, rng=None, num=5, tol=DEFAULT):
    """Largest distance between ``Ad_g m`` and ``m`` on g generators and random g."""
    rng = rng or np.random.default_rng(0)
    q = m.orthonormal
    proj = np.eye(model.dim) - q @ q.T
    worst = 0.0
    alg = model.algebra
    for a in range(model.g_coords.shape[1]):
        xi = model.g_coords[:, a]
        worst = max(worst, float(np.abs(proj @ alg.ad(xi) @ q).max()))
    for _ in range(num):
        g = model.random_subgroup_point(rng, 0.8)
        worst = max(worst, float(np.abs(proj @ model.adjoint(g) @ q).max()))
    return worst


def invariant_splitting_DG(model, m=None, tol=DEFAULT):
    """``p^* alpha = -Ad_d pr_m theta^L`` on D/G, for an Ad_G-invariant complement m."""
    m = m if m is not None else model.pair.complement
    if m is None:
        raise ComplementNotInvariant("no complement supplied")
    res = check_complement_invariant(model, m)
    if res > tol.subalgebra:
        raise ComplementNotInvariant(f"Ad_G m differs from m by {res:.3e}")
    e, f = dual_pair_basis(model.pair, m, tol)
    split = np.linalg.inv(np.hstack([e, m.basis]))
    k = e.shape[1]
    pr_m = m.basis @ split[k:]
    target = TargetDG(model)
    alg = model.algebra

    def alpha(j):
        xi = mc_left(model, j) @ pr_m.T
        return -(xi @ model.adjoint(value(j)).T)

    def eta(j):
        a, b, c = mc_left(model, j) @ pr_m.T
        return -2.0 * alg.pair(a, alg.bracket(b, c))

    return Splitting(target, alpha, eta, f"{model.label}:DG")


def opposite(split):
    """Same alpha viewed in the opposite algebra: metric signs and eta flip."""
    return Splitting(split.target, split.alpha, lambda j: -split.eta(j), f"{split.label}^op",
                     tuple(-s for s in split.signs), split.invariant)


class ProductTarget:
    """Cartesian product of target factors over one group model."""

    def __init__(self, splittings):
        self.splittings = list(splittings)
        self.model = self.splittings[0].model
        m = self.model
        self.kinds = tuple(s.target.chart_kind for s in self.splittings)
        self.dims = [s.target.dim for s in self.splittings]
        self.dim = sum(self.dims)
        self.signs = [sg for s in self.splittings for sg in s.signs]
        self.nslots = len(self.signs)
        self.alg_dim = m.dim * self.nslots
        self.slot_of_factor = np.cumsum([0] + [s.target.nslots for s in self.splittings]).astype(int)
        self.metric = np.kron(np.diag(self.signs), m.algebra.B)
        self.g_basis = np.kron(np.eye(self.nslots), m.g_coords)
        self.label = " x ".join(s.label for s in self.splittings)

    # slot helpers
    def factor_slice(self, i):
        n = self.model.dim
        return slice(self.slot_of_factor[i] * n, self.slot_of_factor[i + 1] * n)

    def factor_elems(self, i, slot_elems):
        return slot_elems[self.slot_of_factor[i]:self.slot_of_factor[i + 1]]

    def pair(self, x, y):
        return x @ self.metric @ y

    def Ad(self, slot_elems):
        out = np.zeros((self.alg_dim, self.alg_dim))
        n = self.model.dim
        for i, a in enumerate(slot_elems):
            out[i * n:(i + 1) * n, i * n:(i + 1) * n] = self.model.adjoint(a)
        return out

    def bracket(self, x, y):
        n = self.model.dim
        alg = self.model.algebra
        return np.concatenate([alg.bracket(x[i * n:(i + 1) * n], y[i * n:(i + 1) * n])
                               for i in range(self.nslots)])

    # geometry
    def chart(self, p):
        return ExpChart(self.model, self.kinds, p)

    def alpha(self, jets):
        return np.hstack([s.alpha(j) for s, j in zip(self.splittings, jets)])

    def eta(self, jets):
        return sum(s.eta(j) for s, j in zip(self.splittings, jets))

    def frame(self, jets):
        return np.hstack([frame_coords(self.model, kind, j.v, j.d)
                          for kind, j in zip(self.kinds, jets)])

    def act(self, slot_elems, p):
        return tuple(s.target.act(self.factor_elems(i, slot_elems), pi)
                     for i, (s, pi) in enumerate(zip(self.splittings, p)))

    def zeta_velocities(self, p, zeta):
        return [s.target.zeta_velocity(pi, zeta[self.factor_slice(i)])
                for i, (s, pi) in enumerate(zip(self.splittings, p))]

    def zeta_jets(self, p, zetas):
        """Point jets whose directions are the generating velocities of ``zetas`` (k, alg_dim)."""
        vels = [self.zeta_velocities(p, z) for z in zetas]
        return tuple(Jet(pi, np.array([v[i] for v in vels]).reshape((len(zetas),) + pi.shape))
                     for i, pi in enumerate(p))

    def action_matrix(self, p):
        return self.frame(self.zeta_jets(p, np.eye(self.alg_dim))).T

    def distance(self, p, q):
        return max(s.target.distance(a, b) for s, a, b in zip(self.splittings, p, q))

    def random_point(self, rng, scale=0.5):
        return tuple(s.target.random_point(rng, scale) for s in self.splittings)

    def random_slot_elems(self, rng, scale=0.5):
        return [self.model.random_subgroup_point(rng, scale) for _ in range(self.nslots)]

    def slot_exp(self, zeta):
        n = self.model.dim
        return [self.model.exp(zeta[i * n:(i + 1) * n]) for i in range(self.nslots)]


def as_product(target):
    if isinstance(target, ProductTarget):
        return target
    if isinstance(target, Splitting):
        return ProductTarget([target])
    return ProductTarget(list(target))


# ---------------------------------------------------------------- splitting checks

def splitting_residuals(target, p, rng):
    """Section and isotropy residuals at ``p`` on random unit tangent vectors."""
    pt = as_product(target)
    chart = pt.chart(p)
    U = unit_vectors(rng, pt.dim, 3).T
    jets = chart.jets(np.zeros(pt.dim), U)
    a = pt.alpha(jets)
    back = pt.frame(pt.zeta_jets(p, a))
    section = float(np.abs(back - U.T).max())
    iso = float(np.abs(np.einsum("ka,ab,kb->k", a, pt.metric, a)).max())
    return section, iso


def target_action_matrix_check(target, p, tol=DEFAULT):
    """Rank of the action matrix and Lagrangian-ness of its null space."""
    pt = as_product(target)
    A = pt.action_matrix(p)
    from .liealg import null_space, numerical_rank
    rank = numerical_rank(A, tol.rank_rel)
    ker = null_space(A, tol.rank_rel)
    iso = float(np.abs(ker.T @ pt.metric @ ker).max()) if ker.size else 0.0
    return {"rank": rank, "dim": pt.dim, "stabilizer_dim": ker.shape[1], "isotropy": iso}


def chi_matrix(target, p):
    """``X[a, b] = <alpha((e_a)_Q), e_b>`` over the acting-algebra basis at ``p``."""
    pt = as_product(target)
    a = pt.alpha(pt.zeta_jets(p, np.eye(pt.alg_dim)))
    return a @ pt.metric


def chi_tensor(target, p, z1, z2):
    return float(z1 @ chi_matrix(target, p) @ z2)


# ---------------------------------------------------------------- beta cocycle

def beta_matrix(target, slot_elems, p, tol=DEFAULT):
    """``beta(g)`` at ``p`` in frame coordinates, solved over a basis of zeta.

    Uses ``<A_g^* alpha, Ad_g zeta> - <alpha, zeta> = -iota(zeta_Q) beta(g)``.
    """
    pt = as_product(target)
    chart = pt.chart(p)
    eye = np.eye(pt.dim)
    jets = chart.jets(np.zeros(pt.dim), eye)
    consts = [Jet.const(a, pt.dim) for a in slot_elems]
    moved = pt.act(consts, jets)
    a_moved = pt.alpha(moved)
    a_here = pt.alpha(jets)
    Ad = pt.Ad(slot_elems)
    # R[i, j] = -( <alpha_gq(A_g u_j), Ad_g z_i> - <alpha_q(u_j), z_i> )
    R = -((a_moved @ pt.metric @ Ad) - (a_here @ pt.metric)).T
    Z = pt.action_matrix(p)
    beta, *_ = np.linalg.lstsq(Z.T, R, rcond=None)
    resid = float(np.abs(Z.T @ beta - R).max())
    if resid > 1e3 * tol.beta_zero * max(1.0, np.abs(R).max()):
        raise SolveSingular(f"beta system inconsistent (residual {resid:.3e})")
    return beta


def beta_form(target, slot_elems, p0, tol=DEFAULT):
    """``beta(g)`` as a 2-form field on the chart of Q centred at ``p0``."""
    pt = as_product(target)
    chart = pt.chart(p0)

    def fn(jets):
        p = tuple(j.v for j in jets)
        b = beta_matrix(pt, slot_elems, p, tol)
        f = pt.frame(jets)
        return f @ b @ f.T

    return FormField(2, chart, fn, "beta(g)")


def pushed_frame(pt, slot_elems, p, U):
    """Frame coordinates at ``g.p`` of the images of chart vectors ``U`` at ``p``."""
    chart = pt.chart(p)
    jets = chart.jets(np.zeros(pt.dim), U)
    moved = pt.act([Jet.const(a, U.shape[1]) for a in slot_elems], jets)
    return pt.frame(moved), tuple(j.v for j in moved)


def cocycle_residual(target, g, h, p, rng, tol=DEFAULT):
    """``beta(hg) - beta(g) - A_g^* beta(h)`` on random unit vectors."""
    pt = as_product(target)
    U = unit_vectors(rng, pt.dim, 2).T
    hg = [a @ b for a, b in zip(h, g)]
    lhs = U.T @ beta_matrix(pt, hg, p, tol) @ U
    f, gp = pushed_frame(pt, g, p, U)
    rhs = U.T @ beta_matrix(pt, g, p, tol) @ U + f @ beta_matrix(pt, h, gp, tol) @ f.T
    return float(abs(lhs[0, 1] - rhs[0, 1]))


def dbeta_residual(target, g, p, rng, tol=DEFAULT):
    """``d beta(g) + A_g^* eta - eta`` on three random unit vectors (FD)."""
    pt = as_product(target)
    form = beta_form(pt, g, p, tol)
    vs = list(unit_vectors(rng, pt.dim, 3))
    lhs = exterior_derivative_fd(form, np.zeros(pt.dim), vs, tol)
    U = np.column_stack(vs)
    jets = pt.chart(p).jets(np.zeros(pt.dim), U)
    moved = pt.act([Jet.const(a, 3) for a in g], jets)
    rhs = -pt.eta(moved) + pt.eta(jets)
    return float(abs(lhs - rhs))


def infinitesimal_cocycle_check(target, xi, p, u, v, tol=DEFAULT, h=1e-4):
    """``d/dt beta(exp(t xi))(u, v) - (d<alpha, xi> + iota(xi_Q) eta)(u, v)``.

    ``xi`` is in slot coordinates (an element of the acting algebra).
    """
    pt = as_product(target)
    xi = np.asarray(xi, dtype=float)
    U = np.column_stack([u, v])
    bp = U.T @ beta_matrix(pt, pt.slot_exp(h * xi), p, tol) @ U
    bm = U.T @ beta_matrix(pt, pt.slot_exp(-h * xi), p, tol) @ U
    lhs = (bp[0, 1] - bm[0, 1]) / (2 * h)
    chart = pt.chart(p)
    one_form = FormField(1, chart, lambda jets: pt.alpha(jets) @ pt.metric @ xi)
    d_pair = exterior_derivative_fd(one_form, np.zeros(pt.dim), [u, v], tol)
    # xi_Q in frame coordinates, then eta(xi_Q, u, v)
    xq = pt.frame(pt.zeta_jets(p, xi[None]))[0]
    eta_val = pt.eta(chart.jets(np.zeros(pt.dim), np.column_stack([xq, u, v])))
    return float(abs(lhs - (d_pair + eta_val)))


def eta_from_alpha(target, p, U, tol=DEFAULT):
    """3-form computed from alpha alone (FD for d alpha), on three chart vectors at ``p``.

    ``eta = -1/2 sum_cyc <d alpha(X, Y), alpha(Z)> - <alpha X, [alpha Y, alpha Z]>``.
    """
    pt = as_product(target)
    chart = pt.chart(p)
    x0 = np.zeros(pt.dim)
    h = tol.fd_step

    def alpha_at(x, w):
        return pt.alpha(chart.jets(x, w[:, None]))[0]

    X, Y, Z = U.T

    def dalpha(a, b):
        da_b = (alpha_at(x0 + h * a, b) - alpha_at(x0 - h * a, b)) / (2 * h)
        db_a = (alpha_at(x0 + h * b, a) - alpha_at(x0 - h * b, a)) / (2 * h)
        return da_b - db_a

    aX, aY, aZ = pt.alpha(chart.jets(x0, U))
    first = (pt.pair(dalpha(X, Y), aZ) + pt.pair(dalpha(Y, Z), aX) + pt.pair(dalpha(Z, X), aY))
    return -0.5 * first - pt.pair(aX, pt.bracket(aY, aZ))


def twisted_splitting(split, varpi):
    """Twist ``<alpha^varpi, zeta> = <alpha, zeta> - varpi(zeta_Q, .)``.

    ``varpi(jets)`` returns a (k, k) array; it must be closed for eta to stay.
    """
    pt = ProductTarget([split])
    minv = np.linalg.inv(pt.metric)

    def alpha(j):
        k = j.k
        p = (j.v,)
        zj = pt.zeta_jets(p, np.eye(pt.alg_dim))
        comb = Jet(j.v, np.concatenate([zj[0].d, j.d]))
        w = varpi((comb,))[:pt.alg_dim, pt.alg_dim:pt.alg_dim + k]
        return split.alpha(j) - (minv @ w).T

    return Splitting(split.target, alpha, split.eta, f"{split.label}+varpi", split.signs,
                     invariant=False)


def exact_twist_D(model, c1, c2):
    """Closed 2-form ``<c1, [theta^R, theta^R]> + <c2, [theta^L, theta^L]>`` on D."""
    alg = model.algebra

    def varpi(jets):
        j = jets[0]
        r, l = mc_right(model, j), mc_left(model, j)
        br = np.einsum("ia,jb,abk->ijk", r, r, alg.c) @ (alg.B @ c1)
        bl = np.einsum("ia,jb,abk->ijk", l, l, alg.c) @ (alg.B @ c2)
        return br + bl

    return varpi


# ---------------------------------------------------------------- groupoid

def groupoid_two_form(target, tol=DEFAULT):
    """The quasi-symplectic groupoid ``G x| Q`` as a Hamiltonian space.

    Points are ``(h_1, .., h_s, q)`` with one G factor per slot.  The moment
    map is ``(t, s) = (h.q, q)`` into ``Q x Q^op``; ``G x G`` acts by
    ``(a, b).(h, q) = (a h b^-1, b.q)``.
    """
    from .hamspace import GroupAction, HamiltonianSpace
    pt = as_product(target)
    model = pt.model
    ns = pt.nslots

    def unpack(P):
        return list(P[:ns]), tuple(P[ns:])

    def moment(P):
        hs, q = unpack(P)
        return pt.act(hs, q) + q

    def omega(P):
        hs, q = unpack(P)
        k = hs[0].k
        gvals = [h.v for h in hs]
        tq = pt.act([Jet.const(g, k) for g in gvals], q)
        a_tq = pt.alpha(tq)
        r = np.hstack([mc_right(model, h) for h in hs])
        qt = tuple(j.v for j in tq)
        X = chi_matrix(pt, qt)
        term = a_tq @ pt.metric @ r.T
        om = -(term - term.T) + 0.5 * (r @ (X - X.T) @ r.T)
        if not all(s.invariant for s in pt.splittings):
            q0 = tuple(j.v for j in q)
            f = pt.frame(q)
            om = om + f @ beta_matrix(pt, gvals, q0, tol) @ f.T
        return om

    def act(elems, P):
        a, b = elems[:ns], elems[ns:]
        hs, q = unpack(P)
        return tuple(ai @ h @ inv(bi) for ai, h, bi in zip(a, hs, b)) + pt.act(b, q)

    # a-factors act on the t-slots, b-factors on the s-slots
    action = GroupAction(model, ("G",) * (2 * ns), act, list(range(2 * ns)))
    full = ProductTarget(pt.splittings + [opposite(s) for s in pt.splittings])

    def sample(rng):
        return tuple(model.random_subgroup_point(rng) for _ in range(ns)) + pt.random_point(rng)

    base = tuple(model.identity for _ in range(ns)) + tuple(
        model.identity for _ in range(len(pt.splittings)))
    return HamiltonianSpace(model, ("G",) * ns + pt.kinds, base, full, moment, omega, action,
                            sample, label=f"groupoid({pt.label})")


def explicit_groupoid_omega_D(model):
    """Closed-form groupoid 2-form on ``(G x G) x| D`` as a function of jets."""
    alg = model.algebra

    def omega(P):
        h1, h2, d = P
        dl, dr = mc_left(model, d), mc_right(model, d)
        l1, l2 = mc_left(model, h1), mc_left(model, h2)
        Ad = model.adjoint(d.v)

        def wp(a, b):
            m = a @ alg.B @ b.T
            return m - m.T

        return 0.5 * (wp(dl, l2) + wp(dr, l1) + wp(l1, l2 @ Ad.T))

    return omega


def groupoid_delta_residual(target, rng, tol=DEFAULT):
    """``d0^* omega - d1^* omega + d2^* omega`` on ``G x G x Q`` at one random point.

    Face maps on composable pairs ``(g1, g2, q)``: ``d0 = (g2, q)``,
    ``d1 = (g1 g2, q)``, ``d2 = (g1, g2.q)``.
    """
    pt = as_product(target)
    space = groupoid_two_form(pt, tol)
    model = pt.model
    ns = pt.nslots
    g1 = [model.random_subgroup_point(rng) for _ in range(ns)]
    g2 = [model.random_subgroup_point(rng) for _ in range(ns)]
    q = pt.random_point(rng)
    chart = ExpChart(model, ("G",) * (2 * ns) + pt.kinds, tuple(g1) + tuple(g2) + q)
    U = unit_vectors(rng, chart.param_dim, 2).T
    J = chart.jets(np.zeros(chart.param_dim), U)
    a, b, qj = list(J[:ns]), list(J[ns:2 * ns]), tuple(J[2 * ns:])
    w = space.omega
    t0 = w(tuple(b) + qj)
    t1 = w(tuple(x @ y for x, y in zip(a, b)) + qj)
    t2 = w(tuple(a) + pt.act(b, qj))
    return float(abs((t0 - t1 + t2)[0, 1]))


# ---------------------------------------------------------------- descent

def connection_D_right(model):
    """Connection for ``K = {e} x G`` acting on D from the right: ``(0, pr_g(d^-1 v))``."""
    n = model.dim

    def theta(j):
        xi = mc_left(model, j)
        out = np.zeros((xi.shape[0], 2 * n))
        out[:, n:] = model.pr_g(xi)
        return out

    return theta


def descend_splitting(split, theta, k_basis, rng=None, num=3, tol=DEFAULT):
    """Descend a K-invariant splitting on D along the connection ``theta``.

    ``k_basis`` holds the basis of k in slot coordinates (columns).  Returns the
    quotient splitting on D/G (slot 0 of the twisted form) together with the
    worst residuals of the checks.
    """
    if split.target.chart_kind != "D":
        raise NotImplementedError("descent is implemented for Q = D")
    pt = ProductTarget([split])
    model = pt.model
    rng = rng or np.random.default_rng(0)
    minv = np.linalg.inv(pt.metric)
    n = model.dim
    K = np.asarray(k_basis, dtype=float).reshape(pt.alg_dim, -1)
    c_perp = K  # c = k^perp, so values in c <=> pairing with k vanishes
    if not split.invariant:
        raise NotInvariant("splitting is not K-invariant")

    def alpha_pi(j):
        p = (j.v,)
        k = j.k
        zj = pt.zeta_jets(p, np.eye(pt.alg_dim))
        comb = Jet(j.v, np.concatenate([zj[0].d, j.d]))
        a = split.alpha(comb)
        th = theta(comb)
        term = a @ pt.metric @ th.T
        chi_tt = th @ chi_matrix(pt, p) @ th.T
        varpi = -(term - term.T) + 0.5 * (chi_tt - chi_tt.T)
        w = varpi[:pt.alg_dim, pt.alg_dim:pt.alg_dim + k]
        return a[pt.alg_dim:] - (minv @ w).T

    report = {"connection": 0.0, "values_in_c": 0.0, "basic": 0.0}
    for _ in range(num):
        p = split.target.random_point(rng)
        kj = pt.zeta_jets((p,), K.T)
        report["connection"] = max(report["connection"], float(np.abs(theta(kj[0]) - K.T).max()))
        chart = pt.chart((p,))
        U = unit_vectors(rng, pt.dim, 3).T
        av = alpha_pi(chart.jets(np.zeros(pt.dim), U)[0])
        report["values_in_c"] = max(report["values_in_c"], float(np.abs(av @ pt.metric @ c_perp).max()))
        ak = alpha_pi(kj[0])
        report["basic"] = max(report["basic"], float(np.abs(ak[:, :n]).max()))
    if report["connection"] > tol.isotropy:
        raise NotConnection(f"theta(xi_Q) != xi (residual {report['connection']:.3e})")
    if report["values_in_c"] > tol.isotropy:
        raise NotBasic(f"twisted splitting leaves c (residual {report['values_in_c']:.3e})")
    if report["basic"] > tol.equivariance:
        raise NotBasic(f"projected splitting is not basic (residual {report['basic']:.3e})")

    def alpha_q(j):
        return alpha_pi(j)[:, :n]

    target = TargetDG(model)
    out = Splitting(target, alpha_q, None, f"{split.label}/K", signs=(split.signs[0],))
    out.eta = _fd_eta(out)
    return out, report


def _fd_eta(split):
    def eta(j):
        p = (j.v,)
        pt = ProductTarget([split])
        U = frame_coords(split.model, split.target.chart_kind, j.v, j.d).T
        return eta_from_alpha(pt, p, U)
    return eta


# ---------------------------------------------------------------- bivectors

def target_bivector(target, p, m_slots, tol=DEFAULT):
    """``pi_Q`` at ``p`` in frame coordinates from a complement given in slot coordinates."""
    from .dirac_linear import bivector_from_splitting
    from .liealg import ManinPair, MetrizedLieAlgebra
    pt = as_product(target)
    big = MetrizedLieAlgebra(pt.alg_dim, np.zeros((pt.alg_dim,) * 3), pt.metric, "slots")
    pair = ManinPair(big, Subspace.span(pt.g_basis), Subspace.span(m_slots))
    return bivector_from_splitting(pair, pair.complement, pt.action_matrix(p), tol)


def quotient_bivector_residual(model, rng, tol=DEFAULT):
    """Push ``pi_D`` (complement m + m) along ``D -> D/G`` and compare with ``pi_{D/G}``.

    The quotient by ``{e} x G`` carries the reduced pair ``(dbar, g)``.
    """
    split_d = canonical_splitting_D(model)
    m = model.m_coords
    md = np.zeros((2 * model.dim, 2 * m.shape[1]))
    md[:model.dim, :m.shape[1]] = m
    md[model.dim:, m.shape[1]:] = m
    p = model.random_point(rng)
    pi_d = target_bivector(split_d, (p,), md, tol)
    # quotient map differential in frame coordinates: D-frame -> m-coordinates
    chart = ExpChart(model, ("D",), (p,))
    jets = chart.jets(np.zeros(model.dim), np.eye(model.dim))
    T = frame_coords(model, "M", p, jets[0].d).T
    pushed = T @ pi_d @ T.T
    dg = ProductTarget([opposite(invariant_splitting_DG(model))])
    pi_dg = target_bivector(dg, (p,), m, tol)
    return float(np.abs(pushed - pi_dg).max())
