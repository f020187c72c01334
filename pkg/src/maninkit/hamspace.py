"""Quasi-symplectic spaces with Manin-pair-valued moment maps.

A space is stored through representatives: a product of group factors
(the ambient chart), an optional free gauge action whose orbits are
collapsed, the moment map and the 2-form as functions of point jets, and the
acting group.  Tangent spaces of quotients are modelled on the orthogonal
complement of the gauge orbit directions (a slice).
"""
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import (AxiomFailure, FactorStructureMismatch, ModelMismatch, NewtonDivergence, NotBasic,
                     NotFree, NotRegularValue, SectionOutOfChart)
from .geomcalc import (ExpChart, FormField, Jet, exterior_derivative_fd, factor_dim, inv,
                       kernel_report, mc_right, point_rngs, unit_vectors)
from .liealg import null_space, numerical_rank
from .targets import (ProductTarget, beta_matrix, canonical_splitting_D, invariant_splitting_DG)


class GroupAction:
    """Action of a product of copies of G (kind 'G') or D (kind 'D').

    ``act(elems, P)`` must accept jets.  ``slot_source[s]`` names the acting
    factor whose element acts on target slot ``s`` (None: trivially).
    """

    def __init__(self, model, kinds, act, slot_source=()):
        self.model = model
        self.kinds = tuple(kinds)
        self.act = act
        self.slot_source = list(slot_source)
        self.sizes = [factor_dim(model, k) for k in self.kinds]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.dim = int(self.offsets[-1])

    def algebra_matrix(self, i):
        return self.model.g_coords if self.kinds[i] == "G" else np.eye(self.model.dim)

    def to_d(self, xi):
        """Per-factor d-coordinates of an acting-algebra vector."""
        return [self.algebra_matrix(i) @ xi[self.offsets[i]:self.offsets[i + 1]]
                for i in range(len(self.kinds))]

    def emb(self):
        n = self.model.dim
        out = np.zeros((n * len(self.slot_source), self.dim))
        for s, src in enumerate(self.slot_source):
            if src is not None:
                out[s * n:(s + 1) * n, self.offsets[src]:self.offsets[src + 1]] = self.algebra_matrix(src)
        return out

    def exp(self, xi):
        return [self.model.exp(x) for x in self.to_d(xi)]

    def slot_elems(self, elems):
        eye = self.model.identity
        return [elems[s] if s is not None else eye for s in self.slot_source]

    def generator_jets(self, P, xis):
        """Jets of the images of ``P`` carrying the generating velocities of ``xis`` (k, dim)."""
        k = len(xis)
        n = self.model.matrix_dim
        elems = []
        for i in range(len(self.kinds)):
            d = -self.model.mats(np.array([self.to_d(x)[i] for x in xis])).reshape(k, n, n)
            elems.append(Jet(self.model.identity, d))
        consts = tuple(Jet.const(p, k) for p in P)
        return self.act(tuple(elems), consts)

    def random_elems(self, rng, scale=0.4):
        return self.exp(scale * rng.standard_normal(self.dim))


@dataclass
class PointFrame:
    """Recentred chart at a representative with the slice basis ``S``."""
    point: tuple
    chart: ExpChart
    S: np.ndarray

    def jets(self, x, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        return self.chart.jets(self.S @ x, self.S @ U)


class HamiltonianSpace:
    def __init__(self, model, kinds, base, target, moment, omega, action, sample, label="space",
                 gauge=None, notes=None):
        self.model = model
        self.kinds = tuple(kinds)
        self.base = tuple(base)
        self.target = target
        self.moment = moment
        self.omega = omega
        self.action = action
        self.sample = sample
        self.label = label
        self.gauge = gauge
        self.notes = dict(notes or {})
        self.ambient_dim = sum(factor_dim(model, k) for k in self.kinds)
        self.dim = self.ambient_dim - (gauge.dim if gauge is not None else 0)

    def chart(self, P):
        return ExpChart(self.model, self.kinds, P)

    def gauge_directions(self, P, chart=None):
        chart = chart or self.chart(P)
        if self.gauge is None or self.gauge.dim == 0:
            return np.zeros((self.ambient_dim, 0))
        jets = self.gauge.generator_jets(P, np.eye(self.gauge.dim))
        return chart.velocity_coords(P, [j.d for j in jets]).T

    def frame(self, P, tol=DEFAULT):
        chart = self.chart(P)
        O = self.gauge_directions(P, chart)
        if O.shape[1]:
            if numerical_rank(O, tol.rank_rel) < O.shape[1]:
                raise NotFree("gauge action has a nontrivial stabilizer")
            S = null_space(O.T, tol.rank_rel)
        else:
            S = np.eye(self.ambient_dim)
        return PointFrame(tuple(P), chart, S)

    def generator_coords(self, fr, xis):
        """Ambient chart coordinates of acting-algebra generators (k, ambient)."""
        jets = self.action.generator_jets(fr.point, xis)
        return fr.chart.velocity_coords(fr.point, [j.d for j in jets])

    def omega_matrix(self, fr, U):
        return self.omega(fr.jets(np.zeros(self.dim), U))

    def moment_jets(self, fr, U):
        return self.moment(fr.jets(np.zeros(self.dim), U))

    def jacobian(self, fr):
        return self.target.frame(self.moment_jets(fr, np.eye(self.dim))).T

    def moment_value(self, P):
        k0 = tuple(Jet.const(p, 0) for p in P)
        return tuple(j.v for j in self.moment(k0))


def _ambient_jets(fr, W):
    """Jets at the frame point along ambient chart vectors (columns of W)."""
    return fr.chart.jets(np.zeros(fr.chart.param_dim), W)


# ---------------------------------------------------------------- verification

@dataclass
class CheckResult:
    name: str
    anchor: str
    max_residual: float
    tolerance: float
    passed: bool
    worst_point: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)


@dataclass
class AxiomReport:
    label: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def by_name(self):
        return {c.name: c for c in self.checks}

    def raise_if_failed(self):
        for c in self.checks:
            if not c.passed:
                raise AxiomFailure(c.name, c.max_residual, c.worst_point, c.tolerance)


class _Tracker:
    def __init__(self, name, anchor, tol, exact=False):
        self.name, self.anchor, self.tol, self.exact = name, anchor, tol, exact
        self.worst, self.point, self.detail = 0.0, [], {}

    def add(self, value, point_index, extra=None):
        value = float(value)
        if value >= self.worst or not self.point:
            self.worst, self.point = value, [int(point_index)]
            if extra:
                self.detail = extra

    def result(self):
        ok = self.worst == 0 if self.exact else self.worst < self.tol
        return CheckResult(self.name, self.anchor, self.worst, self.tol, bool(ok), self.point,
                           self.detail)


def verify_quasi_symplectic(space, num_points=20, seed=0, tol=DEFAULT, strict=True, checks=None):
    """Axiom sweep over random sample points.

    Checks: closedness dw = -Phi^* eta (FD), the moment condition on all
    acting generators, ker w and ker T Phi intersecting trivially, the kernel
    description by generators, equivariance of Phi, invariance of w, and for
    quotients the basic property of w and invariance of Phi under the gauge.
    """
    pt = space.target
    emb = space.action.emb()
    want = set(checks or ["closed", "moment", "kernel", "kernel_description", "equivariance",
                          "invariance", "basic"])
    tr = {
        "closed": _Tracker("closed", "d omega = -Phi^* eta", tol.closed_fd),
        "moment": _Tracker("moment", "iota(xi_M) omega = -Phi^* <alpha, xi>", tol.moment),
        "kernel": _Tracker("kernel", "ker omega and ker T Phi meet trivially", 0, exact=True),
        "kernel_description": _Tracker("kernel_description",
                                       "ker omega = {xi_M : <alpha, xi> = 0}", 0, exact=True),
        "equivariance": _Tracker("equivariance", "Phi(g.m) = g.Phi(m)", tol.equivariance),
        "invariance": _Tracker("invariance", "A_g^* omega = omega + Phi^* beta(g)", tol.equivariance),
        "basic": _Tracker("basic", "omega basic and Phi invariant for the gauge action",
                          tol.equivariance),
    }
    if space.gauge is None:
        want.discard("basic")
    if space.ambient_dim == 0:
        # a single point: only equivariance of the moment value has content
        for idx, rng in enumerate(point_rngs(seed, num_points)):
            elems = tuple(space.action.random_elems(rng))
            q = space.moment_value(())
            moved = space.moment_value(tuple(space.action.act(elems, ())))
            for key in want:
                val = pt.distance(moved, pt.act(space.action.slot_elems(elems), q)) \
                    if key == "equivariance" else 0.0
                tr[key].add(val, idx)
        report = AxiomReport(space.label, [tr[k].result() for k in tr if k in want])
        if strict:
            report.raise_if_failed()
        return report
    for idx, rng in enumerate(point_rngs(seed, num_points)):
        P = space.sample(rng)
        fr = space.frame(P, tol)
        n = space.dim
        if "closed" in want:
            form = FormField(2, fr, space.omega)
            vs = list(unit_vectors(rng, n, 3)) if n else []
            if n:
                lhs = exterior_derivative_fd(form, np.zeros(n), vs, tol)
                rhs = -pt.eta(space.moment_jets(fr, np.column_stack(vs)))
                tr["closed"].add(abs(lhs - rhs), idx)
            else:
                tr["closed"].add(0.0, idx)
        if "moment" in want and space.action.dim:
            W = space.generator_coords(fr, np.eye(space.action.dim))
            U = fr.S @ unit_vectors(rng, n, 2).T if n else np.zeros((space.ambient_dim, 0))
            jets = _ambient_jets(fr, np.hstack([W.T, U]))
            om = space.omega(jets)
            k = space.action.dim
            a = pt.alpha(space.moment(jets))
            lhs = om[:k, k:]
            rhs = -(emb.T @ pt.metric @ a[k:].T)
            tr["moment"].add(np.abs(lhs - rhs).max() if lhs.size else 0.0, idx)
        if "kernel" in want or "kernel_description" in want:
            Om = space.omega_matrix(fr, np.eye(n))
            J = space.jacobian(fr)
            rep = kernel_report(Om, J, tol)
            tr["kernel"].add(rep.nullity, idx, {"ill_conditioned": rep.ill_conditioned})
            if "kernel_description" in want:
                ker_dim = kernel_report(Om, None, tol).nullity
                q = space.moment_value(P)
                qchart = pt.chart(q)
                aq = pt.alpha(qchart.jets(np.zeros(pt.dim), np.eye(pt.dim)))
                cond = aq @ pt.metric @ emb
                xis = null_space(cond, tol.rank_rel) if cond.size else np.eye(space.action.dim)
                if xis.shape[1]:
                    W = space.generator_coords(fr, xis.T)
                    V = fr.S.T @ W.T
                    gen_dim = numerical_rank(V, tol.kernel_rel) if V.size else 0
                    leak = np.abs(Om @ V).max() / max(1.0, np.abs(Om).max())
                else:
                    gen_dim, leak = 0, 0.0
                bad = abs(ker_dim - gen_dim) + (1 if leak > 1e-6 else 0)
                tr["kernel_description"].add(bad, idx, {"ker_dim": ker_dim, "generated": gen_dim})
        if "equivariance" in want or "invariance" in want:
            elems = space.action.random_elems(rng)
            consts = tuple(Jet.const(e, 2) for e in elems)
            U = fr.S @ unit_vectors(rng, n, 2).T
            jets = _ambient_jets(fr, U)
            moved = space.action.act(consts, jets)
            if "equivariance" in want:
                lhs = tuple(j.v for j in space.moment(moved))
                rhs = pt.act(space.action.slot_elems(elems), space.moment_value(P))
                tr["equivariance"].add(pt.distance(lhs, rhs), idx)
            if "invariance" in want and n:
                diff = space.omega(moved)[0, 1] - space.omega(jets)[0, 1]
                if not all(s.invariant for s in pt.splittings):
                    # non-invariant splittings: A_g^* omega - omega = Phi^* beta(g)
                    mj = space.moment(jets)
                    f = pt.frame(mj)
                    b = beta_matrix(pt, space.action.slot_elems(elems), tuple(j.v for j in mj), tol)
                    diff -= (f @ b @ f.T)[0, 1]
                tr["invariance"].add(abs(diff), idx)
        if "basic" in want:
            O = space.gauge_directions(P, fr.chart)
            U = fr.S @ unit_vectors(rng, n, 1).T if n else np.zeros((space.ambient_dim, 0))
            om = space.omega(_ambient_jets(fr, np.hstack([O, U])))
            g = space.gauge.random_elems(rng)
            moved = space.gauge.act(tuple(g), tuple(P))
            shift = pt.distance(space.moment_value(moved), space.moment_value(P))
            tr["basic"].add(max(np.abs(om[:O.shape[1]]).max(), shift), idx)
    report = AxiomReport(space.label, [tr[k].result() for k in tr if k in want])
    if strict:
        report.raise_if_failed()
    return report


def evaluator_discrepancy(space1, space2, num_points=5, seed=0, perm=None, map_point=None,
                          with_index=False):
    """Largest difference of the 2-forms and moment maps on shared ambient jets.

    ``perm`` reorders space1's ambient factors into space2's order; ``map_point``
    (jets -> jets) can replace it with any closed-form identification.  With
    ``with_index`` the sample index of the worst point is returned as well.
    """
    worst, where = 0.0, 0
    for idx, rng in enumerate(point_rngs(seed, num_points)):
        P = space1.sample(rng)
        chart = space1.chart(P)
        U = unit_vectors(rng, space1.ambient_dim, 2).T
        J1 = chart.jets(np.zeros(space1.ambient_dim), U)
        if map_point is not None:
            J2 = map_point(J1)
        elif perm is not None:
            J2 = tuple(J1[i] for i in perm)
        else:
            J2 = J1
        m1 = tuple(j.v for j in space1.moment(J1))
        m2 = tuple(j.v for j in space2.moment(J2))
        val = max(abs(space1.omega(J1)[0, 1] - space2.omega(J2)[0, 1]), space1.target.distance(m1, m2))
        if val > worst:
            worst, where = val, idx
    return (worst, where) if with_index else worst


# ---------------------------------------------------------------- constructions

def _d_target(model, count=1):
    return ProductTarget([canonical_splitting_D(model) for _ in range(count)])


def product(space1, space2):
    """Outer product: factors, actions, targets and gauges side by side."""
    if space1.model.label != space2.model.label:
        raise ModelMismatch(f"models differ: {space1.model.label} vs {space2.model.label}")
    n1 = len(space1.kinds)
    a1, a2 = space1.action, space2.action
    k1 = len(a1.kinds)

    def act(elems, P):
        return (tuple(a1.act(tuple(elems[:k1]), tuple(P[:n1])))
                + tuple(a2.act(tuple(elems[k1:]), tuple(P[n1:]))))

    slots = list(a1.slot_source) + [None if s is None else s + k1 for s in a2.slot_source]
    action = GroupAction(space1.model, a1.kinds + a2.kinds, act, slots)
    gauge = _product_gauge(space1, space2)
    t1 = len(space1.target.splittings)
    target = ProductTarget(space1.target.splittings + space2.target.splittings)

    def moment(P):
        return tuple(space1.moment(tuple(P[:n1]))) + tuple(space2.moment(tuple(P[n1:])))

    def omega(P):
        return space1.omega(tuple(P[:n1])) + space2.omega(tuple(P[n1:]))

    def sample(rng):
        return tuple(space1.sample(rng)) + tuple(space2.sample(rng))

    del t1
    return HamiltonianSpace(space1.model, space1.kinds + space2.kinds, space1.base + space2.base,
                            target, moment, omega, action, sample,
                            label=f"{space1.label} x {space2.label}", gauge=gauge)


def _product_gauge(space1, space2):
    g1, g2 = space1.gauge, space2.gauge
    if g1 is None and g2 is None:
        return None
    n1 = len(space1.kinds)
    k1 = len(g1.kinds) if g1 else 0
    kinds = (g1.kinds if g1 else ()) + (g2.kinds if g2 else ())

    def act(elems, P):
        left = tuple(g1.act(tuple(elems[:k1]), tuple(P[:n1]))) if g1 else tuple(P[:n1])
        right = tuple(g2.act(tuple(elems[k1:]), tuple(P[n1:]))) if g2 else tuple(P[n1:])
        return left + right

    return GroupAction(space1.model, kinds, act)


def _extend_gauge(space, new_kinds, new_act):
    """Gauge group of ``space`` enlarged by extra factors acting through ``new_act``."""
    old = space.gauge
    k0 = len(old.kinds) if old else 0

    def act(elems, P):
        P = tuple(old.act(tuple(elems[:k0]), tuple(P))) if old else tuple(P)
        return tuple(new_act(tuple(elems[k0:]), P))

    return GroupAction(space.model, (old.kinds if old else ()) + tuple(new_kinds), act)


def _factor_slots(space, i):
    t = space.target
    if t.splittings[i].target.chart_kind != "D" or len(t.splittings[i].signs) != 2:
        raise FactorStructureMismatch(f"target factor {i} is not D")
    s0 = t.slot_of_factor[i]
    src = space.action.slot_source
    a, b = src[s0], src[s0 + 1]
    if a is None or b is None or space.action.kinds[a] != "G" or space.action.kinds[b] != "G":
        raise FactorStructureMismatch(f"target factor {i} is not acted on by G x G")
    if src.count(a) != 1 or src.count(b) != 1:
        raise FactorStructureMismatch("acting factors are shared between slots")
    if t.splittings[i].signs != (-1.0, 1.0):
        raise FactorStructureMismatch(f"target factor {i} has the opposite structure")
    return s0, a, b


def internal_fuse(space, i=0, j=1):
    """Quotient by the diagonal of the inner G factors of target factors i and j.

    The diagonal acts through the second slot of factor i and the first slot
    of factor j; the new moment factor is ``Phi_i Phi_j`` and the 2-form
    gains ``+1/2 <Phi_i^* theta^L ^ Phi_j^* theta^R>``.
    """
    if i == j:
        raise FactorStructureMismatch("need two distinct D factors")
    model = space.model
    si, ai, bi = _factor_slots(space, i)
    sj, aj, bj = _factor_slots(space, j)
    act0 = space.action
    nk = len(act0.kinds)
    eye = model.identity

    def gauge_act(elems, P):
        full = [eye] * nk
        full[bi] = elems[0]
        full[aj] = elems[0]
        return act0.act(tuple(full), P)

    gauge = _extend_gauge(space, ("G",), gauge_act)
    keep = [f for f in range(nk) if f not in (bi, aj)]

    def act(elems, P):
        full = [None] * nk
        for f, e in zip(keep, elems):
            full[f] = e
        k = P[0].k if isinstance(P[0], Jet) else None
        ident = Jet.const(eye, k) if k is not None else eye
        full = [ident if e is None else e for e in full]
        return act0.act(tuple(full), P)

    # new target: factor i becomes the product, factor j disappears
    old = space.target.splittings
    new_splits = [s for f, s in enumerate(old) if f != j]
    target = ProductTarget(new_splits)
    renum = {f: idx for idx, f in enumerate(keep)}
    slots = []
    for f in range(len(old)):
        if f == j:
            continue
        lo, hi = space.target.slot_of_factor[f], space.target.slot_of_factor[f + 1]
        if f == i:
            slots += [renum[ai], renum[bj]]
        else:
            slots += [None if s is None else renum[s] for s in act0.slot_source[lo:hi]]
    action = GroupAction(model, tuple(act0.kinds[f] for f in keep), act, slots)
    B = model.algebra.B

    def moment(P):
        m = list(space.moment(P))
        m[i] = m[i] @ m[j]
        del m[j]
        return tuple(m)

    def omega(P):
        m = space.moment(P)
        left = np.linalg.solve(m[i].v, m[i].d) if m[i].k else m[i].d
        l = model.coords_many(left)
        r = mc_right(model, m[j])
        c = l @ B @ r.T
        return space.omega(P) + 0.5 * (c - c.T)

    return HamiltonianSpace(model, space.kinds, space.base, target, moment, omega, action,
                            space.sample, label=f"internal_fuse({space.label})", gauge=gauge)


def fuse(space1, space2, i=-1, j=0):
    """Fusion product along D factor ``i`` of space1 and D factor ``j`` of space2.

    The defaults fuse the last factor of the first space with the first
    factor of the second, which for D-valued spaces is the usual fusion.
    """
    if space1.model.label != space2.model.label:
        raise ModelMismatch(f"models differ: {space1.model.label} vs {space2.model.label}")
    n1 = len(space1.target.splittings)
    n2 = len(space2.target.splittings)
    i, j = i % n1, j % n2
    out = internal_fuse(product(space1, space2), i, n1 + j)
    out.label = f"fuse({space1.label},{space2.label})"
    return out


def conjugate(space):
    """Swap the G factors, invert the moment map and negate the 2-form."""
    for s in space.target.splittings:
        if s.target.chart_kind != "D":
            raise FactorStructureMismatch("conjugation needs D-valued moment maps")
    src = list(space.action.slot_source)
    slots = []
    for f in range(len(space.target.splittings)):
        lo = space.target.slot_of_factor[f]
        slots += [src[lo + 1], src[lo]]
    action = GroupAction(space.model, space.action.kinds, space.action.act, slots)

    def moment(P):
        return tuple(inv(m) for m in space.moment(P))

    def omega(P):
        return -space.omega(P)

    out = HamiltonianSpace(space.model, space.kinds, space.base, space.target, moment, omega, action,
                           space.sample, label=f"conjugate({space.label})", gauge=space.gauge)
    return out


def _varpi_prime(model, j):
    """``-1/2 <pr_g theta^R ^ pr_m theta^R>`` at a D-valued jet."""
    r = mc_right(model, j)
    a, b = model.pr_g(r), model.pr_m(r)
    c = a @ model.algebra.B @ b.T
    return -0.5 * (c - c.T)


def quotient_to_DG(space, factor=0, tol=DEFAULT, num_checks=3, seed=0):
    """Quotient by the G acting on the first slot of a D factor; that factor becomes ``Phi^-1 G``."""
    model = space.model
    s0, a, b = _factor_slots(space, factor)
    act0 = space.action
    nk = len(act0.kinds)
    eye = model.identity

    def gauge_act(elems, P):
        full = [eye] * nk
        full[a] = elems[0]
        return act0.act(tuple(full), P)

    gauge = _extend_gauge(space, ("G",), gauge_act)
    keep = [f for f in range(nk) if f != a]

    def act(elems, P):
        k = P[0].k if isinstance(P[0], Jet) else None
        full = [Jet.const(eye, k) if k is not None else eye] * nk
        for f, e in zip(keep, elems):
            full[f] = e
        return act0.act(tuple(full), P)

    slots = []
    for s, src in enumerate(act0.slot_source):
        if s == s0:
            continue
        slots.append(None if src is None else keep.index(src))
    action = GroupAction(model, tuple(act0.kinds[f] for f in keep), act, slots)
    splits = list(space.target.splittings)
    splits[factor] = invariant_splitting_DG(model)
    target = ProductTarget(splits)

    def moment(P):
        m = list(space.moment(P))
        m[factor] = inv(m[factor])
        return tuple(m)

    def omega(P):
        return space.omega(P) + _varpi_prime(model, space.moment(P)[factor])

    out = HamiltonianSpace(model, space.kinds, space.base, target, moment, omega, action,
                           space.sample, label=f"quotient({space.label})", gauge=gauge)
    _check_basic(out, num_checks, seed, tol)
    return out


def _check_basic(space, num, seed, tol):
    for rng in point_rngs(seed + 7919, num):
        P = space.sample(rng)
        chart = space.chart(P)
        O = space.gauge_directions(P, chart)
        if numerical_rank(O, tol.rank_rel) < O.shape[1]:
            raise NotFree("gauge action is not free at a sample point")
        U = unit_vectors(rng, space.ambient_dim, 2).T
        om = space.omega(chart.jets(np.zeros(space.ambient_dim), np.hstack([O, U])))
        res = np.abs(om[:O.shape[1]]).max() if O.shape[1] else 0.0
        if res > tol.moment:
            raise NotBasic(f"2-form does not descend (residual {res:.3e})")


def _dg_factor(space, factor):
    kinds = space.target.kinds
    if factor is None:
        found = [i for i, k in enumerate(kinds) if k == "M"]
        if not found:
            raise FactorStructureMismatch("no D/G-valued factor to lift")
        factor = found[0]
    if kinds[factor] != "M":
        raise FactorStructureMismatch(f"target factor {factor} is not D/G")
    s0 = space.target.slot_of_factor[factor]
    src = space.action.slot_source[s0]
    if src is None:
        raise FactorStructureMismatch("the D/G slot must be acted on by one factor")
    return factor, s0, src


def lift_to_D(space, factor=None, tol=DEFAULT):
    """Lift a D/G-valued factor to a D-valued one on ``M x G``.

    The lifted moment is ``g r(m)^-1`` with ``r`` the representative of the
    D/G value, and the 2-form is ``omega - Phi^^* varpi'``.  The new G factor
    of the acting group comes first and acts on the first slot.
    """
    model = space.model
    factor, s0, src = _dg_factor(space, factor)
    act0 = space.action
    nf = len(space.kinds)

    def rep(P):
        r = space.moment(tuple(P[:nf]))[factor]
        if not np.all(np.isfinite(r.v)) or abs(np.linalg.det(r.v)) < 1e-12:
            raise SectionOutOfChart("moment representative is singular")
        return r

    def moment(P):
        m = list(space.moment(tuple(P[:nf])))
        m[factor] = P[nf] @ inv(rep(P))
        return tuple(m)

    def act(elems, P):
        a1, rest = elems[0], tuple(elems[1:])
        a2 = rest[src]
        Pm = tuple(P[:nf])
        moved = tuple(act0.act(rest, Pm))
        r_old = space.moment(Pm)[factor]
        r_new = space.moment(moved)[factor]
        g = a1 @ P[nf] @ inv(r_old) @ inv(a2) @ r_new
        return moved + (g,)

    slots = []
    for s, sv in enumerate(act0.slot_source):
        if s == s0:
            slots += [0, src + 1]
        else:
            slots.append(None if sv is None else sv + 1)
    action = GroupAction(model, ("G",) + act0.kinds, act, slots)

    gauge = None
    if space.gauge is not None:
        g0 = space.gauge

        def gauge_act(elems, P):
            Pm = tuple(P[:nf])
            moved = tuple(g0.act(tuple(elems), Pm))
            g = P[nf] @ inv(space.moment(Pm)[factor]) @ space.moment(moved)[factor]
            return moved + (g,)

        gauge = GroupAction(model, g0.kinds, gauge_act)
    splits = list(space.target.splittings)
    splits[factor] = canonical_splitting_D(model)
    target = ProductTarget(splits)

    def omega(P):
        return space.omega(tuple(P[:nf])) - _varpi_prime(model, moment(P)[factor])

    def sample(rng):
        return tuple(space.sample(rng)) + (model.random_subgroup_point(rng),)

    return HamiltonianSpace(model, space.kinds + ("G",), space.base + (model.identity,), target,
                            moment, omega, action, sample, label=f"lift({space.label})",
                            gauge=gauge)


def lift_quotient_map(space, factor=0):
    """Jets of ``lift(quotient(space))`` to jets of ``space``: ``(p, g) -> (g, e).p``."""
    model = space.model
    _, a, _ = _factor_slots(space, factor)
    nk = len(space.action.kinds)
    nf = len(space.kinds)

    def fmap(J):
        k = J[0].k
        full = [Jet.const(model.identity, k)] * nk
        full[a] = J[nf]
        return tuple(space.action.act(tuple(full), tuple(J[:nf])))

    return fmap


def quotient_lift_map(space):
    """Jets of ``space`` (D/G-valued) to jets of ``quotient(lift(space))``: ``p -> (p, e)``."""
    model = space.model

    def fmap(J):
        return tuple(J) + (Jet.const(model.identity, J[0].k),)

    return fmap


# ---------------------------------------------------------------- orbits of D/G

def base_point_space(model):
    """The orbit ``{eG}`` of D/G with omega = 0.

    Modelled as ``G`` modulo right multiplication by ``G`` (a zero-dimensional
    quotient), so that lifts and quotients see an ordinary G factor.
    """
    target = ProductTarget([invariant_splitting_DG(model)])

    def act(elems, P):
        return (elems[0] @ P[0],)

    def gauge_act(elems, P):
        return (P[0] @ inv(elems[0]),)

    def moment(P):
        return (P[0],)

    def omega(P):
        k = P[0].k
        return np.zeros((k, k))

    def sample(rng):
        return (model.random_subgroup_point(rng),)

    return HamiltonianSpace(model, ("G",), (model.identity,), target, moment, omega,
                            GroupAction(model, ("G",), act, [0]), sample, label="{eG}",
                            gauge=GroupAction(model, ("G",), gauge_act))


# ---------------------------------------------------------------- reduction

@dataclass
class ReductionResult:
    level: tuple
    point: tuple
    reduced_dim: int
    omega_reduced: np.ndarray
    reduced_form: FormField
    report: dict


def _level_residual(space, fr, level):
    """Frame coordinates of the displacement from Phi to the level, per target factor."""
    model = space.model
    m = space.moment_value(fr.point)
    out = []
    for kind, a, b in zip(space.target.kinds, m, level):
        y = model.log(np.linalg.solve(a, b))
        if kind == "M":
            out.append(model.split(y[None])[1][0])
        else:
            out.append(y)
    return np.concatenate(out)


def newton_to_level(space, P, level, tol=DEFAULT):
    """Move ``P`` onto ``Phi^-1(level)`` with damped Gauss-Newton steps in the slice."""
    P = tuple(P)
    fr = space.frame(P, tol)
    r = _level_residual(space, fr, level)
    for _ in range(tol.newton_iter):
        norm = np.linalg.norm(r)
        if norm < tol.newton_tol:
            return fr.point
        J = space.jacobian(fr)
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        t = 1.0
        while t > 1e-4:
            cand = fr.chart.embed(fr.S @ (t * step))
            cfr = space.frame(cand, tol)
            cr = _level_residual(space, cfr, level)
            if np.linalg.norm(cr) < norm:
                break
            t *= 0.5
        else:
            raise NewtonDivergence(f"no descent from residual {norm:.3e}")
        fr, r = cfr, cr
    if np.linalg.norm(r) < 1e3 * tol.newton_tol:
        return fr.point
    raise NewtonDivergence(f"residual {np.linalg.norm(r):.3e} after {tol.newton_iter} steps")


def _regularity(J):
    s = np.linalg.svd(J, compute_uv=False) if J.size else np.zeros(0)
    if J.shape[0] == 0:
        return 1.0
    if s.size < J.shape[0] or s[0] == 0:
        return 0.0
    return float(s[J.shape[0] - 1] / s[0])


def symplectic_reduce(space, level, start=None, seed=0, tol=DEFAULT, num_closed=3):
    """Reduced 2-form at a point of ``Phi^-1(level) / G_level``.

    The level set is reached by Newton steps from ``start`` (or a sample);
    the reduced chart is a transversal to the stabilizer orbit inside the
    level set, with level-set points found by Newton correction.
    """
    level = tuple(level)
    rng = np.random.default_rng(seed)
    P = tuple(start) if start is not None else space.sample(rng)
    P = newton_to_level(space, P, level, tol)
    fr = space.frame(P, tol)
    J = space.jacobian(fr)
    reg = _regularity(J)
    if reg < tol.regular_value:
        raise NotRegularValue(f"T Phi not surjective at the level (ratio {reg:.2e})")
    pt = space.target
    emb = space.action.emb()
    stab_cond = pt.action_matrix(space.moment_value(P)) @ emb
    xis = null_space(stab_cond, tol.rank_rel) if stab_cond.size else np.eye(space.action.dim)
    K = null_space(J, tol.rank_rel)
    if xis.shape[1]:
        W = space.generator_coords(fr, xis.T)
        orbit = fr.S.T @ W.T
        if numerical_rank(orbit, tol.kernel_rel) < xis.shape[1]:
            raise NotFree("stabilizer of the level does not act locally freely")
        orbit = orbit - K @ (K.T @ orbit)  # numerically tangent to the level set already
        orbit_in_K = K.T @ (fr.S.T @ W.T)
    else:
        orbit_in_K = np.zeros((K.shape[1], 0))
    Q = null_space(orbit_in_K.T, tol.rank_rel) if orbit_in_K.shape[1] else np.eye(K.shape[1])
    Wred = K @ Q  # transversal directions in slice coordinates
    Om = space.omega_matrix(fr, np.eye(space.dim))
    om_K = K.T @ Om @ K
    om_red = Wred.T @ Om @ Wred
    sv = np.linalg.svd(om_red, compute_uv=False) if om_red.size else np.zeros(0)
    scale = max(np.abs(Om).max(), 1e-300)
    min_eig = float(sv.min() / scale) if sv.size else 1.0
    ker_dim = kernel_report(om_K, None, tol).nullity if om_K.size else 0
    report = {
        "regularity": reg,
        "level_dim": K.shape[1],
        "stabilizer_dim": xis.shape[1],
        "reduced_dim": Wred.shape[1],
        "min_normalized_eigenvalue": min_eig,
        "kernel_dim": ker_dim,
        "orbit_dim": orbit_in_K.shape[1],
        "kernel_is_orbit": ker_dim == orbit_in_K.shape[1],
        "nondegenerate": min_eig > tol.nondegenerate,
    }
    form = _reduced_form(space, fr, Wred, level, tol)
    closed = 0.0
    r = Wred.shape[1]
    if r >= 3:
        for _ in range(num_closed):
            vs = list(unit_vectors(rng, r, 3))
            closed = max(closed, abs(exterior_derivative_fd(form, np.zeros(r), vs, tol)))
    report["closed_residual"] = closed
    report["closed"] = closed < tol.closed_fd
    return ReductionResult(level, P, r, om_red, form, report)


class _LevelChart:
    """Chart of the level set near a point: transversal coordinates plus Newton correction."""

    def __init__(self, space, fr, W, level, tol):
        self.space, self.fr, self.W, self.level, self.tol = space, fr, W, level, tol
        J = space.jacobian(fr)
        self.C = J.T  # normal directions, in slice coordinates

    def _point(self, x):
        y = self.W @ x
        c = np.zeros(self.C.shape[1])
        for _ in range(self.tol.newton_iter):
            pt = self.fr.chart.embed(self.fr.S @ (y + self.C @ c))
            sub = self.space.frame(pt, self.tol)
            r = _level_residual(self.space, sub, self.level)
            if np.linalg.norm(r) < self.tol.newton_tol:
                return y + self.C @ c
            jets = self.fr.jets(y + self.C @ c, self.C)
            Jc = self.space.target.frame(self.space.moment(jets))
            c = c + np.linalg.lstsq(Jc.T, r, rcond=None)[0]
        return y + self.C @ c

    def jets(self, x, U):
        u = self._point(np.asarray(x, dtype=float))
        n = self.space.dim
        base = self.fr.jets(u, np.eye(n))
        Jf = self.space.target.frame(self.space.moment(base)).T
        # implicit-function tangent: remove the normal part along C
        proj = np.eye(n) - self.C @ np.linalg.solve(Jf @ self.C, Jf)
        return self.fr.jets(u, proj @ self.W @ np.asarray(U).reshape(self.W.shape[1], -1))


def _reduced_form(space, fr, W, level, tol):
    return FormField(2, _LevelChart(space, fr, W, level, tol), space.omega, "reduced form")


def check_locally_free(space, num_points=10, seed=0, tol=DEFAULT, points=None):
    """Stabilizer dimensions at sample points where T Phi is surjective."""
    out = {"checked": 0, "skipped": 0, "violations": []}
    samples = points if points is not None else [space.sample(r) for r in point_rngs(seed, num_points)]
    for idx, P in enumerate(samples):
        fr = space.frame(P, tol)
        J = space.jacobian(fr)
        if _regularity(J) < tol.regular_value:
            out["skipped"] += 1
            continue
        out["checked"] += 1
        W = space.generator_coords(fr, np.eye(space.action.dim))
        V = fr.S.T @ W.T
        gap = space.action.dim - numerical_rank(V, tol.kernel_rel)
        if gap:
            out["violations"].append({"point": idx, "rank_gap": int(gap)})
    out["locally_free"] = not out["violations"]
    return out
