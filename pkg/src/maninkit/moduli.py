"""Moduli spaces of flat D-connections on polygon presentations of surfaces.

A surface is a polygon with edges ``0..r-1`` read clockwise, some edges paired
(glued orientation-reversing).  Holonomies satisfy ``d_0 d_1 ... d_{r-1} = e``;
the source of edge i is the target of edge i+1, and a vertex gauge ``c`` acts
by ``d_i -> c_{t(i)} d_i c_{s(i)}^-1``.  The 2-form comes from the iterated
product ``(Phi_1, 0) . ... . (Phi_r, 0)`` with
``beta = 1/2 <d_1^* theta^L, d_2^* theta^R>`` on D x D.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (ColoringInvalid, InvalidAttachment, NotRegular, PresentationMismatch,
                     UnsolvableRelation)
from .config import DEFAULT
from .geomcalc import Jet, inv, mc_left, mc_right, point_rngs, unit_vectors
from .hamspace import GroupAction, HamiltonianSpace
from .targets import ProductTarget, canonical_splitting_D


# ---------------------------------------------------------------- Severa product

def severa_beta(model, j1, j2):
    """``1/2 <j1^* theta^L ^ j2^* theta^R>`` as a (k, k) array."""
    a = mc_left(model, j1)
    b = mc_right(model, j2)
    c = a @ model.algebra.B @ b.T
    return 0.5 * (c - c.T)


@dataclass
class FormPair:
    """A D-valued map and a 2-form on a common domain, both as functions of jets."""
    phi: object
    omega: object


def severa_product(model, fp1, fp2):
    def phi(P):
        return fp1.phi(P) @ fp2.phi(P)

    def omega(P):
        return fp1.omega(P) + fp2.omega(P) - severa_beta(model, fp1.phi(P), fp2.phi(P))

    return FormPair(phi, omega)


def severa_inverse(fp):
    return FormPair(lambda P: inv(fp.phi(P)), lambda P: -fp.omega(P))


def severa_identity(model):
    def phi(P):
        k = P[0].k
        return Jet.const(model.identity, k)

    def omega(P):
        k = P[0].k
        return np.zeros((k, k))

    return FormPair(phi, omega)


def severa_beta_contractions(model, d1, d2, zeta):
    """Residuals of ``iota(zeta_(i)) beta = 1/2 <d_i^* theta^L + d_(i+1)^* theta^R, zeta>``.

    ``D^3`` acts on pairs by ``(a0 d1 a1^-1, a1 d2 a2^-1)`` with ``d0 = (d1 d2)^-1``;
    the check uses one random tangent vector per contraction.
    """
    rng = np.random.default_rng(0)
    Z = model.mat(zeta)
    # generating vectors of the three D factors (velocity of exp(-t zeta))
    gens = [(-Z @ d1, np.zeros_like(d2)), (d1 @ Z, -Z @ d2), (np.zeros_like(d1), d2 @ Z)]
    out = []
    for i, (v1, v2) in enumerate(gens):
        w1 = d1 @ model.mat(rng.standard_normal(model.dim))
        w2 = d2 @ model.mat(rng.standard_normal(model.dim))
        j1 = Jet(d1, np.stack([v1, w1]))
        j2 = Jet(d2, np.stack([v2, w2]))
        lhs = severa_beta(model, j1, j2)[0, 1]
        # tangent of each d_i along w, through the relation for d0
        j0 = inv(j1 @ j2)
        jets = [j0, j1, j2]
        a = mc_left(model, jets[i])[1]
        b = mc_right(model, jets[(i + 1) % 3])[1]
        rhs = 0.5 * float((a + b) @ model.algebra.B @ zeta)
        out.append(abs(lhs - rhs))
    return out


def fourgon_to_groupoid(model):
    """Jet map from the colored 4-gon ``(d, g1, g2)`` to ``(h1, h2, q)`` of the double groupoid."""
    def fmap(J):
        d, g1, g2 = J
        return (inv(g2), g1, g2 @ d @ g1)

    return fmap


# ---------------------------------------------------------------- surfaces

@dataclass
class SurfaceData:
    """Polygon with ``num_edges`` edges, a pairing and an optional free/colored labelling."""
    num_edges: int
    pairs: list = field(default_factory=list)
    colors: dict = None
    names: list = None

    def __post_init__(self):
        self.pairs = [tuple(sorted(p)) for p in self.pairs]
        seen = set()
        for i, j in self.pairs:
            if i == j or i in seen or j in seen or not (0 <= i < self.num_edges and 0 <= j < self.num_edges):
                raise ValueError(f"invalid pairing {self.pairs}")
            seen.update((i, j))
        self.partner = {}
        for i, j in self.pairs:
            self.partner[i], self.partner[j] = j, i
        if self.colors is not None:
            self.colors = {int(k): v for k, v in self.colors.items()}
        if self.names is None:
            self.names = [f"e{i}" for i in range(self.num_edges)]

    @property
    def unpaired(self):
        return [i for i in range(self.num_edges) if i not in self.partner]

    def source(self, i):
        return i

    def target(self, i):
        return (i - 1) % self.num_edges

    def vertex_classes(self):
        """Union-find of polygon corners; corner i is the source of edge i."""
        r = self.num_edges
        parent = list(range(r))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            parent[find(a)] = find(b)

        for i, j in self.pairs:
            union(self.source(i), self.target(j))
            union(self.target(i), self.source(j))
        roots = sorted({find(x) for x in range(r)})
        index = {root: n for n, root in enumerate(roots)}
        return [index[find(x)] for x in range(r)], len(roots)

    def to_json(self):
        data = {"edges": self.num_edges, "pairs": [list(p) for p in self.pairs]}
        if self.colors is not None:
            data["colors"] = {str(k): v for k, v in sorted(self.colors.items())}
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        colors = data.get("colors")
        return cls(int(data["edges"]), [tuple(p) for p in data.get("pairs", [])],
                   {int(k): v for k, v in colors.items()} if colors is not None else None)


def check_coloring(surface):
    """Every boundary vertex sits between one free and one colored edge."""
    if surface.colors is None:
        raise ColoringInvalid("surface has no coloring")
    un = surface.unpaired
    if set(surface.colors) != set(un) or any(c not in ("free", "colored") for c in surface.colors.values()):
        raise ColoringInvalid("coloring must label exactly the unpaired edges as free or colored")
    corner, nv = surface.vertex_classes()
    ends = {v: [] for v in range(nv)}
    for e in un:
        ends[corner[surface.target(e)]].append(("t", surface.colors[e]))
        ends[corner[surface.source(e)]].append(("s", surface.colors[e]))
    for v, lst in ends.items():
        if len(lst) != 2:
            raise ColoringInvalid(f"vertex {v} is not a boundary vertex with two edge ends")
        if lst[0][1] == lst[1][1]:
            raise ColoringInvalid(f"edges at vertex {v} do not alternate free/colored")
    if not any(c == "free" for c in surface.colors.values()):
        raise ColoringInvalid("no free edges")


# ---------------------------------------------------------------- builders

class ModuliSpace(HamiltonianSpace):
    """Hamiltonian space with access to all edge holonomies."""

    def __init__(self, *args, surface=None, variables=None, solved=None, **kw):
        super().__init__(*args, **kw)
        self.surface = surface
        self.variables = variables
        self.solved = solved

    def edge_holonomies(self, P):
        return _edges_from_vars(self.model, self.surface, self.variables, self.solved, P)

    def from_edges(self, edges):
        return tuple(edges[e] for e in self.variables)


def _edges_from_vars(model, surface, variables, solved, P):
    r = surface.num_edges
    if not variables:
        # a single edge: the relation forces the identity
        return [Jet.const(model.identity, 0)] * r
    edges = [None] * r
    for e, p in zip(variables, P):
        edges[e] = p
        if e in surface.partner:
            edges[surface.partner[e]] = inv(p)
    k = P[0].k if P and isinstance(P[0], Jet) else None
    ident = Jet.const(model.identity, k) if k is not None else model.identity
    left = ident
    for e in range(solved):
        left = left @ edges[e]
    right = ident
    for e in range(solved + 1, r):
        right = right @ edges[e]
    edges[solved] = inv(left) @ inv(right)
    return edges


def _variables(surface, solved):
    out = []
    for e in range(surface.num_edges):
        if e == solved:
            continue
        if e in surface.partner and surface.partner[e] < e:
            continue
        out.append(e)
    return out


def _omega_from_edges(model, edges):
    k = edges[0].k
    om = np.zeros((k, k))
    prod = edges[0]
    for e in edges[1:]:
        om = om - severa_beta(model, prod, e)
        prod = prod @ e
    return om


def build_polygon_space(model, surface, solve=None):
    """Uncolored moduli space with the vertex gauge group ``D^V`` acting."""
    un = surface.unpaired
    if not un:
        raise UnsolvableRelation("no unpaired edge to solve the relation for")
    solved = un[-1] if solve is None else solve
    if solved in surface.partner:
        raise UnsolvableRelation(f"edge {solved} is paired")
    variables = _variables(surface, solved)
    corner, nv = surface.vertex_classes()
    tv = [corner[surface.target(e)] for e in range(surface.num_edges)]
    sv = [corner[surface.source(e)] for e in range(surface.num_edges)]

    def act(elems, P):
        return tuple(elems[tv[e]] @ p @ inv(elems[sv[e]]) for e, p in zip(variables, P))

    slots = []
    for e in un:
        slots += [tv[e], sv[e]]
    action = GroupAction(model, ("D",) * nv, act, slots)
    target = ProductTarget([canonical_splitting_D(model) for _ in un])

    def moment(P):
        edges = _edges_from_vars(model, surface, variables, solved, P)
        return tuple(edges[e] for e in un)

    def omega(P):
        return _omega_from_edges(model, _edges_from_vars(model, surface, variables, solved, P))

    def sample(rng):
        return tuple(model.random_point(rng, 0.4) for _ in variables)

    kinds = ("D",) * len(variables)
    return ModuliSpace(model, kinds, tuple(model.identity for _ in variables), target, moment, omega,
                       action, sample, label=f"polygon{surface.num_edges}",
                       surface=surface, variables=variables, solved=solved)


def build_colored_space(model, surface, label=None):
    """Colored moduli space: colored holonomies in G, ``(G x G)^{free}`` acting."""
    check_coloring(surface)
    free = [e for e in surface.unpaired if surface.colors[e] == "free"]
    solved = free[-1]
    variables = _variables(surface, solved)
    corner, nv = surface.vertex_classes()
    tv = [corner[surface.target(e)] for e in range(surface.num_edges)]
    sv = [corner[surface.source(e)] for e in range(surface.num_edges)]
    slots = []
    for e in free:
        slots += [tv[e], sv[e]]
    if sorted(slots) != list(range(nv)):
        raise ColoringInvalid("vertices are not in bijection with free-edge ends")

    def act(elems, P):
        return tuple(elems[tv[e]] @ p @ inv(elems[sv[e]]) for e, p in zip(variables, P))

    action = GroupAction(model, ("G",) * nv, act, slots)
    target = ProductTarget([canonical_splitting_D(model) for _ in free])
    kinds = tuple("G" if surface.colors.get(e) == "colored" else "D" for e in variables)

    def moment(P):
        edges = _edges_from_vars(model, surface, variables, solved, P)
        return tuple(edges[e] for e in free)

    def omega(P):
        return _omega_from_edges(model, _edges_from_vars(model, surface, variables, solved, P))

    def sample(rng):
        return tuple(model.random_subgroup_point(rng, 0.5) if kd == "G" else model.random_point(rng, 0.4)
                     for kd in kinds)

    return ModuliSpace(model, kinds, tuple(model.identity for _ in variables), target, moment, omega,
                       action, sample, label=label or f"colored{surface.num_edges}",
                       surface=surface, variables=variables, solved=solved)


# ---------------------------------------------------------------- catalog surfaces

def disk(r):
    return SurfaceData(r)


def polygon_2n(n):
    """Disk with 2n edges, even edges free and odd edges colored."""
    return SurfaceData(2 * n, [], {e: "free" if e % 2 == 0 else "colored" for e in range(2 * n)})


def torus_one_hole(colored=True):
    """``a b a^-1 b^-1`` followed by one boundary edge (uncolored) or a free/colored pair."""
    if colored:
        return SurfaceData(6, [(0, 2), (1, 3)], {4: "free", 5: "colored"},
                           names=["a", "b", "a'", "b'", "f", "c"])
    return SurfaceData(5, [(0, 2), (1, 3)], names=["a", "b", "a'", "b'", "c"])


def annulus(n1, n2):
    """``a B1 a^-1 B2`` with boundary words of n1 and n2 free/colored pairs (n1, n2 >= 1)."""
    if n1 < 1 or n2 < 1:
        raise ColoringInvalid("boundary components without vertices arise only from internal fusion")
    r = 2 * (n1 + n2) + 2
    k = 2 * n1 + 1
    colors = {}
    for e in range(1, k):
        colors[e] = "free" if (e - 1) % 2 == 0 else "colored"
    for e in range(k + 1, r):
        colors[e] = "free" if (e - k - 1) % 2 == 0 else "colored"
    return SurfaceData(r, [(0, k)], colors)


# ---------------------------------------------------------------- identifications

def word_map(model, space_from, words, space_to):
    """Jet map: holonomies of ``space_to`` as words in the edges of ``space_from``.

    ``words[e]`` lists ``(edge, power)`` pairs, read left to right as a product.
    """
    def fmap(J):
        edges = space_from.edge_holonomies(J)
        k = J[0].k
        out = []
        for w in words:
            acc = Jet.const(model.identity, k)
            for e, pw in w:
                acc = acc @ (edges[e] if pw > 0 else inv(edges[e]))
            out.append(acc)
        return space_to.from_edges(out)

    return fmap


def elementary_move(surface, u1, b, u2, v1, v2):
    """Cut-and-reglue ``U1 b U2 V1 b^-1 V2 -> x V1 U2 x^-1 U1 V2`` with ``x = U1 b U2``.

    Arguments are lists of edge indices of ``surface`` (b a single paired edge);
    paired partners inside the blocks stay paired.  Returns the new surface and
    the word map expressing its edges through the old ones.
    """
    r = surface.num_edges
    bp = surface.partner.get(b)
    order = list(u1) + [b] + list(u2) + list(v1) + [bp] + list(v2)
    if bp is None or sorted(order) != list(range(r)):
        raise PresentationMismatch("blocks must partition the edges around a paired edge")
    # order must be a cyclic rotation of 0..r-1
    start = order[0]
    if order != [(start + i) % r for i in range(r)]:
        raise PresentationMismatch("blocks are not in cyclic order")
    new_old = [None] + list(v1) + list(u2) + [None] + list(u1) + list(v2)
    words = []
    x_word = [(e, 1) for e in u1] + [(b, 1)] + [(e, 1) for e in u2]
    for pos, old in enumerate(new_old):
        if old is None:
            words.append(x_word if pos == 0 else [(e, -p) for e, p in reversed(x_word)])
        else:
            words.append([(old, 1)])
    pos_of = {old: pos for pos, old in enumerate(new_old) if old is not None}
    pairs = [(0, 1 + len(v1) + len(u2))]
    for i, j in surface.pairs:
        if b in (i, j):
            continue
        pairs.append((pos_of[i], pos_of[j]))
    colors = None
    if surface.colors is not None:
        colors = {pos_of[e]: c for e, c in surface.colors.items()}
    names = ["x" if old is None else surface.names[old] for old in new_old]
    return SurfaceData(r, pairs, colors, names), words


def rotation(surface, shift):
    """Same polygon read from a different starting corner."""
    r = surface.num_edges
    perm = [(i + shift) % r for i in range(r)]
    pos_of = {old: pos for pos, old in enumerate(perm)}
    pairs = [(pos_of[i], pos_of[j]) for i, j in surface.pairs]
    colors = {pos_of[e]: c for e, c in surface.colors.items()} if surface.colors is not None else None
    return SurfaceData(r, pairs, colors, [surface.names[o] for o in perm]), [[(o, 1)] for o in perm]


def cutting_invariance(model, surface1, surface2, words, num_points=10, seed=0, colored=False,
                       with_index=False):
    """Largest 2-form discrepancy between two presentations identified by ``words``."""
    build = build_colored_space if colored else build_polygon_space
    s1 = build(model, surface1)
    s2 = build(model, surface2)
    if len(words) != surface2.num_edges:
        raise PresentationMismatch("word map does not cover the second presentation")
    fmap = word_map(model, s1, words, s2)
    worst, where = 0.0, 0
    for idx, rng in enumerate(point_rngs(seed, num_points)):
        P = s1.sample(rng)
        chart = s1.chart(P)
        U = unit_vectors(rng, s1.ambient_dim, 2).T
        J1 = chart.jets(np.zeros(s1.ambient_dim), U)
        J2 = fmap(J1)
        # the identification must respect the relation
        e2 = s2.edge_holonomies(J2)
        w = [None] * surface2.num_edges
        for i, wd in enumerate(words):
            acc = model.identity
            edges = s1.edge_holonomies(tuple(j.v for j in J1))
            for e, pw in wd:
                acc = acc @ (edges[e] if pw > 0 else np.linalg.inv(edges[e]))
            w[i] = acc
        mis = max(float(np.abs(a.v - b).max()) for a, b in zip(e2, w))
        if mis > 1e-8:
            raise PresentationMismatch(f"presentations disagree on holonomies ({mis:.2e})")
        val = abs(s1.omega(J1)[0, 1] - s2.omega(J2)[0, 1])
        if val > worst:
            worst, where = val, idx
    return (worst, where) if with_index else worst


# ---------------------------------------------------------------- fusion as gluing

def surface_fusion(s1, s2, edge1, edge2):
    """Glue a strip joining ``s(edge1)`` in s1 to ``t(edge2)`` in s2 (disks only).

    Returns the glued surface and a function building the word map from the
    product ``s1 x s2`` (edges of s2 offset by ``s1.num_edges``).
    """
    for s, e in ((s1, edge1), (s2, edge2)):
        if s.pairs or s.colors is None or s.colors.get(e) != "free":
            raise InvalidAttachment("strips attach to free edges of colored disks")
    r1, r2 = s1.num_edges, s2.num_edges
    # cyclic order starting right after edge1: X1 = c1 Y1, then edge1
    x1 = [(edge1 + 1 + i) % r1 for i in range(r1 - 1)]
    # starting at edge2: edge2 X2 with X2 = Y2 c2
    x2 = [(edge2 + 1 + i) % r2 for i in range(r2 - 1)]
    c1, y1 = x1[0], x1[1:]
    y2, c2 = x2[:-1], x2[-1]
    if s1.colors[c1] != "colored" or s2.colors[c2] != "colored":
        raise InvalidAttachment("neighbouring edges must be colored")
    # glued word: c Y1 f Y2 with c = c2 c1 and f = edge1 edge2
    words = [[(r1 + c2, 1), (c1, 1)]] + [[(e, 1)] for e in y1] + [[(edge1, 1), (r1 + edge2, 1)]] + \
        [[(r1 + e, 1)] for e in y2]
    colors = {0: "colored"}
    for i, e in enumerate(y1):
        colors[1 + i] = s1.colors[e]
    colors[1 + len(y1)] = "free"
    for i, e in enumerate(y2):
        colors[2 + len(y1) + i] = s2.colors[e]
    glued = SurfaceData(len(words), [], colors)
    return glued, words


class _ProductEdges:
    """Edge holonomies of a product of two moduli spaces (for word maps)."""

    def __init__(self, m1, m2):
        self.m1, self.m2 = m1, m2
        self.n1 = len(m1.kinds)

    def edge_holonomies(self, P):
        return list(self.m1.edge_holonomies(tuple(P[:self.n1]))) + \
            list(self.m2.edge_holonomies(tuple(P[self.n1:])))


def fusion_identification(model, m1, m2, glued_space, words):
    return word_map(model, _ProductEdges(m1, m2), words, glued_space)


def free_factor_index(space, edge):
    free = [e for e in space.surface.unpaired if space.surface.colors[e] == "free"]
    if edge not in free:
        raise InvalidAttachment(f"edge {edge} is not free")
    return free.index(edge)


# ---------------------------------------------------------------- reduction at a free edge

def reduce_free_edge(model, surface, edge, num_checks=5, seed=0, tol=DEFAULT):
    """Reduce the colored space of ``surface`` at ``Phi^edge in G`` by its G x G.

    The reduced surface drops ``edge`` and merges its two colored neighbours
    ``c_a edge c_b`` into one colored edge.  Returns ``(reduced space, section,
    report, original space)`` where ``section`` maps reduced jets into the
    level set of the original space.
    """
    space = build_colored_space(model, surface)
    r = surface.num_edges
    if surface.pairs and (edge in surface.partner):
        raise InvalidAttachment("edge is paired")
    before, after = (edge - 1) % r, (edge + 1) % r
    if surface.colors.get(before) != "colored" or surface.colors.get(after) != "colored":
        raise InvalidAttachment("neighbours of the edge must be colored")
    if before == after:
        raise NotRegular("removing the edge leaves no free edge")
    # reduced polygon: order starting after `after`, then merged colored edge
    rest = [(after + 1 + i) % r for i in range(r - 3)]
    new_old = rest + [(before, edge, after)]
    pos_of = {}
    for pos, old in enumerate(new_old):
        if isinstance(old, tuple):
            for o in old:
                pos_of[o] = pos
        else:
            pos_of[old] = pos
    pairs = [(pos_of[i], pos_of[j]) for i, j in surface.pairs]
    colors = {}
    for pos, old in enumerate(new_old):
        colors[pos] = "colored" if isinstance(old, tuple) else surface.colors.get(old)
    colors = {k: v for k, v in colors.items() if v is not None}
    reduced_surface = SurfaceData(r - 2, pairs, colors)
    reduced = build_colored_space(model, reduced_surface)
    merged = r - 3

    def section(J):
        edges = reduced.edge_holonomies(J)
        k = J[0].k
        ident = Jet.const(model.identity, k)
        old = [None] * r
        for pos, o in enumerate(new_old):
            if isinstance(o, tuple):
                old[before], old[edge], old[after] = edges[merged], ident, ident
            else:
                old[o] = edges[pos]
        return space.from_edges(old)

    # regularity: Phi^edge transverse to G along the section
    fi = free_factor_index(space, edge)
    report = {"transversality": np.inf, "basic": 0.0, "basic_point": 0, "level": 0.0}
    for idx, rng in enumerate(point_rngs(seed, num_checks)):
        P = reduced.sample(rng)
        Q = tuple(j.v for j in section(tuple(Jet.const(p, 0) for p in P)))
        fr = space.frame(Q, tol)
        J = space.jacobian(fr)
        n = model.dim
        rows = J[fi * n:(fi + 1) * n]
        m_rows = model.split(rows.T)[1].T
        s = np.linalg.svd(m_rows, compute_uv=False)
        ratio = s[-1] / s[0] if s.size and s[0] > 0 else 0.0
        report["transversality"] = min(report["transversality"], float(ratio))
        level = space.moment_value(Q)[fi]
        report["level"] = max(report["level"], model.subgroup_residual(level))
        # the 2-form on the level set must kill the G x G orbit of the edge
        rch = reduced.chart(P)
        U = unit_vectors(rng, reduced.ambient_dim, 2).T
        tang = section(rch.jets(np.zeros(reduced.ambient_dim), U))
        T = fr.chart.velocity_coords(Q, [j.d for j in tang]).T
        src = space.action.slot_source
        xis = []
        for f in (src[2 * fi], src[2 * fi + 1]):
            for c in range(space.action.sizes[f]):
                x = np.zeros(space.action.dim)
                x[space.action.offsets[f] + c] = 1.0
                xis.append(x)
        O = space.generator_coords(fr, np.array(xis)).T
        om = space.omega(fr.chart.jets(np.zeros(space.ambient_dim), np.hstack([O, T])))
        basic = float(np.abs(om[:O.shape[1], O.shape[1]:]).max())
        if basic > report["basic"]:
            report["basic"], report["basic_point"] = basic, idx
    if report["transversality"] < tol.regular_value:
        raise NotRegular(f"edge holonomy not transverse to G (ratio {report['transversality']:.2e})")
    if report["level"] > tol.section or report["basic"] > tol.moment:
        raise NotRegular(f"section leaves the level set or the form is not basic: {report}")
    return reduced, section, report, space
