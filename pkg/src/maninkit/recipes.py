"""Recipe mini-language for building catalog spaces.

Grammar (LL(1))::

    expr   := NAME '(' args ')' | leaf
    leaf   := IDENT [':' NUMBER (',' NUMBER)*]
    args   := expr (',' (expr | NUMBER))*

Leaves name surfaces (``2gon``, ``4gon``, ``2ngon:n``, ``torus1``,
``annulus:n1,n2``, ``disk:r``) or the double groupoid (``groupoid``,
``groupoid-dg``).  Calls are ``fuse(a, b)``, ``conjugate(a)``, ``lift(a)``,
``quotient(a)`` and ``reduce(a, edge)``.
"""
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import RecipeParseError
from .geomcalc import inv

CALLS = {"fuse": (2, 0), "conjugate": (1, 0), "lift": (1, 0), "quotient": (1, 0), "reduce": (1, 1)}
LEAVES = {
    "2gon": 0, "4gon": 0, "2ngon": 1, "torus1": 0, "annulus": 2, "disk": 1,
    "groupoid": 0, "groupoid-dg": 0,
}
LEAF_HELP = {
    "2gon": "colored 2-gon: G with moment g^-1 (the fusion unit)",
    "4gon": "colored 4-gon: the double groupoid (G x G) x| D",
    "2ngon:n": "colored 2n-gon with n free edges",
    "torus1": "one-holed torus with one free and one colored boundary edge",
    "annulus:n1,n2": "annulus with n1 and n2 free edges on its boundary circles",
    "disk:r": "uncolored disk with r boundary edges (D^V acting)",
    "groupoid": "quasi-symplectic groupoid over D",
    "groupoid-dg": "quasi-symplectic groupoid over D/G",
}
CALL_HELP = {
    "fuse(a,b)": "fusion of the last D factor of a with the first of b",
    "conjugate(a)": "swap the G factors, invert the moment map, negate the form",
    "quotient(a)": "quotient of the first D factor by its first G, giving a D/G factor",
    "lift(a)": "lift the first D/G factor back to D",
    "reduce(a,e)": "reduce a colored surface at free edge e",
}

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?![A-Za-z_\-]))|(?P<ident>[A-Za-z0-9_\-]+)|(?P<sym>[(),:]))")


@dataclass
class Leaf:
    name: str
    params: tuple = ()
    position: int = 0


@dataclass
class Call:
    op: str
    args: list = field(default_factory=list)
    ints: list = field(default_factory=list)
    position: int = 0


def tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise RecipeParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind, value=None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise RecipeParseError(f"expected {want!r}, got {got!r}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        kind, value, pos = self.peek()
        if kind != "ident":
            raise RecipeParseError(f"expected a recipe name, got {value or 'end of input'!r}", pos)
        self.i += 1
        if self.peek()[1] == "(":
            if value not in CALLS:
                raise RecipeParseError(f"unknown operation {value!r}", pos)
            self.take("sym", "(")
            node = Call(value, [self.expr()], [], pos)
            while self.peek()[1] == ",":
                self.i += 1
                if self.peek()[0] == "num":
                    node.ints.append(int(self.take("num")[1]))
                elif node.ints:
                    raise RecipeParseError("recipe arguments must precede integers", self.peek()[2])
                else:
                    node.args.append(self.expr())
            self.take("sym", ")")
            n_args, n_ints = CALLS[value]
            if len(node.args) != n_args or len(node.ints) != n_ints:
                raise RecipeParseError(
                    f"{value} takes {n_args} recipe(s) and {n_ints} integer(s)", pos)
            return node
        if value not in LEAVES:
            raise RecipeParseError(f"unknown recipe {value!r}", pos)
        params = []
        if self.peek()[1] == ":":
            self.i += 1
            params.append(int(self.take("num")[1]))
            while (len(params) < LEAVES[value] and self.peek()[1] == ","
                   and self.toks[self.i + 1][0] == "num"):
                self.i += 1
                params.append(int(self.take("num")[1]))
        if len(params) != LEAVES[value]:
            raise RecipeParseError(f"{value} takes {LEAVES[value]} parameter(s)", pos)
        return Leaf(value, tuple(params), pos)


def parse(text):
    p = _Parser(text)
    node = p.expr()
    kind, value, pos = p.peek()
    if kind != "end":
        raise RecipeParseError(f"trailing input {value!r}", pos)
    return node


def unparse(node):
    if isinstance(node, Leaf):
        return node.name + (":" + ",".join(map(str, node.params)) if node.params else "")
    parts = [unparse(a) for a in node.args] + [str(i) for i in node.ints]
    return f"{node.op}({','.join(parts)})"


# ---------------------------------------------------------------- building

def _disk_surface(node):
    if isinstance(node, Leaf) and node.name in ("2gon", "4gon", "2ngon"):
        from .moduli import polygon_2n
        n = {"2gon": 1, "4gon": 2}.get(node.name) or node.params[0]
        return polygon_2n(n)
    return None


def _leaf_surface(node):
    from . import moduli
    name, prm = node.name, node.params
    if name in ("2gon", "4gon", "2ngon"):
        return _disk_surface(node), True
    if name == "torus1":
        return moduli.torus_one_hole(True), True
    if name == "annulus":
        return moduli.annulus(*prm), True
    if name == "disk":
        return moduli.disk(prm[0]), False
    return None, None


def _build_leaf(model, node):
    from . import hamspace, moduli, targets
    if node.name in ("groupoid", "groupoid-dg"):
        split = (targets.canonical_splitting_D(model) if node.name == "groupoid"
                 else targets.invariant_splitting_DG(model))
        return targets.groupoid_two_form(split)
    if node.name == "annulus" and min(node.params) == 0:
        # a boundary circle without vertices: internal fusion of adjacent free edges
        n1, n2 = node.params
        if n1 + n2 < 1:
            from .errors import ColoringInvalid
            raise ColoringInvalid("annulus needs at least one free edge")
        disk = moduli.build_colored_space(model, moduli.polygon_2n(n1 + n2 + 1))
        return hamspace.internal_fuse(disk, 0, 1)
    surface, colored = _leaf_surface(node)
    if colored:
        if node.name == "2ngon" and node.params[0] < 1:
            from .errors import ColoringInvalid
            raise ColoringInvalid("2ngon needs n >= 1")
        return moduli.build_colored_space(model, surface, label=unparse(node))
    space = moduli.build_polygon_space(model, surface)
    space.label = unparse(node)
    return space


def build(model, node):
    """Space described by a parsed recipe."""
    from . import hamspace, moduli
    if isinstance(node, Leaf):
        return _build_leaf(model, node)
    if node.op == "reduce":
        surface, colored = _leaf_surface(node.args[0]) if isinstance(node.args[0], Leaf) else (None, None)
        if not colored:
            from .errors import NotRegular
            raise NotRegular("reduce applies to colored surface recipes")
        reduced, _, _, _ = moduli.reduce_free_edge(model, surface, node.ints[0])
        reduced.label = unparse(node)
        return reduced
    args = [build(model, a) for a in node.args]
    if node.op == "fuse":
        out = hamspace.fuse(args[0], args[1])
    elif node.op == "conjugate":
        out = hamspace.conjugate(args[0])
    elif node.op == "quotient":
        out = hamspace.quotient_to_DG(args[0])
    else:
        out = hamspace.lift_to_D(args[0])
    out.label = unparse(node)
    return out


def _evaluator_check(name, anchor, value, tol, point=0):
    from .hamspace import CheckResult
    return CheckResult(name, anchor, float(value), float(tol), bool(value < tol), [int(point)])


def _worst(values):
    values = list(values)
    i = int(np.argmax(values))
    return values[i], i


def cross_checks(model, node, space, num_points, seed, tol):
    """Recipe-specific identities beyond the axiom sweep, as CheckResults."""
    from . import hamspace, moduli, targets
    from .geomcalc import Jet, point_rngs
    out = []
    n = max(1, min(num_points, 5))
    if isinstance(node, Leaf):
        if node.name == "4gon":
            gr = targets.groupoid_two_form(targets.canonical_splitting_D(model))
            fm = moduli.fourgon_to_groupoid(model)
            vals = []
            for rng in point_rngs(seed, n):
                P = space.sample(rng)
                J = space.chart(P).jets(np.zeros(space.ambient_dim),
                                        rng.standard_normal((space.ambient_dim, 2)))
                vals.append(abs(space.omega(J)[0, 1] - gr.omega(fm(J))[0, 1]))
            worst, at = _worst(vals)
            out.append(_evaluator_check("groupoid_identification",
                                        "colored 4-gon = double groupoid (G x G) x| D", worst,
                                        tol.evaluator, at))
        elif node.name == "torus1":
            s = moduli.torus_one_hole(True)
            moved, words = moduli.elementary_move(s, [0], 1, [], [2], [4, 5])
            val, at = moduli.cutting_invariance(model, s, moved, words, n, seed, colored=True,
                                                with_index=True)
            out.append(_evaluator_check("cutting_invariance",
                                        "2-form independent of the polygon presentation", val, 1e-7, at))
        elif node.name in ("groupoid", "groupoid-dg"):
            split = space.target.splittings[0]
            worst, at = _worst(targets.groupoid_delta_residual(split, rng, tol)
                               for rng in point_rngs(seed, n))
            out.append(_evaluator_check("multiplicativity", "groupoid 2-form is multiplicative",
                                        worst, tol.moment, at))
            if node.name == "groupoid":
                ex = targets.explicit_groupoid_omega_D(model)
                vals = []
                for rng in point_rngs(seed, n):
                    P = space.sample(rng)
                    J = space.chart(P).jets(np.zeros(space.ambient_dim),
                                            rng.standard_normal((space.ambient_dim, 2)))
                    h1, h2, q = J
                    alt = ex((inv(h1), inv(h2), h1 @ q @ inv(h2)))
                    vals.append(abs(space.omega(J)[0, 1] - alt[0, 1]))
                worst, at = _worst(vals)
                out.append(_evaluator_check("explicit_formula", "closed-form groupoid 2-form on D",
                                            worst, tol.evaluator, at))
        return out
    if node.op == "fuse":
        a, b = node.args
        unit = [i for i, x in enumerate((a, b)) if isinstance(x, Leaf) and x.name == "2gon"]
        if unit:
            other = build(model, b if unit[0] == 0 else a)

            def fmap(J, first=unit[0] == 0):
                e = (Jet.const(model.identity, J[0].k),)
                return e + tuple(J) if first else tuple(J) + e

            val, at = hamspace.evaluator_discrepancy(other, space, n, seed, map_point=fmap,
                                                     with_index=True)
            out.append(_evaluator_check("identity_law", "the 2-gon is the unit for fusion", val,
                                        tol.evaluator, at))
        s1, s2 = _disk_surface(a), _disk_surface(b)
        if s1 is not None and s2 is not None:
            m1 = moduli.build_colored_space(model, s1)
            m2 = moduli.build_colored_space(model, s2)
            free1 = [e for e in s1.unpaired if s1.colors[e] == "free"]
            glued, words = moduli.surface_fusion(s1, s2, free1[-1], 0)
            target = moduli.build_colored_space(model, glued)
            fmap = moduli.fusion_identification(model, m1, m2, target, words)
            val, at = hamspace.evaluator_discrepancy(space, target, n, seed, map_point=fmap,
                                                     with_index=True)
            out.append(_evaluator_check("fusion_as_gluing", "fusion of disks is the glued disk", val,
                                        1e-7, at))
    elif node.op == "conjugate":
        inner = build(model, node.args[0])
        val, at = hamspace.evaluator_discrepancy(hamspace.conjugate(space), inner, n, seed,
                                                 with_index=True)
        out.append(_evaluator_check("double_conjugate", "conjugation is an involution", val,
                                    tol.evaluator, at))
    elif node.op == "quotient":
        inner = build(model, node.args[0])
        lifted = hamspace.lift_to_D(space, 0)
        val, at = hamspace.evaluator_discrepancy(lifted, inner, n, seed, with_index=True,
                                                 map_point=hamspace.lift_quotient_map(inner, 0))
        out.append(_evaluator_check("lift_of_quotient", "lifting inverts the D/G quotient", val, 1e-7,
                                    at))
    elif node.op == "lift":
        inner = build(model, node.args[0])
        fac = [i for i, k in enumerate(inner.target.kinds) if k == "M"][0]
        back = hamspace.quotient_to_DG(space, fac)
        val, at = hamspace.evaluator_discrepancy(inner, back, n, seed, with_index=True,
                                                 map_point=hamspace.quotient_lift_map(inner))
        out.append(_evaluator_check("quotient_of_lift", "the D/G quotient inverts lifting", val, 1e-7,
                                    at))
    elif node.op == "reduce":
        surface, _ = _leaf_surface(node.args[0])
        reduced, section, report, full = moduli.reduce_free_edge(model, surface, node.ints[0])
        vals = []
        for rng in point_rngs(seed, n):
            P = reduced.sample(rng)
            J = reduced.chart(P).jets(np.zeros(reduced.ambient_dim),
                                      rng.standard_normal((reduced.ambient_dim, 2)))
            vals.append(abs(reduced.omega(J)[0, 1] - full.omega(section(J))[0, 1]))
        worst, at = _worst(vals)
        out.append(_evaluator_check("reduction_equivalence",
                                    "reducing a free edge removes it from the surface", worst, 1e-7, at))
        out.append(_evaluator_check("reduction_basic", "2-form is basic on the level set",
                                    report["basic"], tol.moment, report["basic_point"]))
    return out
