import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maninkit import moduli as Mo
from maninkit.errors import (ColoringInvalid, InvalidAttachment, NotRegular, PresentationMismatch,
                             UnsolvableRelation)
from maninkit.geomcalc import (ChartedSpace, ExpChart, FormField, exterior_derivative_fd, inv,
                               mc_left, mc_right, point_rngs, unit_vectors)
from maninkit.hamspace import evaluator_discrepancy, fuse, internal_fuse, verify_quasi_symplectic
from maninkit.liegroup import catalog_model
from maninkit.targets import canonical_splitting_D, groupoid_two_form


def triple_space(model, rng):
    return ChartedSpace(ExpChart(model, ("D",) * 3, tuple(model.random_point(rng) for _ in range(3))))


def jets_on(space, rng, k=2):
    n = space.param_dim
    return space.jets(0.1 * rng.standard_normal(n), unit_vectors(rng, n, k).T)


def random_pairs(model):
    """Three FormPairs on D^3 with non-trivial maps and forms."""
    def pair(i, j, s):
        return Mo.FormPair(lambda P: P[i] @ P[j], lambda P: s * Mo.severa_beta(model, P[j], P[i]))
    return pair(0, 1, 0.7), pair(1, 2, -1.3), pair(2, 0, 0.4)


def same_pair(fa, fb, J):
    return max(np.abs(fa.phi(J).v - fb.phi(J).v).max(), np.abs(fa.omega(J) - fb.omega(J)).max())


# ------------------------------------------------------------------ Severa product

def test_severa_group_laws(model, rng):
    sp = triple_space(model, rng)
    J = jets_on(sp, rng)
    a, b, c = random_pairs(model)
    prod = Mo.severa_product
    e = Mo.severa_identity(model)
    assert same_pair(prod(model, a, e), a, J) < 1e-14
    assert same_pair(prod(model, e, a), a, J) < 1e-14
    left = prod(model, prod(model, a, b), c)
    right = prod(model, a, prod(model, b, c))
    assert same_pair(left, right, J) < 1e-9
    assert same_pair(prod(model, a, Mo.severa_inverse(a)), e, J) < 1e-12
    assert same_pair(prod(model, Mo.severa_inverse(a), a), e, J) < 1e-12


@given(seed=st.integers(0, 10 ** 6))
def test_severa_associativity_property(seed):
    m = catalog_model("sl2c-su2")
    rng = np.random.default_rng(seed)
    sp = triple_space(m, rng)
    J = jets_on(sp, rng, 3)
    a, b, c = random_pairs(m)
    left = Mo.severa_product(m, Mo.severa_product(m, a, b), c)
    right = Mo.severa_product(m, a, Mo.severa_product(m, b, c))
    assert same_pair(left, right, J) < 1e-9


def test_beta_vanishes_on_the_antidiagonal(model, rng):
    sp = ChartedSpace(ExpChart(model, ("D",), (model.random_point(rng),)))
    J = jets_on(sp, rng)
    assert np.abs(Mo.severa_beta(model, J[0], inv(J[0]))).max() < 1e-12


def test_dbeta_sum_rule(model, rng):
    # with d0 = (d1 d2)^-1: d beta = d0^* eta + d1^* eta + d2^* eta, and eta(d^-1) = -eta(d)
    split = canonical_splitting_D(model)
    sp = ChartedSpace(ExpChart(model, ("D", "D"), (model.random_point(rng), model.random_point(rng))))
    beta = FormField(2, sp, lambda J: Mo.severa_beta(model, J[0], J[1]))
    for _ in range(3):
        vs = list(unit_vectors(rng, sp.param_dim, 3))
        lhs = exterior_derivative_fd(beta, np.zeros(sp.param_dim), vs)
        J = sp.jets(np.zeros(sp.param_dim), np.column_stack(vs))
        rhs = split.eta(inv(J[0] @ J[1])) + split.eta(J[0]) + split.eta(J[1])
        assert abs(lhs - rhs) < 1e-5


def test_beta_contractions(model, rng):
    for _ in range(3):
        res = Mo.severa_beta_contractions(model, model.random_point(rng), model.random_point(rng),
                                          rng.standard_normal(model.dim))
        assert len(res) == 3 and max(res) < 1e-8


# ------------------------------------------------------------------ builders

def test_single_edge_disk_is_a_point(so3):
    space = Mo.build_polygon_space(so3, Mo.disk(1))
    assert space.dim == 0 and space.variables == []
    assert np.array_equal(space.moment_value(())[0], so3.identity)
    assert verify_quasi_symplectic(space, num_points=3).passed


@pytest.mark.parametrize("r", [2, 3, 5])
def test_disks_pass_the_axioms(model, r):
    space = Mo.build_polygon_space(model, Mo.disk(r))
    assert space.dim == (r - 1) * model.dim
    assert verify_quasi_symplectic(space, num_points=4, seed=r).passed


def test_disk_moment_closes_the_relation(model, rng):
    space = Mo.build_polygon_space(model, Mo.disk(3))
    P = space.sample(rng)
    d1, d2, d3 = space.moment_value(P)
    assert np.abs(d1 - P[0]).max() == 0 and np.abs(d3 - inv(P[0] @ P[1])).max() < 1e-12


def test_uncolored_torus(model):
    surf = Mo.torus_one_hole(False)
    assert surf.vertex_classes()[1] == 1
    space = Mo.build_polygon_space(model, surf)
    assert space.dim == 2 * model.dim and space.action.kinds == ("D",)
    assert verify_quasi_symplectic(space, num_points=4).passed


@pytest.mark.parametrize("n", [1, 2, 3])
def test_colored_polygons(model, n):
    space = Mo.build_colored_space(model, Mo.polygon_2n(n))
    g = model.g_coords.shape[1]
    # D^(n-1) x G^n
    assert space.kinds.count("D") == n - 1 and space.kinds.count("G") == n
    assert space.dim == (n - 1) * model.dim + n * g
    assert verify_quasi_symplectic(space, num_points=4).passed


def test_two_gon_is_G_with_zero_form(model, rng):
    space = Mo.build_colored_space(model, Mo.polygon_2n(1))
    P = space.sample(rng)
    J = space.chart(P).jets(np.zeros(space.ambient_dim), unit_vectors(rng, space.ambient_dim, 2).T)
    assert np.abs(space.omega(J)).max() < 1e-14
    # the free edge closes the relation with the colored edge
    assert np.abs(space.moment_value(P)[0] @ P[0] - model.identity).max() < 1e-12


def test_colored_torus_and_annulus(model):
    for surf in (Mo.torus_one_hole(), Mo.annulus(1, 1), Mo.annulus(1, 2)):
        space = Mo.build_colored_space(model, surf)
        assert verify_quasi_symplectic(space, num_points=3).passed


def test_four_gon_is_the_double_groupoid(model):
    g4 = Mo.build_colored_space(model, Mo.polygon_2n(2))
    gr = groupoid_two_form(canonical_splitting_D(model))
    fmap = Mo.fourgon_to_groupoid(model)
    worst = 0.0
    for rng in point_rngs(0, 5):
        P = g4.sample(rng)
        J = g4.chart(P).jets(np.zeros(g4.ambient_dim), unit_vectors(rng, g4.ambient_dim, 2).T)
        worst = max(worst, abs(g4.omega(J)[0, 1] - gr.omega(fmap(J))[0, 1]))
        a, b = g4.moment(J), gr.moment(fmap(J))
        # first free edge is the groupoid target, the second the inverse of its source
        assert np.abs(a[0].v - b[0].v).max() < 1e-12
        assert np.abs(np.linalg.inv(a[1].v) - b[1].v).max() < 1e-12
    assert worst < 1e-8


def test_four_gon_closed_form(model):
    """omega = -1/2 (<d^L, g1^R> - <d^R, g2^L> - <Ad_d g1^R, g2^L>) with wedge pairings."""
    g4 = Mo.build_colored_space(model, Mo.polygon_2n(2))
    B = model.algebra.B

    def wp(a, b):
        c = a @ B @ b.T
        return c - c.T

    def closed_form(J):
        d, g1, g2 = J
        Ad = model.adjoint(d.v)
        return -0.5 * (wp(mc_left(model, d), mc_right(model, g1))
                       - wp(mc_right(model, d), mc_left(model, g2))
                       - wp(mc_right(model, g1) @ Ad.T, mc_left(model, g2)))

    for rng in point_rngs(1, 4):
        P = g4.sample(rng)
        J = g4.chart(P).jets(np.zeros(g4.ambient_dim), unit_vectors(rng, g4.ambient_dim, 2).T)
        assert abs(g4.omega(J)[0, 1] - closed_form(J)[0, 1]) < 1e-10


# ------------------------------------------------------------------ presentations

def test_same_cutting_gives_zero(model):
    T = Mo.torus_one_hole(False)
    words = [[(e, 1)] for e in range(T.num_edges)]
    assert Mo.cutting_invariance(model, T, T, words, num_points=3) == 0.0


def test_rotated_presentation(model):
    T = Mo.torus_one_hole(False)
    R, words = Mo.rotation(T, 2)
    assert Mo.cutting_invariance(model, T, R, words, num_points=5) < 1e-7


def test_elementary_moves(model):
    T = Mo.torus_one_hole(False)
    T2, words = Mo.elementary_move(T, [0], 1, [], [2], [4])
    assert T2.num_edges == 5 and len(T2.pairs) == 2
    assert Mo.cutting_invariance(model, T, T2, words, num_points=5) < 1e-7
    C = Mo.torus_one_hole()
    C2, words = Mo.elementary_move(C, [0], 1, [], [2], [4, 5])
    assert Mo.cutting_invariance(model, C, C2, words, num_points=5, colored=True) < 1e-7


def test_six_gon_along_both_diagonals(model):
    # a b a^-1 b^-1 c1 c2 cut along the two diagonals that separate a paired edge
    S = Mo.SurfaceData(6, [(0, 2), (1, 3)])
    for args in (([0], 1, [], [2], [4, 5]), ([], 0, [1], [], [3, 4, 5])):
        S2, words = Mo.elementary_move(S, *args)
        assert Mo.cutting_invariance(model, S, S2, words, num_points=4) < 1e-7


def test_presentation_mismatch(so3):
    T = Mo.torus_one_hole(False)
    with pytest.raises(PresentationMismatch):
        Mo.elementary_move(T, [2], 1, [0], [], [4])  # blocks out of cyclic order
    with pytest.raises(PresentationMismatch):
        Mo.elementary_move(T, [0], 4, [], [2], [1])  # edge 4 is unpaired
    R, _ = Mo.rotation(T, 2)
    ident = [[(e, 1)] for e in range(5)]
    with pytest.raises(PresentationMismatch):
        Mo.cutting_invariance(so3, T, R, ident, num_points=2)
    with pytest.raises(PresentationMismatch):
        Mo.cutting_invariance(so3, T, T, ident[:4], num_points=2)


# ------------------------------------------------------------------ fusion and reduction

def test_surface_fusion_of_four_gons(model):
    s4 = Mo.polygon_2n(2)
    glued, words = Mo.surface_fusion(s4, s4, 2, 0)
    assert glued.num_edges == 6
    Mo.check_coloring(glued)
    g4 = Mo.build_colored_space(model, s4)
    g6 = Mo.build_colored_space(model, glued)
    ident = Mo.fusion_identification(model, g4, g4, g6, words)
    assert evaluator_discrepancy(fuse(g4, g4), g6, map_point=ident) < 1e-7


def test_surface_fusion_with_the_two_gon(model):
    s2, s4 = Mo.polygon_2n(1), Mo.polygon_2n(2)
    for other in (s2, s4):
        glued, words = Mo.surface_fusion(s2, other, 0, 0)
        assert glued.num_edges == other.num_edges
        m1, m2 = Mo.build_colored_space(model, s2), Mo.build_colored_space(model, other)
        gl = Mo.build_colored_space(model, glued)
        ident = Mo.fusion_identification(model, m1, m2, gl, words)
        assert evaluator_discrepancy(fuse(m1, m2), gl, map_point=ident) < 1e-7


def test_invalid_attachment():
    s4 = Mo.polygon_2n(2)
    with pytest.raises(InvalidAttachment):
        Mo.surface_fusion(s4, s4, 1, 0)  # edge 1 is colored
    with pytest.raises(InvalidAttachment):
        Mo.surface_fusion(Mo.torus_one_hole(), s4, 4, 0)  # not a disk


def test_internal_fusion_of_six_gon_is_an_annulus(model):
    h6 = Mo.build_colored_space(model, Mo.polygon_2n(3))
    fused = internal_fuse(h6, 1, 0)
    ann = Mo.build_colored_space(model, Mo.annulus(1, 1))
    # annulus edges (a, f1, c1, a^-1, f2, c2) as words in the 6-gon edges (f1 c1 f2 c2 f3 c3)
    words = [[(3, -1), (2, -1)], [(2, 1), (0, 1)], [(1, 1)], [(2, 1), (3, 1)], [(4, 1)], [(5, 1), (3, 1)]]
    assert evaluator_discrepancy(fused, ann, map_point=Mo.word_map(model, h6, words, ann)) < 1e-7
    assert fused.dim == ann.dim


@pytest.mark.parametrize("n", [2, 3])
def test_reduce_free_edge(model, n):
    red, section, report, full = Mo.reduce_free_edge(model, Mo.polygon_2n(n), 0)
    assert red.surface.num_edges == 2 * n - 2
    assert report["level"] < 1e-10 and report["basic"] < 1e-7
    ref = Mo.build_colored_space(model, Mo.polygon_2n(n - 1))
    # the level Phi^e in G has codimension dim D - dim G, then G x G is divided out
    assert red.dim == ref.dim == full.dim - model.dim - model.g_coords.shape[1]
    worst = 0.0
    for rng in point_rngs(n, 4):
        P = red.sample(rng)
        J = red.chart(P).jets(np.zeros(red.ambient_dim), unit_vectors(rng, red.ambient_dim, 2).T)
        worst = max(worst, abs(red.omega(J)[0, 1] - full.omega(section(J))[0, 1]))
    assert worst < 1e-7


def test_reduce_free_edge_errors(so3):
    with pytest.raises(NotRegular):
        Mo.reduce_free_edge(so3, Mo.polygon_2n(1), 0)
    with pytest.raises(InvalidAttachment):
        Mo.reduce_free_edge(so3, Mo.torus_one_hole(), 0)


# ------------------------------------------------------------------ surface data

def test_surface_json_round_trip():
    for s in (Mo.torus_one_hole(), Mo.annulus(1, 2), Mo.disk(4)):
        back = Mo.SurfaceData.from_json(s.to_json())
        assert back.num_edges == s.num_edges and back.pairs == s.pairs and back.colors == s.colors
    assert Mo.SurfaceData.from_json('{"edges": 3}').pairs == []


def test_vertex_classes():
    assert Mo.disk(4).vertex_classes()[1] == 4
    assert Mo.torus_one_hole().vertex_classes()[1] == 2
    assert Mo.annulus(1, 1).vertex_classes()[1] == 4


def test_invalid_surfaces(so3):
    with pytest.raises(ValueError):
        Mo.SurfaceData(4, [(0, 0)])
    with pytest.raises(ValueError):
        Mo.SurfaceData(4, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        Mo.SurfaceData(2, [(0, 5)])
    with pytest.raises(UnsolvableRelation):
        Mo.build_polygon_space(so3, Mo.SurfaceData(4, [(0, 2), (1, 3)]))
    with pytest.raises(UnsolvableRelation):
        Mo.build_polygon_space(so3, Mo.torus_one_hole(False), solve=0)


def test_invalid_colorings(so3):
    with pytest.raises(ColoringInvalid):
        Mo.build_colored_space(so3, Mo.disk(4))
    with pytest.raises(ColoringInvalid):
        Mo.check_coloring(Mo.SurfaceData(4, [], {0: "free", 1: "free", 2: "colored", 3: "colored"}))
    with pytest.raises(ColoringInvalid):
        Mo.check_coloring(Mo.SurfaceData(2, [], {0: "colored", 1: "colored"}))
    with pytest.raises(ColoringInvalid):
        Mo.check_coloring(Mo.SurfaceData(2, [], {0: "free", 1: "blue"}))
    with pytest.raises(ColoringInvalid):
        Mo.annulus(0, 1)
