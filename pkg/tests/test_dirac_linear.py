import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from maninkit.dirac_linear import (LagrangianRelation, MetrizedSpace, backward_image,
                                   bivector_from_generators, bivector_from_splitting,
                                   check_dirac_morphism, check_lagrangian_relation, compose, graph,
                                   identity_relation)
from maninkit.errors import (ActionNotTransitive, ExistenceFailure, NonCleanComposition,
                             UniquenessFailure)
from maninkit.geomcalc import point_rngs
from maninkit.liealg import (ManinPair, MetrizedLieAlgebra, Subspace, catalog_pair,
                             principal_angles, same_subspace)
from maninkit.moduli import build_colored_space, polygon_2n
from maninkit.targets import (ProductTarget, canonical_splitting_D, invariant_splitting_DG,
                              opposite, target_bivector)

HYP = MetrizedSpace(np.array([[0.0, 1.0], [1.0, 0.0]]))


def span_equal(a, b, tol=1e-9):
    ang = principal_angles(a, b)
    return a.shape[1] == b.shape[1] if ang.size == 0 else (ang.max() < tol and
                                                           np.linalg.matrix_rank(a) == np.linalg.matrix_rank(b))


def composite_oracle(rel2, rel1):
    """Brute-force composite: intersect R2 x R1 with {y2 = y1} and project away the middle."""
    y1, x1 = rel1.target_part(), rel1.source_part()
    z2, y2 = rel2.target_part(), rel2.source_part()
    coef = scipy.linalg.null_space(np.hstack([y1, -y2]))
    k1 = y1.shape[1]
    return scipy.linalg.orth(np.vstack([z2 @ coef[k1:], x1 @ coef[:k1]]))


def test_isometry_graphs_are_lagrangian(so3, rng):
    d = MetrizedSpace(so3.algebra.B)
    ok, _ = check_lagrangian_relation(graph(so3.adjoint(so3.random_point(rng)), d, d))
    assert ok
    ok, diag = check_lagrangian_relation(graph(2 * np.eye(6), d, d))
    assert not ok and diag["isotropy"] > 0.1
    ok, _ = check_lagrangian_relation(identity_relation(HYP))
    assert ok


def test_compose_with_identity_and_graphs(so3, rng):
    d = MetrizedSpace(so3.algebra.B)
    A = so3.adjoint(so3.random_point(rng))
    Bm = so3.adjoint(so3.random_point(rng))
    rel = graph(A, d, d)
    assert same_subspace(compose(identity_relation(d), rel).span, rel.span)
    assert same_subspace(compose(rel, identity_relation(d)).span, rel.span)
    assert same_subspace(compose(graph(A, d, d), graph(Bm, d, d)).span, graph(A @ Bm, d, d).span)


def test_compose_non_graph_relations_against_elimination():
    # R1 = span{(e1; 0), (0; e1)} is a product of Lagrangians; R2 = graph of -I
    R1 = LagrangianRelation(HYP, HYP, np.array([[1.0, 0], [0, 0], [0, 1.0], [0, 0]]))
    R2 = graph(-np.eye(2), HYP, HYP)
    out = compose(R2, R1)
    assert check_lagrangian_relation(out)[0]
    assert span_equal(out.span, composite_oracle(R2, R1))
    assert same_subspace(out.span, R1.span)


@given(seed=st.integers(0, 10 ** 6))
def test_compose_is_associative(seed):
    from maninkit.liegroup import catalog_model
    m = catalog_model("double-so3")
    rng = np.random.default_rng(seed)
    d = MetrizedSpace(m.algebra.B)
    r1, r2, r3 = (graph(m.adjoint(m.random_point(rng)), d, d) for _ in range(3))
    left = compose(r3, compose(r2, r1))
    right = compose(compose(r3, r2), r1)
    assert principal_angles(left.span, right.span).max() < 1e-8
    assert span_equal(compose(r2, r1).span, composite_oracle(r2, r1), 1e-8)


def test_non_clean_composition():
    # linear Lagrangian relations always compose cleanly; a rank-deficient input does not
    R1 = LagrangianRelation(HYP, HYP, np.array([[1.0], [0.0], [0.0], [1.0]]))
    R2 = LagrangianRelation(HYP, HYP, np.array([[1.0, 0], [0, 0], [0, 0], [0, 1.0]]))
    with pytest.raises(NonCleanComposition):
        compose(R2, R1)


def test_backward_images(so3, rng):
    d = MetrizedSpace(so3.algebra.B)
    L = Subspace.span(so3.g_coords)
    assert same_subspace(backward_image(identity_relation(d), L), L)
    A = so3.adjoint(so3.random_point(rng))
    back = backward_image(graph(A, d, d), Subspace.span(so3.m_coords))
    assert same_subspace(back, Subspace.span(np.linalg.solve(A, so3.m_coords)))
    iso = np.abs(back.orthonormal.T @ so3.algebra.B @ back.orthonormal).max()
    assert iso < 1e-10 and back.k == 3


def test_dirac_morphism_identity():
    E = Subspace.span(np.array([1.0, 0.0]))
    ok, A = check_dirac_morphism(identity_relation(HYP), E, E)
    assert ok and np.allclose(A, [[1.0]])


def test_dirac_morphism_failures():
    zero = MetrizedSpace(np.zeros((0, 0)))
    # V -> 0 with relation {(0; x): x in span e1}
    rel = LagrangianRelation(HYP, zero, np.array([[1.0], [0.0]]))
    E1 = Subspace.span(np.array([1.0, 0.0]))
    E2 = Subspace(0, np.zeros((0, 0)), np.zeros((0, 0)))
    with pytest.raises(UniquenessFailure):
        check_dirac_morphism(rel, E1, E2)
    with pytest.raises(ExistenceFailure):
        check_dirac_morphism(identity_relation(HYP), E1, Subspace.span(np.array([0.0, 1.0])))


def moment_relation(space, P):
    """Pointwise relation {(zeta; v, iota_v omega + Phi^* <alpha, zeta>) : T Phi v = zeta_Q}."""
    pt = space.target
    fr = space.frame(P)
    n = space.dim
    Om = space.omega_matrix(fr, np.eye(n))
    Jac = space.jacobian(fr)
    q = space.moment_value(P)
    A = pt.action_matrix(q)
    aq = pt.alpha(pt.chart(q).jets(np.zeros(pt.dim), np.eye(pt.dim)))
    C = Jac.T @ aq @ pt.metric
    N = scipy.linalg.null_space(np.hstack([Jac, -A]))
    v, zeta = N[:n], N[n:]
    mu = Om.T @ v + C @ zeta
    source = MetrizedSpace(np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]]))
    target = MetrizedSpace(pt.metric)
    return LagrangianRelation(source, target, np.vstack([zeta, v, mu])), fr


@pytest.mark.parametrize("n", [1, 2, 3])
def test_moment_relation_of_polygon_space_is_dirac(model, n):
    space = build_colored_space(model, polygon_2n(n))
    pt = space.target
    emb = space.action.emb()
    for rng in point_rngs(n, 2):
        P = space.sample(rng)
        rel, fr = moment_relation(space, P)
        assert check_lagrangian_relation(rel)[0]
        d = space.dim
        E1 = Subspace.span(np.vstack([np.eye(d), np.zeros((d, d))]))
        E2 = Subspace.span(pt.g_basis)
        ok, induced = check_dirac_morphism(rel, E1, E2)
        assert ok
        # the induced map sends xi to the generating vector xi_M
        xi = np.linalg.lstsq(emb, pt.g_basis, rcond=None)[0]
        gens = fr.S.T @ space.generator_coords(fr, xi.T).T
        assert np.abs(induced - gens).max() < 1e-8


def test_bivector_vanishes_at_the_base_coset(model):
    dg = ProductTarget([opposite(invariant_splitting_DG(model))])
    pi = target_bivector(dg, (model.identity,), model.m_coords)
    assert np.abs(pi).max() < 1e-12


def test_bivector_of_abelian_double_vanishes(rng):
    B = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2))
    d = MetrizedLieAlgebra(4, np.zeros((4, 4, 4)), B, "abelian")
    pair = ManinPair(d, Subspace.span(np.vstack([np.eye(2), np.zeros((2, 2))])))
    m = Subspace.span(np.vstack([np.zeros((2, 2)), np.eye(2)]))
    a = np.hstack([np.zeros((2, 2)), rng.standard_normal((2, 2)) + 3 * np.eye(2)])  # kills g
    assert np.abs(bivector_from_splitting(pair, m, a)).max() < 1e-14


@pytest.mark.parametrize("kind", ["D", "DG"])
def test_bivector_two_formulas_agree(model, kind, rng):
    if kind == "D":
        pt = ProductTarget([canonical_splitting_D(model)])
        mm = np.kron(np.eye(2), model.m_coords)
    else:
        pt = ProductTarget([opposite(invariant_splitting_DG(model))])
        mm = model.m_coords
    p = pt.random_point(rng)
    pi = target_bivector(pt, p, mm)
    big = MetrizedLieAlgebra(pt.alg_dim, np.zeros((pt.alg_dim,) * 3), pt.metric)
    pair = ManinPair(big, Subspace.span(pt.g_basis), Subspace.span(mm))
    alt = bivector_from_generators(pair, pair.complement, pt.action_matrix(p))
    mu, nu = rng.standard_normal((2, pt.dim))
    assert abs(nu @ pi @ mu - nu @ alt @ mu) < 1e-9
    assert np.abs(pi + pi.T).max() < 1e-10


def test_bivector_needs_transitive_action(so3):
    pair = catalog_pair("double-so3")
    with pytest.raises(ActionNotTransitive):
        bivector_from_splitting(pair, pair.complement, np.zeros((3, 6)))
