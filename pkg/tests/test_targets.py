import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import with_omega
from maninkit import targets as T
from maninkit.errors import ComplementNotInvariant, NotConnection, NotInvariant
from maninkit.geomcalc import point_rngs, unit_vectors
from maninkit.hamspace import verify_quasi_symplectic
from maninkit.liealg import Subspace
from maninkit.liegroup import catalog_model


def splittings(model):
    return [T.canonical_splitting_D(model), T.invariant_splitting_DG(model)]


def twisted(model, seed=2):
    rng = np.random.default_rng(seed)
    c1, c2 = rng.standard_normal((2, model.dim))
    return T.twisted_splitting(T.canonical_splitting_D(model), T.exact_twist_D(model, c1, c2))


def test_section_and_isotropy(model):
    for split in splittings(model) + [twisted(model)]:
        pt = T.as_product(split)
        for rng in point_rngs(0, 5):
            sec, iso = T.splitting_residuals(pt, pt.random_point(rng), rng)
            assert sec < 1e-7 and iso < 1e-12


def test_canonical_eta_is_the_cartan_form(model, rng):
    split = T.canonical_splitting_D(model)
    pt = T.as_product(split)
    p = pt.random_point(rng)
    U = unit_vectors(rng, model.dim, 3).T
    J = pt.chart(p).jets(np.zeros(model.dim), U)
    vs = J[0].d
    assert pt.eta(J) == pytest.approx(model.cartan_3form(p[0], *vs), abs=1e-12)


def test_eta_recovered_from_alpha(model, rng):
    for split in splittings(model):
        pt = T.as_product(split)
        p = pt.random_point(rng)
        U = unit_vectors(rng, pt.dim, 3).T
        direct = pt.eta(pt.chart(p).jets(np.zeros(pt.dim), U))
        assert T.eta_from_alpha(pt, p, U) == pytest.approx(direct, abs=1e-7)


def test_targets_are_transitive_with_lagrangian_stabilizers(model, rng):
    for split in splittings(model):
        pt = T.as_product(split)
        rep = T.target_action_matrix_check(pt, pt.random_point(rng))
        assert rep["rank"] == rep["dim"] == pt.alg_dim - rep["stabilizer_dim"]
        assert 2 * rep["stabilizer_dim"] == pt.alg_dim and rep["isotropy"] < 1e-10


def test_non_invariant_complement_is_rejected():
    m = catalog_model("double-sl2r")
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3))
    A = 0.5 * (a - a.T)  # graph of a skew map: Lagrangian, complementary, not Ad-invariant
    eye = np.eye(3)
    comp = Subspace.span(np.vstack([eye + A, -eye + A]))
    assert T.check_complement_invariant(m, comp) > 1e-3
    with pytest.raises(ComplementNotInvariant):
        T.invariant_splitting_DG(m, comp)
    T.invariant_splitting_DG(m)  # the antidiagonal is fine


def test_chi_tensor(model, rng):
    for split in splittings(model):
        pt = T.as_product(split)
        p = pt.random_point(rng)
        X = T.chi_matrix(pt, p)
        # symmetrization gives the metric
        assert np.abs(X + X.T - pt.metric).max() < 1e-8
        # stabilizer directions have vanishing rows
        from maninkit.liealg import null_space
        stab = null_space(pt.action_matrix(p))
        assert np.abs(stab.T @ X).max() < 1e-8
        xi = pt.g_basis @ rng.standard_normal(pt.g_basis.shape[1])
        assert abs(T.chi_tensor(pt, p, xi, xi)) < 1e-8


def test_beta_vanishes_for_invariant_splittings(model, rng):
    for split in splittings(model):
        pt = T.as_product(split)
        b = T.beta_matrix(pt, pt.random_slot_elems(rng), pt.random_point(rng))
        assert np.abs(b).max() < 1e-7


def test_twisted_beta_cocycle_laws(model, rng):
    pt = T.as_product(twisted(model))
    p = pt.random_point(rng)
    g, h = pt.random_slot_elems(rng), pt.random_slot_elems(rng)
    assert np.abs(T.beta_matrix(pt, g, p)).max() > 1e-3  # genuinely non-invariant
    b = T.beta_matrix(pt, g, p)
    assert np.abs(b + b.T).max() < 1e-10
    assert T.cocycle_residual(pt, g, h, p, rng) < 1e-6
    assert T.dbeta_residual(pt, g, p, rng) < 1e-5


def test_infinitesimal_cocycle(model, rng):
    for split, bound in ((T.canonical_splitting_D(model), 1e-6), (twisted(model), 1e-4)):
        pt = T.as_product(split)
        p = pt.random_point(rng)
        u, v = unit_vectors(rng, pt.dim, 2)
        zero = T.infinitesimal_cocycle_check(pt, np.zeros(pt.alg_dim), p, u, v)
        assert zero < 1e-9
        xi = pt.g_basis @ rng.standard_normal(pt.g_basis.shape[1])
        assert T.infinitesimal_cocycle_check(pt, xi, p, u, v) < bound


@pytest.mark.parametrize("kind", ["D", "DG", "twisted"])
def test_groupoid_axioms(model, kind):
    split = {"D": T.canonical_splitting_D, "DG": T.invariant_splitting_DG, "twisted": twisted}[kind](model)
    space = T.groupoid_two_form(split)
    rep = verify_quasi_symplectic(space, num_points=4, seed=3)
    assert rep.passed
    for rng in point_rngs(3, 3):
        assert T.groupoid_delta_residual(split, rng) < 1e-6


def test_groupoid_matches_explicit_formula(model):
    space = T.groupoid_two_form(T.canonical_splitting_D(model))
    ex = T.explicit_groupoid_omega_D(model)
    for rng in point_rngs(4, 5):
        P = space.sample(rng)
        J = space.chart(P).jets(np.zeros(space.ambient_dim), unit_vectors(rng, space.ambient_dim, 2).T)
        h1, h2, q = J
        alt = ex((h1.inv(), h2.inv(), h1 @ q @ h2.inv()))
        assert abs(space.omega(J)[0, 1] - alt[0, 1]) < 1e-8


def test_corrupted_groupoid_fails(so3):
    space = T.groupoid_two_form(T.canonical_splitting_D(so3))
    bad = with_omega(space, lambda P: 1.5 * space.omega(P))
    rep = verify_quasi_symplectic(bad, num_points=3, strict=False)
    assert not rep.by_name()["closed"].passed and not rep.by_name()["moment"].passed


def test_descend_canonical_splitting(model, rng):
    split = T.canonical_splitting_D(model)
    n = model.dim
    k = np.zeros((2 * n, model.g_coords.shape[1]))
    k[n:] = model.g_coords
    down, rep = T.descend_splitting(split, T.connection_D_right(model), k)
    assert max(rep.values()) < 1e-7
    ref = T.opposite(T.invariant_splitting_DG(model))
    pa, pb = T.ProductTarget([down]), T.ProductTarget([ref])
    p = (model.random_point(rng),)
    U = unit_vectors(rng, pa.dim, 3).T
    ja, jb = pa.chart(p).jets(np.zeros(pa.dim), U), pb.chart(p).jets(np.zeros(pb.dim), U)
    assert np.abs(pa.alpha(ja) - pb.alpha(jb)).max() < 1e-7
    assert pa.eta(ja) == pytest.approx(pb.eta(jb), abs=1e-6)


def test_descend_rejects_bad_inputs(so3):
    n = so3.dim
    k = np.zeros((2 * n, 3))
    k[n:] = so3.g_coords
    conn = T.connection_D_right(so3)
    with pytest.raises(NotConnection):
        T.descend_splitting(T.canonical_splitting_D(so3), lambda j: 2.0 * conn(j), k)
    with pytest.raises(NotInvariant):
        T.descend_splitting(twisted(so3), conn, k)


def test_quotient_bivector(model):
    for rng in point_rngs(5, 3):
        assert T.quotient_bivector_residual(model, rng) < 1e-7


@given(seed=st.integers(0, 10 ** 6))
def test_action_is_equivariant_under_products(seed):
    m = catalog_model("sl2c-su2")
    pt = T.as_product(T.canonical_splitting_D(m))
    rng = np.random.default_rng(seed)
    p = pt.random_point(rng)
    a, b = pt.random_slot_elems(rng), pt.random_slot_elems(rng)
    lhs = pt.act([x @ y for x, y in zip(a, b)], p)
    rhs = pt.act(a, pt.act(b, p))
    assert pt.distance(lhs, rhs) < 1e-10
