import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maninkit import liealg
from maninkit.errors import (AdInvarianceViolation, DimensionMismatch, JacobiViolation,
                             MetricDegenerate, NotComplementary, NotLagrangian)
from maninkit.liealg import (Subspace, catalog_algebra, catalog_pair, double_of, dual_pair_basis,
                             is_lagrangian_subalgebra, make_metrized_algebra, same_subspace)

ALGEBRA_KEYS = ["so3", "su2", "sl2r", "sl2c", "double-so3", "double-sl2r"]


def vec(n):
    return st.lists(st.floats(-2, 2, allow_nan=False), min_size=n, max_size=n).map(np.array)


def brute_jacobi(c):
    """Jacobi defect by explicit loops over basis triples."""
    n = c.shape[0]
    e = np.eye(n)

    def br(x, y):
        return sum(x[a] * y[b] * c[a, b] for a in range(n) for b in range(n))

    worst = 0.0
    for i, j, k in itertools.product(range(n), repeat=3):
        x, y, z = e[i], e[j], e[k]
        jac = br(x, br(y, z)) + br(y, br(z, x)) + br(z, br(x, y))
        worst = max(worst, np.abs(jac).max())
    return worst


def test_abelian_plane_is_valid():
    alg = make_metrized_algebra(2, np.zeros((2, 2, 2)), np.eye(2))
    assert np.all(alg.bracket([1, 2], [3, 4]) == 0)


def test_so3_catalog_is_valid():
    alg = catalog_algebra("so3")
    assert np.allclose(alg.bracket([1, 0, 0], [0, 1, 0]), [0, 0, 1])


def test_indefinite_metric_on_so3_is_not_invariant():
    # <[e1,e3],e2> + <e3,[e1,e2]> = <-e2,e2> + <e3,e3> = -1 - 1 with B = diag(1, 1, -1)
    c = liealg.levi_civita()
    B = np.diag([1.0, 1.0, -1.0])
    res, _ = liealg.ad_invariance_residual(c, B)
    assert res == pytest.approx(2.0)
    with pytest.raises(AdInvarianceViolation):
        make_metrized_algebra(3, c, B)


def test_broken_jacobi_is_rejected():
    c = liealg.levi_civita().copy()
    c[0, 1, 1], c[1, 0, 1] = 1.0, -1.0  # [e1, e2] = e3 + e2 breaks Jacobi
    assert brute_jacobi(c) > 0.5
    assert liealg.jacobi_residual(c)[0] == pytest.approx(brute_jacobi(c))
    with pytest.raises(JacobiViolation):
        make_metrized_algebra(3, c, np.eye(3))


def test_degenerate_metric_and_bad_shapes():
    with pytest.raises(MetricDegenerate):
        make_metrized_algebra(3, liealg.levi_civita(), np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        make_metrized_algebra(2, liealg.levi_civita(), np.eye(3))


@pytest.mark.parametrize("key", ALGEBRA_KEYS)
def test_catalog_residuals_match_brute_force(key):
    alg = catalog_algebra(key)
    assert brute_jacobi(alg.c) < 1e-12
    assert liealg.jacobi_residual(alg.c)[0] < 1e-12
    assert liealg.ad_invariance_residual(alg.c, alg.B)[0] < 1e-12


@pytest.mark.parametrize("key", ALGEBRA_KEYS)
@given(x=vec(6), y=vec(6), z=vec(6))
def test_bracket_properties(key, x, y, z):
    alg = catalog_algebra(key)
    n = alg.dim
    x, y, z = x[:n], y[:n], z[:n]
    assert np.allclose(alg.bracket(x, y), -alg.bracket(y, x), atol=1e-12)
    jac = (alg.bracket(x, alg.bracket(y, z)) + alg.bracket(y, alg.bracket(z, x))
           + alg.bracket(z, alg.bracket(x, y)))
    assert np.abs(jac).max() < 1e-10
    assert abs(alg.pair(alg.bracket(x, y), z) + alg.pair(y, alg.bracket(x, z))) < 1e-10
    assert np.allclose(alg.ad(x) @ y, alg.bracket(x, y), atol=1e-12)


def test_diagonal_and_antidiagonal_in_double():
    pair = double_of(catalog_algebra("so3"))
    ok, diag = is_lagrangian_subalgebra(pair.d, pair.g)
    assert ok and diag["isotropy"] < 1e-14 and diag["closure"] < 1e-14
    ok, anti = is_lagrangian_subalgebra(pair.d, pair.complement)
    # isotropic and half-dimensional, but [(x,-x),(y,-y)] = ([x,y],[x,y]) leaves it
    assert anti["isotropy"] < 1e-14 and anti["half_dimensional"]
    assert not ok and anti["closure"] > 0.1


def test_su2_is_lagrangian_in_sl2c():
    pair = catalog_pair("sl2c-su2")
    ok, _ = is_lagrangian_subalgebra(pair.d, pair.g)
    assert ok
    ok, diag = is_lagrangian_subalgebra(pair.d, pair.complement)
    assert diag["isotropy"] < 1e-14 and not ok


def test_dual_basis_of_double():
    pair = double_of(catalog_algebra("so3"))
    e, f = dual_pair_basis(pair, pair.complement)
    eye = np.eye(3)
    assert np.allclose(f, 0.5 * np.vstack([-eye, eye]))
    assert np.allclose(e.T @ pair.d.B @ f, np.eye(3))


def test_dual_basis_of_hyperbolic_plane():
    d = make_metrized_algebra(2, np.zeros((2, 2, 2)), np.array([[0.0, 1.0], [1.0, 0.0]]))
    pair = liealg.ManinPair(d, Subspace.span([1.0, 0.0]))
    e, f = dual_pair_basis(pair, Subspace.span([0.0, 1.0]))
    assert np.allclose(e, [[1], [0]]) and np.allclose(f, [[0], [1]])


def test_dual_basis_rejects_bad_complements():
    pair = double_of(catalog_algebra("so3"))
    with pytest.raises(NotComplementary):
        dual_pair_basis(pair, pair.g)
    eye = np.eye(3)
    skew = Subspace.span(np.vstack([eye, 2 * eye]))  # complementary, not isotropic
    with pytest.raises(NotLagrangian):
        dual_pair_basis(pair, skew)


@given(seed=st.integers(0, 10 ** 6))
def test_dual_basis_for_random_lagrangian_complements(seed):
    # graphs {(x + A x, -x + A x)} with A skew are Lagrangian complements of the diagonal
    pair = double_of(catalog_algebra("so3"))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3))
    A = 0.3 * (a - a.T)
    eye = np.eye(3)
    m = Subspace.span(np.vstack([eye + A, -eye + A]))
    e, f = dual_pair_basis(pair, m)
    assert np.allclose(e.T @ pair.d.B @ f, eye, atol=1e-10)
    assert np.abs(f.T @ pair.d.B @ f).max() < 1e-10


def test_double_of_abelian_line():
    line = make_metrized_algebra(1, np.zeros((1, 1, 1)), np.eye(1))
    pair = double_of(line)
    assert np.allclose(pair.d.B, np.diag([-1.0, 1.0]))


@pytest.mark.parametrize("key", ["so3", "sl2r", "sl2c"])
def test_double_has_split_signature(key):
    alg = catalog_algebra(key)
    ev = np.linalg.eigvalsh(double_of(alg).d.B)
    assert np.sum(ev > 0) == np.sum(ev < 0) == alg.dim


def test_json_round_trip():
    alg = catalog_algebra("sl2r")
    back = liealg.MetrizedLieAlgebra.from_json(alg.to_json())
    assert np.array_equal(back.c, alg.c) and np.array_equal(back.B, alg.B)


def test_subspace_equality_is_basis_independent():
    a = Subspace.span(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    b = Subspace.span(np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]]))
    c = Subspace.span(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))
    assert same_subspace(a, b) and not same_subspace(a, c)
    with pytest.raises(DimensionMismatch):
        Subspace.span(np.array([[1.0, 2.0], [1.0, 2.0]]))
