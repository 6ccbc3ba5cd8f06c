"""Catalog potentials: analytic derivatives, flags, lookup and parsing."""
import numpy as np
import pytest

from evanflow.fields import (
    CatalogError,
    NonnegativityError,
    catalog_ids,
    fd_gradient,
    field_from_f,
    induced_potential,
    make_counterexample,
    make_example_one,
    make_quadratic,
    parse_matrix_literal,
    resolve_potential,
)


def sample_points(dim, m=25, seed=0, scale=2.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(m, dim))


ALL_PAIRS = {
    "quadratic_1d": make_quadratic([[1.0]]),
    "quadratic_diag": make_quadratic([[1.0, 0.0], [0.0, 2.0]]),
    "quadratic_offdiag": make_quadratic([[2.0, 0.5], [0.5, 1.0]]),
    "example_one": make_example_one(),
    "neg_square": make_counterexample("neg_square"),
    "cubic": make_counterexample("cubic"),
    "quartic_saddle": make_counterexample("quartic_saddle"),
    "linear": make_counterexample("linear"),
}


@pytest.mark.parametrize("name", sorted(ALL_PAIRS))
def test_analytic_gradients_match_finite_differences(name):
    pp = ALL_PAIRS[name]
    for field in (pp.psi, pp.v):
        for x in sample_points(pp.dim, m=12, seed=hash(name) % 1000):
            g = np.asarray(field.gradient(x), float)
            g_fd = fd_gradient(field, x)
            scale = 1.0 + np.linalg.norm(g_fd)
            assert np.allclose(g, g_fd, atol=5e-6 * scale), (name, field.name, x)


@pytest.mark.parametrize("name", sorted(ALL_PAIRS))
def test_v_equals_half_squared_gradient_modulus(name):
    pp = ALL_PAIRS[name]
    pts = sample_points(pp.dim, seed=3)
    g = np.asarray(pp.psi.gradient(pts), float)
    expected = 0.5 * np.sum(g * g, axis=-1)
    assert np.allclose(np.asarray(pp.v.value(pts), float), expected, atol=1e-10)


def test_quadratic_values_and_gradient():
    pp = make_quadratic([[1.0, 0.0], [0.0, 2.0]])
    x = np.array([1.0, 1.0])
    assert pp.psi.value(x) == pytest.approx(1.5)
    assert np.allclose(pp.psi.gradient(x), [1.0, 2.0])
    assert pp.v.value(x) == pytest.approx(0.5 * (1.0 + 4.0))
    assert np.allclose(pp.v.gradient(x), [1.0, 4.0])
    assert pp.psi.claims_convex and pp.psi.claims_bounded_below


def test_quadratic_matrix_is_symmetrized():
    pp = make_quadratic([[1.0, 1.0], [0.0, 1.0]])
    x = np.array([1.0, 2.0])
    # psi(x) = 0.5 <x, Ax> with A = [[1, .5], [.5, 1]]
    assert pp.psi.value(x) == pytest.approx(0.5 * (1 + 4) + 0.5 * 2)


def test_quadratic_negative_definite_flags():
    pp = make_quadratic([[-1.0]])
    assert not pp.psi.claims_convex
    assert not pp.psi.claims_bounded_below
    # V = 0.5 x^2 is still convex and nonnegative
    assert pp.v.value(np.array([2.0])) == pytest.approx(2.0)


def test_example_one_branches():
    pp = make_example_one()
    # left branch: -ln(1 - x)
    assert pp.psi.value(np.array([-3.0])) == pytest.approx(-np.log(4.0))
    assert pp.psi.gradient(np.array([-3.0]))[0] == pytest.approx(0.25)
    # right branch: x^2/2 + x
    assert pp.psi.value(np.array([2.0])) == pytest.approx(4.0)
    assert pp.psi.gradient(np.array([2.0]))[0] == pytest.approx(3.0)
    # C^1 junction
    assert pp.psi.value(np.array([0.0])) == pytest.approx(0.0)
    assert pp.psi.gradient(np.array([0.0]))[0] == pytest.approx(1.0)
    assert pp.psi.claims_convex
    assert not pp.psi.claims_bounded_below


def test_example_one_no_nan_far_left():
    pp = make_example_one()
    vals = pp.psi.value(np.array([[-1e5], [-1.0], [5.0]]))
    assert np.all(np.isfinite(vals))


def test_counterexample_neg_square():
    pp = make_counterexample("neg_square")
    x = np.array([1.5])
    assert pp.psi.value(x) == pytest.approx(-2.25)
    assert pp.v.value(x) == pytest.approx(2.0 * 2.25)
    assert not pp.psi.claims_convex


def test_counterexample_cubic_v_convex_psi_not():
    pp = make_counterexample("cubic")
    x = np.array([-1.0])
    assert pp.psi.value(x) == pytest.approx(-1.0)
    assert pp.v.value(x) == pytest.approx(4.5)
    assert pp.v.claims_convex
    assert not pp.psi.claims_convex


def test_counterexample_quartic_saddle():
    pp = make_counterexample("quartic_saddle")
    x = np.array([1.0, 2.0])
    assert pp.psi.value(x) == pytest.approx(1.0 - 4.0)
    assert pp.v.value(x) == pytest.approx(0.5 * (16.0 + 16.0))


def test_unknown_counterexample_rejected():
    with pytest.raises(CatalogError):
        make_counterexample("does_not_exist")


def test_induced_potential_matches_analytic():
    pp = make_quadratic([[2.0, 0.5], [0.5, 1.0]])
    v2 = induced_potential(pp.psi)
    pts = sample_points(2, seed=9)
    assert np.allclose(v2.value(pts), pp.v.value(pts), atol=1e-12)
    assert np.allclose(v2.gradient(pts), pp.v.gradient(pts), atol=1e-12)


def test_field_from_f_builds_half_f():
    pp = make_quadratic([[1.0, 0.0], [0.0, 2.0]])
    f = induced_potential(pp.psi).scaled(2.0)
    V = field_from_f(f)
    pts = sample_points(2, seed=4)
    assert np.allclose(V.value(pts), pp.v.value(pts), atol=1e-12)


def test_field_from_f_rejects_negative():
    pp = make_counterexample("neg_square")
    # psi itself goes negative, so it is not a valid squared modulus
    with pytest.raises(NonnegativityError):
        field_from_f(pp.psi)


def test_parse_matrix_literal():
    A = parse_matrix_literal("1,0;0,2")
    assert A.shape == (2, 2)
    assert A[1, 1] == 2.0
    with pytest.raises(CatalogError):
        parse_matrix_literal("1,0;0")
    with pytest.raises(CatalogError):
        parse_matrix_literal("1,zzz")


def test_resolve_potential_quadratic_and_shift():
    pp = resolve_potential("quadratic:1,0;0,2")
    assert pp.dim == 2
    shifted = resolve_potential("quadratic:1,0;0,2+5")
    x = np.array([1.0, 1.0])
    assert shifted.psi.value(x) == pytest.approx(pp.psi.value(x) + 5.0)
    # V is unchanged by the shift
    assert shifted.v.value(x) == pytest.approx(pp.v.value(x))


def test_resolve_potential_named_entries():
    for name in ("example_one", "neg_square", "cubic", "quartic_saddle",
                 "linear", "neg_linear"):
        pp = resolve_potential(name)
        assert pp.psi.value(np.zeros(pp.dim)) is not None


def test_resolve_potential_unknown():
    with pytest.raises(CatalogError):
        resolve_potential("nope")


def test_catalog_ids_listed():
    ids = catalog_ids()
    assert "example_one" in ids and "neg_square" in ids


def test_shifted_and_scaled_helpers():
    pp = make_quadratic([[1.0]])
    s = pp.psi.shifted(3.0)
    x = np.array([2.0])
    assert s.value(x) == pytest.approx(pp.psi.value(x) + 3.0)
    assert np.allclose(s.gradient(x), pp.psi.gradient(x))
    d = pp.psi.scaled(2.0)
    assert d.value(x) == pytest.approx(2.0 * pp.psi.value(x))
