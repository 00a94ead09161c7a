import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlsdecay.errors import GridMismatchError, ValidationError
from nlsdecay.grid import (
    CutoffSpec,
    RealField,
    Vec2Field,
    bracket_x,
    cutoff_field,
    cutoff_profile,
    gradient,
    laplacian,
    make_grid,
)


def test_small_grid_nodes():
    g = make_grid(1, 10.0, 11)
    assert g.spacing == 2.0
    np.testing.assert_array_equal(g.axis, np.arange(-10.0, 11.0, 2.0))


def test_desk_grid_spacing():
    g = make_grid(1, 20.0, 1024)
    assert g.spacing == pytest.approx(40 / 1023, rel=1e-15)
    assert g.axis[0] == -20.0 and g.axis[-1] == 20.0


def test_2d_node_count():
    g = make_grid(2, 5.0, 33)
    assert g.size == 33**2 == 1089
    assert g.nodes.shape == (1089, 2)
    assert g.nodes.min() == -5.0 and g.nodes.max() == 5.0


@pytest.mark.parametrize("args", [(3, 1.0, 16), (0, 1.0, 16), (1, math.inf, 16), (1, 0.0, 16), (1, -2.0, 16), (1, 1.0, 7), (1, 1.0, 8.5)])
def test_make_grid_rejects(args):
    with pytest.raises(ValidationError):
        make_grid(*args)


def test_grid_mismatch():
    a, b = make_grid(1, 10.0, 11), make_grid(1, 10.0, 13)
    with pytest.raises(GridMismatchError):
        a.check_same(b)
    a.check_same(make_grid(1, 10.0, 11))


def test_order2_stencil_row():
    g = make_grid(1, 10.0, 21)
    L = laplacian(g, 2).toarray()
    h2 = g.spacing**2
    np.testing.assert_allclose(L[5, 4:7], np.array([1.0, -2.0, 1.0]) / h2, rtol=0, atol=1e-14)
    assert np.count_nonzero(L[5]) == 3


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_symmetric_exactly(order, dim):
    L = laplacian(make_grid(dim, 3.0, 12), order)
    assert (L != L.T).nnz == 0


@given(order=st.sampled_from([2, 4]), dim=st.sampled_from([1, 2]), seed=st.integers(0, 2**32 - 1))
def test_minus_laplacian_positive_semidefinite(order, dim, seed):
    g = make_grid(dim, 4.0, 10)
    L = laplacian(g, order)
    u = np.random.default_rng(seed).standard_normal(L.shape[0])
    assert u @ (-L @ u) >= 0


def _fundamental_error(N, order):
    g = make_grid(1, 20.0, N)
    u = g.to_interior(np.cos(np.pi * g.axis / 40.0))
    lam = (np.pi / 40.0) ** 2
    return np.max(np.abs(-laplacian(g, order) @ u - lam * u))


def test_fundamental_mode_second_order():
    # cos(pi x / 2L) is the Dirichlet fundamental mode on [-L, L]
    errs = [_fundamental_error(N, 2) for N in (128, 256, 512)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert errs[-1] < 1e-6
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_fundamental_eigenvalue_fourth_order():
    errs = []
    for N in (64, 128, 256):
        g = make_grid(1, 20.0, N)
        ev = np.linalg.eigvalsh(-laplacian(g, 4).toarray())[0]
        errs.append(abs(ev - (np.pi / 40.0) ** 2))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 14) & (ratios < 20))


@pytest.mark.parametrize("order", [2, 4])
def test_constant_field_annihilated_away_from_boundary(order):
    g = make_grid(1, 5.0, 40)
    out = laplacian(g, order) @ np.ones(g.n_interior)
    w = order // 2
    np.testing.assert_allclose(out[w:-w], 0.0, atol=1e-10)


def test_2d_laplacian_is_kronecker_sum():
    g = make_grid(2, 3.0, 14)
    x = g.nodes
    f = np.sin(np.pi * (x[:, 0] + 3) / 6) * np.sin(2 * np.pi * (x[:, 1] + 3) / 6)
    u = g.to_interior(f)
    m = g.points - 2
    d1 = laplacian(make_grid(1, 3.0, 14), 2)
    expected = (sp.kron(d1, sp.identity(m)) + sp.kron(sp.identity(m), d1)) @ u
    np.testing.assert_array_equal(laplacian(g, 2) @ u, expected)


def test_bracket_values():
    g1 = make_grid(1, 4.0, 9)
    b = bracket_x(g1).values
    assert b[4] == 1.0
    assert np.all(b >= 1.0) and np.count_nonzero(b == 1.0) == 1
    assert np.all(np.diff(b[4:]) > 0)
    g2 = make_grid(2, 5.0, 11)
    idx = np.flatnonzero((g2.nodes[:, 0] == 3.0) & (g2.nodes[:, 1] == 4.0))[0]
    assert bracket_x(g2).values[idx] == pytest.approx(math.sqrt(26.0), rel=1e-15)


def test_cutoff_plateaus_exact():
    R = 2.0
    assert cutoff_profile(np.array([0.25]))[0] == 1.0
    vals = cutoff_profile(np.array([R / 2, 3 * R, 1.5 * R]) / R)
    assert vals[0] == 1.0
    assert vals[1] == 0.0
    assert 0.0 < vals[2] < 1.0


@given(st.floats(0.0, 10.0))
def test_cutoff_profile_bounded(t):
    v = float(cutoff_profile(np.array([t]))[0])
    assert 0.0 <= v <= 1.0


def test_cutoff_field_support_and_warning():
    g = make_grid(1, 10.0, 201)
    j = cutoff_field(g, CutoffSpec(2.0)).values
    r = np.abs(g.axis)
    assert np.all(j[r <= 2.0] == 1.0)
    assert np.all(j[r >= 4.0] == 0.0)
    with pytest.warns(UserWarning):
        cutoff_field(g, CutoffSpec(6.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cutoff_field(g, CutoffSpec(5.0))


@pytest.mark.parametrize("R", [0.0, -1.0, math.nan])
def test_cutoff_rejects_radius(R):
    with pytest.raises(ValidationError):
        CutoffSpec(R)


def test_gradient_of_linear_field_is_exact():
    g = make_grid(2, 2.0, 9)
    f = 3.0 * g.nodes[:, 0] - 0.5 * g.nodes[:, 1]
    np.testing.assert_allclose(gradient(f, g), np.tile([3.0, -0.5], (g.size, 1)), atol=1e-12)


def test_real_field_validation():
    g = make_grid(1, 1.0, 9)
    with pytest.raises(ValidationError):
        RealField(g, np.zeros(8))
    with pytest.raises(ValidationError):
        RealField(g, np.full(9, np.nan))


@given(arrays(np.complex128, 14, elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)))
def test_vec2field_vector_round_trip(vec):
    g = make_grid(1, 1.0, 9)
    v = Vec2Field.from_vector(g, vec)
    np.testing.assert_array_equal(v.to_vector(), vec)
    assert v.first[0] == 0 and v.second[-1] == 0


def test_vec2field_rejects_bad_length():
    g = make_grid(1, 1.0, 9)
    with pytest.raises(ValidationError):
        Vec2Field.from_vector(g, np.zeros(13))
    with pytest.raises(ValidationError):
        Vec2Field(g, np.zeros(9), np.zeros(8))
