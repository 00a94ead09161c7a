import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from nlsdecay import acceptance as acc
from nlsdecay.errors import ContourError, DegenerateStripError, ValidationError
from nlsdecay.grid import make_grid
from nlsdecay.operators import BlockOperator, assemble_H0, assemble_Lminus
from nlsdecay.spectral import (
    SpectralConfig,
    SpectralPoint,
    SpectralSet,
    axis_confinement,
    cluster_eigenvalues,
    dense_spectrum,
    gap_eigenvalues,
    hausdorff,
    jordan_chain,
    match_spectra,
    numerical_rank,
    riesz_projection,
    symmetry_check,
)


def _synthetic(diag_a, diag_d, jordan=None):
    """Block operator with prescribed upper-left and lower-right blocks and zero coupling."""
    n = len(diag_a)
    g = make_grid(1, 1.0, n + 2)
    a = sp.diags(np.asarray(diag_a, dtype=complex)).tolil()
    if jordan is not None:
        start, length = jordan
        for k in range(start, start + length - 1):
            a[k, k + 1] = 1.0
    zero = sp.csr_matrix((n, n))
    return BlockOperator(g, ((a.tocsr(), zero), (zero, sp.diags(diag_d).tocsr())), "H", 1.0)


def test_numerical_rank_rule():
    assert numerical_rank([3.0, 2.0, 1e-12]) == (2, 2.0 / 1e-12, False)
    rank, ratio, indet = numerical_rank([1.0, 1e-7, 1.5e-8, 5e-9])
    assert rank == 3 and indet
    assert numerical_rank([]) == (0, math.inf, False)
    assert numerical_rank([1e-10, 1e-12])[0] == 0


def test_cluster_eigenvalues_groups_chains():
    vals = np.array([0.0, 1e-7, 2e-7, 0.5, 0.5 + 1e-9, -0.5])
    groups = sorted(sorted(g) for g in cluster_eigenvalues(vals, 1e-6))
    assert groups == [[0, 1, 2], [3, 4], [5]]


def test_free_dense_spectrum_real_outside_gap():
    g = make_grid(1, 20.0, 256)
    S = dense_spectrum(assemble_H0(g, 1.0))
    v = S.values
    assert np.max(np.abs(v.imag)) <= 1e-10
    assert np.min(np.abs(v)) >= 1.0 - 1e-10
    assert S.in_strip(0.95, 3.5).points == []


def test_free_gap_is_empty():
    S = gap_eigenvalues(assemble_H0(make_grid(1, 20.0, 512), 1.0), 0.05, 3.5)
    assert len(S) == 0 and not S.partial


def test_gap_rejects_bad_strip():
    H0 = assemble_H0(make_grid(1, 5.0, 32), 1.0)
    with pytest.raises(ValidationError):
        gap_eigenvalues(H0, 0.0, 1.0)
    with pytest.raises(DegenerateStripError, match="degenerate strip"):
        gap_eigenvalues(H0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        dense_spectrum(H0, SpectralConfig(dense_cap=16))


def test_cubic_dense_zero_cluster():
    S = acc.dense_set(1.0, 512)
    assert len(S) == 1
    p = S.points[0]
    assert p.multiplicity == 4
    assert abs(p.value) < S.cluster_radius
    full = dense_spectrum(acc.operator(1.0, 512))
    others = [q.value for q in full.points if abs(q.value) > full.cluster_radius]
    assert min(abs(np.real(others))) >= 1.0 - 1e-3


def test_cubic_gap_set_matches_dense():
    S = acc.gap_set(1.0, 512)
    assert len(S) == 1 and S.total_multiplicity() == 4
    rep = match_spectra(S, acc.dense_set(1.0, 512))
    assert rep.passed, rep


def test_supercritical_pair():
    S = acc.gap_set(3.0, 512)
    D = acc.dense_set(3.0, 512)
    pair = [p for p in S.points if abs(p.value.imag) > 1.0]
    assert len(pair) == 2
    a, b = sorted(pair, key=lambda p: p.value.imag)
    assert abs(a.value.real) < 1e-6 and abs(b.value.real) < 1e-6
    assert abs(a.value + b.value) < 1e-8
    gamma = b.value.imag
    dense_gamma = max(p.value.imag for p in D.points)
    assert abs(gamma - dense_gamma) < 1e-7
    assert all(p.multiplicity == 1 for p in pair)


def test_gap_is_deterministic():
    H = acc.operator(1.0, 256)
    a = gap_eigenvalues(H, 0.05, 3.5)
    b = gap_eigenvalues(H, 0.05, 3.5)
    np.testing.assert_array_equal(a.values, b.values)


def test_riesz_rank_zero_in_empty_region():
    rp = riesz_projection(acc.operator(1.0, 512), 0.5, 0.2)
    assert rp.rank == 0
    assert rp.norm <= 1e-8


def test_riesz_rank_four_at_zero():
    rp = riesz_projection(acc.operator(1.0, 512), 0.0, 0.3)
    assert rp.rank == 4 and rp.stable
    assert rp.defect <= 1e-6


def test_riesz_simple_imaginary_eigenvalue():
    S = acc.gap_set(3.0, 512)
    top = max(S.points, key=lambda p: p.value.imag)
    rp = riesz_projection(acc.operator(3.0, 512), top.value, 0.3)
    assert rp.rank == 1
    assert rp.defect <= 1e-8


def test_riesz_refuses_contour_through_eigenvalue():
    with pytest.raises(ContourError):
        riesz_projection(acc.operator(1.0, 256), 0.1, 0.1, known_eigenvalues=[0.0])
    with pytest.raises(ValidationError):
        riesz_projection(acc.operator(1.0, 256), 0.1, 0.0)


def test_cubic_jordan_structure():
    J = acc.zero_chain(1.0, 512)
    assert (J.riesz_rank, J.geometric, J.algebraic, J.index) == (4, 2, 4, 2)
    assert J.kernel_dims[:2] == [2, 4]
    assert J.consistent
    assert sorted(len(c) for c in J.chains) == [2, 2]
    assert max(J.chain_residuals) <= 1e-6


def test_positivity_forces_trivial_blocks_away_from_zero():
    H = acc.operator(3.0, 512)
    pots = acc.potentials(3.0, 512)
    assert assemble_Lminus(pots.grid, 1.0, pots).positive
    S = acc.gap_set(3.0, 512)
    assert axis_confinement(S) <= 1e-8
    for p in S.points:
        if abs(p.value) > 0.1:
            J = jordan_chain(H, p.value, radius=0.3)
            assert J.index == 1 and J.geometric == 1
            assert len(J.vectors) == 1


def test_synthetic_jordan_block():
    n = 30
    a = np.linspace(2.0, 5.0, n)
    a[3:6] = 0.1
    H = _synthetic(a, -np.linspace(2.0, 5.0, n), jordan=(3, 3))
    J = jordan_chain(H, 0.1, radius=0.5)
    assert (J.geometric, J.algebraic, J.index) == (1, 3, 3)
    assert J.kernel_dims[:3] == [1, 2, 3]
    # chain convention (H - E) psi_{l-1} = psi_l ends in an eigenvector
    v = [x.to_vector() for x in J.vectors]
    D = H.matrix - 0.1 * sp.identity(2 * n)
    for l in range(1, len(v)):
        assert np.linalg.norm(D @ v[l - 1] - v[l]) <= 1e-8 * np.linalg.norm(v[l - 1])
    assert np.linalg.norm(D @ v[-1]) <= 1e-8


def test_synthetic_simple_eigenvalue():
    n = 30
    a = np.linspace(2.0, 5.0, n)
    a[7] = 0.25
    H = _synthetic(a, -np.linspace(2.0, 5.0, n))
    J = jordan_chain(H, 0.25, radius=0.5, full_space=True)
    assert (J.geometric, J.algebraic, J.index) == (1, 1, 1)
    assert J.full_kernel_dims[0] == 1 and J.consistent


def test_jordan_full_space_cap():
    with pytest.raises(ValidationError):
        jordan_chain(acc.operator(1.0, 256), 0.0, full_space=True, dense_cap=100)


def test_symmetry_examples():
    assert symmetry_check([0.0]).passed
    gamma = 2.9
    assert symmetry_check([1j * gamma, -1j * gamma]).passed
    rep = symmetry_check([1j * gamma])
    assert not rep.passed
    assert rep.negation_distance == pytest.approx(2 * gamma)


def test_computed_sets_are_symmetric():
    for sigma in (1.0, 3.0):
        assert symmetry_check(acc.gap_set(sigma, 512)).passed


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=8))
def test_symmetrized_sets_pass(zs):
    z = np.array(zs)
    full = np.concatenate([z, -z, z.conj(), -z.conj()])
    assert symmetry_check(full, tol=1e-12).passed


@given(
    st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=6),
    st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=6),
)
def test_hausdorff_is_a_metric_on_samples(a, b):
    assert hausdorff(a, a) == 0.0
    assert hausdorff(a, b) == pytest.approx(hausdorff(b, a))
    assert hausdorff(a, b) >= 0


def test_match_spectra_counts():
    p = lambda v, m: SpectralPoint(v, members=tuple([v] * m), algebraic=m)
    a = SpectralSet([p(0.0, 4), p(2j, 1)])
    assert match_spectra(a, SpectralSet([p(2j + 1e-9, 1), p(1e-9, 4)])).passed
    assert not match_spectra(a, SpectralSet([p(2j, 1), p(0.0, 2)])).passed
    assert not match_spectra(a, SpectralSet([p(0.0, 4)])).passed
    assert match_spectra(SpectralSet([]), SpectralSet([])).passed


def test_axis_confinement():
    assert axis_confinement([0.3, 2j, -1.5j]) == 0.0
    assert axis_confinement([0.3 + 0.2j]) == pytest.approx(0.2)
