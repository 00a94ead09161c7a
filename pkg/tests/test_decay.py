import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsdecay import acceptance as acc
from nlsdecay.decay import (
    DecayParameters,
    chain_decay_check,
    commutator,
    commutator_formula,
    conjugation_identity_residual,
    exterior_cutoff,
    exterior_quotient,
    fit_decay_rate,
    lemma3_check,
    select_radius,
    tail_profile,
    weight_field,
    weighted_l2,
)
from nlsdecay.errors import ValidationError
from nlsdecay.grid import CutoffSpec, RealField, Vec2Field, make_grid
from nlsdecay.operators import assemble_HhatE

EPS_SWEEP = (1.0, 0.3, 0.1, 0.03)


@pytest.fixture(scope="module")
def cubic_hat():
    pots = acc.potentials(1.0, 1024)
    return assemble_HhatE(pots.grid, 1.0, 0.0, pots)


@pytest.fixture(scope="module")
def free_hat():
    return assemble_HhatE(make_grid(1, 20.0, 1024), 1.0, 0.0, None)


@pytest.fixture(scope="module")
def zero_chain():
    return acc.zero_chain(1.0, 1024)


def test_parameters_validation():
    p = DecayParameters(1.0, 0.2, 0.1)
    assert p.mu_E == pytest.approx(0.8)
    assert p.beta == pytest.approx(math.sqrt(0.6))
    for bad in ((1.0, 1.0, 0.1), (1.0, 0.0, 0.5), (1.0, 0.0, 0.0), (1.0, 0.0, 0.1, -1.0)):
        with pytest.raises(ValidationError):
            DecayParameters(*bad)


def test_weight_at_origin_and_large_eps():
    g = make_grid(1, 20.0, 1025)
    p = DecayParameters(1.0, 0.0, 0.1)
    assert weight_field(g, p).values[512] == pytest.approx(p.beta, rel=1e-15)
    big = weight_field(g, p.with_eps(1e12)).values
    assert np.max(big) < 1e-11


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_weight_monotone_in_eps(e1, e2):
    g = make_grid(1, 20.0, 257)
    lo, hi = sorted((e1, e2))
    p = DecayParameters(1.0, 0.0, 0.1)
    assert np.all(weight_field(g, p.with_eps(hi)).values <= weight_field(g, p.with_eps(lo)).values)


@pytest.mark.parametrize("dim,N", [(1, 1024), (2, 65)])
@pytest.mark.parametrize("eps", [0.0, 0.03, 0.3, 1.0])
def test_weight_gradient_bound(dim, N, eps):
    g = make_grid(dim, 20.0, N)
    p = DecayParameters(1.0, 0.0, 0.1, eps)
    assert weight_field(g, p).max_gradient() <= p.beta * (1 + 10 * g.spacing**2)


def test_plain_l2_norm():
    g = make_grid(1, 5.0, 101)
    phi = Vec2Field(g, np.sin(g.axis) + 0j, 1j * np.cos(g.axis))
    expected = math.sqrt(g.spacing * np.sum(np.sin(g.axis) ** 2 + np.cos(g.axis) ** 2))
    assert weighted_l2(phi) == pytest.approx(expected, rel=1e-14)
    assert weighted_l2(phi, j=np.ones(g.size)) == pytest.approx(expected, rel=1e-14)


def _sech_norm(L, mu):
    g = make_grid(1, L, int(40 * L) + 1)
    phi = Vec2Field(g, 1 / np.cosh(g.axis) + 0j, np.zeros(g.size))
    return weighted_l2(phi, weight_field(g, DecayParameters(mu, 0.0, 0.1)))


def test_weighted_norm_converges_below_rate():
    # beta = sqrt(0.8) < 1: integrand decays like exp(2 (beta - 1) |x|)
    vals = [_sech_norm(L, 1.0) for L in (10, 20, 40, 80)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] < diffs[:-1])
    assert diffs[-1] < 1e-3 * vals[-1]


def test_weighted_norm_diverges_above_rate():
    # mu = 4 gives beta = sqrt(3.8) > 1
    vals = [_sech_norm(L, 4.0) for L in (10, 20, 40)]
    assert vals[1] > 100 * vals[0] and vals[2] > 100 * vals[1]


def test_free_exterior_quotient(free_hat):
    for R in (2.0, 6.0, 12.0):
        assert exterior_quotient(free_hat, R) >= 1.0
    Hh = assemble_HhatE(make_grid(1, 20.0, 512), 1.0, 0.3 + 1.5j, None)
    assert exterior_quotient(Hh, 5.0) >= 0.7


def test_free_re_part_lower_bound(rng):
    Hh = assemble_HhatE(make_grid(1, 20.0, 512), 1.0, -0.4 + 2j, None)
    A = Hh.re_part()
    for _ in range(20):
        v = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        assert np.real(np.vdot(v, A @ v)) >= 0.6 * np.vdot(v, v).real


def test_cubic_exterior_quotient(cubic_hat, free_hat):
    pots = acc.potentials(1.0, 1024)
    radii = (2.0, 5.0, 8.0, 12.0, 15.0)
    q = [exterior_quotient(cubic_hat, R) for R in radii]
    assert all(b >= a - 1e-12 for a, b in zip(q, q[1:]))
    for R, v in zip(radii, q):
        assert v >= 1.0 - pots.sup_beyond(R) - 1e-8
    # past the tail the potential is below 1e-8 and the free value is recovered
    assert pots.sup_beyond(12.0) < 1e-8
    assert abs(q[3] - exterior_quotient(free_hat, 12.0)) < 1e-6


def test_exterior_region_checks(cubic_hat):
    with pytest.raises(ValidationError):
        exterior_quotient(cubic_hat, 18.5)
    g = make_grid(1, 20.0, 64)
    Hh = assemble_HhatE(g, 1.0, 0.0, None)
    with pytest.raises(ValidationError, match="too thin"):
        exterior_quotient(Hh, 17.0)


def test_select_radius(cubic_hat):
    p = DecayParameters(1.0, 0.0, 0.1)
    R, q = select_radius(cubic_hat, p)
    assert R is not None and q >= p.mu_E - p.delta
    g = cubic_hat.grid
    smaller = g.axis[(g.axis > 0) & (g.axis < R)]
    if smaller.size:
        assert exterior_quotient(cubic_hat, float(smaller[-1])) < p.mu_E - p.delta


def test_commutator_matches_formula():
    errs = []
    for N in (256, 512, 1024):
        g = make_grid(1, 20.0, N)
        chi = exterior_cutoff(g, CutoffSpec(3.0))
        exact = commutator(assemble_HhatE(g, 1.0, 0.0, None), chi)
        x = g.axis[1:-1]
        u = np.r_[np.exp(-(x**2) / 8) * np.cos(x), np.exp(-(x**2) / 8)]
        # entries differ at O(1) (both are 1/h-scaled stencils); the action on smooth fields agrees to O(h^2)
        errs.append(np.max(np.abs((exact - commutator_formula(g, chi)) @ u)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios > 3.5)


def test_identity_zero_weight_exact(cubic_hat, rng):
    g = cubic_hat.grid
    v = rng.standard_normal(2 * cubic_hat.n) + 1j * rng.standard_normal(2 * cubic_hat.n)
    assert conjugation_identity_residual(cubic_hat, np.zeros(g.size), Vec2Field.from_vector(g, v)) == 0.0


def test_identity_linear_weight_second_order():
    res = []
    for N in (256, 512, 1024, 2048):
        pots = acc.potentials(1.0, N)
        g = pots.grid
        Hh = assemble_HhatE(g, 1.0, 0.2j, pots)
        x = g.axis
        psi = Vec2Field(g, np.exp(-(x**2) / 4) + 0j, 0.5 * np.exp(-((x - 1) ** 2) / 3) * (1 + 0.5j))
        res.append(conjugation_identity_residual(Hh, RealField(g, 0.3 * x), psi))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.1)


def test_identity_random_pairs(rng):
    pots = acc.potentials(1.0, 1024)
    Hh = assemble_HhatE(pots.grid, 1.0, 0.0, pots)
    for _ in range(3):
        w, psi = acc.random_identity_pair(pots.grid, rng)
        assert conjugation_identity_residual(Hh, w, psi) <= 1e-4


def _eigenvectors(chain):
    return [c[-1] for c in chain.chains]


def test_single_estimate_on_kernel_modes(cubic_hat, zero_chain):
    params = DecayParameters(1.0, 0.0, 0.1)
    for phi in _eigenvectors(zero_chain):
        rep = lemma3_check(cubic_hat, phi, params, eps_list=EPS_SWEEP)
        assert rep.applicable and rep.status == "pass"
        assert rep.quotient >= params.mu_E - params.delta
        by_eps = {r.eps: r for r in rep.rows}
        assert by_eps[0.1].holds
        assert rep.monotone
        lhs = [by_eps[e].lhs for e in EPS_SWEEP]
        assert all(b >= a for a, b in zip(lhs, lhs[1:]))


def test_single_estimate_inapplicable(cubic_hat, zero_chain):
    g = cubic_hat.grid
    params = DecayParameters(1.0, 0.0, 0.1)
    junk = Vec2Field(g, np.exp(-(g.axis**2)) + 0j, np.zeros(g.size))
    rep = lemma3_check(cubic_hat, junk, params)
    assert not rep.applicable and rep.status == "skipped" and "not a zero mode" in rep.reason
    rep = lemma3_check(cubic_hat, _eigenvectors(zero_chain)[0], params, cutoff=CutoffSpec(0.01))
    assert rep.status == "skipped" and "R too small" in rep.reason


def test_chain_estimate(cubic_hat, zero_chain):
    params = DecayParameters(1.0, 0.0, 0.1)
    long = [c for c in zero_chain.chains if len(c) == 2]
    assert long
    for chain in long:
        rep = chain_decay_check(chain, cubic_hat, params, eps_list=(0.3, 0.1, 0.03), tol=1e-6)
        assert rep.status == "pass", rep.reason


def test_chain_of_length_one_is_single_estimate(cubic_hat, zero_chain):
    params = DecayParameters(1.0, 0.0, 0.2)
    phi = _eigenvectors(zero_chain)[0]
    a = lemma3_check(cubic_hat, phi, params, eps_list=EPS_SWEEP)
    b = chain_decay_check([phi], cubic_hat, params, eps_list=EPS_SWEEP)
    assert [(r.lhs, r.rhs) for r in a.rows] == [(r.lhs, r.rhs) for r in b.rows]


def test_chain_scaling_invariance(cubic_hat, zero_chain):
    params = DecayParameters(1.0, 0.0, 0.1)
    chain = [c for c in zero_chain.chains if len(c) == 2][0]
    c = 3.5 - 2j
    scaled = [Vec2Field(v.grid, c * v.first, c * v.second) for v in chain]
    a = chain_decay_check(chain, cubic_hat, params, eps_list=EPS_SWEEP, tol=1e-6)
    b = chain_decay_check(scaled, cubic_hat, params, eps_list=EPS_SWEEP, tol=1e-6)
    for ra, rb in zip(a.rows, b.rows):
        assert rb.lhs == pytest.approx(abs(c) * ra.lhs, rel=1e-10)
        assert rb.rhs == pytest.approx(abs(c) * ra.rhs, rel=1e-10)
        assert rb.ratio == pytest.approx(ra.ratio, rel=1e-10)


def test_fit_sech():
    g = make_grid(1, 20.0, 1024)
    s = 1 / np.cosh(g.axis) + 0j
    rep = fit_decay_rate(Vec2Field(g, s, s), mu=1.0)
    assert rep.rate == pytest.approx(1.0, abs=0.01)
    assert rep.passed and len(rep.bounds) == 3


@settings(max_examples=20)
@given(st.floats(0.3, 2.0))
def test_fit_recovers_rate_with_smooth_prefactor(a):
    g = make_grid(1, 20.0, 1024)
    x = g.axis
    f = (2 + np.tanh(x)) * np.exp(-a * np.abs(x)) + 0j
    rep = fit_decay_rate(Vec2Field(g, f, 0.5 * f), mu=1.0)
    assert rep.rate == pytest.approx(a, rel=0.01)


def test_fit_handles_polynomial_prefactor():
    g = make_grid(1, 20.0, 1024)
    x = np.abs(g.axis)
    f = x * np.exp(-x) + 0j
    rep = fit_decay_rate(Vec2Field(g, f, f), mu=1.0)
    assert rep.power == 1.0
    assert rep.rate == pytest.approx(1.0, abs=1e-6)


def test_fit_kernel_modes(zero_chain):
    for v in zero_chain.all_vectors:
        rep = fit_decay_rate(v, mu=1.0, deltas=(0.05, 0.1, 0.2))
        assert rep.passed
        assert rep.rate == pytest.approx(1.0, rel=0.02)


def test_fit_rejections():
    g = make_grid(1, 20.0, 1024)
    s = 1 / np.cosh(g.axis) + 0j
    phi = Vec2Field(g, s, s)
    with pytest.raises(ValidationError):
        fit_decay_rate(phi, (5.0, 19.0), mu=1.0)
    with pytest.raises(ValidationError):
        fit_decay_rate(phi, (10.0, 10.2), mu=1.0)
    with pytest.raises(ValidationError):
        fit_decay_rate(phi, mu=1.0, rate_tol=-1.0)
    with pytest.raises(ValidationError):
        fit_decay_rate(phi, mu=1.0, deltas=(0.6,))
    tiny = Vec2Field(g, np.exp(-40 * np.abs(g.axis)) + 0j, np.zeros(g.size))
    with pytest.raises(ValidationError, match="underflow"):
        fit_decay_rate(tiny, mu=1.0)


def test_tail_profile_sorted():
    g = make_grid(1, 5.0, 51)
    s = np.exp(-np.abs(g.axis)) + 0j
    t = tail_profile(Vec2Field(g, s, np.zeros(g.size)))
    assert np.all(np.diff(t[:, 0]) >= 0)
    np.testing.assert_allclose(t[:, 1], -t[:, 0], atol=1e-12)
