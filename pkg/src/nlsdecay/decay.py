"""Exponential weights, exterior lower bounds and decay estimates for gap eigenfunctions.

Weights are f_eps(x) = beta <x> / (1 + eps <x>) with beta = sqrt(mu_E - 2 delta)
and mu_E = mu - |Re E|.  The lemma checks compare both sides of the weighted
estimates on the grid; the commutator with the cut-off is an exact sparse
product, with the first-order differential formula kept as a cross-check.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .grid import CutoffSpec, Grid, RealField, Vec2Field, bracket_x, cutoff_profile, gradient
from .operators import BlockOperator, assemble_HhatE, smallest_symmetric_eigenvalue
from .spectral import JordanChain

log = logging.getLogger(__name__)

__all__ = [
    "DecayParameters",
    "WeightField",
    "DecayReport",
    "LemmaRow",
    "LemmaReport",
    "weight_field",
    "weighted_l2",
    "exterior_quotient",
    "select_radius",
    "exterior_cutoff",
    "commutator",
    "commutator_formula",
    "conjugation_identity_residual",
    "lemma3_check",
    "chain_decay_check",
    "fit_decay_rate",
    "tail_profile",
    "default_deltas",
    "DEFAULT_EPS",
]

DEFAULT_EPS = (1.0, 0.3, 0.1, 0.03, 0.0)
DELTA_FRACTIONS = (0.05, 0.1, 0.2)


def default_deltas(mu_E: float) -> tuple:
    return tuple(f * mu_E for f in DELTA_FRACTIONS)


@dataclass(frozen=True)
class DecayParameters:
    mu: float
    re_E: float = 0.0
    delta: float = 0.1
    eps: float = 0.0

    def __post_init__(self):
        if not self.mu_E > 0:
            raise ValidationError(f"mu_E = mu - |Re E| must be positive, got {self.mu_E}")
        if not 0 < self.delta < self.mu_E / 2:
            raise ValidationError(f"delta must lie in (0, mu_E/2) = (0, {self.mu_E / 2}), got {self.delta}")
        if not self.eps >= 0:
            raise ValidationError(f"eps must be non-negative, got {self.eps}")

    @property
    def mu_E(self) -> float:
        return self.mu - abs(self.re_E)

    @property
    def beta(self) -> float:
        return math.sqrt(self.mu_E - 2.0 * self.delta)

    def with_eps(self, eps: float) -> "DecayParameters":
        return DecayParameters(self.mu, self.re_E, self.delta, eps)

    @classmethod
    def for_operator(cls, Hhat: BlockOperator, delta: float, eps: float = 0.0) -> "DecayParameters":
        E = 0.0 if Hhat.energy is None else complex(Hhat.energy)
        return cls(Hhat.mu, float(np.real(E)), delta, eps)


@dataclass(frozen=True, eq=False)
class WeightField:
    grid: Grid
    values: np.ndarray
    params: DecayParameters

    def max_gradient(self) -> float:
        return float(np.max(np.linalg.norm(gradient(self.values, self.grid), axis=1)))


def weight_field(g: Grid, p: DecayParameters) -> WeightField:
    br = bracket_x(g).values
    if p.eps == 0:
        f = p.beta * br
    else:
        f = p.beta * br / (1.0 + p.eps * br)
    return WeightField(g, f, p)


def _norm2_weights(phi: Vec2Field) -> np.ndarray:
    return np.abs(phi.first) ** 2 + np.abs(phi.second) ** 2


def weighted_l2(phi: Vec2Field, w: WeightField | None = None, j: RealField | np.ndarray | None = None) -> float:
    """Discrete L2 norm of j e^w phi over both components (h^d weighted)."""
    g = phi.grid
    scale = np.ones(g.size)
    if w is not None:
        g.check_same(w.grid)
        scale = scale * np.exp(w.values)
    if j is not None:
        jv = j.values if isinstance(j, RealField) else np.asarray(j, dtype=float)
        scale = scale * jv
    return float(math.sqrt(g.cell_volume * np.sum(scale**2 * _norm2_weights(phi))))


def _exterior_rows(g: Grid, R: float) -> np.ndarray:
    rad = g.to_interior(g.radius)
    return np.flatnonzero(rad >= R)


def _check_exterior(g: Grid, R: float):
    if not R < 0.9 * g.half_length:
        raise ValidationError(f"R={R} must be below 0.9 L = {0.9 * g.half_length}")
    ax = g.axis[1:-1]
    per_side = int(np.sum(ax >= R))
    if per_side < 8:
        raise ValidationError(f"exterior region too thin: {per_side} nodes per side beyond R={R}")


_QUOTIENTS: "weakref.WeakKeyDictionary[BlockOperator, dict]" = weakref.WeakKeyDictionary()


def exterior_quotient(Hhat: BlockOperator, R: float) -> float:
    """Smallest Rayleigh quotient of Re Hhat_E over fields vanishing for |x| < R."""
    g = Hhat.grid
    _check_exterior(g, R)
    rows = _exterior_rows(g, R)
    # operators are immutable; quotients depend only on the exterior node set
    memo = _QUOTIENTS.setdefault(Hhat, {})
    key = (rows.size, hash(rows.tobytes()))
    if key not in memo:
        idx = np.concatenate([rows, rows + Hhat.n])
        memo[key] = smallest_symmetric_eigenvalue(Hhat.re_part()[idx][:, idx])
    return memo[key]


def select_radius(Hhat: BlockOperator, p: DecayParameters) -> tuple:
    """Smallest node radius R with exterior_quotient(R) >= mu_E - delta.

    Candidates are interior node radii up to min(L/2, 0.9 L) with a thick enough
    exterior; the quotient is nondecreasing in R so the search bisects.  Returns
    ``(R, quotient)`` or ``(None, best quotient)`` when no candidate qualifies.
    """
    g = Hhat.grid
    ax = g.axis[1:-1]
    cap = min(0.5 * g.half_length, 0.9 * g.half_length)
    cands = np.unique(np.abs(ax))
    cands = cands[(cands > 0) & (cands <= cap)]
    cands = np.array([r for r in cands if np.sum(ax >= r) >= 8])
    target = p.mu_E - p.delta
    if cands.size == 0:
        return None, -math.inf
    cache = {}

    def q(i):
        if i not in cache:
            cache[i] = exterior_quotient(Hhat, float(cands[i]))
        return cache[i]

    lo, hi = 0, cands.size - 1
    if q(hi) < target:
        return None, q(hi)
    if q(lo) >= target:
        return float(cands[lo]), q(lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if q(mid) >= target:
            hi = mid
        else:
            lo = mid
    return float(cands[hi]), q(hi)


def exterior_cutoff(g: Grid, c: CutoffSpec) -> RealField:
    """chi_R = 1 - j_R: zero on the ball of radius R, one beyond 2R."""
    return RealField(g, 1.0 - cutoff_profile(g.radius / c.radius))


def commutator(H0hat: BlockOperator, chi: RealField) -> sp.csr_matrix:
    """Exact sparse commutator H0hat chi - chi H0hat for a scalar multiplier chi."""
    g = H0hat.grid
    c = g.to_interior(chi.values)
    J = sp.diags(np.concatenate([c, c])).tocsr()
    M = H0hat.matrix
    return (M @ J - J @ M).tocsr()


def _nodal_laplacian(g: Grid, values: np.ndarray) -> np.ndarray:
    # second differences from the full nodal samples (no Dirichlet truncation)
    arr = np.asarray(values, dtype=float).reshape(g.shape)
    out = np.zeros_like(arr)
    inner = (slice(1, -1),) * g.dim
    for k in range(g.dim):
        fwd = [slice(1, -1)] * g.dim
        bwd = [slice(1, -1)] * g.dim
        fwd[k] = slice(2, None)
        bwd[k] = slice(None, -2)
        out[inner] += arr[tuple(fwd)] - 2 * arr[inner] + arr[tuple(bwd)]
    return (out / g.spacing**2).ravel()


def commutator_formula(g: Grid, chi: RealField) -> sp.csr_matrix:
    """First-order form [-Delta, chi] = -(Delta chi) - 2 grad chi . grad, per component.

    Derivatives act on interior vectors with zero Dirichlet data; agrees with
    :func:`commutator` to O(h^2) on smooth fields.
    """
    m = g.points - 2
    h = g.spacing
    d1 = sp.diags([np.full(m - 1, 1.0), np.full(m - 1, -1.0)], [1, -1], shape=(m, m)) / (2 * h)
    lap_chi = g.to_interior(_nodal_laplacian(g, chi.values))
    if g.dim == 1:
        dchi = gradient(chi.values, g)[:, 0]
        K = -sp.diags(lap_chi) - 2.0 * sp.diags(g.to_interior(dchi)) @ d1
    else:
        eye = sp.identity(m, format="csr")
        parts = [sp.kron(d1, eye), sp.kron(eye, d1)]
        gc = gradient(chi.values, g)
        K = -sp.diags(lap_chi)
        for k in range(2):
            K = K - 2.0 * sp.diags(g.to_interior(gc[:, k])) @ parts[k]
    return sp.block_diag([K, K], format="csr").astype(complex)


def conjugation_identity_residual(Hhat: BlockOperator, gfield: RealField | np.ndarray, psi: Vec2Field) -> float:
    """|Re<psi, e^g Hhat e^-g psi> - <psi, (Re Hhat - |grad g|^2) psi>| / ||psi||^2."""
    g = Hhat.grid
    gv = gfield.values if isinstance(gfield, RealField) else np.asarray(gfield, dtype=float)
    v = psi.to_vector()
    e = np.exp(np.tile(g.to_interior(gv), 2))
    conj = e * (Hhat.matrix @ (v / e))
    lhs = np.real(np.vdot(v, conj))
    grad2 = np.tile(g.to_interior(np.sum(gradient(gv, g) ** 2, axis=1)), 2)
    rhs = np.real(np.vdot(v, Hhat.re_part() @ v)) - np.real(np.vdot(v, grad2 * v))
    return float(abs(lhs - rhs) / np.real(np.vdot(v, v)))


@dataclass
class LemmaRow:
    eps: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


@dataclass
class LemmaReport:
    delta: float
    applicable: bool
    reason: str = ""
    radius: float | None = None
    quotient: float | None = None
    rows: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.applicable and all(r.holds for r in self.rows)

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=math.nan)

    @property
    def monotone(self) -> bool:
        """Left side nondecreasing as eps decreases (rows sorted by decreasing eps)."""
        rows = sorted(self.rows, key=lambda r: -r.eps)
        lhs = [r.lhs for r in rows]
        return all(b >= a * (1 - 1e-12) for a, b in zip(lhs, lhs[1:]))

    @property
    def status(self) -> str:
        if not self.applicable:
            return "skipped"
        return "pass" if self.holds and self.monotone else "fail"


def _free_operator(Hhat: BlockOperator) -> BlockOperator:
    return assemble_HhatE(Hhat.grid, Hhat.mu, Hhat.energy or 0.0, None, Hhat.order)


def _premise(Hhat, params, cutoff):
    if cutoff is None:
        R, qv = select_radius(Hhat, params)
        if R is None:
            return None, qv, f"R too small: no admissible R reaches mu_E - delta (best {qv:.6g})"
        return CutoffSpec(R), qv, ""
    qv = exterior_quotient(Hhat, cutoff.radius)
    if qv < params.mu_E - params.delta:
        return None, qv, f"R too small: exterior quotient {qv:.6g} < mu_E - delta = {params.mu_E - params.delta:.6g}"
    return cutoff, qv, ""


def _sweep(Hhat, params, cutoff, eps_list, vectors):
    g = Hhat.grid
    chi = exterior_cutoff(g, cutoff)
    C = commutator(_free_operator(Hhat), chi)
    rows = []
    comm = [Vec2Field.from_vector(g, C @ v.to_vector()) for v in vectors]
    for eps in eps_list:
        w = weight_field(g, params.with_eps(eps))
        lhs = weighted_l2(vectors[0], w, chi)
        rhs = sum(params.delta ** -(l + 1) * weighted_l2(cv, w) for l, cv in enumerate(comm))
        rows.append(LemmaRow(float(eps), lhs, rhs))
    return rows


def lemma3_check(
    Hhat: BlockOperator,
    phi: Vec2Field,
    params: DecayParameters,
    cutoff: CutoffSpec | None = None,
    eps_list=DEFAULT_EPS,
    tol: float = 1e-8,
) -> LemmaReport:
    """Both sides of ||chi_R e^f phi|| <= delta^-1 ||e^f [H0hat, chi_R] phi|| over an eps sweep.

    ``phi`` must satisfy Hhat phi = 0 to ``tol`` (relative); otherwise the report
    is marked inapplicable.  Without ``cutoff`` the radius comes from
    :func:`select_radius`.
    """
    Hhat.grid.check_same(phi.grid)
    v = phi.to_vector()
    res = float(np.linalg.norm(Hhat.matrix @ v) / np.linalg.norm(v))
    if res > tol:
        return LemmaReport(params.delta, False, f"not a zero mode of Hhat_E (residual {res:.3e})")
    cut, qv, why = _premise(Hhat, params, cutoff)
    if cut is None:
        return LemmaReport(params.delta, False, why, None if cutoff is None else cutoff.radius, qv)
    rows = _sweep(Hhat, params, cut, eps_list, [phi])
    return LemmaReport(params.delta, True, "", cut.radius, qv, rows)


def _flip(v: np.ndarray, n: int) -> np.ndarray:
    out = v.copy()
    out[n:] *= -1
    return out


def chain_decay_check(
    chain: JordanChain | list,
    Hhat: BlockOperator,
    params: DecayParameters,
    cutoff: CutoffSpec | None = None,
    eps_list=DEFAULT_EPS,
    tol: float = 1e-8,
) -> LemmaReport:
    """Chain form: ||chi e^f psi_0|| <= sum_l delta^-(l+1) ||e^f [H0hat, chi] psi_l||.

    The chain obeys Hhat_E psi_{l-1} = flip(psi_l) with flip(u1, u2) = (u1, -u2)
    and Hhat_E psi_{k-1} = 0.
    """
    vectors = chain.vectors if isinstance(chain, JordanChain) else list(chain)
    n = Hhat.n
    vecs = [v.to_vector() for v in vectors]
    worst = 0.0
    for l in range(len(vecs)):
        target = _flip(vecs[l + 1], n) if l + 1 < len(vecs) else 0.0
        r = np.linalg.norm(Hhat.matrix @ vecs[l] - target) / np.linalg.norm(vecs[l])
        worst = max(worst, float(r))
    if worst > tol:
        return LemmaReport(params.delta, False, f"chain relation residual {worst:.3e} exceeds {tol:.1e}")
    cut, qv, why = _premise(Hhat, params, cutoff)
    if cut is None:
        return LemmaReport(params.delta, False, why, None if cutoff is None else cutoff.radius, qv)
    rows = _sweep(Hhat, params, cut, eps_list, vectors)
    return LemmaReport(params.delta, True, "", cut.radius, qv, rows)


@dataclass
class DecayReport:
    energy: complex
    rate: float
    window: tuple
    rms: float
    power: float
    deltas: tuple
    bounds: tuple
    rate_tol: float
    tail_rates: tuple = ()

    @property
    def passes(self) -> tuple:
        return tuple(self.rate >= b - self.rate_tol for b in self.bounds)

    @property
    def passed(self) -> bool:
        return all(self.passes)


def _fit_tail(r: np.ndarray, y: np.ndarray, max_power: float):
    A = np.column_stack([np.ones_like(r), -r, np.log(r)])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    p = float(np.clip(np.round(2 * coef[2]) / 2, -1.0, max_power))
    B = np.column_stack([np.ones_like(r), -r])
    c2 = np.linalg.lstsq(B, y - p * np.log(r), rcond=None)[0]
    resid = y - p * np.log(r) - B @ c2
    return float(c2[1]), p, float(np.sqrt(np.mean(resid**2)))


def fit_decay_rate(
    phi: Vec2Field,
    window: tuple | None = None,
    *,
    mu: float,
    energy: complex = 0.0,
    deltas=None,
    rate_tol: float = 0.02,
    max_power: float = 2.0,
    min_nodes: int = 16,
    floor: float = 1e-250,
) -> DecayReport:
    """Exponential tail rate of |phi_1| + |phi_2| over r1 <= |x| <= r2.

    The log amplitude is regressed on (1, -|x|, log|x|); the power-law exponent
    is rounded to a multiple of 1/2 and the rate refitted with it held fixed, so
    tails such as |x| e^{-a|x|} give a rather than a biased slope.  In one
    dimension the two tails are fitted separately and averaged.
    """
    if rate_tol < 0:
        raise ValidationError("rate_tol must be non-negative")
    g = phi.grid
    L = g.half_length
    r1, r2 = window if window is not None else (0.4 * L, 0.85 * L)
    if not 0 < r1 < r2 <= 0.9 * L:
        raise ValidationError(f"fit window [{r1}, {r2}] must satisfy 0 < r1 < r2 <= 0.9 L")
    amp = phi.amplitude
    if g.dim == 1:
        x = g.axis
        tails = [(x >= r1) & (x <= r2), (x <= -r1) & (x >= -r2)]
    else:
        tails = [(g.radius >= r1) & (g.radius <= r2)]
    rates, powers, rms = [], [], []
    for mask in tails:
        if mask.sum() < min_nodes:
            raise ValidationError(f"fit window holds {int(mask.sum())} nodes, need {min_nodes}")
        a = amp[mask]
        if np.any(a <= floor):
            raise ValidationError("amplitude underflows in the fit window")
        rate, p, e = _fit_tail(g.radius[mask], np.log(a), max_power)
        rates.append(rate)
        powers.append(p)
        rms.append(e)
    mu_E = mu - abs(np.real(energy))
    if deltas is None:
        deltas = default_deltas(mu_E)
    deltas = tuple(float(d) for d in deltas)
    for d in deltas:
        if not 0 < d < mu_E / 2:
            raise ValidationError(f"delta {d} outside (0, mu_E/2)")
    bounds = tuple(math.sqrt(mu_E - 2 * d) for d in deltas)
    return DecayReport(
        complex(energy),
        float(np.mean(rates)),
        (float(r1), float(r2)),
        float(max(rms)),
        float(max(powers)),
        deltas,
        bounds,
        float(rate_tol),
        tuple(rates),
    )


def tail_profile(phi: Vec2Field, floor: float = 1e-300) -> np.ndarray:
    """Rows (|x|, log amplitude) sorted by |x|, for plotting decay curves."""
    g = phi.grid
    amp = phi.amplitude
    keep = amp > floor
    r = g.radius[keep]
    order = np.argsort(r, kind="stable")
    return np.column_stack([r[order], np.log(amp[keep][order])])
