"""Gap eigenvalues, Riesz projections and Jordan chains of block operators.

The dense nonsymmetric eigensolve is the brute-force oracle; shift-invert
Arnoldi over a lattice of shifts is the production path.  Near-defective
clusters (the zero eigenvalue of a soliton linearization) are handled by
merging members within a cluster radius and comparing cluster means, which are
stable under perturbation even when the individual members are not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ContourError, DegenerateStripError, RankIndeterminateError, ValidationError
from .grid import Vec2Field
from .operators import BlockOperator

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps

__all__ = [
    "SpectralConfig",
    "SpectralPoint",
    "SpectralSet",
    "JordanChain",
    "RieszProjectionReport",
    "SymmetryReport",
    "MatchReport",
    "numerical_rank",
    "cluster_eigenvalues",
    "default_cluster_radius",
    "dense_spectrum",
    "gap_eigenvalues",
    "riesz_projection",
    "jordan_chain",
    "symmetry_check",
    "hausdorff",
    "axis_confinement",
    "match_spectra",
]


@dataclass(frozen=True)
class SpectralConfig:
    tol: float = 1e-8
    arpack_tol: float = 1e-12
    shift_spacing: float | None = None
    ncv: int = 40
    nev: int = 12
    dedup_radius: float = 1e-6
    cluster_radius: float | None = None
    cluster_scale: float = 0.05
    dense_cap: int = 4096
    seed: int = 0
    maxiter: int = 3000


@dataclass
class SpectralPoint:
    value: complex
    residual: float | None = None
    geometric: int | None = None
    algebraic: int | None = None
    index: int | None = None
    members: tuple = ()
    shift: complex | None = None
    iterations: int | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def multiplicity(self) -> int:
        return self.algebraic if self.algebraic is not None else max(1, len(self.members))


@dataclass
class SpectralSet:
    points: list
    strip: tuple | None = None
    dedup_radius: float = 1e-6
    cluster_radius: float = 1e-6
    failures: list = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=complex)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def __len__(self):
        return len(self.points)

    def in_strip(self, re_max: float, im_max: float) -> "SpectralSet":
        keep = [p for p in self.points if abs(p.value.real) < re_max and abs(p.value.imag) <= im_max]
        return SpectralSet(keep, (re_max, im_max), self.dedup_radius, self.cluster_radius, list(self.failures))

    def total_multiplicity(self) -> int:
        return sum(p.multiplicity for p in self.points)


def numerical_rank(s, floor: float = 1e-8, min_gap: float = 10.0):
    """Rank by the rule s_i > max(floor, 1e3 eps s_max).

    Returns ``(rank, gap_ratio, indeterminate)``; the gap ratio is the last kept
    over the first dropped singular value.
    """
    s = np.sort(np.asarray(s, dtype=float))[::-1]
    if s.size == 0:
        return 0, math.inf, False
    thr = max(floor, 1e3 * EPS * s[0])
    rank = int(np.sum(s > thr))
    if rank == 0 or rank == s.size:
        return rank, math.inf, False
    dropped = s[rank]
    ratio = math.inf if dropped == 0 else float(s[rank - 1] / dropped)
    return rank, ratio, ratio <= min_gap


def default_cluster_radius(H: BlockOperator, cfg: SpectralConfig = SpectralConfig()) -> float:
    if cfg.cluster_radius is not None:
        return cfg.cluster_radius
    return max(cfg.dedup_radius, cfg.cluster_scale * H.grid.spacing**2)


def cluster_eigenvalues(values, radius: float) -> list:
    """Single-linkage groups of eigenvalues within ``radius``.

    Returns a list of index arrays, ordered by the (Re, Im) of the first member.
    """
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return []
    order = np.lexsort((values.imag, values.real))
    pts = np.column_stack([values.real[order], values.imag[order]])
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    m = len(values)
    adj = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m)) if len(pairs) else sp.coo_matrix((m, m))
    _, labels = connected_components(adj, directed=False)
    groups = {}
    for pos, lab in enumerate(labels):
        groups.setdefault(lab, []).append(order[pos])
    return sorted((np.array(g) for g in groups.values()), key=lambda g: (values[g[0]].real, values[g[0]].imag))


def _residual(H: BlockOperator, lam: complex, v: np.ndarray) -> float:
    return float(np.linalg.norm(H.matrix @ v - lam * v) / np.linalg.norm(v))


def dense_spectrum(
    H: BlockOperator,
    cfg: SpectralConfig = SpectralConfig(),
    compute_vectors: bool = False,
) -> SpectralSet:
    """All eigenvalues by a dense nonsymmetric eigensolve (oracle for small grids)."""
    dim = H.shape[0]
    if dim > cfg.dense_cap:
        raise ValidationError(f"dimension {dim} exceeds the dense cap {cfg.dense_cap}")
    A = H.dense()
    if compute_vectors:
        vals, vecs = sla.eig(A, check_finite=False)
    else:
        vals = sla.eigvals(A, check_finite=False)
        vecs = None
    radius = default_cluster_radius(H, cfg)
    points = []
    for grp in cluster_eigenvalues(vals, radius):
        members = tuple(complex(v) for v in vals[grp])
        res = None
        vec = None
        if vecs is not None:
            vec = vecs[:, grp]
            res = max(_residual(H, vals[i], vecs[:, i]) for i in grp)
        points.append(
            SpectralPoint(complex(np.mean(vals[grp])), res, algebraic=len(grp), members=members, vectors=vec)
        )
    return SpectralSet(points, None, cfg.dedup_radius, radius)


def _shift_lattice(re_max: float, im_max: float, spacing: float) -> np.ndarray:
    n_re = max(1, math.ceil(2 * re_max / spacing))
    n_im = max(1, math.ceil(2 * im_max / spacing)) if im_max > 0 else 1
    re_edges = np.linspace(-re_max, re_max, n_re + 1)
    re_c = 0.5 * (re_edges[1:] + re_edges[:-1])
    if im_max > 0:
        im_edges = np.linspace(-im_max, im_max, n_im + 1)
        im_c = 0.5 * (im_edges[1:] + im_edges[:-1])
    else:
        im_c = np.array([spacing / 2])
    return np.array([complex(r, i) for i in im_c for r in re_c])


def _arnoldi_at_shift(H, sigma, cfg, rng, spacing):
    dim = H.shape[0]
    k = min(cfg.nev, dim - 2)
    ncv = min(max(cfg.ncv, 2 * k + 1), dim)
    eye = sp.identity(dim, format="csc", dtype=complex)
    lu = None
    for attempt in range(4):
        try:
            lu = spla.splu((H.matrix - sigma * eye).tocsc())
            break
        except RuntimeError:
            bumped = sigma + spacing * 1e-3 * (1 + 1j) * (attempt + 1)
            log.warning("factorization failed at shift %s, retrying at %s", sigma, bumped)
            sigma = bumped
    if lu is None:
        raise RuntimeError(f"factorization failed near shift {sigma}")
    count = [0]

    def solve(x):
        count[0] += 1
        return lu.solve(np.asarray(x, dtype=complex).ravel())

    opinv = spla.LinearOperator((dim, dim), matvec=solve, dtype=complex)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    failure = None
    try:
        vals, vecs = spla.eigs(
            H.matrix, k=k, sigma=sigma, OPinv=opinv, ncv=ncv, tol=cfg.arpack_tol, v0=v0, maxiter=cfg.maxiter
        )
    except spla.ArpackNoConvergence as exc:
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        failure = f"ARPACK did not converge at shift {sigma}: {len(vals)} of {k} pairs"
        log.warning(failure)
    return sigma, vals, vecs, count[0], failure


def gap_eigenvalues(
    H: BlockOperator,
    margin: float,
    imag_cap: float,
    cfg: SpectralConfig = SpectralConfig(),
) -> SpectralSet:
    """Eigenvalues in the strip |Re E| < mu - margin, |Im E| <= imag_cap.

    Shift-invert Arnoldi runs at the centres of a rectangular lattice of cells
    covering the strip.  Results are merged in (Re, Im) order, so the outcome does
    not depend on the order in which shifts are processed.
    """
    if not margin > 0:
        raise ValidationError(f"strip margin must be positive, got {margin}")
    if imag_cap < 0:
        raise ValidationError("imaginary cap must be non-negative")
    re_max = H.mu - margin
    if re_max <= 0:
        raise DegenerateStripError(f"degenerate strip: margin {margin} >= mu {H.mu}")
    spacing = cfg.shift_spacing or H.mu / 4.0
    shifts = _shift_lattice(re_max, imag_cap, spacing)
    records = []
    failures = []
    for i, sigma in enumerate(shifts):
        rng = np.random.default_rng([cfg.seed, i])
        try:
            used, vals, vecs, iters, failure = _arnoldi_at_shift(H, sigma, cfg, rng, spacing)
        except RuntimeError as exc:
            failures.append(str(exc))
            continue
        if failure:
            failures.append(failure)
        for j, lam in enumerate(vals):
            if not (abs(lam.real) < re_max and abs(lam.imag) <= imag_cap):
                continue
            v = vecs[:, j]
            res = _residual(H, lam, v)
            if res > cfg.tol:
                continue
            records.append((complex(lam), v, res, i, complex(used), iters))

    radius = default_cluster_radius(H, cfg)
    points = []
    if records:
        vals = np.array([r[0] for r in records])
        for grp in cluster_eigenvalues(vals, radius):
            by_shift = {}
            for idx in grp:
                by_shift.setdefault(records[idx][3], []).append(idx)
            centre = np.mean(vals[grp])
            best = min(
                by_shift,
                key=lambda s: (-len(by_shift[s]), abs(records[by_shift[s][0]][4] - centre), s),
            )
            chosen = sorted(by_shift[best], key=lambda i: (vals[i].real, vals[i].imag))
            value = complex(np.mean(vals[chosen]))
            if not (abs(value.real) < re_max and abs(value.imag) <= imag_cap):
                continue
            points.append(
                SpectralPoint(
                    value,
                    max(records[i][2] for i in chosen),
                    algebraic=len(chosen),
                    members=tuple(vals[i] for i in chosen),
                    shift=records[chosen[0]][4],
                    iterations=records[chosen[0]][5],
                    vectors=np.column_stack([records[i][1] for i in chosen]),
                )
            )
    return SpectralSet(points, (re_max, imag_cap), cfg.dedup_radius, radius, failures)


@dataclass
class RieszProjectionReport:
    center: complex
    radius: float
    nodes: int
    rank: int
    defect: float
    norm: float
    gap_ratio: float
    indeterminate: bool
    singular_values: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    history: list = field(default_factory=list)
    exact: bool = False

    @property
    def stable(self) -> bool:
        return len(self.history) >= 2 and self.history[-1][1] == self.history[-2][1]


class _ContourSolver:
    def __init__(self, H: BlockOperator, center: complex, radius: float, blowup: float):
        self.H = H
        self.center = complex(center)
        self.radius = float(radius)
        self.blowup = blowup
        self._lu = {}
        self._eye = sp.identity(H.shape[0], format="csc", dtype=complex)

    def _factor(self, z):
        if z not in self._lu:
            try:
                self._lu[z] = spla.splu((self.H.matrix - z * self._eye).tocsc())
            except RuntimeError as exc:
                raise ContourError(f"contour node {z} lies on the spectrum") from exc
        return self._lu[z]

    def apply(self, X: np.ndarray, m: int) -> np.ndarray:
        """Trapezoidal approximation of (2 pi i)^{-1} \\oint (z - H)^{-1} X dz."""
        acc = np.zeros(X.shape, dtype=complex)
        xnorm = np.linalg.norm(X)
        for j in range(m):
            w = self.radius * np.exp(2j * np.pi * (j + 0.5) / m)
            z = self.center + w
            Y = self._factor(z).solve(X)
            if not np.all(np.isfinite(Y)) or np.linalg.norm(Y) > self.blowup * xnorm:
                raise ContourError(f"resolvent blow-up at contour node {z}: contour too close to spectrum")
            acc -= w * Y
        return acc / m


def riesz_projection(
    H: BlockOperator,
    center: complex,
    radius: float,
    m: int = 32,
    probes: int = 24,
    seed: int = 0,
    exact: bool | None = None,
    max_nodes: int = 512,
    defect_tol: float = 1e-6,
    known_eigenvalues=None,
    separation: float = 2e-6,
    blowup: float = 1e10,
) -> RieszProjectionReport:
    """Rank and idempotency defect of the Riesz projection for a circle.

    With ``exact`` the projection is formed in full (identity right-hand sides);
    otherwise it is applied to an orthonormal block of random probes and the
    reported norm and defect are those of the probed block.  Nodes are doubled
    until the rank repeats and the defect is below ``defect_tol``.
    """
    if not radius > 0:
        raise ValidationError("contour radius must be positive")
    center = complex(center)
    if known_eigenvalues is not None:
        d = np.abs(np.abs(np.asarray(known_eigenvalues, dtype=complex) - center) - radius)
        if d.size and d.min() < separation:
            raise ContourError(f"contour passes within {d.min():.2e} of a computed eigenvalue")
    dim = H.shape[0]
    if exact is None:
        exact = False
    solver = _ContourSolver(H, center, radius, blowup)
    rng = np.random.default_rng(seed)

    def probe_block(p):
        if exact:
            return np.eye(dim, dtype=complex)
        Z = rng.standard_normal((dim, p)) + 1j * rng.standard_normal((dim, p))
        Q, _ = np.linalg.qr(Z)
        return Q

    p = min(probes, dim)
    X = probe_block(p)
    history = []
    nodes = m
    while True:
        Y = solver.apply(X, nodes)
        s = np.linalg.svd(Y, compute_uv=False)
        rank, ratio, indet = numerical_rank(s)
        if not exact and rank > X.shape[1] - 4 and X.shape[1] < dim:
            X = probe_block(min(2 * X.shape[1], dim))
            history.clear()
            continue
        Z = solver.apply(Y, nodes)
        defect = float(np.linalg.norm(Z - Y, 2))
        history.append((nodes, rank, defect))
        done = len(history) >= 2 and history[-1][1] == history[-2][1] and defect <= defect_tol
        if done or nodes * 2 > max_nodes:
            break
        nodes *= 2
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    return RieszProjectionReport(
        center,
        float(radius),
        nodes,
        rank,
        defect,
        float(s[0]) if s.size else 0.0,
        ratio,
        indet,
        s,
        U[:, :rank],
        history,
        bool(exact),
    )


@dataclass
class JordanChain:
    value: complex
    vectors: list
    index: int
    geometric: int
    algebraic: int
    riesz_rank: int
    kernel_dims: list
    chains: list = field(default_factory=list, repr=False)
    full_kernel_dims: list | None = None
    chain_residuals: list = field(default_factory=list)
    terminal_residual: float = 0.0
    min_singular: float = 1.0
    invariance_defect: float = 0.0

    @property
    def consistent(self) -> bool:
        ok = self.algebraic == self.riesz_rank
        if self.full_kernel_dims is not None:
            ok = ok and list(self.full_kernel_dims[: len(self.kernel_dims)]) == list(self.kernel_dims)
        return ok

    @property
    def all_vectors(self) -> list:
        return [v for ch in self.chains for v in ch]


def _null_basis(M: np.ndarray, what: str):
    U, s, Vh = np.linalg.svd(M)
    rank, ratio, indet = numerical_rank(s)
    if indet:
        raise RankIndeterminateError(f"rank of {what} is indeterminate (gap ratio {ratio:.3g})", ratio)
    return Vh[rank:].conj().T


def _full_space_nullities(H: BlockOperator, E: complex, upto: int) -> list:
    D = H.dense() - E * np.eye(H.shape[0])
    M = D.copy()
    dims = []
    for m in range(1, upto + 1):
        s = sla.svdvals(M, check_finite=False)
        rank, ratio, indet = numerical_rank(s)
        if indet:
            raise RankIndeterminateError(f"rank of (H-E)^{m} is indeterminate (gap ratio {ratio:.3g})", ratio)
        dims.append(H.shape[0] - rank)
        if m < upto:
            M = M @ D
    return dims


def jordan_chain(
    H: BlockOperator,
    E: complex,
    tol: float = 1e-6,
    radius: float | None = None,
    riesz: RieszProjectionReport | None = None,
    full_space: bool = False,
    dense_cap: int = 4096,
    seed: int = 0,
) -> JordanChain:
    """Jordan structure of H at E.

    The range of the Riesz projection around E is compressed to T = Q^* H Q and
    the nullities of (T - E)^m are read off rank-revealing SVDs until they
    stabilise.  With ``full_space`` the nullities of (H - E)^m are recomputed from
    dense SVDs as an independent check (dimension at most ``dense_cap``).  A Jordan
    basis is built top-down from the nested kernels; the longest chain is
    returned as ``vectors`` and every chain in ``chains``.
    """
    E = complex(E)
    if riesz is None:
        riesz = riesz_projection(H, E, radius if radius is not None else 0.3 * H.mu, seed=seed)
    Q = riesz.basis
    r = Q.shape[1]
    if r == 0:
        raise ValidationError(f"no spectrum inside the contour around {E}")
    HQ = H.matrix @ Q
    T = Q.conj().T @ HQ
    invariance = float(np.linalg.norm(HQ - Q @ T, 2))
    A = T - E * np.eye(r)

    powers = [np.eye(r, dtype=complex)]
    kernels = [np.zeros((r, 0), dtype=complex)]
    dims = [0]
    for m in range(1, r + 2):
        powers.append(powers[-1] @ A)
        K = _null_basis(powers[-1], f"(T-E)^{m}")
        kernels.append(K)
        dims.append(K.shape[1])
        if dims[-1] == dims[-2]:
            break
    k = len(dims) - 2
    if k == 0:
        raise ValidationError(f"{E} is not an eigenvalue inside the contour")

    full_dims = None
    if full_space:
        if H.shape[0] > dense_cap:
            raise ValidationError(f"dimension {H.shape[0]} exceeds the dense cap {dense_cap}")
        full_dims = _full_space_nullities(H, E, k + 1)

    # Jordan basis, longest chains first
    tops = []
    for m in range(k, 0, -1):
        existing = [np.linalg.matrix_power(A, top - m) @ v for top, v in tops if top > m]
        need = (dims[m] - dims[m - 1]) - len(existing)
        if need <= 0:
            continue
        S = np.column_stack([kernels[m - 1]] + existing) if (dims[m - 1] or existing) else np.zeros((r, 0))
        C = kernels[m]
        if S.shape[1]:
            Qs, _ = np.linalg.qr(S)
            C = C - Qs @ (Qs.conj().T @ C)
        U, s, _ = np.linalg.svd(C, full_matrices=False)
        for j in range(need):
            tops.append((m, U[:, j]))

    grid = H.grid
    chains = []
    raw_chains = []
    for top, v in tops:
        vecs = [Q @ (np.linalg.matrix_power(A, l) @ v) for l in range(top)]
        raw_chains.append(vecs)
        chains.append([Vec2Field.from_vector(grid, x) for x in vecs])

    longest = raw_chains[0]
    chain_res = []
    for l in range(1, len(longest)):
        prev = longest[l - 1]
        chain_res.append(float(np.linalg.norm(H.matrix @ prev - E * prev - longest[l]) / np.linalg.norm(prev)))
    last = longest[-1]
    terminal = float(np.linalg.norm(H.matrix @ last - E * last) / np.linalg.norm(last))
    stack = np.column_stack([x / np.linalg.norm(x) for x in longest])
    min_sv = float(np.linalg.svd(stack, compute_uv=False)[-1])
    if max(chain_res + [terminal]) > tol:
        log.warning("Jordan chain residual %.2e exceeds %.1e", max(chain_res + [terminal]), tol)

    return JordanChain(
        value=E,
        vectors=chains[0],
        index=k,
        geometric=dims[1],
        algebraic=dims[k],
        riesz_rank=r,
        kernel_dims=dims[1:],
        chains=chains,
        full_kernel_dims=full_dims,
        chain_residuals=chain_res,
        terminal_residual=terminal,
        min_singular=min_sv,
        invariance_defect=invariance,
    )


def hausdorff(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return math.inf
    pa = np.column_stack([a.real, a.imag])
    pb = np.column_stack([b.real, b.imag])
    d1 = cKDTree(pb).query(pa)[0].max()
    d2 = cKDTree(pa).query(pb)[0].max()
    return float(max(d1, d2))


@dataclass
class SymmetryReport:
    negation_distance: float
    conjugation_distance: float
    tol: float

    @property
    def negation_passed(self) -> bool:
        return self.negation_distance <= self.tol

    @property
    def conjugation_passed(self) -> bool:
        return self.conjugation_distance <= self.tol

    @property
    def passed(self) -> bool:
        return self.negation_passed and self.conjugation_passed


def symmetry_check(S, tol: float = 1e-8) -> SymmetryReport:
    """Hausdorff distances of S to -S and to conj(S)."""
    vals = S.values if isinstance(S, SpectralSet) else np.asarray(S, dtype=complex)
    return SymmetryReport(hausdorff(vals, -vals), hausdorff(vals, vals.conj()), tol)


def axis_confinement(S) -> float:
    """Largest min(|Re E|, |Im E|) over S; zero when every point lies on the real or imaginary axis."""
    vals = S.values if isinstance(S, SpectralSet) else np.asarray(S, dtype=complex)
    if vals.size == 0:
        return 0.0
    return float(np.max(np.minimum(np.abs(vals.real), np.abs(vals.imag))))


@dataclass
class MatchReport:
    max_distance: float
    counts_equal: bool
    sizes_equal: bool
    tol: float
    pairs: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.sizes_equal and self.counts_equal and self.max_distance <= self.tol


def match_spectra(a: SpectralSet, b: SpectralSet, tol: float = 1e-7) -> MatchReport:
    """One-to-one matching of cluster representatives with multiplicity comparison."""
    va, vb = a.values, b.values
    if va.size != vb.size:
        return MatchReport(math.inf, False, False, tol)
    if va.size == 0:
        return MatchReport(0.0, True, True, tol)
    cost = np.abs(va[:, None] - vb[None, :])
    rows, cols = linear_sum_assignment(cost)
    dist = float(cost[rows, cols].max())
    counts = all(a.points[i].multiplicity == b.points[j].multiplicity for i, j in zip(rows, cols))
    pairs = [(complex(va[i]), complex(vb[j]), a.points[i].multiplicity, b.points[j].multiplicity) for i, j in zip(rows, cols)]
    return MatchReport(dist, counts, True, tol, pairs)
