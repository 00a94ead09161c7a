"""Assembly of the 2x2 block operators and sparse resolvent solves.

Every operator acts on stacked interior vectors ``[u_1, u_2]`` of length ``2 n``.
Blocks are kept alongside the assembled matrix so that symmetry conjugations are
pure block swaps and sign flips.
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularShiftError, ValidationError
from .grid import Grid, Vec2Field, laplacian
from .nls import PotentialPair

log = logging.getLogger(__name__)

__all__ = [
    "BlockOperator",
    "LminusOperator",
    "FactorizedResolvent",
    "assemble_H",
    "assemble_H0",
    "assemble_HhatE",
    "assemble_Lminus",
    "symmetry_conjugate",
    "factorize",
    "apply_resolvent",
    "perturbation_resolvent_norm",
    "resolvent_factorization_residual",
    "smallest_symmetric_eigenvalue",
]


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Sparse 2x2 block operator on a grid.

    ``kind`` is one of ``"H"``, ``"H0"``, ``"HhatE"``, ``"HhatE0"``; ``energy`` is
    set for the energy-dependent operators.
    """

    grid: Grid
    blocks: tuple
    kind: str
    mu: float
    energy: complex | None = None
    order: int = 2
    potentials: PotentialPair | None = None
    matrix: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        (a, b), (c, d) = self.blocks
        mat = sp.bmat([[a, b], [c, d]], format="csr").astype(complex)
        mat.sort_indices()
        object.__setattr__(self, "matrix", mat)

    @property
    def n(self) -> int:
        return self.grid.n_interior

    @property
    def shape(self):
        return self.matrix.shape

    def block(self, i: int, j: int) -> sp.csr_matrix:
        return self.blocks[i][j]

    def apply(self, v):
        if isinstance(v, Vec2Field):
            return Vec2Field.from_vector(self.grid, self.matrix @ v.to_vector())
        return self.matrix @ v

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def re_part(self) -> sp.csr_matrix:
        """Real symmetric part for the energy-dependent operator."""
        self._require_hat()
        E = complex(self.energy)
        (a, b), (c, d) = self.blocks
        n = self.n
        shift = sp.diags(np.full(n, E.imag))
        # a = L - E, d = L + E; cancelling Im E leaves exactly zero imaginary parts
        a_re = (a + 1j * shift).real
        d_re = (d - 1j * shift).real
        return sp.bmat([[a_re, b.real], [c.real, d_re]], format="csr")

    def im_part(self) -> sp.dia_matrix:
        self._require_hat()
        E = complex(self.energy)
        n = self.n
        return sp.diags(np.concatenate([np.full(n, -E.imag), np.full(n, E.imag)]))

    def _require_hat(self):
        if self.kind not in ("HhatE", "HhatE0"):
            raise ValidationError(f"re/im parts are defined for HhatE, not {self.kind}")

    def to_triplets(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def _check_pots(g: Grid, pots: PotentialPair | None) -> PotentialPair:
    if pots is None:
        return PotentialPair.zero(g)
    g.check_same(pots.grid)
    return pots


def _L_block(g: Grid, mu: float, U_int: np.ndarray, order: int) -> sp.csr_matrix:
    return (-laplacian(g, order) + sp.diags(mu + U_int)).tocsr()


def assemble_H(g: Grid, mu: float, pots: PotentialPair | None, order: int = 2) -> BlockOperator:
    """[[ -Delta + mu + U, W ], [ -W, Delta - mu - U ]]."""
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    pots = _check_pots(g, pots)
    L = _L_block(g, mu, g.to_interior(pots.U), order)
    Wd = sp.diags(g.to_interior(pots.W)).tocsr()
    kind = "H"
    return BlockOperator(g, ((L, Wd), (-Wd, -L)), kind, float(mu), None, order, pots)


def assemble_H0(g: Grid, mu: float, order: int = 2) -> BlockOperator:
    op = assemble_H(g, mu, None, order)
    return BlockOperator(g, op.blocks, "H0", op.mu, None, order, op.potentials)


def assemble_HhatE(
    g: Grid, mu: float, E: complex, pots: PotentialPair | None, order: int = 2
) -> BlockOperator:
    """[[ L - E, W ], [ W, L + E ]] with L = -Delta + mu + U."""
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    pots = _check_pots(g, pots)
    E = complex(E)
    n = g.n_interior
    L = _L_block(g, mu, g.to_interior(pots.U), order).astype(complex)
    Wd = sp.diags(g.to_interior(pots.W)).tocsr().astype(complex)
    eye = sp.identity(n, format="csr")
    kind = "HhatE" if np.any(pots.U) or np.any(pots.W) else "HhatE0"
    return BlockOperator(g, ((L - E * eye, Wd), (Wd, L + E * eye)), kind, float(mu), E, order, pots)


@dataclass(frozen=True, eq=False)
class LminusOperator:
    matrix: sp.csr_matrix
    smallest_eigenvalue: float
    positivity_tol: float = 1e-8

    @property
    def positive(self) -> bool:
        """Positivity condition L_- >= 0 (up to ``positivity_tol``)."""
        return self.smallest_eigenvalue >= -self.positivity_tol


def smallest_symmetric_eigenvalue(A: sp.spmatrix) -> float:
    A = sp.csr_matrix(A)
    m = A.shape[0]
    if m <= 400:
        return float(np.linalg.eigvalsh(A.toarray())[0])
    diag = A.diagonal()
    offdiag = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    lower = float(np.min(diag - offdiag)) - 1.0
    v0 = np.ones(m)
    vals = spla.eigsh(A, k=1, sigma=lower, which="LM", v0=v0, return_eigenvectors=False)
    return float(vals[0])


def assemble_Lminus(g: Grid, mu: float, pots: PotentialPair | None, order: int = 2) -> LminusOperator:
    """L_- = -Delta + mu + U - W and its smallest eigenvalue."""
    pots = _check_pots(g, pots)
    mat = _L_block(g, mu, g.to_interior(pots.U - pots.W), order)
    return LminusOperator(mat, smallest_symmetric_eigenvalue(mat))


_SIGMA3 = "sigma3"
_SIGMA1 = "sigma1"


def symmetry_conjugate(H: BlockOperator, which: str) -> BlockOperator:
    """Conjugate by diag(1, -1) (``"sigma3"``) or by the block swap (``"sigma1"``)."""
    (a, b), (c, d) = H.blocks
    if which == _SIGMA3:
        blocks = ((a, -b), (-c, d))
    elif which == _SIGMA1:
        blocks = ((d, c), (b, a))
    else:
        raise ValidationError(f"unknown conjugation {which!r}")
    return BlockOperator(H.grid, blocks, H.kind, H.mu, H.energy, H.order, H.potentials)


@dataclass(frozen=True, eq=False)
class FactorizedResolvent:
    shift: complex
    lu: object
    fill: int
    condition: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        return self.lu.solve(rhs)


_CONDITION_LIMIT = 1e12
_factor_cache: "weakref.WeakKeyDictionary[BlockOperator, dict]" = weakref.WeakKeyDictionary()


def _shifted(H: BlockOperator, z: complex) -> sp.csc_matrix:
    eye = sp.identity(H.shape[0], format="csc", dtype=complex)
    return (H.matrix - z * eye).tocsc()


def factorize(H: BlockOperator, z: complex, check_condition: bool = True) -> FactorizedResolvent:
    """Sparse LU of (H - z) with a 1-norm condition estimate.

    Raises SingularShiftError when the factorization fails or the condition
    estimate exceeds 1e12.
    """
    z = complex(z)
    A = _shifted(H, z)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularShiftError(f"(H - z) is singular at z={z}: {exc}", shift=z, condition=np.inf) from exc
    cond = np.nan
    if check_condition:
        n = A.shape[0]
        inv = spla.LinearOperator(
            A.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="H"), dtype=complex
        )
        with np.errstate(all="ignore"):
            inv_norm = spla.onenormest(inv)
        cond = float(spla.norm(A, 1) * inv_norm)
        if not np.isfinite(cond) or cond > _CONDITION_LIMIT:
            raise SingularShiftError(
                f"(H - z) is numerically singular at z={z} (condition ~ {cond:.2e})",
                shift=z,
                condition=cond,
            )
    fill = int(lu.L.nnz + lu.U.nnz)
    return FactorizedResolvent(z, lu, fill, cond)


def _cached_factor(H: BlockOperator, z: complex) -> FactorizedResolvent:
    per_op = _factor_cache.setdefault(H, {})
    if z not in per_op:
        per_op[z] = factorize(H, z)
    return per_op[z]


def apply_resolvent(H: BlockOperator, z: complex, rhs, rtol: float = 1e-10):
    """Solve (H - z) v = rhs; returns the same type as ``rhs``."""
    z = complex(z)
    b = rhs.to_vector() if isinstance(rhs, Vec2Field) else np.asarray(rhs, dtype=complex)
    fac = _cached_factor(H, z)
    v = fac.solve(b)
    r = H.matrix @ v - z * v - b
    bn = np.linalg.norm(b)
    rel = np.linalg.norm(r) / bn if bn else np.linalg.norm(r)
    if rel > rtol:
        # one step of iterative refinement
        v = v - fac.solve(r)
        r = H.matrix @ v - z * v - b
        rel = np.linalg.norm(r) / bn if bn else np.linalg.norm(r)
        if rel > rtol:
            raise SingularShiftError(
                f"resolvent residual {rel:.2e} exceeds {rtol:.1e} at z={z}",
                shift=z,
                condition=fac.condition,
            )
    if isinstance(rhs, Vec2Field):
        return Vec2Field.from_vector(H.grid, v)
    return v


def perturbation_resolvent_norm(
    H: BlockOperator, H0: BlockOperator, lam: float, iters: int = 60, seed: int = 0
) -> float:
    """Power-iteration estimate of ||V (H0 + i lam)^{-1}|| with V = H - H0."""
    V = (H.matrix - H0.matrix).tocsr()
    A = (H0.matrix + 1j * lam * sp.identity(H0.shape[0], format="csr")).tocsc()
    lu = spla.splu(A)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = V @ lu.solve(x)
        # adjoint: (V R)^* = R^* V^*
        z = lu.solve(V.conj().T @ y, trans="H")
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        est = float(np.sqrt(nz))
        x = z / nz
    return est


def resolvent_factorization_residual(
    H: BlockOperator, H0: BlockOperator, z: complex, rhs: np.ndarray
) -> float:
    """Relative gap between (H - z)^{-1} b and (H0 - z)^{-1} (1 + V (H0 - z)^{-1})^{-1} b."""
    z = complex(z)
    b = np.asarray(rhs, dtype=complex)
    direct = apply_resolvent(H, z, b)
    V = (H.matrix - H0.matrix).tocsr()
    lu0 = spla.splu(_shifted(H0, z))
    m = b.size
    op = spla.LinearOperator((m, m), matvec=lambda w: w + V @ lu0.solve(w), dtype=complex)
    w, info = spla.gmres(op, b, rtol=1e-13, atol=0.0, restart=min(m, 200), maxiter=50)
    if info != 0:
        log.warning("GMRES for the factorized resolvent returned info=%s", info)
    factored = lu0.solve(w)
    return float(np.linalg.norm(factored - direct) / np.linalg.norm(direct))
