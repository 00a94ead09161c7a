"""Stationary NLS profiles and the potentials of the linearized operator.

The nonlinearity is the power family F(s) = s**sigma.  Profiles are real and
live on the full grid with zero boundary samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, ValidationError, ZeroSolutionError
from .grid import Grid, RealField, laplacian

log = logging.getLogger(__name__)

__all__ = [
    "NonlinearitySpec",
    "StationaryProfile",
    "PotentialPair",
    "closed_form_soliton",
    "solve_ground_state",
    "linearization_potentials",
    "nls_residual",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be finite and positive, got {self.sigma}")

    def F(self, s):
        return np.power(np.asarray(s, dtype=float), self.sigma)

    def dF(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return self.sigma * np.power(s, self.sigma - 1.0)

    def dF_times_s(self, s):
        """F'(s) s, finite at s = 0 for every sigma > 0."""
        return self.sigma * self.F(s)


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    grid: Grid
    values: np.ndarray
    mu: float
    residual: float
    order: int = 2
    iterations: int = 0
    sign_changing: bool = False

    @property
    def field(self) -> RealField:
        return RealField(self.grid, self.values)


@dataclass(frozen=True, eq=False)
class PotentialPair:
    grid: Grid
    U: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        for name in ("U", "W"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.size,):
                raise ValidationError(f"{name} has {arr.size} samples, expected {self.grid.size}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, arr)

    @property
    def tail(self) -> float:
        """max of |U| + |W| over |x| >= 0.9 L (decay-at-infinity diagnostic)."""
        mask = self.grid.radius >= 0.9 * self.grid.half_length
        return float(np.max(np.abs(self.U[mask]) + np.abs(self.W[mask])))

    def sup_beyond(self, R: float) -> float:
        mask = self.grid.radius >= R
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(self.U[mask]) + np.abs(self.W[mask])))

    @classmethod
    def zero(cls, grid: Grid) -> "PotentialPair":
        return cls(grid, np.zeros(grid.size), np.zeros(grid.size))


def _require_1d(g: Grid):
    if g.dim != 1:
        raise ValidationError("stationary profiles are only supported for d = 1")


def _residual_vector(g, phi_int, mu, nl, lap):
    return -(lap @ phi_int) + mu * phi_int - nl.F(phi_int**2) * phi_int


def nls_residual(p: StationaryProfile, nl: NonlinearitySpec, order: int | None = None) -> float:
    """Sup norm of (-Delta + mu) phi - F(phi^2) phi over interior nodes."""
    g = p.grid
    lap = laplacian(g, p.order if order is None else order)
    r = _residual_vector(g, g.to_interior(p.values), p.mu, nl, lap)
    return float(np.max(np.abs(r))) if r.size else 0.0


def closed_form_soliton(g: Grid, mu: float, nl: NonlinearitySpec, order: int = 2) -> StationaryProfile:
    """Sample phi(x) = ((sigma+1) mu)^(1/(2 sigma)) sech^(1/sigma)(sigma sqrt(mu) x)."""
    _require_1d(g)
    if not mu > 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    s = nl.sigma
    x = g.axis
    amp = ((s + 1.0) * mu) ** (1.0 / (2.0 * s))
    phi = amp / np.cosh(s * math.sqrt(mu) * x) ** (1.0 / s)
    phi[0] = phi[-1] = 0.0
    prof = StationaryProfile(g, phi, float(mu), 0.0, order)
    res = nls_residual(prof, nl)
    return StationaryProfile(g, phi, float(mu), res, order)


def solve_ground_state(
    g: Grid,
    mu: float,
    nl: NonlinearitySpec,
    init: RealField | np.ndarray,
    tol: float = 1e-10,
    order: int = 2,
    max_iter: int = 50,
    zero_threshold: float = 1e-8,
) -> StationaryProfile:
    """Damped Newton iteration on phi -> (-Delta + mu) phi - F(phi^2) phi.

    The Jacobian is (-Delta + mu) - (F(phi^2) + 2 phi^2 F'(phi^2)).  Steps are
    halved until the residual sup norm decreases (at most 30 halvings).
    """
    _require_1d(g)
    if not tol > 0:
        raise ValidationError("tol must be positive")
    values = init.values if isinstance(init, RealField) else np.asarray(init, dtype=float)
    if values.shape != (g.size,):
        raise ValidationError("initial guess does not match the grid")
    lap = laplacian(g, order)
    phi = g.to_interior(values).astype(float).copy()
    eye = sp.identity(phi.size, format="csc")

    def resid(v):
        return _residual_vector(g, v, mu, nl, lap)

    r = resid(phi)
    rnorm = float(np.max(np.abs(r)))
    it = 0
    while rnorm >= tol:
        if float(np.max(np.abs(phi))) < zero_threshold:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})",
                last_residual=rnorm,
            )
        s2 = phi**2
        jac = (-lap + mu * eye - sp.diags(nl.F(s2) + 2.0 * nl.dF_times_s(s2))).tocsc()
        step = spla.spsolve(jac, r)
        t = 1.0
        for _ in range(30):
            trial = phi - t * step
            rt = resid(trial)
            tn = float(np.max(np.abs(rt)))
            if tn < rnorm:
                break
            t *= 0.5
        phi, r, rnorm = trial, rt, tn
        it += 1
        log.debug("newton step %d: residual %.3e (damping %.3g)", it, rnorm, t)

    if float(np.max(np.abs(phi))) < zero_threshold:
        raise ZeroSolutionError("converged to zero solution", last_residual=rnorm)
    full = g.from_interior(phi)
    sign_changing = bool(np.any(phi > zero_threshold) and np.any(phi < -zero_threshold))
    if sign_changing:
        log.warning("converged profile changes sign (not a positive ground state)")
    return StationaryProfile(g, full, float(mu), rnorm, order, it, sign_changing)


def linearization_potentials(
    p: StationaryProfile, nl: NonlinearitySpec, max_residual: float | None = None
) -> PotentialPair:
    """U = -F(phi^2) - F'(phi^2) phi^2 and W = -F'(phi^2) phi^2 for real phi."""
    if max_residual is not None and p.residual > max_residual:
        raise ValidationError(
            f"profile residual {p.residual:.3e} exceeds {max_residual:.3e}"
        )
    s = p.values**2
    W = -nl.dF_times_s(s)
    U = -nl.F(s) + W
    return PotentialPair(p.grid, U, W)
