"""Spectral and decay toolkit for NLS-linearized matrix Schrodinger operators.

Typical use::

    from nlsdecay import make_grid, NonlinearitySpec, closed_form_soliton, solve_ground_state
    from nlsdecay import linearization_potentials, assemble_H, gap_eigenvalues, jordan_chain

    g = make_grid(1, 20.0, 1024)
    nl = NonlinearitySpec(1.0)
    phi = solve_ground_state(g, 1.0, nl, closed_form_soliton(g, 1.0, nl).field)
    H = assemble_H(g, 1.0, linearization_potentials(phi, nl))
    S = gap_eigenvalues(H, margin=0.05, imag_cap=3.5)
    J = jordan_chain(H, 0.0)
"""

from .decay import (
    DecayParameters,
    DecayReport,
    LemmaReport,
    WeightField,
    chain_decay_check,
    commutator,
    conjugation_identity_residual,
    exterior_quotient,
    fit_decay_rate,
    lemma3_check,
    select_radius,
    tail_profile,
    weight_field,
    weighted_l2,
)
from .errors import (
    ContourError,
    ConvergenceError,
    DegenerateStripError,
    GridMismatchError,
    NLSDecayError,
    RankIndeterminateError,
    SingularShiftError,
    ValidationError,
    ZeroSolutionError,
)
from .grid import CutoffSpec, Grid, RealField, Vec2Field, bracket_x, cutoff_field, laplacian, make_grid
from .nls import (
    NonlinearitySpec,
    PotentialPair,
    StationaryProfile,
    closed_form_soliton,
    linearization_potentials,
    nls_residual,
    solve_ground_state,
)
from .operators import (
    BlockOperator,
    apply_resolvent,
    assemble_H,
    assemble_H0,
    assemble_HhatE,
    assemble_Lminus,
    symmetry_conjugate,
)
from .spectral import (
    JordanChain,
    SpectralConfig,
    SpectralSet,
    dense_spectrum,
    gap_eigenvalues,
    jordan_chain,
    match_spectra,
    riesz_projection,
    symmetry_check,
)

__version__ = "0.1.0"
