"""Joint transmit precoders: null-steering projections and a distortionless
minimum-power variant.

All schemes operate on response vectors of length M (elements of one array,
or of both arrays stacked implicitly by summing per-array responses). Gram
matrices are inverted through a truncated-SVD pseudo-inverse so that
near-duplicate constraints merge instead of exploding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_REL_TOL = 1e-10


class InfeasibleConstraints(ValueError):
    """Constraint set leaves no degrees of freedom for a beam."""


class InversionReport(NamedTuple):
    rank: int
    truncated: bool


def regularized_inverse(a, rel_tol: float = DEFAULT_REL_TOL):
    """Truncated-SVD pseudo-inverse of a matrix.

    Singular values below rel_tol times the largest are dropped.

    Returns
    -------
    inverse : ndarray
        Pseudo-inverse with the transposed shape of `a`.
    report : InversionReport
        Rank actually used and whether any direction was dropped.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=complex), InversionReport(0, True)
    keep = s > rel_tol * s[0]
    rank = int(np.count_nonzero(keep))
    inv = (vh[:rank].conj().T / s[:rank]) @ u[:, :rank].conj().T
    return inv, InversionReport(rank, rank < s.size)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Desired response plus the responses to suppress.

    desired : (M,) complex response the beam should serve.
    interferers : sequence of (M,) responses to null.
    derivative_vectors : extra (M,) vectors nulled alongside the
        interferers; used to flatten the pattern around chosen directions.
    """

    desired: np.ndarray
    interferers: Sequence[np.ndarray] = ()
    derivative_vectors: Sequence[np.ndarray] = ()

    def __post_init__(self):
        desired = np.asarray(self.desired, dtype=complex)
        if desired.ndim != 1 or desired.size == 0:
            raise ValueError("desired must be a nonempty 1-d vector")
        if not np.isfinite(desired).all():
            raise ValueError("desired must be finite")
        interferers = tuple(np.asarray(v, dtype=complex) for v in self.interferers)
        derivs = tuple(np.asarray(v, dtype=complex) for v in self.derivative_vectors)
        for v in interferers + derivs:
            if v.shape != desired.shape:
                raise ValueError("all constraint vectors must match the desired shape")
            if not np.isfinite(v).all():
                raise ValueError("constraint vectors must be finite")
        object.__setattr__(self, "desired", desired)
        object.__setattr__(self, "interferers", interferers)
        object.__setattr__(self, "derivative_vectors", derivs)

    @property
    def num_elements(self) -> int:
        return self.desired.shape[0]


@dataclass(frozen=True, eq=False)
class Precoder:
    weights: np.ndarray
    method: str
    inversion: InversionReport = field(default=InversionReport(0, False))


def _check_feasible(num_constraints: int, num_elements: int, method: str):
    if num_constraints >= num_elements:
        raise InfeasibleConstraints(
            f"{method}: {num_constraints} constraints leave no freedom "
            f"for {num_elements} elements"
        )


def _project_out(desired, constraints, rel_tol):
    """Project `desired` onto the orthogonal complement of the constraint span."""
    if len(constraints) == 0:
        return desired.copy(), InversionReport(0, False)
    e = np.column_stack(constraints)
    gram = e.conj().T @ e
    ginv, report = regularized_inverse(gram, rel_tol)
    coeff = ginv @ (e.conj().T @ desired)
    return desired - e @ coeff, report


def zfp(cs: ConstraintSet, rel_tol: float = DEFAULT_REL_TOL) -> Precoder:
    """Zero-forcing projection onto the interference-free subspace."""
    _check_feasible(len(cs.interferers), cs.num_elements, "zfp")
    w, report = _project_out(cs.desired, cs.interferers, rel_tol)
    return Precoder(w, "zfp", report)


def zfp_d(cs: ConstraintSet, rel_tol: float = DEFAULT_REL_TOL) -> Precoder:
    """Zero-forcing projection that also nulls the derivative vectors.

    Flattens the pattern around the nulled directions, trading beamforming
    gain for robustness to angle error. Zero derivative vectors are merged
    away by the truncated inverse, reducing to plain zfp.
    """
    constraints = tuple(cs.interferers) + tuple(cs.derivative_vectors)
    _check_feasible(len(constraints), cs.num_elements, "zfp_d")
    w, report = _project_out(cs.desired, constraints, rel_tol)
    return Precoder(w, "zfp-d", report)


def zfp_general(
    left: ConstraintSet, right: ConstraintSet, rel_tol: float = DEFAULT_REL_TOL
) -> Precoder:
    """Zero-forcing projection with per-array constraint blocks.

    The desired response is the sum of the per-array desired responses,
    but every interferer contributes its left and right responses as
    separate nulls, which is stricter than nulling their sum.
    """
    if left.desired.shape != right.desired.shape:
        raise ValueError("left and right blocks must have the same element count")
    if len(left.interferers) != len(right.interferers):
        raise ValueError("left and right blocks must list the same interferers")
    constraints = tuple(left.interferers) + tuple(right.interferers)
    _check_feasible(len(constraints), left.num_elements, "zfp_general")
    desired = left.desired + right.desired
    w, report = _project_out(desired, constraints, rel_tol)
    return Precoder(w, "zfp-general", report)


def conventional_zf(cs: ConstraintSet, rel_tol: float = DEFAULT_REL_TOL) -> Precoder:
    """Single-array zero-forcing baseline; same projection, no cooperation."""
    _check_feasible(len(cs.interferers), cs.num_elements, "conventional_zf")
    w, report = _project_out(cs.desired, cs.interferers, rel_tol)
    return Precoder(w, "conventional-zf", report)


def mpdr(cs: ConstraintSet, rel_tol: float = DEFAULT_REL_TOL) -> Precoder:
    """Minimum-power distortionless response beamformer.

    Minimizes total response power over the constraint directions subject
    to unit gain on the desired response:
    w = A^+ d / (d^H A^+ d) with A built from the interferer responses and
    the desired response itself.
    """
    d = cs.desired
    if not np.linalg.norm(d) > 0:
        raise InfeasibleConstraints("mpdr: desired response must be nonzero")
    e = np.column_stack(tuple(cs.interferers) + (d,))
    a = e @ e.conj().T
    ainv, report = regularized_inverse(a, rel_tol)
    x = ainv @ d
    denom = float(np.real(d.conj() @ x))
    if denom <= 0:
        raise InfeasibleConstraints("mpdr: constraint matrix annihilates the desired response")
    return Precoder(x / denom, "mpdr", report)


def zfp_bank(steering, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Zero-forcing projection of every column against all the others.

    For a full-rank (M, n) response matrix S this equals calling zfp once
    per column with the rest as interferers, via the identity
    P_k = S G^{-1} e_k / (G^{-1})_{kk} with G = S^H S, at the cost of one
    Gram inversion. Falls back to the per-column path whenever the Gram
    matrix needs truncation.
    """
    s = np.asarray(steering, dtype=complex)
    if s.ndim != 2 or s.shape[1] == 0:
        raise ValueError("steering must be (M, n) with n >= 1")
    m, n = s.shape
    _check_feasible(n - 1, m, "zfp_bank")
    if n == 1:
        return s.copy()
    gram = s.conj().T @ s
    ginv, report = regularized_inverse(gram, rel_tol)
    diag = np.real(np.diag(ginv))
    if not report.truncated and (diag > 0).all():
        return s @ (ginv / diag[np.newaxis, :])
    cols = []
    for k in range(n):
        others = tuple(s[:, j] for j in range(n) if j != k)
        cols.append(zfp(ConstraintSet(s[:, k], others), rel_tol).weights)
    return np.column_stack(cols)
