"""Linearization, spectrum, participation factors and stability verdicts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .model import rhs
from .state import StateLayout

JAC_REL_STEP = 1e-6


@dataclass
class ModalReport:
    eigenvalues: np.ndarray          # complex, 1/s
    max_real: float
    critical_index: int
    frequencies_hz: np.ndarray       # |Im| / 2 pi, per mode
    participation: np.ndarray        # P[state, mode], columns sum to 1
    damping_ratios: np.ndarray       # -Re / |lambda|


def jacobian(spec, x) -> np.ndarray:
    """Central-difference Jacobian of rhs at `x`.

    Per-state step 1e-6 * max(1, |x_i|); both perturbation signs are
    evaluated in one batched rhs call.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = JAC_REL_STEP * np.maximum(1.0, np.abs(x))
    shifts = np.diag(h)
    X = np.concatenate([x[:, None] + shifts, x[:, None] - shifts], axis=1)
    F = rhs(spec, X)
    return (F[:, :n] - F[:, n:]) / (2.0 * h)[None, :]


def jacobian_exact(spec, x) -> np.ndarray:
    """Complex-step Jacobian: exact to machine precision.

    Used in the boundary corrector and hot sweep loops; the
    central-difference `jacobian` remains the independent cross-check.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = 1e-100
    X = x[:, None] + 1j * h * np.eye(n)
    F = rhs(spec, X)
    return F.imag / h


def jacobian_of(f, x, rel_step=JAC_REL_STEP):
    """Central-difference Jacobian of an arbitrary batched map f: (n,B)->(m,B)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    shifts = np.diag(h)
    X = np.concatenate([x[:, None] + shifts, x[:, None] - shifts], axis=1)
    F = np.asarray(f(X))
    return (F[:, :n] - F[:, n:]) / (2.0 * h)[None, :]


def spectrum(J: np.ndarray) -> ModalReport:
    """Dense eigensolve with right/left-eigenvector participation factors."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise NumericalError("spectrum needs a square matrix")
    if not np.all(np.isfinite(J)):
        raise NumericalError("non-finite Jacobian")
    try:
        w, vl, vr = scipy.linalg.eig(J, left=True, right=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    # participation of state k in mode i: |r_ki l_ik|, column-normalized
    P = np.abs(vr * vl.conj())
    colsum = P.sum(axis=0)
    colsum[colsum == 0.0] = 1.0
    P = P / colsum[None, :]
    max_real = float(np.max(w.real))
    return ModalReport(
        eigenvalues=w,
        max_real=max_real,
        critical_index=int(np.argmax(w.real)),
        frequencies_hz=np.abs(w.imag) / (2.0 * np.pi),
        participation=P,
        damping_ratios=-w.real / np.maximum(np.abs(w), 1e-300),
    )


def spectrum_of(spec, x, exact=True) -> ModalReport:
    J = jacobian_exact(spec, x) if exact else jacobian(spec, x)
    return spectrum(J)


def is_stable(report: ModalReport, deadband: float = 1e-8) -> str:
    """Tristate verdict: 'stable' | 'unstable' | 'marginal'."""
    if deadband < 0:
        raise ValueError("deadband must be >= 0")
    if report.max_real < -deadband:
        return "stable"
    if report.max_real > deadband:
        return "unstable"
    return "marginal"


def top_participants(report: ModalReport, mode: int, layout: StateLayout, k=5):
    """The k states with the largest participation in one mode."""
    names = layout.names()
    col = report.participation[:, mode]
    order = np.argsort(col)[::-1][:k]
    return [(names[i], float(col[i])) for i in order]
