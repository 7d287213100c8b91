"""Two-level complex linear algebra.

States are complex arrays of shape ``(2,)`` and operators complex arrays of
shape ``(2, 2)``. States need not be normalized: PT evolution changes the
Hermitian norm, so every probability-producing routine normalizes explicitly.
"""

from __future__ import annotations

import numpy as np

from ptqkd.errors import DomainError

SQRT1_2 = 1.0 / np.sqrt(2.0)

IDENTITY = np.eye(2, dtype=complex)
PARITY = np.array([[0, 1], [1, 0]], dtype=complex)
HADAMARD = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)


def _checked(x, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=complex)
    if arr.shape != shape:
        raise DomainError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} has non-finite entries")
    return arr


def state(a0, a1=None) -> np.ndarray:
    """Build a state vector from two amplitudes or from a length-2 sequence."""
    v = _checked(a0 if a1 is None else (a0, a1), (2,), "state")
    if not np.any(v):
        raise DomainError("state vector is zero")
    return v


def mat(m) -> np.ndarray:
    return _checked(m, (2, 2), "matrix")


def mat_apply(m, v) -> np.ndarray:
    return mat(m) @ _checked(v, (2,), "state")


def herm_inner(u, v) -> complex:
    """Hermitian inner product, conjugate-linear in ``u``."""
    return complex(np.vdot(_checked(u, (2,), "state"), _checked(v, (2,), "state")))


def herm_norm2(v) -> float:
    return herm_inner(v, v).real


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Hermitian norm."""
    v = state(v)
    return v / np.sqrt(herm_norm2(v))


def herm_projector(v) -> np.ndarray:
    """Orthogonal rank-1 projector onto ``v``; scale invariant."""
    v = state(v)
    return np.outer(v, v.conj()) / herm_norm2(v)


def dagger(m) -> np.ndarray:
    return mat(m).conj().T


def commutator(a, b) -> np.ndarray:
    return mat(a) @ mat(b) - mat(b) @ mat(a)


def approx_eq(a, b, tol: float = 1e-12) -> bool:
    """True iff the largest entrywise absolute difference is at most ``tol``."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return False
    return bool(np.max(np.abs(a - b), initial=0.0) <= tol)
