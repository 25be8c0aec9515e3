"""Shared argument checks and numeric tolerances."""
from __future__ import annotations

import math

import numpy as np

#: absolute tolerance for Hermiticity / PSD / trace checks
ATOL = 1e-9


class DimensionError(ValueError):
    """Raised for unsupported or inconsistent qudit dimensions."""


class ValidationError(ValueError):
    """Raised when an operator fails a physical-validity check."""


def is_odd_prime(d: int) -> bool:
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        return False
    return all(d % k for k in range(3, math.isqrt(int(d)) + 1, 2))


def check_dimension(d: int) -> int:
    if not is_odd_prime(d):
        raise DimensionError(f"qudit dimension must be an odd prime, got {d!r}")
    return int(d)


def num_qudits(dim: int, d: int) -> int:
    """Return ``n`` with ``d**n == dim`` or raise."""
    check_dimension(d)
    n, rest = 0, int(dim)
    while rest > 1 and rest % d == 0:
        rest //= d
        n += 1
    if rest != 1 or n == 0:
        raise DimensionError(f"matrix dimension {dim} is not a positive power of {d}")
    return n


def as_square(X, name: str = "operator") -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {X.shape}")
    return X


def check_hermitian(X: np.ndarray, tol: float = ATOL, name: str = "operator") -> None:
    dev = np.abs(X - X.conj().T).max(initial=0.0)
    if dev > tol:
        raise ValidationError(f"{name} is not Hermitian (deviation {dev:.3g})")


def check_psd(X: np.ndarray, tol: float = ATOL, name: str = "operator") -> None:
    check_hermitian(X, tol, name)
    lo = np.linalg.eigvalsh((X + X.conj().T) / 2)[0]
    if lo < -tol:
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {lo:.3g})")


def check_state(rho: np.ndarray, tol: float = ATOL, name: str = "state") -> None:
    check_psd(rho, tol, name)
    tr = np.trace(rho).real
    if abs(tr - 1) > tol * max(1, rho.shape[0]):
        raise ValidationError(f"{name} does not have unit trace (trace {tr:.12g})")


def check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p
