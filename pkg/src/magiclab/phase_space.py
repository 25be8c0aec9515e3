"""Discrete phase space of odd-prime qudits.

Phase points of an ``n``-qudit register are enumerated row-major over qudits,
and within one qudit lexicographically in ``(a1, a2)``, so the flat index of a
point is ``sum_k (a1_k * d + a2_k) * d**(2 * (n - 1 - k))``.  All Wigner tables
in this package use that order.

Transforms are evaluated mode by mode: the ``d**2 x d**2`` single-qudit map
``(i, j) -> u`` is contracted along each tensor factor in turn instead of
forming the ``d**n x d**n`` phase-point operators explicitly.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._validation import (
    ATOL,
    DimensionError,
    ValidationError,
    as_square,
    check_dimension,
    check_hermitian,
    num_qudits,
)

__all__ = [
    "PhasePoint",
    "WignerTable",
    "weyl_operator",
    "phase_point_operator",
    "phase_point_operators",
    "wigner_of_state",
    "wigner_of_measurement",
    "wigner_of_choi",
    "wigner_of_channel",
    "reconstruct",
    "propagate",
    "wigner_trace_norm",
    "wigner_spectral_norm",
    "transpose_point_map",
]


@dataclass(frozen=True)
class PhasePoint:
    """A point ``((a1, a2), ...)`` of the ``n``-qudit phase space."""

    components: tuple[tuple[int, int], ...]
    d: int = 3

    def __post_init__(self):
        check_dimension(self.d)
        if len(self.components) == 0:
            raise ValueError("a phase point needs at least one qudit")
        comps = tuple((int(a) % self.d, int(b) % self.d) for a, b in self.components)
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def index(self) -> int:
        idx = 0
        for a1, a2 in self.components:
            idx = idx * self.d * self.d + a1 * self.d + a2
        return idx

    @classmethod
    def from_index(cls, index: int, d: int = 3, n: int = 1) -> "PhasePoint":
        d2 = d * d
        if not 0 <= index < d2**n:
            raise IndexError(f"phase-point index {index} out of range for n={n}, d={d}")
        comps = []
        for _ in range(n):
            index, r = divmod(index, d2)
            comps.append(divmod(r, d))
        return cls(tuple(reversed(comps)), d)

    @classmethod
    def all(cls, d: int = 3, n: int = 1) -> list["PhasePoint"]:
        return [cls.from_index(k, d, n) for k in range(d ** (2 * n))]


def _as_point(point, d: int) -> PhasePoint:
    if isinstance(point, PhasePoint):
        if point.d != d:
            raise DimensionError(f"phase point has d={point.d}, expected {d}")
        return point
    point = tuple(point)
    if len(point) == 2 and all(np.isscalar(a) for a in point):
        return PhasePoint((point,), d)
    return PhasePoint(tuple(tuple(c) for c in point), d)


@functools.lru_cache(maxsize=None)
def _shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return X, Z


@functools.lru_cache(maxsize=None)
def _single_weyl(d: int) -> np.ndarray:
    X, Z = _shift_clock(d)
    tau = np.exp((d + 1) * np.pi * 1j / d)
    T = np.empty((d * d, d, d), dtype=complex)
    for a1 in range(d):
        for a2 in range(d):
            # reduce the exponent mod 2d; tau has order 2d (order d for odd d)
            phase = tau ** (-((a1 * a2) % (2 * d)))
            T[a1 * d + a2] = phase * np.linalg.matrix_power(Z, a1) @ np.linalg.matrix_power(X, a2)
    T.flags.writeable = False
    return T


@functools.lru_cache(maxsize=None)
def phase_point_operators(d: int = 3) -> np.ndarray:
    """Single-qudit phase-point operators ``A_u`` stacked as ``(d*d, d, d)``."""
    check_dimension(d)
    T = _single_weyl(d)
    A0 = T.sum(axis=0) / d
    A = np.einsum("uij,jk,ulk->uil", T, A0, T.conj())
    # the operators are monomial with entries that are d-th roots of unity
    A = np.where(np.abs(A) < 1e-12, 0, A)
    A.flags.writeable = False
    return A


@functools.lru_cache(maxsize=None)
def transpose_point_map(d: int = 3) -> np.ndarray:
    """Permutation ``p`` with ``A_u.T == A_{p[u]}`` for single-qudit points."""
    A = phase_point_operators(d)
    perm = np.empty(d * d, dtype=int)
    for u in range(d * d):
        match = [v for v in range(d * d) if np.allclose(A[u].T, A[v])]
        perm[u] = match[0]
    perm.flags.writeable = False
    return perm


def weyl_operator(d: int, point) -> np.ndarray:
    """Heisenberg-Weyl operator ``tau^(-a1 a2) Z^a1 X^a2`` (tensor product over qudits)."""
    d = check_dimension(d)
    pt = _as_point(point, d)
    T = _single_weyl(d)
    out = np.ones((1, 1), dtype=complex)
    for a1, a2 in pt.components:
        out = np.kron(out, T[a1 * d + a2])
    return out


def phase_point_operator(d: int, point) -> np.ndarray:
    """Phase-point operator ``A_u``; multi-qudit points give tensor products."""
    d = check_dimension(d)
    pt = _as_point(point, d)
    A = phase_point_operators(d)
    out = np.ones((1, 1), dtype=complex)
    for a1, a2 in pt.components:
        out = np.kron(out, A[a1 * d + a2])
    return out


@dataclass(frozen=True, eq=False)
class WignerTable:
    """Quasi-probability table over phase points.

    ``values`` has shape ``(d**(2*n_in), d**(2*n_out))`` for channels (rows are
    conditioning points ``u``, columns output points ``v``).  Operator tables
    (``n_in == 0``) drop the leading axis and have shape ``(d**(2*n_out),)``.
    """

    d: int
    n_in: int
    n_out: int
    values: np.ndarray

    def __post_init__(self):
        check_dimension(self.d)
        vals = np.array(self.values, dtype=float)
        d2 = self.d**2
        shape = (d2**self.n_out,) if self.n_in == 0 else (d2**self.n_in, d2**self.n_out)
        if vals.shape != shape:
            raise DimensionError(f"table values have shape {vals.shape}, expected {shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def is_operator(self) -> bool:
        return self.n_in == 0

    def row_norms(self) -> np.ndarray:
        """``sum_v |W(v|u)|`` per row (a single entry for operator tables)."""
        return np.abs(np.atleast_2d(self.values)).sum(axis=1)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self) -> dict:
        return {"d": self.d, "n_in": self.n_in, "n_out": self.n_out, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "WignerTable":
        return cls(int(data["d"]), int(data["n_in"]), int(data["n_out"]), np.asarray(data["values"]))


def _kernels(d: int):
    A = phase_point_operators(d)
    d2 = d * d
    # tr[A_u X] = sum_ij (A_u)_ji X_ij
    plain = A.transpose(0, 2, 1).reshape(d2, d2)
    # tr[A_u^T X] = sum_ij (A_u)_ij X_ij
    transposed = A.reshape(d2, d2)
    return plain, transposed


def _pairs_tensor(X: np.ndarray, d: int, n: int) -> np.ndarray:
    """``(d**n, d**n)`` matrix to a tensor with one ``d*d`` axis per qudit."""
    t = X.reshape((d,) * (2 * n))
    perm = [ax for k in range(n) for ax in (k, n + k)]
    return t.transpose(perm).reshape((d * d,) * n)


def _unpair_tensor(t: np.ndarray, d: int, n: int) -> np.ndarray:
    t = t.reshape((d,) * (2 * n))
    perm = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    return t.transpose(perm).reshape(d**n, d**n)


def _apply_modes(t: np.ndarray, kernels: Sequence[np.ndarray]) -> np.ndarray:
    for k, K in enumerate(kernels):
        t = np.moveaxis(np.tensordot(K, t, axes=([1], [k])), 0, k)
    return t


def _transform(X: np.ndarray, d: int, n: int, transposed: Iterable[bool]) -> np.ndarray:
    plain, trans = _kernels(d)
    ks = [trans if flag else plain for flag in transposed]
    out = _apply_modes(_pairs_tensor(X, d, n), ks)
    return out.reshape(-1)


def wigner_of_state(X, d: int = 3, tol: float = ATOL) -> WignerTable:
    """Wigner function ``W_X(u) = tr[A_u X] / d**n`` of a Hermitian operator."""
    X = as_square(X)
    n = num_qudits(X.shape[0], d)
    check_hermitian(X, tol)
    vals = _transform(X, d, n, [False] * n)
    return WignerTable(d, 0, n, vals.real / d**n)


def wigner_of_measurement(E, d: int = 3, tol: float = ATOL) -> WignerTable:
    """Measurement-effect representation ``W(E|u) = tr[E A_u]`` for ``0 <= E <= 1``."""
    E = as_square(E, "effect")
    n = num_qudits(E.shape[0], d)
    check_hermitian(E, tol, "effect")
    ev = np.linalg.eigvalsh((E + E.conj().T) / 2)
    if ev[0] < -tol or ev[-1] > 1 + tol:
        raise ValidationError(f"effect eigenvalues must lie in [0, 1], got [{ev[0]:.3g}, {ev[-1]:.3g}]")
    vals = _transform(E, d, n, [False] * n)
    return WignerTable(d, 0, n, vals.real)


def wigner_of_choi(J, d: int, n_in: int, n_out: int) -> WignerTable:
    """Table ``tr[(A_u^T (x) A_v) J] / d**n_out`` of a Hermiticity-preserving map."""
    J = as_square(J, "Choi matrix")
    if J.shape[0] != d ** (n_in + n_out):
        raise DimensionError(f"Choi matrix of size {J.shape[0]} does not match {n_in}->{n_out} qudits")
    vals = _transform(J, d, n_in + n_out, [True] * n_in + [False] * n_out)
    vals = vals.real.reshape(d ** (2 * n_in), d ** (2 * n_out)) / d**n_out
    if n_in == 0:
        vals = vals[0]
    return WignerTable(d, n_in, n_out, vals)


def wigner_of_channel(channel) -> WignerTable:
    """Conditional quasi-probability table ``W_N(v|u)`` of a channel."""
    return wigner_of_choi(channel.choi, channel.d, channel.n_in, channel.n_out)


def reconstruct(table: WignerTable) -> np.ndarray:
    """Inverse of :func:`wigner_of_state`: ``X = sum_u W(u) A_u``."""
    if not table.is_operator:
        raise DimensionError("only operator tables (n_in == 0) can be reconstructed")
    d, n = table.d, table.n_out
    A = phase_point_operators(d)
    K = A.reshape(d * d, d * d).T  # (i*d + j, u) -> (A_u)_ij
    t = table.values.reshape((d * d,) * n).astype(complex)
    return _unpair_tensor(_apply_modes(t, [K] * n), d, n)


def propagate(state_table: WignerTable, channel_table: WignerTable, targets: Sequence[int]) -> WignerTable:
    """Push an operator table through a channel table acting on ``targets``.

    ``W_out(v, y) = sum_u W_N(v|u) W(u, y)`` with the contraction restricted
    to the target qudits; the other qudits keep their phase points.
    """
    if not state_table.is_operator or channel_table.is_operator:
        raise DimensionError("propagate expects an operator table and a channel table")
    if state_table.d != channel_table.d:
        raise DimensionError("tables use different qudit dimensions")
    d, n = state_table.d, state_table.n_out
    targets = [int(t) for t in targets]
    k = len(targets)
    if k != channel_table.n_in or channel_table.n_out != k:
        raise DimensionError(
            f"channel maps {channel_table.n_in}->{channel_table.n_out} qudits but {k} targets were given"
        )
    if len(set(targets)) != k or any(not 0 <= t < n for t in targets):
        raise IndexError(f"targets {targets} invalid for a {n}-qudit table")
    t = state_table.values.reshape((d * d,) * n)
    t = np.moveaxis(t, targets, list(range(k)))
    rest = t.shape[k:]
    out = channel_table.values.T @ t.reshape(d ** (2 * k), -1)
    out = np.moveaxis(out.reshape((d * d,) * k + rest), list(range(k)), targets)
    return WignerTable(d, 0, n, out.reshape(-1))


def wigner_trace_norm(V, d: int = 3, tol: float = ATOL) -> float:
    """``sum_u |W_V(u)|``."""
    return float(np.abs(wigner_of_state(V, d, tol).values).sum())


def wigner_spectral_norm(V, d: int = 3, tol: float = ATOL) -> float:
    """``max_u |tr[A_u V]|``."""
    tab = wigner_of_state(V, d, tol)
    return float(np.abs(tab.values).max() * d**tab.n_out)


def phase_points(d: int = 3, n: int = 1) -> list[tuple[tuple[int, int], ...]]:
    """All phase points in table order, as tuples of ``(a1, a2)`` pairs."""
    single = [(a1, a2) for a1 in range(d) for a2 in range(d)]
    return list(itertools.product(single, repeat=n))
