"""Magic measures of states and channels.

Logarithms are base 2.  Channel quantities are evaluated on the Wigner table
of the Choi matrix, so ``mana_channel`` costs one mode-wise transform of a
``d**(n_in + n_out)``-dimensional operator.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import conic
from ._validation import ATOL, DimensionError, as_square, check_psd, check_state, num_qudits
from .channels import Channel, apply, identity, tensor
from .phase_space import (
    PhasePoint,
    phase_point_operators,
    transpose_point_map,
    wigner_of_channel,
    wigner_of_state,
)
from .serialization import SCHEMA_VERSION

__all__ = [
    "MeasureReport",
    "CPWPCheck",
    "sum_negativity",
    "mana_state",
    "mana_operator",
    "mana_channel",
    "is_cpwp",
    "max_thauma_state",
    "max_thauma_channel",
    "max_thauma_channel_dual",
    "robustness_wplus",
    "robustness_stab",
    "stabilizer_states",
    "amortized_lower_bound",
    "distillable_t_bound",
    "injectable_bounds",
    "T_STATE_THAUMA",
    "MAX_THAUMA_QUDITS",
]

#: log2(1 + 2 sin(pi/18)), the max-thauma of the qutrit T state
T_STATE_THAUMA = float(np.log2(1 + 2 * np.sin(np.pi / 18)))

#: thauma SDPs on more than this many qudits (input + output) need ``force=True``
MAX_THAUMA_QUDITS = 4


@dataclass
class MeasureReport:
    measure: str
    log2_value: float
    exp_value: float
    argmax_point: Optional[list] = None
    solver_status: str = "exact"
    gap: float = 0.0
    certificate: dict = field(default_factory=dict, repr=False)

    @property
    def value(self) -> float:
        return self.log2_value

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA_VERSION,
            "measure": self.measure,
            "log2_value": self.log2_value,
            "exp_value": self.exp_value,
            "solver_status": self.solver_status,
            "gap": self.gap,
        }
        if self.argmax_point is not None:
            out["argmax_point"] = self.argmax_point
        return out


@dataclass
class CPWPCheck:
    """Outcome of :func:`is_cpwp`; truthy when the channel is CPWP."""

    is_cpwp: bool
    min_entry: float
    witness: Optional[tuple] = None  # (u, v) phase points of the most negative entry

    def __bool__(self) -> bool:
        return self.is_cpwp

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "cpwp": self.is_cpwp, "min_entry": self.min_entry, "witness": self.witness}


# --- mana --------------------------------------------------------------------


def sum_negativity(rho, d: int = 3, tol: float = ATOL) -> float:
    rho = as_square(rho, "state")
    check_state(rho, tol)
    W = wigner_of_state(rho, d, tol).values
    return float(-W[W < 0].sum())


def mana_operator(X, d: int = 3, tol: float = ATOL) -> float:
    """``log2 sum_u |W_X(u)|`` for a PSD operator (normalization not required)."""
    X = as_square(X)
    check_psd(X, tol)
    return float(np.log2(np.abs(wigner_of_state(X, d, tol).values).sum()))


def mana_state(rho, d: int = 3, tol: float = ATOL) -> float:
    rho = as_square(rho, "state")
    check_state(rho, tol)
    return float(np.log2(np.abs(wigner_of_state(rho, d, tol).values).sum()))


def _point(index: int, d: int, n: int) -> list:
    return [list(c) for c in PhasePoint.from_index(int(index), d, n).components]


def mana_channel(channel: Channel, tol: float = ATOL) -> MeasureReport:
    """``log2 max_u ||N(A_u)||_{W,1}`` from the row 1-norms of the channel table."""
    check_psd(channel.choi, tol, "Choi matrix")
    norms = wigner_of_channel(channel).row_norms()
    k = int(np.argmax(norms))
    top = float(norms[k])
    value = float(np.log2(top))
    return MeasureReport(
        "mana",
        0.0 if abs(value) < 1e-12 else value,
        top,
        argmax_point=_point(k, channel.d, channel.n_in),
        certificate={"row_norms": norms},
    )


def is_cpwp(channel: Channel, tol: float = 1e-9) -> CPWPCheck:
    """CPWP iff every entry of the channel table is ``>= -tol``."""
    W = wigner_of_channel(channel).values
    flat = int(np.argmin(W))
    u, v = divmod(flat, W.shape[1])
    lo = float(W[u, v])
    witness = None if lo >= -tol else (_point(u, channel.d, channel.n_in), _point(v, channel.d, channel.n_out))
    return CPWPCheck(lo >= -tol, lo, witness)


# --- SDP machinery -------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _monomial_points(d: int, transposed_in: int, n_plain: int):
    """Column index / value arrays of the multi-qudit phase-point operators."""
    A = phase_point_operators(d)
    cols1 = np.argmax(np.abs(A), axis=2)
    vals1 = np.take_along_axis(A, cols1[:, :, None], axis=2)[:, :, 0]
    perm = transpose_point_map(d)
    specs = [(cols1[perm], vals1[perm])] * transposed_in + [(cols1, vals1)] * n_plain
    cols = np.zeros((1, 1), dtype=np.int64)
    vals = np.ones((1, 1), dtype=complex)
    for c1, v1 in specs:
        cols = (cols[:, None, :, None] * d + c1[None, :, None, :]).reshape(cols.shape[0] * d * d, -1)
        vals = (vals[:, None, :, None] * v1[None, :, None, :]).reshape(vals.shape[0] * d * d, -1)
    return cols, vals


@functools.lru_cache(maxsize=16)
def wigner_rows(d: int, n_in: int, n_out: int) -> sp.csr_matrix:
    """Sparse map from Hermitian parameters of an operator to its (flattened) table.

    Row ``u * d**(2 n_out) + v`` evaluates ``tr[(A_u^T (x) A_v) X] / d**n_out``;
    with ``n_in == 0`` this is the state transform ``tr[A_v X] / d**n``.
    """
    cols, vals = _monomial_points(d, n_in, n_out)
    return conic.monomial_trace_rows(cols, vals) / d**n_out


def _row_sum_matrix(n_rows: int, n_cols: int) -> sp.csr_matrix:
    return sp.kron(sp.eye(n_rows), np.ones((1, n_cols))).tocsr()


def _gate_size(n_qudits: int, force: bool) -> None:
    if n_qudits > MAX_THAUMA_QUDITS and not force:
        raise conic.ProblemTooLarge(
            f"max-thauma SDP on {n_qudits} qudits exceeds the default limit of {MAX_THAUMA_QUDITS}; pass force=True"
        )


def _solve_thauma(target: np.ndarray, d: int, n_in: int, n_out: int, tol: float, force: bool):
    """min t  s.t.  Y = target + P, P >= 0, sum_v |W_Y(v|u)| <= t for all u."""
    m = target.shape[0]
    L = wigner_rows(d, n_in, n_out)
    w_target = L @ conic.herm_to_vec(target)
    n_rows = d ** (2 * n_in)
    n_cols = d ** (2 * n_out)
    K = n_rows * n_cols
    b = conic.ConicBuilder()
    P = b.hermitian_psd(m)
    sp_, sm = b.nonneg(K), b.nonneg(K)
    t = b.free(1)
    eye = sp.eye(K, format="csr")
    b.add_eq({P: L, sp_: -eye, sm: eye}, -w_target)
    R = _row_sum_matrix(n_rows, n_cols)
    b.add_le({sp_: R, sm: R, t: -np.ones((n_rows, 1))}, np.zeros(n_rows))
    b.objective({t: [1.0]})
    kw = {}
    if force:
        kw = {"max_psd": 10**9, "max_constraints": 10**12}
    sol = conic.solve_or_raise(b.build(), tol, **kw)
    Pm = conic.vec_to_herm(P.value(sol.x), m)
    V = sol.cone_duals[0]
    return sol, target + Pm, V


def max_thauma_state(rho, d: int = 3, tol: float = conic.DEFAULT_TOL, force: bool = False) -> MeasureReport:
    """``log2 min { ||V||_{W,1} : V >= rho }``."""
    rho = as_square(rho, "state")
    check_state(rho, ATOL)
    n = num_qudits(rho.shape[0], d)
    _gate_size(n, force)
    sol, V, dual = _solve_thauma(rho, d, 0, n, tol, force)
    return MeasureReport(
        "thauma",
        float(np.log2(sol.primal_value)),
        sol.primal_value,
        solver_status=sol.status,
        gap=sol.gap,
        certificate={"V": V, "dual": dual, "dual_value": sol.dual_value},
    )


def max_thauma_channel(channel: Channel, tol: float = conic.DEFAULT_TOL, force: bool = False) -> MeasureReport:
    """Primal SDP: ``log2 min t`` s.t. ``J <= Y``, ``sum_v |tr[(A_u (x) A_v) Y]| / d_B <= t``."""
    _gate_size(channel.n_in + channel.n_out, force)
    sol, Y, dual = _solve_thauma(channel.choi, channel.d, channel.n_in, channel.n_out, tol, force)
    return MeasureReport(
        "thauma",
        float(np.log2(sol.primal_value)),
        sol.primal_value,
        solver_status=sol.status,
        gap=sol.gap,
        certificate={"Y": Y, "t": sol.primal_value, "V": dual, "dual_value": sol.dual_value},
    )


def dual_lower_bound(V: np.ndarray, J: np.ndarray, d: int, n_in: int, n_out: int) -> float:
    """Weak-duality bound ``tr[J V] / sum_u max_v |h_uv|`` for any PSD ``V``.

    ``h_uv = tr[(A_u^T (x) A_v) V] / d**n_in``; whenever ``Y >= J`` has row
    norms at most ``t``, ``tr[J V] <= tr[Y V] <= t * sum_u max_v |h_uv|``.
    """
    V = (V + V.conj().T) / 2
    w, U = np.linalg.eigh(V)
    V = (U * np.clip(w, 0, None)) @ U.conj().T
    L = wigner_rows(d, n_in, n_out)
    h = (L @ conic.herm_to_vec(V)) * d**n_out / d**n_in
    h = h.reshape(d ** (2 * n_in), d ** (2 * n_out))
    scale = np.abs(h).max(axis=1).sum()
    return float(np.trace(J @ V).real / scale)


def max_thauma_channel_dual(channel: Channel, tol: float = conic.DEFAULT_TOL, force: bool = False) -> MeasureReport:
    """Dual side of the max-thauma SDP.

    The dual matrix is the solver's multiplier for the PSD block; its value is
    re-derived as a certified weak-duality lower bound (see :func:`dual_lower_bound`).
    """
    _gate_size(channel.n_in + channel.n_out, force)
    sol, _, V = _solve_thauma(channel.choi, channel.d, channel.n_in, channel.n_out, tol, force)
    lb = dual_lower_bound(V, channel.choi, channel.d, channel.n_in, channel.n_out)
    return MeasureReport(
        "thauma-dual",
        float(np.log2(lb)),
        lb,
        solver_status=sol.status,
        gap=abs(sol.primal_value - lb),
        certificate={"V": V, "solver_dual_value": sol.dual_value, "primal_value": sol.primal_value},
    )


# --- robustness ----------------------------------------------------------------


def robustness_wplus(rho, d: int = 3, tol: float = conic.DEFAULT_TOL) -> MeasureReport:
    """``min {2p + 1 : rho = (1 + p) sigma - p omega, sigma, omega in W+}``.

    Solved with ``S = (1 + p) sigma`` and ``O = p omega`` both PSD with
    nonnegative Wigner functions and ``S - O = rho``; ``p = tr O``.
    """
    rho = as_square(rho, "state")
    check_state(rho, ATOL)
    n = num_qudits(rho.shape[0], d)
    m = rho.shape[0]
    L = wigner_rows(d, 0, n)
    b = conic.ConicBuilder()
    S = b.hermitian_psd(m)
    O = b.hermitian_psd(m)
    I = sp.eye(m * m, format="csr")
    b.add_eq({S: I, O: -I}, conic.herm_to_vec(rho))
    b.add_le({S: -L}, np.zeros(L.shape[0]))
    b.add_le({O: -L}, np.zeros(L.shape[0]))
    tr_row = conic.trace_rows(np.eye(m)).toarray()[0]
    b.objective({O: 2 * tr_row}, offset=1.0)
    sol = conic.solve_or_raise(b.build(), tol)
    p = float(tr_row @ O.value(sol.x))
    Om = conic.vec_to_herm(O.value(sol.x), m)
    Sm = conic.vec_to_herm(S.value(sol.x), m)
    val = sol.primal_value
    return MeasureReport(
        "rob-wplus",
        float(np.log2(val)),
        val,
        solver_status=sol.status,
        gap=sol.gap,
        certificate={
            "p": p,
            "sigma": Sm / (1 + p),
            "omega": Om / p if p > 1e-12 else Om,
        },
    )


def _canonical_key(psi: np.ndarray) -> tuple:
    k = int(np.argmax(np.abs(psi) > 1e-9))
    psi = psi * abs(psi[k]) / psi[k]
    v = np.round(np.concatenate([psi.real, psi.imag]), 8) + 0.0
    return tuple(v)


@functools.lru_cache(maxsize=None)
def stabilizer_states(d: int = 3, n: int = 1) -> np.ndarray:
    """Pure stabilizer states, as kets ``(count, d**n)``, by closing ``|0^n>`` under Clifford generators."""
    from .channels import _embed_one, _embed_two, csum, fourier, pauli, phase_gate

    if n > 2:
        raise DimensionError("stabilizer enumeration is limited to n <= 2")
    gens = []
    for q in range(n):
        gens.append(_embed_one(fourier(d).unitary, q, n, d))
        gens.append(_embed_one(phase_gate(d).unitary, q, n, d))
        gens.append(_embed_one(pauli(d, 1, 0).unitary, q, n, d))
        gens.append(_embed_one(pauli(d, 0, 1).unitary, q, n, d))
    if n == 2:
        gens.append(_embed_two(csum(d).unitary, 0, 1, n, d))
        gens.append(_embed_two(csum(d).unitary, 1, 0, n, d))
    start = np.zeros(d**n, dtype=complex)
    start[0] = 1
    seen = {_canonical_key(start): start}
    frontier = [start]
    while frontier:
        nxt = []
        for psi in frontier:
            for G in gens:
                phi = G @ psi
                key = _canonical_key(phi)
                if key not in seen:
                    seen[key] = phi
                    nxt.append(phi)
        frontier = nxt
    out = np.stack(list(seen.values()))
    out.flags.writeable = False
    return out


def robustness_stab(rho, d: int = 3, tol: float = conic.DEFAULT_TOL) -> MeasureReport:
    """Robustness of magic ``min sum_i |c_i|`` over ``rho = sum_i c_i S_i`` (``n <= 2``)."""
    rho = as_square(rho, "state")
    check_state(rho, ATOL)
    n = num_qudits(rho.shape[0], d)
    kets = stabilizer_states(d, n)
    W = np.stack([wigner_of_state(np.outer(k, k.conj()), d).values for k in kets], axis=1)
    target = wigner_of_state(rho, d).values
    N = kets.shape[0]
    b = conic.ConicBuilder()
    cp, cm = b.nonneg(N), b.nonneg(N)
    b.add_eq({cp: W, cm: -W}, target)
    b.objective({cp: np.ones(N), cm: np.ones(N)})
    sol = conic.solve_or_raise(b.build(), tol)
    coeffs = cp.value(sol.x) - cm.value(sol.x)
    val = sol.primal_value
    return MeasureReport(
        "rob-stab",
        float(np.log2(val)),
        val,
        solver_status=sol.status,
        gap=sol.gap,
        certificate={"coefficients": coeffs},
    )


# --- channel bounds --------------------------------------------------------------


def amortized_lower_bound(channel: Channel, inputs: Sequence[np.ndarray], tol: float = 1e-8) -> float:
    """``max_rho [M((id_R (x) N)(rho)) - M(rho)]`` over the supplied inputs on ``R (x) A``.

    The reference register ``R`` is whatever is left after the channel input
    (the trailing qudits of each input).  Each gain is checked against ``M(N)``.
    """
    d = channel.d
    bound = mana_channel(channel).log2_value
    best = -np.inf
    for rho in inputs:
        rho = as_square(rho, "input")
        n_total = num_qudits(rho.shape[0], d)
        n_ref = n_total - channel.n_in
        if n_ref < 0:
            raise DimensionError("input is smaller than the channel input register")
        full = tensor(identity(d, n_ref), channel) if n_ref else channel
        out = apply(full, rho)
        gain = mana_operator(out, d) - mana_operator(rho, d)
        if gain > bound + tol:
            raise AssertionError(f"amortized gain {gain} exceeds channel mana {bound}")
        best = max(best, gain)
    return float(best)


def distillable_t_bound(channel: Channel, tol: float = conic.DEFAULT_TOL, force: bool = False) -> float:
    """Upper bound ``theta_max(N) / log2(1 + 2 sin(pi/18))`` on the T-distillable magic."""
    return max_thauma_channel(channel, tol, force).log2_value / T_STATE_THAUMA


def injectable_bounds(channel: Channel, resource, tol: float = 1e-6) -> tuple[float, float]:
    """Bounds ``(M(omega), theta_max(omega))`` for a channel injectable with resource ``omega``.

    Raises ``AssertionError`` if the channel's own values exceed them, which
    means the pair is not an injectable channel with that resource.
    """
    d = channel.d
    m_res = mana_state(resource, d)
    t_res = max_thauma_state(resource, d).log2_value
    m_ch = mana_channel(channel).log2_value
    t_ch = max_thauma_channel(channel).log2_value
    if m_ch > m_res + tol or t_ch > t_res + tol:
        raise AssertionError(
            f"channel measures ({m_ch:.6g}, {t_ch:.6g}) exceed resource-state bounds ({m_res:.6g}, {t_res:.6g})"
        )
    return m_res, t_res
