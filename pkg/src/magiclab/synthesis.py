"""Lower bounds on the number of resource channels needed to build a target."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import conic
from .channels import Channel, partial_trace
from .measures import _row_sum_matrix, mana_channel, max_thauma_channel, wigner_rows
from .serialization import SCHEMA_VERSION

__all__ = ["SynthesisBound", "ApproxBound", "exact_bound", "noisy_bound", "approx_bound", "diamond_distance"]

# measures below this count as zero; ratios within this of an integer round down
ZERO_TOL = 1e-9
CEIL_TOL = 1e-6


def _ratio(a: float, b: float) -> float:
    if a <= ZERO_TOL:
        return 0.0
    if b <= ZERO_TOL:
        return math.inf
    return a / b


def _ceiling(x: float) -> Optional[int]:
    return None if math.isinf(x) else int(math.ceil(x - CEIL_TOL))


@dataclass
class SynthesisBound:
    target: str
    resource: str
    mana_target: float
    mana_resource: float
    mana_ratio: float
    thauma_target: Optional[float] = None
    thauma_resource: Optional[float] = None
    thauma_ratio: Optional[float] = None
    note: str = ""

    @property
    def bound(self) -> float:
        r = [self.mana_ratio] + ([self.thauma_ratio] if self.thauma_ratio is not None else [])
        return max(r)

    @property
    def ceiling(self) -> Optional[int]:
        """Least admissible gate count; ``None`` when the bound is infinite."""
        return _ceiling(self.bound)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "target": self.target,
            "resource": self.resource,
            "mana_target": self.mana_target,
            "mana_resource": self.mana_resource,
            "mana_ratio": _json_num(self.mana_ratio),
            "thauma_target": self.thauma_target,
            "thauma_resource": self.thauma_resource,
            "thauma_ratio": _json_num(self.thauma_ratio),
            "bound": _json_num(self.bound),
            "ceiling": self.ceiling,
            "note": self.note,
        }


def _json_num(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else x


def exact_bound(target: Channel, resource: Channel, thauma: bool = True) -> SynthesisBound:
    """``max{M(N)/M(N'), theta(N)/theta(N')}``; the thauma ratio is dropped when an SDP is size-gated."""
    mt = mana_channel(target).log2_value
    mr = mana_channel(resource).log2_value
    out = SynthesisBound(target.name, resource.name, mt, mr, _ratio(mt, mr))
    if thauma:
        try:
            tt = max_thauma_channel(target).log2_value
            tr = max_thauma_channel(resource).log2_value
        except conic.ProblemTooLarge as exc:
            out.note = f"thauma ratio omitted: {exc}"
        else:
            out.thauma_target, out.thauma_resource = tt, tr
            out.thauma_ratio = _ratio(max(tt, 0.0), max(tr, 0.0))
    return out


def noisy_bound(target: Channel, resource: Channel) -> float:
    """Mana ratio ``M(target) / M(resource)``; infinite when the resource is CPWP."""
    return _ratio(mana_channel(target).log2_value, mana_channel(resource).log2_value)


# --- SDPs ------------------------------------------------------------------------


def _linear_map(f: Callable[[np.ndarray], np.ndarray], m_in: int, m_out: int) -> sp.csr_matrix:
    """Matrix of a Hermiticity-preserving map in the Hermitian parametrization."""
    cols = []
    for k in range(m_in * m_in):
        e = np.zeros(m_in * m_in)
        e[k] = 1.0
        cols.append(conic.herm_to_vec(f(conic.vec_to_herm(e, m_in))))
    M = np.stack(cols, axis=1)
    M[np.abs(M) < 1e-14] = 0.0
    return sp.csr_matrix(M)


def _ptrace_out(d_a: int, d_b: int) -> sp.csr_matrix:
    return _linear_map(lambda X: partial_trace(X, d_a, d_b, keep=0), d_a * d_b, d_a)


def _kron_identity(d_a: int, d_b: int) -> sp.csr_matrix:
    return _linear_map(lambda X: np.kron(X, np.eye(d_b)), d_a, d_a * d_b)


def diamond_distance(first: Channel, second: Channel, tol: float = conic.DEFAULT_TOL) -> float:
    """``1/2 ||first - second||_diamond`` from ``max tr[Delta W]`` s.t. ``0 <= W <= rho (x) I``, ``tr rho = 1``."""
    if (first.d, first.n_in, first.n_out) != (second.d, second.n_in, second.n_out):
        raise ValueError("channels have different shapes")
    d_a, d_b = first.dim_in, first.dim_out
    m = d_a * d_b
    delta = first.choi - second.choi
    b = conic.ConicBuilder()
    W = b.hermitian_psd(m)
    Z = b.hermitian_psd(m)
    rho = b.hermitian_psd(d_a)
    I = sp.eye(m * m, format="csr")
    b.add_eq({rho: _kron_identity(d_a, d_b), W: -I, Z: -I}, np.zeros(m * m))
    b.add_eq({rho: conic.trace_rows(np.eye(d_a))}, [1.0])
    b.objective({W: conic.trace_rows(delta).toarray()[0]}, sense="max")
    sol = conic.solve_or_raise(b.build(), tol)
    return float(sol.primal_value)


@dataclass
class ApproxBound:
    """Outcome of :func:`approx_bound`; ``int(result)`` is the gate-count lower bound."""

    eps: float
    mana_approx: float  # log2 of the optimal Wigner row-norm bound over eps-close channels
    mana_resource: float
    ratio: float
    bound: Optional[int]
    choi: np.ndarray = field(repr=False)
    solver_status: str = ""

    def __int__(self) -> int:
        if self.bound is None:
            raise OverflowError("bound is infinite")
        return self.bound

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "eps": self.eps,
            "mana_approx": self.mana_approx,
            "mana_resource": self.mana_resource,
            "ratio": _json_num(self.ratio),
            "bound": self.bound,
            "solver_status": self.solver_status,
        }


def approx_bound(target: Channel, resource: Channel, eps: float, tol: float = conic.DEFAULT_TOL) -> ApproxBound:
    """Lower bound on resource uses to simulate ``target`` within ``eps`` in (half) diamond norm.

    Minimizes the mana of ``N~`` over channels with ``1/2 ||N~ - N||_diamond <= eps``:

        min t  s.t.  J~ >= 0, tr_B J~ = 1, Y >= 0, Y >= J_N - J~, tr_B Y <= eps * 1,
                     sum_v |W_{J~}(v|u)| <= t  for all u,

    then returns ``ceil(log2(t*) / M(resource))``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    d, n_in, n_out = target.d, target.n_in, target.n_out
    d_a, d_b = target.dim_in, target.dim_out
    m = d_a * d_b
    L = wigner_rows(d, n_in, n_out)
    rows, cols = d ** (2 * n_in), d ** (2 * n_out)
    K = rows * cols
    Ptr = _ptrace_out(d_a, d_b)
    b = conic.ConicBuilder()
    Jt = b.hermitian_psd(m)
    Y = b.hermitian_psd(m)
    Q = b.hermitian_psd(m)  # Y - (J_N - J~)
    R = b.hermitian_psd(d_a)  # eps * 1 - tr_B Y
    sp_, sm = b.nonneg(K), b.nonneg(K)
    t = b.free(1)
    I = sp.eye(m * m, format="csr")
    b.add_eq({Jt: Ptr}, conic.herm_to_vec(np.eye(d_a)))
    b.add_eq({Y: I, Jt: I, Q: -I}, conic.herm_to_vec(target.choi))
    b.add_eq({Y: Ptr, R: sp.eye(d_a * d_a, format="csr")}, conic.herm_to_vec(eps * np.eye(d_a)))
    eyeK = sp.eye(K, format="csr")
    b.add_eq({Jt: L, sp_: -eyeK, sm: eyeK}, np.zeros(K))
    S = _row_sum_matrix(rows, cols)
    b.add_le({sp_: S, sm: S, t: -np.ones((rows, 1))}, np.zeros(rows))
    b.objective({t: [1.0]})
    sol = conic.solve_or_raise(b.build(), tol)
    mana_approx = max(float(np.log2(sol.primal_value)), 0.0)
    mr = mana_channel(resource).log2_value
    ratio = _ratio(mana_approx, mr)
    return ApproxBound(
        eps,
        mana_approx,
        mr,
        ratio,
        _ceiling(ratio),
        conic.vec_to_herm(Jt.value(sol.x), m),
        sol.status,
    )
