"""Dense-ish linear and semidefinite programs in a small standard form.

A :class:`ConicProblem` is

    minimize (or maximize)  c @ x + offset
    subject to              A_eq @ x == b_eq
                            A_ub @ x <= b_ub
                            x[s] in K      for every (s, K) in cones

with cones ``nonneg`` (orthant), ``psd`` (real symmetric ``k x k`` matrix
stored as its upper triangle, column-major, unscaled) and ``hpsd`` (complex
Hermitian ``m x m`` matrix stored as ``m*m`` reals: the diagonal, then
``Re, Im`` of each strictly-upper entry in row-major order).  Complex PSD
constraints are handed to the backend through the real embedding
``H -> [[Re H, -Im H], [Im H, Re H]]``.

The backends are Clarabel and SCS, called directly on the assembled sparse data.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

__all__ = [
    "Cone",
    "ConicProblem",
    "ConicSolution",
    "ConicBuilder",
    "Var",
    "SolverError",
    "ProblemTooLarge",
    "solve",
    "hermitian_embedding",
    "hermitian_unembedding",
    "herm_to_vec",
    "vec_to_herm",
    "trace_rows",
    "monomial_trace_rows",
]

DEFAULT_TOL = 1e-7
MAX_PSD_DIM = 200
MAX_CONSTRAINTS = 50_000
INTERIOR_POINT_MAX_PSD = 64
SCS_EPS_FACTOR = 1.0
SCS_MAX_ITERS = 200_000
SQRT2 = np.sqrt(2.0)


class SolverError(RuntimeError):
    """The backend did not return an optimal solution."""

    def __init__(self, message: str, solution: Optional["ConicSolution"] = None):
        super().__init__(message)
        self.solution = solution


class ProblemTooLarge(ValueError):
    """Problem exceeds the configured size limits."""


@dataclass(frozen=True)
class Cone:
    kind: str  # "nonneg" | "psd" | "hpsd"
    dim: int  # vector length for nonneg, matrix order otherwise

    @property
    def length(self) -> int:
        if self.kind == "nonneg":
            return self.dim
        if self.kind == "psd":
            return self.dim * (self.dim + 1) // 2
        if self.kind == "hpsd":
            return self.dim * self.dim
        raise ValueError(f"unknown cone kind {self.kind!r}")

    @property
    def embedded_dim(self) -> int:
        return {"nonneg": 0, "psd": self.dim, "hpsd": 2 * self.dim}[self.kind]


@dataclass
class ConicProblem:
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    cones: list = field(default_factory=list)
    offset: float = 0.0
    sense: str = "min"

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def num_constraints(self) -> int:
        return self.A_eq.shape[0] + self.A_ub.shape[0] + sum(K.length for _, K in self.cones)

    def to_dict(self) -> dict:
        """Documented JSON standard form (used by the debug dump)."""
        eq, ub = self.A_eq.tocoo(), self.A_ub.tocoo()
        return {
            "sense": self.sense,
            "offset": self.offset,
            "c": self.c.tolist(),
            "A_eq": {"shape": list(eq.shape), "row": eq.row.tolist(), "col": eq.col.tolist(), "data": eq.data.tolist()},
            "b_eq": self.b_eq.tolist(),
            "A_ub": {"shape": list(ub.shape), "row": ub.row.tolist(), "col": ub.col.tolist(), "data": ub.data.tolist()},
            "b_ub": self.b_ub.tolist(),
            "cones": [{"start": s.start, "stop": s.stop, "kind": K.kind, "dim": K.dim} for s, K in self.cones],
        }


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | inaccurate
    primal_value: float
    dual_value: float
    x: np.ndarray
    y_eq: np.ndarray
    z_ub: np.ndarray
    cone_duals: list
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# --- Hermitian parametrization ---------------------------------------------


def herm_to_vec(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H)
    m = H.shape[0]
    iu = np.triu_indices(m, 1)
    off = np.empty(2 * len(iu[0]))
    off[0::2] = H[iu].real
    off[1::2] = H[iu].imag
    return np.concatenate([np.diag(H).real, off])


def vec_to_herm(v: np.ndarray, m: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    H = np.zeros((m, m), dtype=complex)
    iu = np.triu_indices(m, 1)
    H[iu] = v[m::2] + 1j * v[m + 1::2]
    H = H + H.conj().T
    H[np.diag_indices(m)] = v[:m]
    return H


def hermitian_embedding(H: np.ndarray) -> np.ndarray:
    """Real symmetric ``2m x 2m`` matrix with the same spectrum (doubled) as ``H``."""
    H = np.asarray(H)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def hermitian_unembedding(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hermitian_embedding`; averages the redundant blocks."""
    S = np.asarray(S, dtype=float)
    m = S.shape[0] // 2
    re = (S[:m, :m] + S[m:, m:]) / 2
    im = (S[m:, :m] - S[:m, m:]) / 2
    return re + 1j * im


def _pair_index(m: int) -> np.ndarray:
    """``P[i, j]`` = position of pair ``(min, max)`` among strictly-upper entries."""
    P = -np.ones((m, m), dtype=np.int64)
    iu = np.triu_indices(m, 1)
    P[iu] = np.arange(len(iu[0]))
    P.T[iu] = np.arange(len(iu[0]))
    return P


def _entry_rows(rows, i, j, val, m):
    """Coefficients of ``Re(val * H[j, i])`` in the Hermitian parametrization."""
    P = _pair_index(m)
    rows = np.asarray(rows)
    i, j = np.asarray(i), np.asarray(j)
    val = np.asarray(val, dtype=complex)
    diag = i == j
    below = j < i  # H[j, i] with j < i: a + ib
    above = j > i  # H[j, i] with j > i: conj(H[i, j]) = a - ib
    r_out, c_out, d_out = [rows[diag]], [i[diag]], [val[diag].real]
    for mask, sign in ((below, -1.0), (above, 1.0)):
        p = P[i[mask], j[mask]]
        r_out += [rows[mask], rows[mask]]
        c_out += [m + 2 * p, m + 2 * p + 1]
        d_out += [val[mask].real, sign * val[mask].imag]
    return np.concatenate(r_out), np.concatenate(c_out), np.concatenate(d_out)


def trace_rows(Ms: np.ndarray) -> sp.csr_matrix:
    """Sparse rows ``r_k`` with ``r_k @ herm_to_vec(H) == Re tr[M_k H]``."""
    Ms = np.asarray(Ms)
    if Ms.ndim == 2:
        Ms = Ms[None]
    K, m, _ = Ms.shape
    k, i, j = np.nonzero(Ms)
    r, c, v = _entry_rows(k, i, j, Ms[k, i, j], m)
    return sp.csr_matrix((v, (r, c)), shape=(K, m * m))


def monomial_trace_rows(cols: np.ndarray, vals: np.ndarray) -> sp.csr_matrix:
    """As :func:`trace_rows` for monomial ``M_k`` with ``M_k[i, cols[k, i]] = vals[k, i]``."""
    K, m = cols.shape
    rows = np.repeat(np.arange(K), m)
    i = np.tile(np.arange(m), K)
    r, c, v = _entry_rows(rows, i, cols.reshape(-1), vals.reshape(-1), m)
    return sp.csr_matrix((v, (r, c)), shape=(K, m * m))


def _svec_embedding_map(m: int) -> sp.csr_matrix:
    """Map Hermitian parameters to the scaled upper-triangle (column-major) svec of the embedding."""
    n = 2 * m
    cols_idx, rows_idx = [], []
    for col in range(n):
        rows_idx.append(np.arange(col + 1))
        cols_idx.append(np.full(col + 1, col))
    r = np.concatenate(rows_idx)
    c = np.concatenate(cols_idx)
    out = np.arange(len(r))
    scale = np.where(r == c, 1.0, SQRT2)
    P = _pair_index(m)
    bi, bj = r // m, c // m  # block indices
    i, j = r % m, c % m
    # real part on diagonal blocks, +-imag on off-diagonal blocks
    is_re = bi == bj
    data, rr, cc = [], [], []
    # Re H_ij
    re_diag = is_re & (i == j)
    rr.append(out[re_diag]); cc.append(i[re_diag]); data.append(scale[re_diag])
    re_off = is_re & (i != j)
    rr.append(out[re_off]); cc.append(m + 2 * P[i[re_off], j[re_off]]); data.append(scale[re_off])
    # block (0, 1) holds -Im H_ij; block (1, 0) holds Im H_ij (only (0,1) lies in the upper triangle)
    im = (~is_re) & (i != j)
    sign = np.where(i < j, 1.0, -1.0)  # Im H_ij = +b for i<j, -b for i>j
    blk = np.where(bi[im] == 0, -1.0, 1.0)
    rr.append(out[im]); cc.append(m + 2 * P[i[im], j[im]] + 1); data.append(scale[im] * sign[im] * blk)
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))), shape=(len(r), m * m)
    )


def _svec_real_map(k: int) -> sp.csr_matrix:
    """Our psd storage (upper triangle, column-major, unscaled) to Clarabel's scaled svec."""
    r, c = [], []
    for col in range(k):
        r.append(np.arange(col + 1))
        c.append(np.full(col + 1, col))
    r, c = np.concatenate(r), np.concatenate(c)
    return sp.diags(np.where(r == c, 1.0, SQRT2)).tocsr()


def _scs_order(k: int) -> np.ndarray:
    """Positions (in upper-triangle column-major order) of SCS's lower-triangle column-major entries."""
    return np.array([i * (i + 1) // 2 + j for j in range(k) for i in range(j, k)])


def _unsvec(z: np.ndarray, k: int) -> np.ndarray:
    S = np.zeros((k, k))
    pos = 0
    for col in range(k):
        S[: col + 1, col] = z[pos : pos + col + 1]
        pos += col + 1
    off = ~np.eye(k, dtype=bool)
    S[off] /= SQRT2
    return np.triu(S) + np.triu(S, 1).T


def psd_from_vec(v: np.ndarray, k: int) -> np.ndarray:
    S = np.zeros((k, k))
    pos = 0
    for col in range(k):
        S[: col + 1, col] = v[pos : pos + col + 1]
        pos += col + 1
    return np.triu(S) + np.triu(S, 1).T


# --- builder -----------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    """Handle for a contiguous block of the variable vector."""

    start: int
    stop: int

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    def __len__(self) -> int:
        return self.stop - self.start

    def value(self, x: np.ndarray) -> np.ndarray:
        return x[self.start : self.stop]


class ConicBuilder:
    """Incremental assembly of a :class:`ConicProblem`."""

    def __init__(self):
        self.size = 0
        self.cones: list = []
        self._eq: list = []
        self._ub: list = []
        self._obj: list = []
        self.offset = 0.0
        self.sense = "min"

    def variable(self, length: int, cone: Optional[Cone] = None) -> Var:
        v = Var(self.size, self.size + length)
        self.size += length
        if cone is not None:
            if cone.length != length:
                raise ValueError("cone length does not match variable length")
            self.cones.append((v.slice, cone))
        return v

    def free(self, length: int) -> Var:
        return self.variable(length)

    def nonneg(self, length: int) -> Var:
        return self.variable(length, Cone("nonneg", length))

    def hermitian_psd(self, m: int) -> Var:
        return self.variable(m * m, Cone("hpsd", m))

    def symmetric_psd(self, k: int) -> Var:
        return self.variable(k * (k + 1) // 2, Cone("psd", k))

    def _block(self, terms: dict, nrows: int):
        blocks = []
        for s, M in terms.items():
            M = sp.csr_matrix(M) if not sp.issparse(M) else M.tocsr()
            if M.shape != (nrows, s.stop - s.start):
                raise ValueError(f"coefficient block has shape {M.shape}, expected {(nrows, s.stop - s.start)}")
            blocks.append((s.start, M.tocoo()))
        return blocks

    def add_eq(self, terms: dict, rhs) -> None:
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self._eq.append((self._block(terms, len(rhs)), rhs))

    def add_le(self, terms: dict, rhs) -> None:
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self._ub.append((self._block(terms, len(rhs)), rhs))

    def objective(self, terms: dict, offset: float = 0.0, sense: str = "min") -> None:
        self._obj = [(s, np.atleast_1d(np.asarray(v, dtype=float))) for s, v in terms.items()]
        self.offset = offset
        self.sense = sense

    def _stack(self, parts):
        rows, cols, data, rhs = [], [], [], []
        r0 = 0
        for blocks, b in parts:
            for c0, M in blocks:
                rows.append(M.row + r0)
                cols.append(M.col + c0)
                data.append(M.data)
            rhs.append(b)
            r0 += len(b)
        if not parts:
            return sp.csr_matrix((0, self.size)), np.zeros(0)
        A = sp.csr_matrix(
            (np.concatenate(data) if data else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
            shape=(r0, self.size),
        )
        return A, np.concatenate(rhs)

    def build(self) -> ConicProblem:
        c = np.zeros(self.size)
        for s, v in self._obj:
            c[s.slice] += v
        A_eq, b_eq = self._stack(self._eq)
        A_ub, b_ub = self._stack(self._ub)
        return ConicProblem(c, A_eq, b_eq, A_ub, b_ub, list(self.cones), self.offset, self.sense)


# --- solve -------------------------------------------------------------------


def _check_limits(p: ConicProblem, max_psd: int, max_constraints: int) -> None:
    for _, K in p.cones:
        if K.embedded_dim > max_psd:
            raise ProblemTooLarge(f"PSD block of order {K.embedded_dim} exceeds the limit {max_psd}")
    if p.num_constraints() > max_constraints:
        raise ProblemTooLarge(f"{p.num_constraints()} scalar constraints exceed the limit {max_constraints}")


def _cone_residual(x: np.ndarray, cones) -> float:
    worst = 0.0
    for s, K in cones:
        v = x[s]
        if K.kind == "nonneg":
            worst = max(worst, float(-v.min(initial=0.0)))
        elif K.kind == "psd":
            worst = max(worst, float(-np.linalg.eigvalsh(psd_from_vec(v, K.dim))[0]))
        else:
            worst = max(worst, float(-np.linalg.eigvalsh(vec_to_herm(v, K.dim))[0]))
    return max(worst, 0.0)


def solve(
    problem: ConicProblem,
    tol: float = DEFAULT_TOL,
    *,
    max_psd: int = MAX_PSD_DIM,
    max_constraints: int = MAX_CONSTRAINTS,
    max_iter: int = 200,
    dump: Optional[str] = None,
    backend: Optional[str] = None,
) -> ConicSolution:
    """Solve and report values, duals, and achieved residuals.

    ``backend`` is ``"clarabel"`` (interior point), ``"scs"`` (first order)
    or ``"auto"`` (default, also read from ``MAGICLAB_CONIC_BACKEND``):
    Clarabel unless a PSD block of real order above
    ``INTERIOR_POINT_MAX_PSD`` would make its dense KKT factor too large.

    Set ``dump`` (or the ``MAGICLAB_DUMP_DIR`` environment variable) to write
    the problem in the JSON standard form before solving.
    """
    _check_limits(problem, max_psd, max_constraints)
    dump = dump or os.environ.get("MAGICLAB_DUMP_DIR")
    if dump:
        path = dump if dump.endswith(".json") else os.path.join(dump, f"conic_{id(problem):x}.json")
        with open(path, "w") as fh:
            json.dump(problem.to_dict(), fh)
    backend = backend or os.environ.get("MAGICLAB_CONIC_BACKEND", "auto")
    if backend == "auto":
        big = max((K.embedded_dim for _, K in problem.cones if K.kind != "nonneg"), default=0)
        backend = "clarabel" if big <= INTERIOR_POINT_MAX_PSD else "scs"
    if backend not in ("clarabel", "scs"):
        raise ValueError(f"unknown conic backend {backend!r}")

    n = problem.num_vars
    sign = 1.0 if problem.sense == "min" else -1.0
    q = sign * problem.c

    # rows: equalities, inequalities, orthant cones, then PSD cones
    blocks, rhs = [], []
    n_zero = problem.A_eq.shape[0]
    n_lin = problem.A_ub.shape[0]
    if n_zero:
        blocks.append(problem.A_eq)
        rhs.append(problem.b_eq)
    if n_lin:
        blocks.append(problem.A_ub)
        rhs.append(problem.b_ub)
    cone_rows = {}
    psd_sizes = []
    pos = n_zero + n_lin
    ordered = [c for c in problem.cones if c[1].kind == "nonneg"] + [c for c in problem.cones if c[1].kind != "nonneg"]
    for s, K in ordered:
        sel = sp.csr_matrix(
            (np.ones(s.stop - s.start), (np.arange(s.stop - s.start), np.arange(s.start, s.stop))),
            shape=(s.stop - s.start, n),
        )
        if K.kind == "nonneg":
            M = sel
            n_lin += K.dim
        else:
            k = K.dim if K.kind == "psd" else 2 * K.dim
            M = (_svec_real_map(k) if K.kind == "psd" else _svec_embedding_map(K.dim)) @ sel
            if backend == "scs":
                M = M[_scs_order(k)]
            psd_sizes.append(k)
        cone_rows[s.start] = (pos, M.shape[0])
        pos += M.shape[0]
        blocks.append(-M)
        rhs.append(np.zeros(M.shape[0]))
    A = sp.vstack(blocks).tocsc() if blocks else sp.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    inner = min(tol, 1e-8)

    if backend == "clarabel":
        import clarabel

        cones = []
        if n_zero:
            cones.append(clarabel.ZeroConeT(n_zero))
        if n_lin:
            cones.append(clarabel.NonnegativeConeT(n_lin))
        cones += [clarabel.PSDTriangleConeT(k) for k in psd_sizes]
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iter
        settings.tol_gap_abs = inner
        settings.tol_gap_rel = inner
        settings.tol_feas = inner
        raw = clarabel.DefaultSolver(sp.csc_matrix((n, n)), q, A, b, cones, settings).solve()
        status_name = str(raw.status).split(".")[-1]
        x, z = np.asarray(raw.x), np.asarray(raw.z)
        p_obj, d_obj, iters = raw.obj_val, raw.obj_val_dual, int(raw.iterations)
        r_dual = float(raw.r_dual)
        solved = status_name in ("Solved", "AlmostSolved")
    else:
        import scs

        raw = scs.SCS(
            {"A": A, "b": b, "c": q},
            {"z": n_zero, "l": n_lin, "s": psd_sizes},
            eps_abs=tol * SCS_EPS_FACTOR,
            eps_rel=tol * SCS_EPS_FACTOR,
            max_iters=SCS_MAX_ITERS,
            verbose=False,
        ).solve()
        status_name = raw["info"]["status"]
        x, z = np.asarray(raw["x"]), np.asarray(raw["y"])
        p_obj, d_obj, iters = raw["info"]["pobj"], raw["info"]["dobj"], int(raw["info"]["iter"])
        r_dual = float(raw["info"]["res_dual"])
        solved = status_name in ("solved", "solved_inaccurate")
        if status_name.startswith("infeasible"):
            status_name = "PrimalInfeasible"
        elif status_name.startswith("unbounded"):
            status_name = "DualInfeasible"
    primal = sign * p_obj + problem.offset
    dual = sign * d_obj + problem.offset

    m_eq, m_ub = problem.A_eq.shape[0], problem.A_ub.shape[0]
    # duals refer to the minimization form (objective negated for "max");
    # z_ub and the cone duals lie in the dual cones
    y_eq = z[:m_eq]
    z_ub = z[m_eq : m_eq + m_ub]
    cone_duals = []
    for s_, K in problem.cones:
        start, rows = cone_rows[s_.start]
        zc = z[start : start + rows]
        if K.kind == "nonneg":
            cone_duals.append(zc)
            continue
        k = K.dim if K.kind == "psd" else 2 * K.dim
        if backend == "scs":
            zc = zc[np.argsort(_scs_order(k))]
        if K.kind == "psd":
            cone_duals.append(_unsvec(zc, K.dim))
        else:
            # <Z, emb(H)> = Re tr[V H] with V = 2 * unembed(Z)
            cone_duals.append(2 * hermitian_unembedding(_unsvec(zc, 2 * K.dim)))

    res_eq = np.abs(problem.A_eq @ x - problem.b_eq).max(initial=0.0) if m_eq else 0.0
    res_ub = np.maximum(problem.A_ub @ x - problem.b_ub, 0).max(initial=0.0) if m_ub else 0.0
    r_prim = float(max(res_eq, res_ub, _cone_residual(x, problem.cones)))
    gap = float(abs(primal - dual))

    if solved:
        ok = r_prim <= tol * 10 and gap <= tol * max(1.0, abs(primal))
        status = "optimal" if ok else "inaccurate"
    elif "PrimalInfeasible" in status_name:
        status = "infeasible"
    elif "DualInfeasible" in status_name:
        status = "unbounded"
    else:
        status = "inaccurate"
    if status != "optimal":
        log.warning("conic solve finished with backend status %s (residual %.2e, gap %.2e)", status_name, r_prim, gap)
    return ConicSolution(
        status,
        float(primal),
        float(dual),
        x,
        y_eq,
        z_ub,
        cone_duals,
        r_prim,
        r_dual,
        gap,
        iters,
    )


def solve_or_raise(problem: ConicProblem, tol: float = DEFAULT_TOL, **kw) -> ConicSolution:
    sol = solve(problem, tol, **kw)
    if not sol.optimal:
        raise SolverError(f"conic solve failed with status {sol.status}", sol)
    return sol
