"""Quantum channels in Choi form, the named gates and noise models, and a state library.

The Choi matrix convention is ``J = sum_ij |i><j| (x) N(|i><j|)`` (input
factor first, unnormalized).
"""
from __future__ import annotations

import difflib
import functools
import itertools
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._validation import (
    ATOL,
    DimensionError,
    ValidationError,
    as_square,
    check_dimension,
    check_probability,
    check_psd,
    check_state,
    num_qudits,
)
from .phase_space import _shift_clock

__all__ = [
    "Channel",
    "from_unitary",
    "from_kraus",
    "from_choi",
    "apply",
    "apply_to_subsystems",
    "compose",
    "tensor",
    "identity",
    "t_gate",
    "u_theta",
    "ccx",
    "fourier",
    "phase_gate",
    "csum",
    "pauli",
    "depolarizing",
    "dephasing",
    "werner_holevo",
    "replacer",
    "random_channel",
    "random_state",
    "random_clifford",
    "state_library",
    "parse_channel",
    "partial_trace",
]

KRAUS_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class Channel:
    """Completely positive map between qudit registers, stored by its Choi matrix."""

    choi: np.ndarray
    d: int = 3
    n_in: int = 1
    n_out: int = 1
    kind: str = "choi"
    name: str = ""
    unitary: Optional[np.ndarray] = field(default=None, repr=False)
    kraus: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        check_dimension(self.d)
        J = as_square(self.choi, "Choi matrix").copy()
        if J.shape[0] != self.d ** (self.n_in + self.n_out):
            raise DimensionError(
                f"Choi matrix of size {J.shape[0]} does not match {self.n_in}->{self.n_out} qudits of d={self.d}"
            )
        J.flags.writeable = False
        object.__setattr__(self, "choi", J)

    @property
    def dim_in(self) -> int:
        return self.d**self.n_in

    @property
    def dim_out(self) -> int:
        return self.d**self.n_out

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        red = partial_trace(self.choi, self.dim_in, self.dim_out, keep=0)
        return bool(np.abs(red - np.eye(self.dim_in)).max() <= tol)

    def kraus_operators(self) -> list[np.ndarray]:
        if self.kraus is not None:
            return list(self.kraus)
        if self.unitary is not None:
            return [self.unitary]
        w, V = np.linalg.eigh((self.choi + self.choi.conj().T) / 2)
        ops = []
        for lam, vec in zip(w[::-1], V.T[::-1]):
            if lam <= KRAUS_CUTOFF:
                break
            # vec = sum_i |i> (x) K|i>, so K[b, i] = vec[i, b]
            ops.append(np.sqrt(lam) * vec.reshape(self.dim_in, self.dim_out).T)
        return ops

    def __call__(self, rho):
        return apply(self, rho)

    def to_dict(self) -> dict:
        from .serialization import operator_to_dict

        return {
            "d": self.d,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "choi": operator_to_dict(self.choi, self.d),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Channel":
        from .serialization import operator_from_dict

        J = operator_from_dict(data["choi"])
        return from_choi(J, int(data["d"]), int(data["n_in"]), int(data["n_out"]))


def partial_trace(M: np.ndarray, dim_a: int, dim_b: int, keep: int = 0) -> np.ndarray:
    """Partial trace of an operator on ``A (x) B``; ``keep`` selects the surviving factor."""
    t = M.reshape(dim_a, dim_b, dim_a, dim_b)
    return np.einsum("ibjb->ij", t) if keep == 0 else np.einsum("aiaj->ij", t)


def _choi_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    vecs = np.stack([K.T.reshape(-1) for K in ops])
    return vecs.T @ vecs.conj()


def from_unitary(U, d: int = 3, name: str = "") -> Channel:
    U = as_square(U, "unitary")
    n = num_qudits(U.shape[0], d)
    if np.abs(U @ U.conj().T - np.eye(U.shape[0])).max() > 1e-9:
        raise ValidationError("matrix is not unitary")
    return Channel(_choi_from_kraus([U]), d, n, n, "unitary", name, unitary=U)


def from_kraus(ops: Sequence, d: int = 3, name: str = "") -> Channel:
    ops = [np.asarray(K, dtype=complex) for K in ops]
    if not ops:
        raise ValueError("need at least one Kraus operator")
    shape = ops[0].shape
    if any(K.shape != shape for K in ops):
        raise DimensionError("Kraus operators have inconsistent shapes")
    n_out, n_in = num_qudits(shape[0], d), num_qudits(shape[1], d)
    return Channel(_choi_from_kraus(ops), d, n_in, n_out, "kraus", name, kraus=tuple(ops))


def from_choi(J, d: int = 3, n_in: int = 1, n_out: int = 1, name: str = "", tol: float = ATOL) -> Channel:
    J = as_square(J, "Choi matrix")
    check_psd(J, tol, "Choi matrix")
    return Channel((J + J.conj().T) / 2, d, n_in, n_out, "choi", name)


def apply(channel: Channel, rho) -> np.ndarray:
    """``N(rho) = tr_A[(rho^T (x) 1) J]``; Kraus operators are used when known."""
    rho = as_square(rho, "input")
    if rho.shape[0] != channel.dim_in:
        raise DimensionError(f"input of size {rho.shape[0]} does not match channel input {channel.dim_in}")
    if channel.unitary is not None:
        U = channel.unitary
        return U @ rho @ U.conj().T
    if channel.kraus is not None:
        return sum(K @ rho @ K.conj().T for K in channel.kraus)
    J = channel.choi.reshape(channel.dim_in, channel.dim_out, channel.dim_in, channel.dim_out)
    return np.einsum("ij,ibjc->bc", rho, J)


def apply_to_subsystems(channel: Channel, rho, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``channel`` to the qudits ``targets`` of an ``n``-qudit operator."""
    d = channel.d
    k = len(targets)
    if channel.n_in != k or channel.n_out != k:
        raise DimensionError(f"channel acts on {channel.n_in}->{channel.n_out} qudits, got {k} targets")
    if len(set(targets)) != k or any(not 0 <= t < n for t in targets):
        raise IndexError(f"targets {list(targets)} invalid for {n} qudits")
    rho = np.asarray(rho, dtype=complex)
    t = rho.reshape((d,) * (2 * n))
    rows = list(targets)
    cols = [n + q for q in targets]
    t = np.moveaxis(t, rows + cols, list(range(2 * k)))
    rest = t.shape[2 * k:]
    t = t.reshape(d**k, d**k, -1)
    D = d**k
    J = channel.choi.reshape(D, D, D, D)
    out = np.einsum("ijr,ibjc->bcr", t, J)
    out = out.reshape((d,) * (2 * k) + rest)
    out = np.moveaxis(out, list(range(2 * k)), rows + cols)
    return out.reshape(d**n, d**n)


def compose(second: Channel, first: Channel) -> Channel:
    """Choi matrix of ``second o first`` by the link product."""
    if second.d != first.d or second.n_in != first.n_out:
        raise DimensionError("channels cannot be composed: output/input registers differ")
    a, b, c = first.dim_in, first.dim_out, second.dim_out
    J1 = first.choi.reshape(a, b, a, b)
    J2 = second.choi.reshape(b, c, b, c)
    J = np.einsum("ibjk,bckd->icjd", J1, J2).reshape(a * c, a * c)
    name = f"{second.name}∘{first.name}" if second.name and first.name else ""
    if first.unitary is not None and second.unitary is not None:
        return Channel(J, first.d, first.n_in, second.n_out, "unitary", name, unitary=second.unitary @ first.unitary)
    if first.kraus is not None or second.kraus is not None:
        k1, k2 = first.kraus_operators(), second.kraus_operators()
        if len(k1) * len(k2) <= 64:
            ops = tuple(B @ A for B in k2 for A in k1)
            return Channel(J, first.d, first.n_in, second.n_out, "kraus", name, kraus=ops)
    return Channel(J, first.d, first.n_in, second.n_out, "choi", name)


def tensor(first: Channel, second: Channel) -> Channel:
    """Parallel composition; registers ordered ``first`` then ``second``."""
    if first.d != second.d:
        raise DimensionError("channels use different qudit dimensions")
    a1, b1, a2, b2 = first.dim_in, first.dim_out, second.dim_in, second.dim_out
    J = np.kron(first.choi, second.choi).reshape(a1, b1, a2, b2, a1, b1, a2, b2)
    J = J.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(a1 * a2 * b1 * b2, -1)
    n_in, n_out = first.n_in + second.n_in, first.n_out + second.n_out
    name = f"{first.name}x{second.name}" if first.name and second.name else ""
    if first.unitary is not None and second.unitary is not None:
        return Channel(J, first.d, n_in, n_out, "unitary", name, unitary=np.kron(first.unitary, second.unitary))
    return Channel(J, first.d, n_in, n_out, "choi", name)


# --- named gates -----------------------------------------------------------


def identity(d: int = 3, n: int = 1) -> Channel:
    return from_unitary(np.eye(d**n), d, "id")


def t_gate(d: int = 3) -> Channel:
    """Qutrit T gate ``diag(xi, 1, xi^-1)`` with ``xi = exp(2 pi i / 9)``."""
    if d != 3:
        raise DimensionError("the T gate is defined for qutrits only")
    return u_theta(2 * np.pi, name="t")


def u_theta(theta: float, name: str = "") -> Channel:
    """Diagonal qutrit unitary ``diag(e^{i theta/9}, 1, e^{-i theta/9})``."""
    ph = np.exp(1j * theta / 9)
    return from_unitary(np.diag([ph, 1, ph.conjugate()]), 3, name or f"u:{theta:g}")


def ccx(d: int = 3) -> Channel:
    """Controlled-controlled-X: ``|a, b, c> -> |a, b, c + a*b mod d>``."""
    d = check_dimension(d)
    D = d**3
    U = np.zeros((D, D))
    for a, b, c in itertools.product(range(d), repeat=3):
        U[(a * d + b) * d + (c + a * b) % d, (a * d + b) * d + c] = 1
    return from_unitary(U, d, "ccx")


def fourier(d: int = 3) -> Channel:
    d = check_dimension(d)
    j = np.arange(d)
    F = np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)
    return from_unitary(F, d, "f")


def phase_gate(d: int = 3) -> Channel:
    """Clifford phase gate ``|j> -> tau^{j^2} |j>`` with ``tau = omega^{(d+1)/2}``."""
    d = check_dimension(d)
    j = np.arange(d)
    S = np.diag(np.exp(2j * np.pi * ((d + 1) // 2) * j * j / d))
    return from_unitary(S, d, "s")


def csum(d: int = 3) -> Channel:
    """Two-qudit Clifford ``|a, b> -> |a, a + b>``."""
    d = check_dimension(d)
    U = np.zeros((d * d, d * d))
    for a, b in itertools.product(range(d), repeat=2):
        U[a * d + (a + b) % d, a * d + b] = 1
    return from_unitary(U, d, "csum")


def pauli(d: int = 3, x: int = 0, z: int = 0) -> Channel:
    X, Z = _shift_clock(check_dimension(d))
    return from_unitary(np.linalg.matrix_power(X, x) @ np.linalg.matrix_power(Z, z), d, f"pauli:{x},{z}")


# --- noise -------------------------------------------------------------------


def depolarizing(d: int = 3, p: float = 0.0) -> Channel:
    """``(1 - p) rho + p/(d^2 - 1) sum_{(i,j) != 0} X^i Z^j rho (X^i Z^j)^dag``.

    Full mixing ``1/d`` is reached at ``p = (d^2 - 1)/d^2``, not at ``p = 1``.
    """
    d = check_dimension(d)
    p = check_probability(p)
    X, Z = _shift_clock(d)
    ops = [np.sqrt(1 - p) * np.eye(d)]
    w = np.sqrt(p / (d * d - 1))
    for i, j in itertools.product(range(d), repeat=2):
        if (i, j) != (0, 0):
            ops.append(w * np.linalg.matrix_power(X, i) @ np.linalg.matrix_power(Z, j))
    return from_kraus(ops, d, f"dep:{p:g}")


def dephasing(p0: float, p1: float, p2: float) -> Channel:
    """Qutrit dephasing ``p0 rho + p1 Z rho Z^dag + p2 Z^2 rho Z^2dag``."""
    probs = np.array([check_probability(p, f"p{k}") for k, p in enumerate((p0, p1, p2))])
    if abs(probs.sum() - 1) > 1e-12:
        raise ValueError(f"dephasing probabilities must sum to 1, got {probs.sum()}")
    _, Z = _shift_clock(3)
    ops = [np.sqrt(p) * np.linalg.matrix_power(Z, k) for k, p in enumerate(probs)]
    return from_kraus(ops, 3, f"deph:{p0:g},{p1:g},{p2:g}")


def werner_holevo() -> Channel:
    """Qutrit Werner-Holevo channel ``V -> ((tr V) 1 - V^T) / 2``."""
    d = 3
    swap = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    J = (np.eye(d * d) - swap) / 2
    return Channel(J.astype(complex), d, 1, 1, "choi", "wh")


def replacer(sigma, n_in: int = 1, d: int = 3) -> Channel:
    """``rho -> tr[rho] sigma``."""
    sigma = as_square(sigma, "replacement state")
    check_state(sigma)
    n_out = num_qudits(sigma.shape[0], d)
    return Channel(np.kron(np.eye(d**n_in), sigma), d, n_in, n_out, "choi", "replacer")


# --- random instances --------------------------------------------------------


def random_channel(rng: np.random.Generator, d: int = 3, n: int = 1, rank: Optional[int] = None) -> Channel:
    """Random channel from Gaussian Kraus operators, normalized to be trace preserving."""
    D = d**n
    rank = rank or int(rng.integers(1, 4))
    G = rng.normal(size=(rank, D, D)) + 1j * rng.normal(size=(rank, D, D))
    S = np.einsum("kij,kil->jl", G.conj(), G)
    w, V = np.linalg.eigh(S)
    S_inv_half = V @ np.diag(w**-0.5) @ V.conj().T
    ops = [K @ S_inv_half for K in G]
    return from_kraus(ops, d, "random")


def random_state(rng: np.random.Generator, d: int = 3, n: int = 1, rank: Optional[int] = None) -> np.ndarray:
    D = d**n
    rank = rank or D
    G = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_clifford(rng: np.random.Generator, d: int = 3, n: int = 1, depth: int = 20) -> Channel:
    """Random word in the Fourier, phase, and CSUM generators."""
    gens = [fourier(d).unitary, phase_gate(d).unitary]
    U = np.eye(d**n, dtype=complex)
    for _ in range(depth):
        if n > 1 and rng.random() < 0.3:
            a, b = rng.choice(n, size=2, replace=False)
            g = _embed_two(csum(d).unitary, int(a), int(b), n, d)
        else:
            q = int(rng.integers(n))
            g = _embed_one(gens[int(rng.integers(2))], q, n, d)
        U = g @ U
    return from_unitary(U, d, "clifford")


def _embed_one(G, q, n, d):
    return np.kron(np.kron(np.eye(d**q), G), np.eye(d ** (n - q - 1)))


def _embed_two(G, a, b, n, d):
    t = np.eye(d**n, dtype=complex).reshape((d,) * n + (d**n,))
    g = G.reshape(d, d, d, d)
    t = np.tensordot(g, t, axes=([2, 3], [a, b]))
    t = np.moveaxis(t, [0, 1], [a, b])
    return t.reshape(d**n, d**n)


# --- states ------------------------------------------------------------------


def _ket(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


@functools.lru_cache(maxsize=None)
def _library(d: int) -> dict:
    zero = np.zeros(d)
    zero[0] = 1
    plus = np.ones(d) / np.sqrt(d)
    lib = {
        "0": _ket(zero),
        "+": _ket(plus),
        "mixed": np.eye(d, dtype=complex) / d,
        "phi": _ket(np.eye(d).reshape(-1) / np.sqrt(d)),
    }
    if d == 3:
        xi = np.exp(2j * np.pi / 9)
        lib["T"] = _ket(np.array([xi, 1, xi.conjugate()]) * plus)
    for key in lib:
        lib[key].flags.writeable = False
    return lib


def state_library(name: str, d: int = 3, n: int = 1) -> np.ndarray:
    """Named states: ``"0"`` (``|0^n>``), ``"+"``, ``"T"``, ``"mixed"``, ``"phi"`` (maximally entangled)."""
    lib = _library(check_dimension(d))
    key = {"t": "T", "zero": "0", "plus": "+", "phi_d": "phi"}.get(name, name)
    if key not in lib:
        raise KeyError(f"unknown state {name!r}; choose from {sorted(lib)}")
    single = lib[key]
    if key == "phi":
        return single.copy()
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, single)
    return out


# --- tiny expression language -------------------------------------------------

_TOKEN = re.compile(r"(∘|\(|\)|\.(?![0-9])|(?<![\w:.])x(?!\w))")


_PI = re.compile(r"^([0-9.eE+-]*)\*?pi$")


def parse_angle(text: str) -> float:
    """A float, or a multiple of pi such as ``2pi``, ``0.25pi`` or ``-pi``."""
    text = text.strip()
    m = _PI.match(text)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * np.pi
    return float(text)


def _named(token: str, d: int) -> Channel:
    tok = token.strip()
    if tok in ("t", "T"):
        return t_gate(d)
    if tok == "ccx":
        return ccx(d)
    if tok == "wh":
        return werner_holevo()
    if tok in ("id", "i"):
        return identity(d)
    if tok == "f":
        return fourier(d)
    if tok == "s":
        return phase_gate(d)
    if tok == "csum":
        return csum(d)
    if tok.startswith("dep:"):
        return depolarizing(d, float(tok[4:]))
    if tok.startswith("deph:"):
        p = [float(v) for v in tok[5:].split(",")]
        if len(p) != 3:
            raise ValueError(f"dephasing needs three probabilities, got {tok!r}")
        return dephasing(*p)
    if tok.startswith("u:"):
        return u_theta(parse_angle(tok[2:]))
    if tok.startswith("unitary:"):
        from .serialization import load_operator

        U, dd = load_operator(tok[8:])
        return from_unitary(U, dd)
    if tok.startswith("choi:"):
        import json

        with open(tok[5:]) as fh:
            return Channel.from_dict(json.load(fh))
    names = ["t", "ccx", "wh", "id", "f", "s", "csum", "dep:", "deph:", "u:", "unitary:", "choi:"]
    close = difflib.get_close_matches(tok, names, n=2)
    hint = f" (did you mean {' or '.join(close)}?)" if close else ""
    raise KeyError(
        f"unknown channel {tok!r}{hint}; expected t, ccx, wh, id, f, s, csum, dep:p, deph:p0,p1,p2, u:theta, unitary:<file>, choi:<file>"
    )


def parse_channel(expr: str, d: int = 3) -> Channel:
    """Parse ``"dep:0.7∘t"``-style expressions.

    ``∘`` (or ``.``) composes right to left, ``x`` tensors, ``dep3:p`` is a
    shorthand for ``dep:p x dep:p x dep:p``; parentheses group.
    """
    files: list[str] = []

    def stash(m):
        files.append(m.group(0))
        return f"@{len(files) - 1}"

    # file tokens may contain '.' and 'x', so they are set aside before splitting
    expr_ = re.sub(r"(?:unitary|choi):[^\s∘()]+", stash, expr)
    expr_ = re.sub(r"dep3:([0-9.eE+-]+)", r"(dep:\1 x dep:\1 x dep:\1)", expr_)
    parts = [p.strip() for p in _TOKEN.split(expr_) if p and p.strip()]
    pos = 0

    def parse_comp():
        nonlocal pos
        ch = parse_tensor()
        while pos < len(parts) and parts[pos] in ("∘", "."):
            pos += 1
            ch = compose(ch, parse_tensor())
        return ch

    def parse_tensor():
        nonlocal pos
        ch = parse_atom()
        while pos < len(parts) and parts[pos] == "x":
            pos += 1
            ch = tensor(ch, parse_atom())
        return ch

    def parse_atom():
        nonlocal pos
        if pos >= len(parts):
            raise ValueError(f"unexpected end of channel expression {expr!r}")
        tok = parts[pos]
        pos += 1
        if tok == "(":
            ch = parse_comp()
            if pos >= len(parts) or parts[pos] != ")":
                raise ValueError(f"unbalanced parentheses in {expr!r}")
            pos += 1
            return ch
        if tok.startswith("@"):
            tok = files[int(tok[1:])]
        return _named(tok, d)

    ch = parse_comp()
    if pos != len(parts):
        raise ValueError(f"trailing tokens in channel expression {expr!r}")
    return ch
