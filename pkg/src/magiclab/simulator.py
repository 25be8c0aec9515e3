"""Negativity-weighted Monte Carlo estimation of Born probabilities.

Every gate keeps its Wigner table over its target qudits only.  A trajectory
is a vector of per-qudit phase-point indices; each gate resamples the
indices on its targets from the normalized absolute row of its table and the
sign/scale factors are multiplied in.  Rows are sampled by inverse-CDF lookup
on cumulative sums built once per gate.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._validation import DimensionError, ValidationError, check_dimension
from .channels import Channel, apply_to_subsystems, from_choi, parse_channel, state_library
from .phase_space import WignerTable, propagate, wigner_of_channel, wigner_of_measurement, wigner_of_state
from .serialization import SCHEMA_VERSION, load_operator, operator_from_dict

__all__ = [
    "Circuit",
    "Gate",
    "NegativityProfile",
    "EstimateResult",
    "negativity_profile",
    "sample_count",
    "estimate",
    "exact_born",
    "MAX_GATE_ARITY",
    "MAX_EXACT_QUDITS",
]

MAX_GATE_ARITY = 3
MAX_EXACT_QUDITS = 6


@dataclass(frozen=True)
class Gate:
    channel: Channel
    targets: tuple


@dataclass
class Circuit:
    """Product input, a gate list, and a single effect on a subset of qudits."""

    d: int
    n: int
    initial: list = None  # single-qudit states (names or density matrices)
    gates: list = field(default_factory=list)
    effect: Optional[np.ndarray] = None  # defaults to |0><0|
    effect_qudits: tuple = (0,)

    def __post_init__(self):
        check_dimension(self.d)
        if self.n < 1:
            raise ValidationError("circuit needs at least one qudit")
        if self.initial is None:
            self.initial = ["0"] * self.n
        if len(self.initial) != self.n:
            raise ValidationError(f"{len(self.initial)} initial states for {self.n} qudits")
        self.initial = [state_library(s, self.d) if isinstance(s, str) else np.asarray(s, dtype=complex) for s in self.initial]
        for rho in self.initial:
            if rho.shape != (self.d, self.d):
                raise DimensionError("initial states must be single-qudit density matrices")
        gates = []
        for g in self.gates:
            if not isinstance(g, Gate):
                g = Gate(g[0], tuple(g[1]))
            self._check_targets(g.targets)
            if g.channel.n_in != len(g.targets) or g.channel.n_out != len(g.targets) or g.channel.d != self.d:
                raise DimensionError(f"gate {g.channel.name or '?'} does not act on {len(g.targets)} qudits of dimension {self.d}")
            gates.append(g)
        self.gates = gates
        self.effect_qudits = tuple(self.effect_qudits)
        self._check_targets(self.effect_qudits)
        if self.effect is None:
            E = np.zeros((self.d, self.d), dtype=complex)
            E[0, 0] = 1
            self.effect = np.kron(np.eye(self.d ** (len(self.effect_qudits) - 1)), E) if len(self.effect_qudits) > 1 else E
        self.effect = np.asarray(self.effect, dtype=complex)
        if self.effect.shape != (self.d ** len(self.effect_qudits),) * 2:
            raise DimensionError("effect does not match its qudits")

    def _check_targets(self, targets) -> None:
        if len(set(targets)) != len(targets) or any(not 0 <= t < self.n for t in targets):
            raise ValidationError(f"invalid target qudits {list(targets)} for n={self.n}")

    def add(self, channel: Channel, targets: Sequence[int]) -> "Circuit":
        self._check_targets(tuple(targets))
        self.gates.append(Gate(channel, tuple(targets)))
        self.__post_init__()
        return self

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "Circuit":
        d = int(data.get("d", 3))
        gates = []
        for g in data.get("gates", []):
            if "choi_file" in g:
                path = os.path.join(base_dir, g["choi_file"])
                J, dj = load_operator(path)
                k = len(g["targets"])
                ch = from_choi(J, dj, k, k, name=g["choi_file"])
            else:
                ch = parse_channel(g["name"], d)
            gates.append(Gate(ch, tuple(g["targets"])))
        meas = data.get("measure", {"qudit": 0, "effect": "0"})
        qudits = meas.get("qudits", [meas.get("qudit", 0)])
        eff = meas.get("effect", "0")
        effect = state_library(eff, d) if isinstance(eff, str) else operator_from_dict(eff)
        return cls(d, int(data["n"]), data.get("initial"), gates, effect, tuple(qudits))

    @classmethod
    def load(cls, path: str) -> "Circuit":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), os.path.dirname(os.path.abspath(path)))


@dataclass
class NegativityProfile:
    row_norms: list  # per gate, indexed by the restricted phase point on its targets
    gate_negativity: list
    forward: float
    state: float
    effect_max: float

    @property
    def bound(self) -> float:
        """Per-trajectory magnitude bound (forward x state x terminal)."""
        return self.forward * self.state * self.effect_max


@dataclass
class EstimateResult:
    estimate: float
    samples: int
    eps: float
    delta: float
    variance: float
    seed: int
    forward_negativity: float
    shards: int = 1

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "estimate": self.estimate,
            "samples": self.samples,
            "eps": self.eps,
            "delta": self.delta,
            "variance": self.variance,
            "seed": self.seed,
            "forward_negativity": self.forward_negativity,
            "shards": self.shards,
        }


def _gate_tables(c: Circuit) -> list[np.ndarray]:
    out = []
    for g in c.gates:
        if len(g.targets) > MAX_GATE_ARITY:
            raise DimensionError(f"gate on {len(g.targets)} qudits exceeds the arity limit {MAX_GATE_ARITY}")
        out.append(wigner_of_channel(g.channel).values)
    return out


def _effect_table(c: Circuit) -> np.ndarray:
    return wigner_of_measurement(c.effect, c.d).values


def negativity_profile(c: Circuit) -> NegativityProfile:
    norms = [np.abs(T).sum(axis=1) for T in _gate_tables(c)]
    gate_neg = [float(r.max()) for r in norms]
    state = float(np.prod([np.abs(wigner_of_state(r, c.d).values).sum() for r in c.initial]))
    return NegativityProfile(norms, gate_neg, float(np.prod(gate_neg)), state, float(np.abs(_effect_table(c)).max()))


def sample_count(eps: float, delta: float, m_forward: float) -> int:
    """Hoeffding count ``ceil(2 / eps**2 * m_forward**2 * ln(2 / delta))``."""
    if not 0 < eps:
        raise ValidationError("eps must be positive")
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    return int(math.ceil(2.0 / eps**2 * m_forward**2 * math.log(2.0 / delta)))


class _Sampler:
    """Immutable per-gate sampling data shared across shards."""

    def __init__(self, c: Circuit):
        self.c = c
        d2 = c.d * c.d
        self.cdfs, self.signs, self.scales = [], [], []
        for T in _gate_tables(c):
            a = np.abs(T)
            norm = a.sum(axis=1)
            safe = np.where(norm > 0, norm, 1.0)
            cdf = np.cumsum(a / safe[:, None], axis=1)
            cdf[:, -1] = 1.0
            self.cdfs.append(cdf)
            self.signs.append(np.sign(T))
            self.scales.append(norm)
        self.init = []
        for rho in c.initial:
            w = wigner_of_state(rho, c.d).values
            a = np.abs(w)
            cdf = np.cumsum(a / a.sum())
            cdf[-1] = 1.0
            self.init.append((cdf, np.sign(w), a.sum()))
        self.effect = _effect_table(c)
        self.d2 = d2

    def _joint(self, pts: np.ndarray, targets) -> np.ndarray:
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for t in targets:
            idx = idx * self.d2 + pts[:, t]
        return idx

    def _split(self, pts: np.ndarray, targets, idx: np.ndarray) -> None:
        for t in reversed(targets):
            pts[:, t] = idx % self.d2
            idx = idx // self.d2

    def run(self, rng: np.random.Generator, count: int, bound: float) -> np.ndarray:
        c = self.c
        pts = np.empty((count, c.n), dtype=np.int64)
        weight = np.ones(count)
        for q, (cdf, sign, norm) in enumerate(self.init):
            k = np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), cdf.size - 1)
            pts[:, q] = k
            weight *= sign[k] * norm
        for g, cdf, sign, scale in zip(c.gates, self.cdfs, self.signs, self.scales):
            u = self._joint(pts, g.targets)
            rows = cdf[u]
            v = (rows < rng.random(count)[:, None]).sum(axis=1)
            v = np.minimum(v, rows.shape[1] - 1)
            weight *= sign[u, v] * scale[u]
            self._split(pts, g.targets, v)
        out = weight * self.effect[self._joint(pts, c.effect_qudits)]
        if np.abs(out).max(initial=0.0) > bound * (1 + 1e-9):
            raise AssertionError("trajectory weight exceeds the forward negativity bound")
        return out


def _threads(threads: Optional[int]) -> int:
    if threads:
        return max(1, int(threads))
    env = os.environ.get("MAGICLAB_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def estimate(
    c: Circuit,
    eps: float,
    delta: float,
    seed: int = 0,
    shards: int = 1,
    threads: Optional[int] = None,
    samples: Optional[int] = None,
) -> EstimateResult:
    """Unbiased estimate of ``tr[E C(rho)]`` with Hoeffding-sized sampling.

    Shard ``s`` uses the ``s``-th child of ``SeedSequence(seed)``; results
    depend only on ``(seed, shards)``.
    """
    prof = negativity_profile(c)
    bound = prof.bound
    N = samples if samples is not None else sample_count(eps, delta, bound)
    sampler = _Sampler(c)
    sizes = [N // shards + (1 if s < N % shards else 0) for s in range(shards)]
    seqs = np.random.SeedSequence(seed).spawn(shards)

    def work(s):
        return sampler.run(np.random.default_rng(seqs[s]), sizes[s], bound)

    workers = min(_threads(threads), shards)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, range(shards)))
    else:
        parts = [work(s) for s in range(shards)]
    allv = np.concatenate(parts) if parts else np.zeros(0)
    est = float(sum(p.sum() for p in parts) / N)
    var = float(allv.var()) if allv.size else 0.0
    return EstimateResult(est, N, eps, delta, var, seed, prof.forward, shards)


def _full_state(c: Circuit) -> np.ndarray:
    rho = np.ones((1, 1), dtype=complex)
    for r in c.initial:
        rho = np.kron(rho, r)
    return rho


def _embed_effect(c: Circuit) -> np.ndarray:
    """Effect on all qudits (identity elsewhere), qudit order as in the circuit."""
    qs = list(c.effect_qudits)
    rest = [q for q in range(c.n) if q not in qs]
    full = np.kron(c.effect, np.eye(c.d ** len(rest)))
    order = qs + rest
    t = full.reshape([c.d] * (2 * c.n))
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [c.n + i for i in inv])
    return t.reshape(c.d**c.n, c.d**c.n)


def exact_born(c: Circuit, backend: str = "density") -> float:
    """Exact outcome probability, by density-matrix evolution or Wigner-table contraction."""
    if c.n > MAX_EXACT_QUDITS:
        raise DimensionError(f"exact evaluation limited to {MAX_EXACT_QUDITS} qudits")
    if backend == "density":
        rho = _full_state(c)
        for g in c.gates:
            rho = apply_to_subsystems(g.channel, rho, g.targets, c.n)
        return float(np.trace(_embed_effect(c) @ rho).real)
    if backend == "wigner":
        W = WignerTable(c.d, 0, c.n, wigner_of_state(_full_state(c), c.d).values)
        for g in c.gates:
            W = propagate(W, wigner_of_channel(g.channel), g.targets)
        E = wigner_of_measurement(_embed_effect(c), c.d).values
        return float(E @ W.values)
    raise ValueError(f"unknown backend {backend!r}")
