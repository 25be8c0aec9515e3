"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest

from magiclab import channels as C
from magiclab import measures as M
from magiclab import simulator as S
from magiclab.phase_space import phase_point_operators, reconstruct, transpose_point_map, wigner_of_channel, wigner_of_state, wigner_trace_norm
from magiclab.synthesis import exact_bound

import oracles
from conftest import random_cpwp_channel, random_wplus_state

THETA_T = math.log2(1 + 2 * math.sin(math.pi / 18))
N_PROP = 100


@pytest.fixture
def report(capsys):
    def rep(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return rep


def rand_herm(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (X + X.conj().T) / 2


def bisect(pred, lo, hi, tol=1e-3):
    # smallest p in [lo, hi] with pred(p), assuming pred is monotone
    assert not pred(lo) and pred(hi)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if pred(mid) else (mid, hi)
    return hi


# --- golden values -------------------------------------------------------------------


def test_golden_t_state_mana(report):
    v = M.mana_state(C.state_library("T"))
    report("golden mana(|T>)", abs(v - 0.6657) <= 1e-3, f"{v:.6f} vs 0.6657 +- 1e-3")


def test_golden_ccx(report):
    t0 = time.perf_counter()
    m = M.mana_channel(C.ccx()).log2_value
    b = exact_bound(C.ccx(), C.t_gate(), thauma=False)
    dt = time.perf_counter() - t0
    ok = abs(m - 2.1876) <= 1e-3 and b.mana_ratio >= 3.2861 and b.ceiling == 4 and dt < 120
    report("golden mana(CCX) and T-count bound", ok, f"mana {m:.6f}, ratio {b.mana_ratio:.5f}, ceiling {b.ceiling}, {dt:.1f}s")


def test_golden_thauma_formula(report):
    s = M.max_thauma_state(C.state_library("T")).log2_value
    c = M.max_thauma_channel(C.t_gate()).log2_value
    ok = abs(s - THETA_T) <= 1e-4 and abs(c - THETA_T) <= 1e-4
    report("golden thauma(T) = log2(1+2 sin(pi/18))", ok, f"state {s:.8f}, channel {c:.8f}, formula {THETA_T:.8f}")


def test_golden_thauma_decimal(report):
    # the quoted decimal differs from its own closed form by 6e-4
    s = M.max_thauma_state(C.state_library("T")).log2_value
    c = M.max_thauma_channel(C.t_gate()).log2_value
    ok = abs(s - 0.43068) <= 1e-4 and abs(c - 0.43068) <= 1e-4
    report("golden thauma(T) = 0.43068 +- 1e-4", ok, f"state {s:.8f}, channel {c:.8f}")


def test_golden_werner_holevo(report):
    wh = C.werner_holevo()
    rows = np.abs(wigner_of_channel(wh).values).sum(axis=1)
    row_err = np.abs(rows - 5 / 3).max()
    gain = M.amortized_lower_bound(wh, [C.state_library("phi")])
    rng = np.random.default_rng(0)
    worst = min(wigner_of_state(wh(C.random_state(rng)), 3).values.min() for _ in range(N_PROP))
    ok = row_err <= 1e-10 and abs(gain - math.log2(5 / 3)) <= 1e-8 and worst >= -1e-12
    report("golden Werner-Holevo", ok, f"row err {row_err:.1e}, gain {gain:.10f}, min output Wigner entry {worst:.3e}")


def test_threshold_depolarized_t(report):
    t0 = time.perf_counter()
    p = bisect(lambda p: bool(M.is_cpwp(C.compose(C.depolarizing(3, p), C.t_gate()))), 0.0, 8 / 9)
    ok = 0.61 <= p <= 0.63
    report("threshold CPWP(dep_p o T) in [0.61, 0.63]", ok, f"p* = {p:.4f} ({time.perf_counter() - t0:.1f}s)")


def test_threshold_depolarized_ccx(report):
    t0 = time.perf_counter()

    def free(p):
        dep = C.depolarizing(3, p)
        noise = C.tensor(dep, C.tensor(dep, dep))
        return M.mana_channel(C.compose(noise, C.ccx())).log2_value <= 1e-6

    p = bisect(free, 0.0, 8 / 9)
    dt = time.perf_counter() - t0
    ok = 0.74 <= p <= 0.76 and dt < 180
    report("threshold mana(dep_p^x3 o CCX) = 0 in [0.74, 0.76]", ok, f"p* = {p:.4f} ({dt:.1f}s)")


def test_utheta_gap(report):
    thetas = np.pi * np.array([1, 1.25, 1.5, 1.75, 2])
    rows = []
    for th in thetas:
        ch = C.u_theta(th)
        rows.append((2 ** M.mana_channel(ch).log2_value, M.robustness_wplus(ch.choi / 3).exp_value))
    ok = all(a <= b + 1e-7 for a, b in rows) and rows[-1][1] - rows[-1][0] > 1e-3
    detail = ", ".join(f"{a:.4f}<={b:.4f}" for a, b in rows)
    report("U_theta exp-mana <= W+ robustness, strict at 2pi", ok, detail)


# --- property suites ----------------------------------------------------------------------


def test_property_phase_space(report):
    err = 0.0
    for d in (3, 5, 7):
        A = phase_point_operators(d)
        err = max(err, np.abs(A - np.array(oracles.point_ops(d))).max())
        err = max(err, np.abs(A - A.conj().transpose(0, 2, 1)).max())
        err = max(err, np.abs(A.sum(axis=0) / d - np.eye(d)).max())
        err = max(err, np.abs(np.einsum("aij,bji->ab", A, A) - d * np.eye(d * d)).max())
        err = max(err, np.abs(np.trace(A, axis1=1, axis2=2) - 1).max())
        err = max(err, np.abs(A.transpose(0, 2, 1) - A[transpose_point_map(d)]).max())
    rng = np.random.default_rng(0)
    for k in range(N_PROP):
        d = (3, 5, 7)[k % 3]
        X = rand_herm(rng, d)
        W = wigner_of_state(X, d)
        err = max(err, abs(W.values.sum() - np.trace(X).real), np.abs(reconstruct(W) - X).max())
    report("properties phase-space identities", err <= 1e-10, f"max err {err:.1e} over d=3,5,7 and {N_PROP} reconstructions")


def test_property_mana(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    for k in range(N_PROP):
        a, b = C.random_channel(rng), C.random_channel(rng)
        ma, mb = M.mana_channel(a).log2_value, M.mana_channel(b).log2_value
        worst = max(worst, abs(M.mana_channel(C.tensor(a, b)).log2_value - ma - mb))
        worst = max(worst, M.mana_channel(C.compose(b, a)).log2_value - ma - mb)
        free = random_cpwp_channel(rng)
        worst = max(worst, abs(M.mana_channel(free).log2_value))
        if (ma <= 1e-6) != bool(M.is_cpwp(a, 1e-6)):
            worst = max(worst, 1.0)
        sigma = C.random_state(rng)
        worst = max(worst, abs(M.mana_channel(C.replacer(sigma)).log2_value - M.mana_state(sigma)))
        gain = M.amortized_lower_bound(a, [C.random_state(rng, 3, 2), C.state_library("phi")])
        worst = max(worst, gain - ma)
    report("properties mana axioms", worst <= 1e-8, f"max violation {worst:.1e} over {N_PROP} channel pairs")


def test_property_thauma(report):
    rng = np.random.default_rng(2)
    excess, gap = -math.inf, 0.0
    for _ in range(N_PROP):
        ch = C.random_channel(rng)
        rep = M.max_thauma_channel(ch)
        excess = max(excess, rep.log2_value - M.mana_channel(ch).log2_value)
        gap = max(gap, rep.gap)
    ok = excess <= 1e-7 and gap <= 1e-6
    report("properties thauma <= mana, duality gap", ok, f"max(thauma - mana) {excess:.2e}, max gap {gap:.1e} over {N_PROP}")


def test_property_trace_and_norm_contraction(report):
    rng = np.random.default_rng(3)
    tr_excess, norm_excess = -math.inf, -math.inf
    for k in range(N_PROP):
        ch = C.random_channel(rng)
        rep = M.max_thauma_channel(ch) if k < 20 else None
        E = ch.choi / M.mana_channel(ch).exp_value if rep is None else rep.certificate["Y"] / rep.certificate["t"]
        w, U = np.linalg.eigh(E)
        E = (U * np.clip(w, 0, None)) @ U.conj().T
        rho = random_wplus_state(rng)
        tr_excess = max(tr_excess, np.trace(oracles.apply_choi(E, rho, 3)).real - 1)
        n = 1 + k % 2
        Pi = random_cpwp_channel(rng, 3, n)
        Q = rand_herm(rng, 3**n)
        norm_excess = max(norm_excess, wigner_trace_norm(C.apply(Pi, Q)) - wigner_trace_norm(Q))
    ok = tr_excess <= 1e-6 and norm_excess <= 1e-9
    report("properties trace non-increase on W+ and Wigner-norm data processing", ok, f"trace excess {tr_excess:.1e}, norm excess {norm_excess:.1e} over {N_PROP}")


# --- simulator --------------------------------------------------------------------------------


def test_simulator(report):
    t0 = time.perf_counter()
    c = S.Circuit(3, 1, ["+"], [(C.t_gate(), [0])], C.state_library("0"))
    exact = S.exact_born(c)
    agree = abs(exact - S.exact_born(c, "wigner"))
    hits = sum(abs(S.estimate(c, 0.05, 0.1, seed=s).estimate - exact) <= 0.05 for s in range(200))
    m = S.negativity_profile(c).forward
    counts_ok = all(S.sample_count(e, dl, m) == oracles.hoeffding(e, dl, m) for e in (0.01, 0.05, 0.1) for dl in (0.01, 0.1, 0.5))
    dt = time.perf_counter() - t0
    ok = agree <= 1e-9 and hits >= 170 and counts_ok and dt < 300
    report("simulator backends, coverage, sample counts", ok, f"backend diff {agree:.1e}, coverage {hits}/200, Hoeffding match {counts_ok}, {dt:.1f}s")


def test_distillable_bound(report):
    v = M.distillable_t_bound(C.t_gate())
    report("distillable T bound of T gate = 1", abs(v - 1) <= 1e-4, f"{v:.8f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
