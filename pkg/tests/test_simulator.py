import json
import math

import numpy as np
import pytest

from magiclab import channels as C
from magiclab import simulator as S
from magiclab._validation import DimensionError, ValidationError
from magiclab.measures import is_cpwp, mana_channel

import oracles


def t_circuit():
    return S.Circuit(3, 1, ["+"], [(C.t_gate(), [0])])


# --- sample counts -----------------------------------------------------------------------


def test_sample_count_examples():
    assert S.sample_count(1, 2 / math.e**2, 1) == 4
    # doubling the negativity quadruples the count up to ceiling rounding
    assert abs(S.sample_count(0.1, 0.05, 2) - 4 * S.sample_count(0.1, 0.05, 1)) <= 3
    m = S.negativity_profile(t_circuit()).forward
    assert S.sample_count(0.01, 0.05, m) == oracles.hoeffding(0.01, 0.05, m)
    for bad in [(0, 0.1), (0.1, 0), (0.1, 1), (-1, 0.5)]:
        with pytest.raises(ValidationError):
            S.sample_count(*bad, 1.0)


@pytest.mark.parametrize("seed", range(100))
def test_sample_count_formula(seed):
    rng = np.random.default_rng(seed)
    eps, delta, m = rng.uniform(0.01, 1), rng.uniform(0.001, 0.999), rng.uniform(1, 5)
    assert S.sample_count(eps, delta, m) == oracles.hoeffding(eps, delta, m)


# --- negativity profiles ----------------------------------------------------------------


def test_profile_examples():
    rng = np.random.default_rng(0)
    cliff = S.Circuit(3, 2, gates=[(C.random_clifford(rng, 3, 2), [0, 1]), (C.fourier(), [1])])
    assert abs(S.negativity_profile(cliff).forward - 1) < 1e-12
    m_t = 2 ** mana_channel(C.t_gate()).log2_value
    assert abs(S.negativity_profile(t_circuit()).forward - m_t) < 1e-12
    L = 4
    c = S.Circuit(3, 1, ["+"], [(C.t_gate(), [0])] * L)
    assert abs(S.negativity_profile(c).forward - m_t**L) < 1e-10
    assert S.negativity_profile(c).state == pytest.approx(1.0)


def test_gate_arity_limit():
    c = S.Circuit(3, 4, gates=[(C.identity(3, 4), [0, 1, 2, 3])])
    with pytest.raises(DimensionError):
        S.negativity_profile(c)


def test_circuit_validation():
    with pytest.raises(ValidationError):
        S.Circuit(3, 2, gates=[(C.csum(), [0, 0])])
    with pytest.raises(ValidationError):
        S.Circuit(3, 1, gates=[(C.t_gate(), [1])])
    with pytest.raises(DimensionError):
        S.Circuit(3, 2, gates=[(C.csum(), [0])])


# --- exact oracles ------------------------------------------------------------------------


def test_exact_examples():
    c = S.Circuit(3, 1, ["+"], [(C.t_gate(), [0]), (C.from_unitary(C.t_gate().unitary.conj().T), [0])], C.state_library("+"))
    assert abs(S.exact_born(c) - 1) < 1e-12
    assert abs(S.exact_born(c, "wigner") - 1) < 1e-12
    c = t_circuit()
    assert abs(S.exact_born(c) - S.exact_born(c, "wigner")) < 1e-9
    with pytest.raises(ValueError):
        S.exact_born(c, "magic")
    with pytest.raises(DimensionError):
        S.exact_born(S.Circuit(3, 7))


@pytest.mark.parametrize("seed", range(30))
def test_clifford_circuits_give_grid_probabilities(seed):
    rng = np.random.default_rng(seed)
    n = 2
    c = S.Circuit(3, n, gates=[(C.random_clifford(rng, 3, n), [0, 1])], effect_qudits=[int(rng.integers(n))])
    p = S.exact_born(c)
    assert min(abs(p - g) for g in [0, 1 / 3, 1]) < 1e-10


@pytest.mark.parametrize("seed", range(30))
def test_backends_agree_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    n = 2
    gates = []
    for _ in range(3):
        k = int(rng.integers(1, 3))
        gates.append((C.random_channel(rng, 3, k), list(rng.permutation(n)[:k])))
    E = C.random_state(rng, 3, rank=1)
    c = S.Circuit(3, n, [C.random_state(rng), "T"], gates, E, [int(rng.integers(n))])
    assert abs(S.exact_born(c) - S.exact_born(c, "wigner")) < 1e-9


def test_two_qudit_effect():
    rng = np.random.default_rng(9)
    E = C.random_state(rng, 3, 2, rank=1)
    c = S.Circuit(3, 3, ["+", "T", "0"], [(C.csum(), [1, 2]), (C.t_gate(), [0])], E, [2, 0])
    assert abs(S.exact_born(c) - S.exact_born(c, "wigner")) < 1e-9


def test_folded_preparation_equivalence():
    # preparing rho via a replacer gate on |0> equals starting in rho
    rho = C.state_library("T")
    folded = S.Circuit(3, 1, ["0"], [(C.replacer(rho), [0]), (C.fourier(), [0])])
    plain = S.Circuit(3, 1, [rho], [(C.fourier(), [0])])
    assert abs(S.exact_born(folded) - S.exact_born(plain)) < 1e-12
    a = S.estimate(folded, 0.05, 0.1, seed=4, samples=20000).estimate
    assert abs(a - S.exact_born(plain)) < 0.05


# --- sampling ----------------------------------------------------------------------------------


def test_trivial_circuit_is_exact():
    r = S.estimate(S.Circuit(3, 1), 0.1, 0.1, seed=0)
    assert r.estimate == 1.0 and r.variance == 0.0


def test_cpwp_circuit_samples_probabilities():
    ch = C.compose(C.depolarizing(3, 0.7), C.t_gate())
    assert is_cpwp(ch)
    c = S.Circuit(3, 1, ["+"], [(ch, [0])])
    prof = S.negativity_profile(c)
    assert abs(prof.forward - 1) < 1e-12
    r = S.estimate(c, 0.05, 0.1, seed=1)
    assert r.variance <= 1
    samp = S._Sampler(c)
    assert (samp.signs[0] >= 0).all() and np.allclose(samp.scales[0], 1)
    vals = samp.run(np.random.default_rng(0), 1000, prof.bound)
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12


def test_unbiased():
    c = t_circuit()
    exact = S.exact_born(c)
    r = S.estimate(c, 0.05, 0.1, seed=123, samples=20000)
    se = math.sqrt(r.variance / r.samples)
    assert abs(r.estimate - exact) <= 5 * se


def test_unbiased_two_qutrits():
    rng = np.random.default_rng(7)
    c = S.Circuit(3, 2, ["+", "+"], [(C.t_gate(), [0]), (C.csum(), [0, 1]), (C.t_gate(), [1])], C.state_library("+"), [1])
    exact = S.exact_born(c)
    r = S.estimate(c, 0.05, 0.1, seed=int(rng.integers(1 << 31)), samples=50000)
    assert abs(r.estimate - exact) <= 5 * math.sqrt(r.variance / r.samples)


def test_reproducible_and_sharded():
    c = t_circuit()
    a = S.estimate(c, 0.05, 0.1, seed=5, shards=3)
    b = S.estimate(c, 0.05, 0.1, seed=5, shards=3, threads=3)
    assert a.estimate == b.estimate and a.samples == b.samples
    assert S.estimate(c, 0.05, 0.1, seed=6, shards=3).estimate != a.estimate


def test_sample_bound_assertion():
    c = t_circuit()
    samp = S._Sampler(c)
    with pytest.raises(AssertionError):
        samp.run(np.random.default_rng(0), 1000, 0.5)


def test_coverage():
    c = t_circuit()
    exact = S.exact_born(c)
    hits = sum(abs(S.estimate(c, 0.05, 0.1, seed=s).estimate - exact) <= 0.05 for s in range(200))
    assert hits / 200 >= 1 - 0.1 - 0.05


def test_circuit_json(tmp_path):
    (tmp_path / "t.json").write_text(json.dumps(C.t_gate().to_dict()["choi"]))
    spec = {
        "d": 3,
        "n": 2,
        "initial": ["+", "0"],
        "gates": [{"name": "t", "targets": [0]}, {"choi_file": "t.json", "targets": [1]}, {"name": "csum", "targets": [0, 1]}],
        "measure": {"qudit": 1, "effect": "+"},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(spec))
    c = S.Circuit.load(str(path))
    assert len(c.gates) == 3 and c.effect_qudits == (1,)
    ref = S.Circuit(3, 2, ["+", "0"], [(C.t_gate(), [0]), (C.t_gate(), [1]), (C.csum(), [0, 1])], C.state_library("+"), [1])
    assert abs(S.exact_born(c) - S.exact_born(ref)) < 1e-12
    assert set(S.estimate(c, 0.2, 0.2, seed=0).to_dict()) >= {"estimate", "samples", "eps", "delta", "variance", "seed"}
