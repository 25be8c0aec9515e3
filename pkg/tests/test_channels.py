import json

import numpy as np
import pytest

from magiclab import channels as C
from magiclab._validation import DimensionError, ValidationError
from magiclab.phase_space import wigner_of_channel, wigner_of_state, wigner_trace_norm
from magiclab.serialization import dumps, load_operator, operator_from_dict, operator_to_dict

import oracles


LIBRARY = [
    C.identity(3),
    C.t_gate(),
    C.ccx(),
    C.fourier(),
    C.phase_gate(),
    C.csum(),
    C.depolarizing(3, 0.3),
    C.dephasing(0.5, 0.3, 0.2),
    C.werner_holevo(),
    C.replacer(C.state_library("T")),
    C.u_theta(1.234),
]


@pytest.mark.parametrize("ch", LIBRARY, ids=lambda c: c.name or "ch")
def test_library_channels_are_tp_and_cp(ch):
    assert ch.is_trace_preserving(1e-10)
    assert np.linalg.eigvalsh(ch.choi).min() > -1e-10


@pytest.mark.parametrize("seed", range(50))
def test_choi_from_kraus_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    ch = C.random_channel(rng, 3, 1)
    assert np.abs(ch.choi - oracles.choi_from_kraus(ch.kraus_operators())).max() < 1e-10
    rho = C.random_state(rng, 3)
    via_kraus = sum(K @ rho @ K.conj().T for K in ch.kraus_operators())
    assert np.abs(C.apply(ch, rho) - via_kraus).max() < 1e-10
    assert np.abs(oracles.apply_choi(ch.choi, rho, 3) - via_kraus).max() < 1e-10
    choi_only = C.from_choi(ch.choi, 3, 1, 1)
    assert np.abs(C.apply(choi_only, rho) - via_kraus).max() < 1e-10


@pytest.mark.parametrize("seed", range(30))
def test_kraus_recovery_from_choi(seed):
    rng = np.random.default_rng(seed)
    ch = C.random_channel(rng, 3, 1)
    rebuilt = C.from_kraus(C.from_choi(ch.choi, 3, 1, 1).kraus_operators())
    assert np.abs(rebuilt.choi - ch.choi).max() < 1e-10


@pytest.mark.parametrize("seed", range(30))
def test_compose_and_tensor(seed):
    rng = np.random.default_rng(seed)
    a, b = C.random_channel(rng, 3, 1), C.random_channel(rng, 3, 1)
    rho = C.random_state(rng, 3)
    assert np.abs(C.apply(C.compose(b, a), rho) - C.apply(b, C.apply(a, rho))).max() < 1e-10
    # Choi of the composition from the matrix-product definition
    ref = oracles.choi_from_kraus([Kb @ Ka for Kb in b.kraus_operators() for Ka in a.kraus_operators()])
    assert np.abs(C.compose(b, a).choi - ref).max() < 1e-10
    rho2 = C.random_state(rng, 3, 2)
    ab = C.tensor(a, b)
    assert ab.n_in == 2 and ab.choi.shape == (81, 81)
    ref2 = sum(
        np.kron(Ka, Kb) @ rho2 @ np.kron(Ka, Kb).conj().T for Ka in a.kraus_operators() for Kb in b.kraus_operators()
    )
    assert np.abs(C.apply(ab, rho2) - ref2).max() < 1e-10


def test_compose_identity():
    rng = np.random.default_rng(0)
    N = C.random_channel(rng)
    assert np.abs(C.compose(C.identity(3), N).choi - N.choi).max() < 1e-10
    assert np.abs(C.compose(N, C.identity(3)).choi - N.choi).max() < 1e-10


def test_dimension_errors():
    with pytest.raises(DimensionError):
        C.compose(C.identity(3, 2), C.identity(3, 1))
    with pytest.raises(DimensionError):
        C.apply(C.identity(3), np.eye(9) / 9)
    with pytest.raises(ValidationError):
        C.from_choi(-np.eye(9), 3, 1, 1)


def test_apply_to_subsystems():
    rng = np.random.default_rng(5)
    ch = C.random_channel(rng, 3, 1)
    a, b = C.random_state(rng, 3), C.random_state(rng, 3)
    out = C.apply_to_subsystems(ch, np.kron(a, b), [1], 2)
    assert np.abs(out - np.kron(a, C.apply(ch, b))).max() < 1e-12


# --- named gates ---------------------------------------------------------------------


def test_t_gate():
    xi = np.exp(2j * np.pi / 9)
    U = C.t_gate().unitary
    assert np.abs(U - np.diag([xi, 1, xi.conjugate()])).max() < 1e-12
    Z = np.diag(np.exp(2j * np.pi * np.arange(3) / 3))
    assert np.abs(U @ Z - Z @ U).max() < 1e-12
    U9 = np.linalg.matrix_power(U, 9)
    assert np.abs(U9 / U9[0, 0] - np.eye(3)).max() < 1e-12
    plus_t = C.apply(C.t_gate(), C.state_library("+"))
    assert abs(np.log2(wigner_trace_norm(plus_t)) - 0.6657) < 1e-3
    assert np.abs(plus_t - C.state_library("T")).max() < 1e-12


def test_ccx():
    U = C.ccx().unitary
    assert set(np.unique(np.round(U.real, 12))) == {0.0, 1.0}
    assert np.abs(U @ U.conj().T - np.eye(27)).max() < 1e-12
    for a in range(3):
        for b in range(3):
            for c in range(3):
                col = U[:, 9 * a + 3 * b + c]
                assert col[9 * a + 3 * b + (c + a * b) % 3] == 1
    for b in range(3):
        for c in range(3):
            k = 3 * b + c
            assert U[k, k] == 1


def test_clifford_generators_are_cpwp():
    for ch in [C.fourier(), C.phase_gate(), C.csum(), C.pauli(3, 1, 2)]:
        W = wigner_of_channel(ch).values
        assert W.min() > -1e-12
        assert np.allclose(np.sort(W, axis=1)[:, -1], 1)


def test_depolarizing():
    rng = np.random.default_rng(3)
    rho = C.random_state(rng)
    assert np.abs(C.depolarizing(3, 0).choi - C.identity(3).choi).max() < 1e-12
    # full mixing at p = 8/9 under the (1-p) rho + p/8 sum_{P != 1} P rho P^dag form
    assert np.abs(C.apply(C.depolarizing(3, 8 / 9), rho) - np.eye(3) / 3).max() < 1e-12
    # at p = 1 the output is (3*1 - rho)/8
    assert np.abs(C.apply(C.depolarizing(3, 1), rho) - (np.eye(3) - rho / 3) * 3 / 8).max() < 1e-12
    # Wigner form (1 - 9p/8) W + p/8
    for p in [0.1, 0.5, 0.7]:
        out = wigner_of_state(C.apply(C.depolarizing(3, p), rho)).values
        assert np.abs(out - ((1 - 9 * p / 8) * wigner_of_state(rho).values + p / 8)).max() < 1e-12
    with pytest.raises(ValueError):
        C.depolarizing(3, 1.5)


def test_dephasing_validation():
    with pytest.raises(ValueError):
        C.dephasing(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        C.dephasing(-0.1, 0.6, 0.5)


@pytest.mark.parametrize("seed", range(100))
def test_werner_holevo_outputs_in_wplus(seed):
    rng = np.random.default_rng(seed)
    rho = C.random_state(rng, 3, rank=1 if seed % 2 else None)
    out = C.apply(C.werner_holevo(), rho)
    assert np.abs(out - (np.eye(3) - rho.T) / 2).max() < 1e-12
    assert wigner_of_state(out).values.min() >= -1e-12


def test_replacer_output():
    rng = np.random.default_rng(4)
    sigma = C.random_state(rng)
    assert np.abs(C.apply(C.replacer(sigma), C.random_state(rng)) - sigma).max() < 1e-12


# --- states -------------------------------------------------------------------------


def test_state_library():
    phi = C.state_library("phi")
    assert phi.shape == (9, 9)
    assert wigner_of_state(phi).values.min() >= -1e-12
    plus = C.state_library("+")
    assert np.abs(plus - np.ones((3, 3)) / 3).max() < 1e-12
    assert np.abs(C.fourier().unitary @ np.eye(3)[0] - np.ones(3) / np.sqrt(3)).max() < 1e-12
    T = C.state_library("T")
    assert np.linalg.matrix_rank(T, tol=1e-10) == 1 and abs(np.trace(T) - 1) < 1e-12
    assert C.state_library("0", n=2).shape == (9, 9)
    with pytest.raises(KeyError):
        C.state_library("nope")


# --- expression language ---------------------------------------------------------------


def test_parse_channel():
    a = C.parse_channel("dep:0.7∘t")
    b = C.compose(C.depolarizing(3, 0.7), C.t_gate())
    assert np.abs(a.choi - b.choi).max() < 1e-12
    assert np.abs(C.parse_channel("dep:0.7.t").choi - b.choi).max() < 1e-12
    c = C.parse_channel("dep3:0.1∘ccx")
    assert c.n_in == 3
    d = C.parse_channel("(t x id) ∘ csum")
    ref = C.compose(C.tensor(C.t_gate(), C.identity(3)), C.csum())
    assert np.abs(d.choi - ref.choi).max() < 1e-12
    assert C.parse_channel("u:6.283185307179586").choi.shape == (9, 9)
    with pytest.raises(KeyError, match="did you mean"):
        C.parse_channel("ccz")
    with pytest.raises(ValueError):
        C.parse_channel("(t")


def test_unitary_and_choi_files(tmp_path):
    U = C.fourier().unitary
    path = tmp_path / "f.json"
    path.write_text(json.dumps(operator_to_dict(U, 3)))
    assert np.abs(C.parse_channel(f"unitary:{path}").choi - C.fourier().choi).max() < 1e-12
    cpath = tmp_path / "t.json"
    cpath.write_text(json.dumps(C.t_gate().to_dict()))
    assert np.abs(C.parse_channel(f"choi:{cpath}").choi - C.t_gate().choi).max() < 1e-12


def test_operator_json_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    X = C.random_state(rng, 3, 2)
    data = operator_to_dict(X, 3)
    assert data["n"] == 2
    assert np.abs(operator_from_dict(data) - X).max() == 0
    p = tmp_path / "x.json"
    p.write_text(json.dumps(data))
    Y, d = load_operator(str(p))
    assert d == 3 and np.abs(Y - X).max() == 0
    assert dumps({"b": 1 / 3, "a": [np.float64(2.0)]}) == '{"a": [2.0], "b": 0.333333333333}'


def test_angle_tokens():
    assert np.abs(C.parse_channel("u:2pi").choi - C.t_gate().choi).max() < 1e-12
    assert np.abs(C.parse_channel("u:0.5pi").choi - C.u_theta(np.pi / 2).choi).max() < 1e-12
    assert abs(C.parse_angle("-pi") + np.pi) < 1e-15 and C.parse_angle("1.5") == 1.5
