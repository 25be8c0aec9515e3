import numpy as np
import pytest

from magiclab import channels as C
from magiclab.measures import stabilizer_states


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_wplus_state(rng, d=3, n=1):
    """Random state with a nonnegative Wigner function: a random state mixed toward I/d^n just enough."""
    from magiclab.phase_space import wigner_of_state

    rho = C.random_state(rng, d, n)
    mixed = np.eye(d**n) / d**n
    lo, hi = 0.0, 1.0
    if wigner_of_state(rho, d).values.min() >= 0:
        return rho
    for _ in range(60):
        mid = (lo + hi) / 2
        if wigner_of_state(mid * rho + (1 - mid) * mixed, d).values.min() >= 0:
            lo = mid
        else:
            hi = mid
    return lo * rho + (1 - lo) * mixed


def random_stabilizer_mixture(rng, d=3, n=1):
    kets = stabilizer_states(d, n)
    w = rng.dirichlet(np.ones(len(kets)) * 0.3)
    return sum(p * np.outer(k, k.conj()) for p, k in zip(w, kets))


def random_cpwp_channel(rng, d=3, n=1):
    """Convex mixture of random Clifford unitaries, optionally followed by Pauli dephasing."""
    k = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    J = sum(p * C.random_clifford(rng, d, n).choi for p in w)
    ch = C.from_choi(J, d, n, n)
    if rng.random() < 0.5 and n == 1:
        ch = C.compose(C.dephasing(*rng.dirichlet(np.ones(3))), ch)
    return ch
