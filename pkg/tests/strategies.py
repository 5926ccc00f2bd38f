"""Random small Lindblad models for property tests."""
import numpy as np
from hypothesis import strategies as st

from fullcount.hilbert import Operator
from fullcount.liouville import Channel, LindbladModel


def _cplx(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@st.composite
def random_models(draw, max_dim=4, max_channels=3):
    dim = draw(st.integers(2, max_dim))
    n_ch = draw(st.integers(1, max_channels))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    h = _cplx(rng, dim)
    H = Operator(0.5 * (h + h.conj().T))
    chans = [Channel(Operator(_cplx(rng, dim) / np.sqrt(dim)), float(rng.uniform(0.1, 2.0)))
             for _ in range(n_ch)]
    return LindbladModel(H, chans)


def random_density(rng, dim):
    a = _cplx(rng, dim)
    rho = a @ a.conj().T
    return rho / np.trace(rho)
