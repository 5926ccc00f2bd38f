import numpy as np
import pytest

from fullcount.errors import DimensionCapError, DimensionError
from fullcount.liouville import build_liouvillian, steady_states
from fullcount.models import (
    MODEL_BUILDERS,
    KerrParams,
    kerr_bistable_window,
    kerr_branches,
    kerr_intensity,
    kerr_kappa1,
    squeezed_pair,
    squeezed_pair_adaptive,
    two_spins_global,
    two_spins_inverse,
    two_spins_same,
)

P = KerrParams(1.0, 0.5, 0.01)


def test_inverse_equals_same_at_zero_field():
    a, b = two_spins_same(0.0, 1.3), two_spins_inverse(0.0, 1.3)
    assert np.array_equal(a.hamiltonian.matrix, b.hamiltonian.matrix)
    assert all(np.array_equal(x.l_op.matrix, y.l_op.matrix) for x, y in zip(a.channels, b.channels))


def test_global_model_degeneracy():
    assert len(steady_states(build_liouvillian(two_spins_global(0.1)))) >= 2


def test_bad_parameters():
    with pytest.raises(ValueError):
        two_spins_same(0.0, 0.0)
    with pytest.raises(DimensionError):
        squeezed_pair(1.0, 0.1, 1.0, 1.0, 3)
    with pytest.raises(ValueError):
        KerrParams(1.0, -1.0, 0.01)


def test_adaptive_cutoff_and_cap():
    model, rho = squeezed_pair_adaptive(1.0, 0.1, 1.0, 1.0)
    c = model.layout.dims[0]
    p = np.real(np.diag(rho.matrix)).reshape(c, c)
    assert p[-1].sum() < 1e-8
    with pytest.raises(DimensionCapError):
        squeezed_pair_adaptive(1.0, 0.4, 1.0, 1.0, max_liouville_dim=300)


def test_kerr_bounds():
    b = kerr_branches(P)
    r = np.sqrt(13 / 16)
    assert abs(b.n_minus - (2 - r) / 0.06) < 1e-9
    assert abs(b.n_plus - (2 + r) / 0.06) < 1e-9


def test_kerr_zero_drive():
    p = KerrParams(1.0, 0.5, 0.01, 0.0)
    b = kerr_branches(p)
    assert b.roots == (0.0,) and b.stable == (True,)
    assert kerr_kappa1(p) == [0.0]


def test_kerr_roots_solve_cubic():
    for inten in (1.0, 5.0, 20.0):
        p = KerrParams(1.0, 0.5, 0.01, inten)
        for n in kerr_branches(p).roots:
            assert abs(kerr_intensity(p, n) - inten) < 1e-9 * inten


def test_kerr_window_two_branches():
    lo, hi = kerr_bistable_window(P)
    mid = KerrParams(1.0, 0.5, 0.01, 0.5 * (lo + hi))
    assert len(kerr_kappa1(mid)) == 2
    assert len(kerr_kappa1(KerrParams(1.0, 0.5, 0.01, 0.5 * lo))) == 1
    assert len(kerr_kappa1(KerrParams(1.0, 0.5, 0.01, 2 * hi))) == 1


def test_kerr_monostable_regime():
    p = KerrParams(0.2, 1.0, 0.01, 3.0)
    assert kerr_bistable_window(p) is None
    assert all(kerr_branches(p).stable)


def test_builders_registry():
    assert MODEL_BUILDERS["two_spins_same"] is two_spins_same
