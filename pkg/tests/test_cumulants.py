import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fullcount.cumulants import (
    cumulant,
    cumulants,
    cumulants_per_fixed_point,
    fano,
    fano_standard,
    hierarchy_source,
    kappa1_from_initial_state,
    solve_hierarchy,
)
from fullcount.errors import UndefinedFanoError
from fullcount.hilbert import basis_ket
from fullcount.ldf import theta_spectral
from fullcount.liouville import build_liouvillian, steady_states
from fullcount.models import (
    decaying_qubit,
    poisson_qubit,
    squeezed_pair,
    telegraph_qubit,
    two_spins_global,
    two_spins_inverse,
    two_spins_same,
)

from strategies import random_density, random_models


def _rho0(model):
    return steady_states(build_liouvillian(model))[0].matrix


def test_first_source_entrywise():
    m = two_spins_same(0.0, 1.0)
    rho = _rho0(m)
    c = m.channels[0]
    L = c.l_op.matrix
    ldl = L.conj().T @ L
    explicit = -c.rate * L @ rho @ L.conj().T + c.rate * rho * np.trace(ldl @ rho)
    got = hierarchy_source(m, 0, 1, [rho]).matrix
    assert np.max(np.abs(got - explicit)) < 1e-14


def test_second_source_entrywise():
    m = two_spins_same(0.0, 1.0)
    h = solve_hierarchy(m, 0, 1)
    rho, r1 = h[0].matrix.matrix, h[1].matrix.matrix
    c = m.channels[0]
    L, g = c.l_op.matrix, c.rate
    Ld = L.conj().T
    tr = np.trace
    # explicit second-order equation, written out without binomial bookkeeping
    explicit = (g * L @ rho @ Ld - 2 * g * L @ r1 @ Ld
                - rho * g * tr(L @ rho @ Ld) + 2 * rho * g * tr(L @ r1 @ Ld)
                + 2 * r1 * g * tr(L @ rho @ Ld))
    got = hierarchy_source(m, 0, 2, [rho, r1]).matrix
    assert np.max(np.abs(got - explicit)) < 1e-13


@given(random_models(max_dim=3), st.integers(1, 6), st.integers(0, 2**31))
def test_source_is_traceless(model, n, seed):
    rng = np.random.default_rng(seed)
    lower = [random_density(rng, model.dim)]
    for _ in range(1, n):
        x = rng.normal(size=(model.dim,) * 2) + 1j * rng.normal(size=(model.dim,) * 2)
        x = x + x.conj().T
        lower.append(x - np.trace(x) / model.dim * np.eye(model.dim))
    src = hierarchy_source(model, 0, n, lower).matrix
    assert abs(np.trace(src)) <= 1e-9 * max(1.0, max(np.abs(x).max() for x in lower))


@given(random_models(max_dim=3), st.integers(1, 5))
def test_hierarchy_orders_traceless_hermitian(model, n_max):
    for o in solve_hierarchy(model, 0, n_max):
        x = o.matrix.matrix
        assert np.abs(x - x.conj().T).max() <= 1e-9
        assert abs(np.trace(x) - (1.0 if o.order == 0 else 0.0)) <= 1e-9
        assert o.residual <= 1e-8


def test_n_max_zero_is_fixed_point():
    m = two_spins_same(0.3, 1.0)
    h = solve_hierarchy(m, 0, 0)
    assert len(h) == 1 and np.allclose(h[0].matrix.matrix, _rho0(m), atol=1e-12)


def test_order_idempotence():
    m = two_spins_inverse(0.4, 1.5)
    assert cumulants(m, 0, 2) == cumulants(m, 0, 3)[:2]


def test_insufficient_depth():
    m = two_spins_same(0.0, 1.0)
    with pytest.raises(ValueError):
        cumulant(m, 0, 3, solve_hierarchy(m, 0, 1))


def test_degenerate_needs_fixed_point():
    with pytest.raises(ValueError):
        solve_hierarchy(two_spins_global(0.1), 0, 1)


def test_kappa1_examples():
    assert abs(cumulants(two_spins_same(0.0, 2.0), 0, 1)[0] - 0.5) < 1e-12
    for h in (0.0, 1.0, 5.0):
        assert abs(cumulants(two_spins_inverse(h, 2.0), 0, 1)[0] - 0.5) < 1e-10


def test_poisson_point_fano_values():
    m = two_spins_same(0.0, 2.0)
    assert fano(m, 0) == 1.0
    assert abs(fano_standard(m, 0) - 0.5) < 1e-12


def test_antibunching_limit():
    assert abs(fano(two_spins_inverse(1e3, 1e-3), 0) - 0.5) < 1e-3


def test_fock_vacuum_emits_nothing():
    k = cumulants(squeezed_pair(1.0, 0.0, 1.0, 1.0, 4), 0, 2)
    assert abs(k[0]) < 1e-12 and abs(k[1]) < 1e-12


def test_quiet_phase_fano_undefined():
    m = two_spins_global(0.1)
    quiet = [r for r in cumulants_per_fixed_point(m, 0, 2) if abs(r.kappa1) < 1e-14]
    assert quiet
    with pytest.raises(UndefinedFanoError):
        quiet[0].fano


def test_telegraph_closed_form():
    # theta(s) = [-(a+b) + sqrt((a+b)^2 - 4ab(1-e^{-s}))]/2, expanded by hand
    a, b = 0.7, 1.9
    k = cumulants(telegraph_qubit(a, b), 0, 2)
    assert abs(k[0] - a * b / (a + b)) < 1e-12
    assert abs(k[1] - a * b * (a * a + b * b) / (a + b) ** 3) < 1e-12


@pytest.mark.parametrize("gamma", [0.3, 1.0, 4.0])
def test_poisson_counts(gamma):
    k = cumulants(poisson_qubit(gamma), 0, 6)
    assert np.allclose(k, gamma, rtol=0, atol=1e-10 * gamma)


def test_third_cumulant_against_spectral():
    m = two_spins_inverse(0.5, 1.0)
    k3 = cumulants(m, 0, 3)[2]
    h = 0.02
    th = [theta_spectral(m, 0, j * h) for j in (-2, -1, 0, 1, 2)]
    d3 = (-0.5 * th[0] + th[1] - th[3] + 0.5 * th[4]) / h ** 3
    assert abs(k3 - (-d3)) < 1e-3 * max(1.0, abs(k3))


def test_dark_steady_state_has_no_statistics():
    # the decaying qubit relaxes to its ground state, which never emits
    m = decaying_qubit(1.0)
    assert np.allclose(cumulants(m, 0, 4), 0.0, atol=1e-14)


def test_global_model_fixed_points():
    res = cumulants_per_fixed_point(two_spins_global(0.1), 0, 2)
    k1 = sorted(r.kappa1 for r in res)
    assert len(res) == 2
    assert abs(k1[0]) < 1e-14 and abs(k1[1] - 0.4 / 8.01) < 1e-10
    assert all(r.phase_transition for r in res)
    single = cumulants_per_fixed_point(two_spins_same(0.0, 1.0), 0, 2)
    assert len(single) == 1 and not single[0].phase_transition


@pytest.mark.parametrize("method", ["projector", "evolve"])
def test_initial_state_rates(method):
    g = 0.1
    m = two_spins_global(g)
    up = basis_ket(0, m.layout)
    assert abs(kappa1_from_initial_state(m, 0, np.outer(up, up), method) - 4 * g / (g * g + 8)) < 1e-8
    mix = (basis_ket(1, m.layout) + basis_ket(2, m.layout)) / np.sqrt(2)
    assert abs(kappa1_from_initial_state(m, 0, np.outer(mix, mix), method)) < 1e-8


def test_weighted_counting_is_linear():
    m = two_spins_same(0.3, 1.2)
    both = cumulants(m, {0: 1, 1: 1}, 1)[0]
    assert abs(both - 2 * cumulants(m, 0, 1)[0]) < 1e-12
    assert abs(cumulants(m, {0: 1, 1: -1}, 1)[0]) < 1e-12

