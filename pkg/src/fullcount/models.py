"""Model zoo: damped spin pairs, a squeezed oscillator pair and the Kerr mean field."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionCapError, DimensionError
from .gaussian import GaussianModel
from .hilbert import boson_annihilation, embed, identity, pauli
from .liouville import Channel, LindbladModel, build_liouvillian, steady_states

__all__ = [
    "two_spins_same",
    "two_spins_inverse",
    "two_spins_global",
    "decaying_qubit",
    "pumped_qubit",
    "telegraph_qubit",
    "poisson_qubit",
    "squeezed_pair",
    "squeezed_pair_gaussian",
    "squeezed_pair_adaptive",
    "KerrParams",
    "KerrBranches",
    "kerr_intensity",
    "kerr_branches",
    "kerr_bistable_window",
    "kerr_kappa1",
    "MODEL_BUILDERS",
]

_PAIR = (2, 2)


def _check_rate(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def _spin_pair(h, gamma, sign, name):
    _check_rate(gamma)
    xx = pauli("x", 0, _PAIR) @ pauli("x", 1, _PAIR)
    H = xx + h * (pauli("z", 0, _PAIR) + sign * pauli("z", 1, _PAIR))
    chans = [Channel(pauli("plus", 0, _PAIR), gamma), Channel(pauli("plus", 1, _PAIR), gamma)]
    return LindbladModel(H, chans, name=name, params={"h": h, "gamma": gamma})


def two_spins_same(h: float, gamma: float) -> LindbladModel:
    """``H = sx1 sx2 + h (sz1 + sz2)``, spins pumped up independently at rate ``gamma``.

    Channel 0 counts flips of spin 1, channel 1 flips of spin 2.
    """
    return _spin_pair(h, gamma, 1.0, "two_spins_same")


def two_spins_inverse(h: float, gamma: float) -> LindbladModel:
    """As :func:`two_spins_same` with the field reversed on spin 2."""
    return _spin_pair(h, gamma, -1.0, "two_spins_inverse")


def two_spins_global(gamma: float) -> LindbladModel:
    """``H = sx1 sx2`` with one collective channel ``L = s+1 s+2`` at rate ``gamma``.

    The steady state is degenerate: an active sector spanned by
    ``|up up>, |dn dn>`` and a quiet sector spanned by ``|up dn>, |dn up>``.
    """
    _check_rate(gamma)
    H = pauli("x", 0, _PAIR) @ pauli("x", 1, _PAIR)
    L = pauli("plus", 0, _PAIR) @ pauli("plus", 1, _PAIR)
    return LindbladModel(H, [Channel(L, gamma)], name="two_spins_global", params={"gamma": gamma})


def _qubit(h, chans, name, params):
    return LindbladModel(h * pauli("z"), chans, name=name, params=params)


def decaying_qubit(gamma: float, h: float = 0.0) -> LindbladModel:
    """Qubit with ``L = sigma_minus`` (up -> down) at rate ``gamma``."""
    return _qubit(h, [Channel(pauli("minus"), gamma)], "decaying_qubit", {"gamma": gamma, "h": h})


def pumped_qubit(gamma: float, h: float = 0.0) -> LindbladModel:
    """Qubit with ``L = sigma_plus`` (down -> up) at rate ``gamma``."""
    return _qubit(h, [Channel(pauli("plus"), gamma)], "pumped_qubit", {"gamma": gamma, "h": h})


def telegraph_qubit(gamma_up: float, gamma_down: float) -> LindbladModel:
    """Incoherent two-state switching; channel 0 is ``sigma_plus``, channel 1 ``sigma_minus``.

    Counting channel 0 gives
    ``theta(s) = [-(a+b) + sqrt((a+b)^2 - 4ab(1-e^{-s}))] / 2``
    with ``a = gamma_up``, ``b = gamma_down``.
    """
    chans = [Channel(pauli("plus"), gamma_up), Channel(pauli("minus"), gamma_down)]
    return _qubit(0.0, chans, "telegraph_qubit", {"gamma_up": gamma_up, "gamma_down": gamma_down})


def poisson_qubit(gamma: float) -> LindbladModel:
    """``L = sigma_x`` at rate ``gamma``: since ``L^dag L = 1`` the counts are exactly Poisson."""
    _check_rate(gamma)
    return _qubit(0.0, [Channel(pauli("x"), gamma)], "poisson_qubit", {"gamma": gamma})


def squeezed_pair(omega: float, g: float, gamma1: float, gamma2: float,
                  cutoff: int) -> LindbladModel:
    """Two modes with ``H = omega sum(a^dag a + 1/2) + g (a1 a2 + h.c.)``, Fock-truncated.

    Channel 0 is ``L = a1`` at ``gamma1``, channel 1 ``L = a2`` at ``gamma2``.
    """
    if cutoff < 4:
        raise DimensionError(f"Fock cutoff must be >= 4, got {cutoff}")
    lay = (cutoff, cutoff)
    a = boson_annihilation(cutoff)
    a1, a2 = embed(a, 0, lay), embed(a, 1, lay)
    one = identity(lay)
    H = omega * (a1.dag() @ a1 + a2.dag() @ a2 + one) + g * (a2 @ a1 + a1.dag() @ a2.dag())
    chans = [Channel(a1, gamma1), Channel(a2, gamma2)]
    return LindbladModel(H, chans, name="squeezed_pair",
                         params={"omega": omega, "g": g, "gamma1": gamma1, "gamma2": gamma2,
                                 "cutoff": cutoff})


def squeezed_pair_gaussian(omega: float, g: float, gamma1: float, gamma2: float,
                           gamma_bar1: float = 0.0, gamma_bar2: float = 0.0) -> GaussianModel:
    """Phase-space form of :func:`squeezed_pair`; channel 0 counts mode 1.

    Raises :class:`~fullcount.errors.InstabilityError` when the drift is not
    stable (for equal rates, ``gamma^2 + 4 omega^2 <= 4 g^2``).
    """
    hmat = omega * np.eye(4)
    hmat[0, 2] = hmat[2, 0] = g
    hmat[1, 3] = hmat[3, 1] = -g
    return GaussianModel.from_quadratic_hamiltonian(
        hmat, [(0, gamma1, gamma_bar1), (1, gamma2, gamma_bar2)], name="squeezed_pair")


def squeezed_pair_adaptive(omega, g, gamma1, gamma2, pop_tol=1e-8, start=4,
                           max_liouville_dim=4096):
    """Smallest cutoff whose steady state has top-level populations below ``pop_tol``.

    Returns ``(model, steady_state)``.

    Raises
    ------
    DimensionCapError
        If the required cutoff exceeds the Liouville dimension cap.
    """
    c = start
    while c ** 4 <= max_liouville_dim:
        model = squeezed_pair(omega, g, gamma1, gamma2, c)
        rho = steady_states(build_liouvillian(model), method="lu")[0]
        p = np.real(np.diag(rho.matrix)).reshape(c, c)
        top = max(p[-1, :].sum(), p[:, -1].sum())
        if top < pop_tol:
            return model, rho
        c += 1
    raise DimensionCapError(
        f"no cutoff with Liouville dimension <= {max_liouville_dim} reaches populations < {pop_tol}")


@dataclass(frozen=True)
class KerrParams:
    """Detuning ``delta``, loss ``gamma``, Kerr strength ``g`` and drive intensity ``|F|^2``."""

    delta: float
    gamma: float
    g: float
    intensity: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.g > 0):
            raise ValueError("gamma and g must be positive")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")


@dataclass(frozen=True)
class KerrBranches:
    roots: tuple[float, ...]
    stable: tuple[bool, ...]
    n_minus: float
    n_plus: float


def kerr_intensity(p: KerrParams, n):
    """Drive intensity that sustains mean-field occupation ``n``."""
    n = np.asarray(n, dtype=float)
    return ((p.delta - 2 * p.g * n) ** 2 + 0.25 * p.gamma ** 2) * n


def _stability_bounds(p: KerrParams):
    disc = p.delta ** 2 - 0.75 * p.gamma ** 2
    if disc < 0:
        return np.nan, np.nan
    r = np.sqrt(disc)
    return (2 * p.delta - r) / (6 * p.g), (2 * p.delta + r) / (6 * p.g)


def kerr_branches(p: KerrParams) -> KerrBranches:
    """Mean-field occupations solving ``[(delta - 2 g n)^2 + gamma^2/4] n = I``.

    Roots are found from the companion matrix and polished by Newton steps.
    A root is unstable when ``n_minus < n < n_plus``; if ``delta^2 < 3 gamma^2/4``
    the bounds are NaN and every root is stable.
    """
    coeffs = [4 * p.g ** 2, -4 * p.g * p.delta, p.delta ** 2 + 0.25 * p.gamma ** 2, -p.intensity]
    raw = np.roots(coeffs)
    scale = max(1.0, np.max(np.abs(raw)))
    real = sorted(r.real for r in raw if abs(r.imag) <= 1e-7 * scale)
    polished = []
    dcoeffs = np.polyder(coeffs)
    for n in real:
        for _ in range(50):
            f = np.polyval(coeffs, n)
            df = np.polyval(dcoeffs, n)
            if df == 0:
                break
            step = f / df
            n -= step
            if abs(step) <= 1e-15 * max(1.0, abs(n)):
                break
        if not any(abs(n - q) <= 1e-9 * max(1.0, abs(n)) for q in polished):
            polished.append(max(n, 0.0) if abs(n) < 1e-300 else n)
    n_minus, n_plus = _stability_bounds(p)
    stable = tuple(bool(np.isnan(n_minus) or not (n_minus < n < n_plus)) for n in polished)
    return KerrBranches(tuple(polished), stable, float(n_minus), float(n_plus))


def kerr_bistable_window(p: KerrParams):
    """Intensity interval ``(I(n_plus), I(n_minus))`` with two stable branches, or None."""
    n_minus, n_plus = _stability_bounds(p)
    if np.isnan(n_minus) or n_minus <= 0 or n_plus == n_minus:
        return None
    return float(kerr_intensity(p, n_plus)), float(kerr_intensity(p, n_minus))


def kerr_kappa1(p: KerrParams) -> list[float]:
    """Mean emission rate ``gamma n`` for every stable mean-field branch."""
    b = kerr_branches(p)
    return [p.gamma * n for n, ok in zip(b.roots, b.stable) if ok]


MODEL_BUILDERS = {
    "two_spins_same": two_spins_same,
    "two_spins_inverse": two_spins_inverse,
    "two_spins_global": two_spins_global,
    "decaying_qubit": decaying_qubit,
    "pumped_qubit": pumped_qubit,
    "telegraph_qubit": telegraph_qubit,
    "poisson_qubit": poisson_qubit,
    "squeezed_pair": squeezed_pair,
}
