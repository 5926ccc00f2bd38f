"""Scaled cumulant generating function theta(s) from the tilted generator.

``theta(s)`` is the eigenvalue of ``W_s`` with the largest real part.
Derivatives at ``s = 0`` give the cumulants, ``kappa_m = (-1)^m theta^(m)(0)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, DimensionCapError
from .liouville import LindbladModel, biased_liouvillian, counting_process

__all__ = [
    "ThetaCurve",
    "ThetaCumulants",
    "theta_spectral",
    "theta_curve",
    "theta_global_spins",
    "cumulants_from_theta",
    "KINK_TOL",
]

DEFAULT_CAP = 4096
SMALL_DIM = 400
KINK_TOL = 1e-4


@dataclass(frozen=True)
class ThetaCurve:
    s_values: tuple[float, ...]
    theta_values: tuple[float, ...]
    model: str
    channel_index: object


@dataclass(frozen=True)
class ThetaCumulants:
    """Cumulants from numerical derivatives of theta at ``s = 0``.

    ``values`` holds the two-sided estimates, or None when the left and
    right first derivatives differ by more than :data:`KINK_TOL`; ``left``
    and ``right`` are always the one-sided estimates
    ``(-1)^m theta^(m)(0-)`` and ``(-1)^m theta^(m)(0+)``.
    """

    values: tuple[float, ...] | None
    left: tuple[float, ...]
    right: tuple[float, ...]
    nonanalytic: bool


def _rate_bound(model, channel, s):
    bound = 0.0
    for idx, w in counting_process(model, channel):
        ch = model.channels[idx]
        lm = ch.l_op.matrix
        bound += ch.rate * np.expm1(-w * s) * np.linalg.norm(lm.conj().T @ lm, 2)
    return max(0.0, bound)


def _dominant_dense(m):
    ev = sla.eigvals(m, check_finite=False)
    top = ev.real.max()
    # undamped coherences can tie with the real eigenvalue; prefer the real one
    tied = ev[ev.real >= top - 1e-10 * max(1.0, np.abs(ev).max())]
    return tied[np.argmin(np.abs(tied.imag))]


def _dominant_inverse_iteration(m, shift, tol=1e-13, max_iter=200):
    """Eigenvalue of ``m`` nearest to a real shift lying to the right of the spectrum."""
    n = m.shape[0]
    scale = max(np.linalg.norm(m, 1), 1.0)
    x = np.ones(n, dtype=complex) / np.sqrt(n)
    mu = shift
    for refine in range(2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(m - shift * np.eye(n), check_finite=False)
        for _ in range(max_iter):
            y = sla.lu_solve(lu, x, check_finite=False)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0:
                raise ConvergenceError("inverse iteration broke down")
            x = y / nrm
            mx = m @ x
            mu = np.vdot(x, mx)
            if np.linalg.norm(mx - mu * x) <= tol * scale:
                break
        else:
            raise ConvergenceError("inverse iteration did not converge")
        if refine == 0:
            # re-factor just right of the estimate for a clean final solve
            shift = mu.real + 1e-6 * scale
    return mu


def theta_spectral(model: LindbladModel, channel_index, s: float,
                   cap: int = DEFAULT_CAP, imag_tol: float = 1e-8) -> float:
    """Largest-real-part eigenvalue of the tilted generator ``W_s``.

    Small problems use a dense eigensolver; larger ones shifted inverse
    iteration from a real shift above the a-priori bound
    ``theta(s) <= sum_c gamma_c (e^{-w_c s} - 1) ||L_c^dag L_c||``, falling
    back to the dense solver if the iteration fails.

    Raises
    ------
    DimensionCapError
        If the Liouville dimension exceeds ``cap``.
    ConvergenceError
        If the dominant eigenvalue has an imaginary part above ``imag_tol``.
    """
    n2 = model.dim ** 2
    if n2 > cap:
        raise DimensionCapError(f"Liouville dimension {n2} exceeds cap {cap}")
    m = biased_liouvillian(model, channel_index, s).matrix
    if n2 <= SMALL_DIM:
        lam = _dominant_dense(m)
    else:
        shift = _rate_bound(model, channel_index, s) + 1e-3 * max(1.0, np.linalg.norm(m, 1))
        try:
            lam = _dominant_inverse_iteration(m, shift)
        except ConvergenceError:
            lam = _dominant_dense(m)
    if abs(lam.imag) > imag_tol:
        raise ConvergenceError(f"dominant eigenvalue {lam:.3e} is not real at s={s}")
    return float(lam.real)


def theta_curve(model: LindbladModel, channel_index, s_values: Sequence[float], **kw) -> ThetaCurve:
    s_values = tuple(float(s) for s in s_values)
    vals = tuple(theta_spectral(model, channel_index, s, **kw) for s in s_values)
    return ThetaCurve(s_values, vals, model.name, channel_index)


def theta_global_spins(gamma: float, s: float) -> float:
    """Closed-form theta(s) of the globally damped spin pair at rate ``gamma``.

    Zero for ``s >= 0`` (the quiet phase dominates); for ``s < 0`` the cubic
    root formula is evaluated with principal branches.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if s >= 0:
        return 0.0
    g = complex(gamma)
    inner = np.sqrt(3.0) * np.sqrt(12.0 ** 3 * g * g * np.exp(-2.0 * s)
                                   - (g + 4) ** 3 * (g - 4) ** 3 + 0j) + 72.0 * g * np.exp(-s)
    F = g * inner ** (1.0 / 3.0)
    val = (3.0 ** (2.0 / 3.0) * g * g * (g * g - 16) + 3.0 ** (1.0 / 3.0) * F * F
           - 3.0 * g * g * F) / (6.0 * g * F)
    return float(val.real)


# central-difference weights (second order) for derivatives 1..4, offsets -2..2
_CENTRAL = {
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}
_OFFSETS = np.arange(-2, 3)


def _one_sided_weights(m, nodes):
    """Weights w with sum w_k f(x_k) = f^(m)(0) exact for polynomials of degree < len(nodes)."""
    k = len(nodes)
    V = np.vander(nodes, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[m] = factorial(m)
    return np.linalg.solve(V, rhs)


def cumulants_from_theta(model, channel_index, n: int, step: float = 1e-3,
                         theta: Callable[[float], float] | None = None,
                         kink_tol: float = KINK_TOL) -> ThetaCumulants:
    """Cumulants ``kappa_1..kappa_n`` from finite differences of theta at 0.

    Central differences at steps ``h, h/2, h/4`` are combined by Richardson
    extrapolation (error ``O(h^6)``); the base step grows with the order,
    ``h_m = step * 10^((m-1)/2)``, to keep round-off in check. One-sided
    interpolating stencils give the left and right derivatives used to detect
    a kink at the origin.

    Parameters
    ----------
    model : LindbladModel or GaussianModel
    theta : callable, optional
        ``s -> theta(s)``; defaults to :func:`theta_spectral` (or the Riccati
        form for a Gaussian model).
    """
    if not 1 <= n <= 4:
        raise ValueError("finite-difference cumulants are supported for 1 <= n <= 4")
    if theta is None:
        if isinstance(model, LindbladModel):
            def theta(s):
                return theta_spectral(model, channel_index, s)
        else:
            from .gaussian import riccati_theta

            def theta(s):
                return riccati_theta(model, channel_index, s)

    cache: dict[float, float] = {}

    def f(s):
        s = float(s)
        if s not in cache:
            cache[s] = theta(s)
        return cache[s]

    def central(m, h):
        return sum(w * f(k * h) for w, k in zip(_CENTRAL[m], _OFFSETS) if w) / h ** m

    def one_sided(m, h, sign):
        nodes = sign * h * np.arange(m + 5)
        w = _one_sided_weights(m, nodes)
        return float(sum(wk * f(x) for wk, x in zip(w, nodes)))

    left, right, values = [], [], []
    for m in range(1, n + 1):
        h = step * 10 ** ((m - 1) / 2)
        d = [central(m, h / 2 ** k) for k in range(3)]
        r1 = [(4 * d[k + 1] - d[k]) / 3 for k in range(2)]
        values.append((-1) ** m * (16 * r1[1] - r1[0]) / 15)
        hs = 2 * h
        left.append((-1) ** m * one_sided(m, hs, -1.0))
        right.append((-1) ** m * one_sided(m, hs, 1.0))
    kink = abs(left[0] - right[0]) > kink_tol
    return ThetaCumulants(None if kink else tuple(values), tuple(left), tuple(right), kink)
