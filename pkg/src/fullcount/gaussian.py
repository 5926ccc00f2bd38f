"""Counting statistics of linear bosonic networks in phase space.

Conventions
-----------
Quadratures are ordered ``v = (x_1, p_1, x_2, p_2, ...)`` with
``a = (x + i p) / sqrt(2)``. ``Sigma`` is the symmetrised (Wigner) covariance
``<{dv_k, dv_l}>``, so the vacuum has ``Sigma = I``. The drift ``A`` and
diffusion ``D`` enter as ``dSigma/dt = -(A Sigma + Sigma A^T) + 2 D``, so a
stable model has every eigenvalue of ``A`` in the right half plane.

A channel ``(mode, gamma, gamma_bar)`` describes jumps ``L = a`` at rate
``gamma`` (emission, counted +1) and ``L = a^dag`` at rate ``gamma_bar``
(absorption, counted -1). A thermal bath of coupling ``k`` and occupation
``nbar`` is ``gamma = k (nbar + 1)``, ``gamma_bar = k nbar``.

The tilted covariance ``Sigma_s`` solves the algebraic Riccati equation

    0 = (A + M_s) Sigma + Sigma (A + M_s)^T - Sigma P_s Sigma - P_s - 2 D,
    theta(s) = Tr(P_s Sigma_s - M_s) / 2,

where ``P_s = F_+(s) / 2`` and ``M_s = F_-(s) / 2`` carry the counting field
on the counted mode, ``f_+-(s) = gamma (e^{-s} - 1) +- gamma_bar (e^{s} - 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, InstabilityError

__all__ = [
    "GaussianChannel",
    "GaussianModel",
    "BiasMatrices",
    "SigmaHierarchy",
    "lyapunov_solve",
    "f_matrices",
    "sigma_hierarchy",
    "gaussian_cumulant",
    "gaussian_cumulants",
    "riccati_sigma",
    "riccati_theta",
    "squeezing_from_kappa1",
    "squeezing_direct",
    "min_quadrature_variance",
]


@dataclass(frozen=True)
class GaussianChannel:
    mode: int
    gamma: float
    gamma_bar: float = 0.0

    def __post_init__(self):
        if self.gamma < 0 or self.gamma_bar < 0:
            raise ValueError("channel rates must be non-negative")


def _symplectic_form(n_modes):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


class GaussianModel:
    """Drift, diffusion and counting channels of a linear bosonic network.

    Parameters
    ----------
    drift, diffusion : (2N, 2N) array_like
    channels : sequence of GaussianChannel or (mode, gamma, gamma_bar) tuples
    check_stability : bool
        Raise :class:`InstabilityError` unless every eigenvalue of the drift
        has a positive real part.
    """

    def __init__(self, drift, diffusion, channels: Sequence, name: str = "gaussian",
                 check_stability: bool = True):
        a = np.array(drift, dtype=float)
        d = np.array(diffusion, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2:
            raise ValueError(f"drift must be 2N x 2N, got {a.shape}")
        if d.shape != a.shape:
            raise ValueError("drift and diffusion shapes differ")
        if np.max(np.abs(d - d.T)) > 1e-12:
            raise ValueError("diffusion matrix is not symmetric")
        if np.linalg.eigvalsh(d)[0] < -1e-12:
            raise ValueError("diffusion matrix is not positive semidefinite")
        self.n_modes = a.shape[0] // 2
        chans = []
        for c in channels:
            c = c if isinstance(c, GaussianChannel) else GaussianChannel(*c)
            if not 0 <= c.mode < self.n_modes:
                raise ValueError(f"channel mode {c.mode} out of range")
            chans.append(c)
        self.channels = tuple(chans)
        a.setflags(write=False)
        d.setflags(write=False)
        self.drift = a
        self.diffusion = d
        self.name = name
        if check_stability and not self.is_stable():
            raise InstabilityError(
                f"drift has eigenvalue with real part {self.stability_margin():.3e} <= 0")

    def stability_margin(self) -> float:
        return float(np.min(np.linalg.eigvals(self.drift).real))

    def is_stable(self) -> bool:
        return self.stability_margin() > 0

    @classmethod
    def from_quadratic_hamiltonian(cls, hmat, channels, name="gaussian", **kw):
        """Model for ``H = v^T hmat v / 2`` with damping from ``channels``.

        Each channel adds ``(gamma - gamma_bar) / 2`` to the drift and
        ``(gamma + gamma_bar) / 2`` to the diffusion of its mode.
        """
        h = np.asarray(hmat, dtype=float)
        n = h.shape[0] // 2
        a = -_symplectic_form(n) @ h
        d = np.zeros_like(a)
        chans = [c if isinstance(c, GaussianChannel) else GaussianChannel(*c) for c in channels]
        for c in chans:
            sl = slice(2 * c.mode, 2 * c.mode + 2)
            a[sl, sl] += 0.5 * (c.gamma - c.gamma_bar) * np.eye(2)
            d[sl, sl] += 0.5 * (c.gamma + c.gamma_bar) * np.eye(2)
        return cls(a, d, chans, name=name, **kw)

    def __repr__(self):
        return f"GaussianModel({self.name!r}, n_modes={self.n_modes})"


@dataclass(frozen=True)
class BiasMatrices:
    order: int
    F_plus_n: np.ndarray
    F_minus_n: np.ndarray


@dataclass(frozen=True)
class SigmaHierarchy:
    orders: tuple[np.ndarray, ...]
    residuals: tuple[float, ...]

    def __len__(self):
        return len(self.orders)

    def __getitem__(self, i):
        return self.orders[i]


def lyapunov_solve(A, Q) -> np.ndarray:
    """Solve ``A X + X A^T + Q = 0`` by Kronecker vectorisation.

    Raises
    ------
    InstabilityError
        If ``A`` has an eigenvalue with non-positive real part.
    ConvergenceError
        If the residual exceeds ``1e-10 (||A|| ||X|| + ||Q||)`` (floored at
        ``1e-14 ||A||`` so that a vanishing right-hand side is accepted).
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if np.min(np.linalg.eigvals(A).real) <= 0:
        raise InstabilityError("Lyapunov operator is not stable")
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, A) + np.kron(A, eye)
    try:
        x = np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(n, n, order="F")
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"singular Lyapunov system: {exc}") from None
    x = 0.5 * (x + x.T)
    res = np.linalg.norm(A @ x + x @ A.T + Q)
    a_norm = np.linalg.norm(A)
    if res > max(1e-10 * (a_norm * np.linalg.norm(x) + np.linalg.norm(Q)), 1e-14 * a_norm):
        raise ConvergenceError(f"Lyapunov residual {res:.2e}", residual=res)
    return x


def _block(model, mode, value):
    out = np.zeros((2 * model.n_modes, 2 * model.n_modes))
    out[2 * mode, 2 * mode] = out[2 * mode + 1, 2 * mode + 1] = value
    return out


def _channel(model: GaussianModel, channel_index) -> GaussianChannel:
    if isinstance(channel_index, bool) or not 0 <= int(channel_index) < len(model.channels):
        raise ValueError(f"channel {channel_index} out of range")
    return model.channels[int(channel_index)]


def f_matrices(model: GaussianModel, channel_index, n: int) -> BiasMatrices:
    """``F_+-^(n)``: derivatives of the counting-field matrices at ``s = 0``.

    ``f_+-^(n) = (-1)^n gamma +- gamma_bar`` on the counted mode for ``n > 0``;
    zero for ``n = 0``.
    """
    c = _channel(model, channel_index)
    if n < 0:
        raise ValueError("order must be non-negative")
    if n == 0:
        z = _block(model, c.mode, 0.0)
        return BiasMatrices(0, z, z.copy())
    sign = -1.0 if n % 2 else 1.0
    return BiasMatrices(n, _block(model, c.mode, sign * c.gamma + c.gamma_bar),
                        _block(model, c.mode, sign * c.gamma - c.gamma_bar))


def _pm(model, channel_index, n):
    f = f_matrices(model, channel_index, n)
    return 0.5 * f.F_plus_n, 0.5 * f.F_minus_n


def sigma_hierarchy(model: GaussianModel, channel_index, n_max: int) -> SigmaHierarchy:
    """Covariance derivatives ``Sigma^(0) .. Sigma^(n_max)`` at ``s = 0``.

    ``A Sigma^(n) + Sigma^(n) A^T + N_n = 0`` with ``N_0 = -2 D`` and, for
    ``n >= 1``,

        N_n = sum_{k<n} C(n,k) (M^(n-k) Sigma^(k) + Sigma^(k) M^(n-k))
              - sum_{i+j+k=n, j>=1} n!/(i! j! k!) Sigma^(i) P^(j) Sigma^(k) - P^(n).
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if not model.is_stable():
        raise InstabilityError("drift matrix is not stable")
    A = model.drift
    P = [None] + [None] * n_max
    M = [None] + [None] * n_max
    for m in range(1, n_max + 1):
        P[m], M[m] = _pm(model, channel_index, m)
    orders, residuals = [], []
    for n in range(n_max + 1):
        if n == 0:
            N = -2.0 * model.diffusion
        else:
            N = -P[n].copy()
            for k in range(n):
                N += comb(n, k) * (M[n - k] @ orders[k] + orders[k] @ M[n - k])
            for j in range(1, n + 1):
                for i in range(n - j + 1):
                    k = n - j - i
                    coef = factorial(n) // (factorial(i) * factorial(j) * factorial(k))
                    N -= coef * orders[i] @ P[j] @ orders[k]
        try:
            S = lyapunov_solve(A, N)
        except ConvergenceError as exc:
            raise ConvergenceError(f"Lyapunov solve failed at order {n}: {exc}",
                                   order=n, residual=exc.residual) from None
        orders.append(S)
        residuals.append(float(np.linalg.norm(A @ S + S @ A.T + N)))
    return SigmaHierarchy(tuple(orders), tuple(residuals))


def gaussian_cumulant(model: GaussianModel, channel_index, n: int,
                      hierarchy: SigmaHierarchy | None = None) -> float:
    """``kappa_n = (-1)^n / 2 [sum_{i<n} C(n,i) Tr(P^(n-i) Sigma^(i)) - Tr M^(n)]``.

    The net count is emissions minus absorptions on the selected channel.
    """
    if n < 1:
        raise ValueError("cumulants start at n = 1")
    if hierarchy is None:
        hierarchy = sigma_hierarchy(model, channel_index, n - 1)
    if len(hierarchy) < n:
        raise ValueError(f"kappa_{n} needs Sigma orders 0..{n - 1}")
    total = 0.0
    for i in range(n):
        Pm, _ = _pm(model, channel_index, n - i)
        total += comb(n, i) * np.trace(Pm @ hierarchy[i])
    total -= np.trace(_pm(model, channel_index, n)[1])
    return float((-1) ** n * 0.5 * total)


def gaussian_cumulants(model: GaussianModel, channel_index, n_max: int) -> tuple[float, ...]:
    h = sigma_hierarchy(model, channel_index, n_max - 1)
    return tuple(gaussian_cumulant(model, channel_index, k, h) for k in range(1, n_max + 1))


def _field_matrices(model, channel_index, s):
    c = _channel(model, channel_index)
    em, ab = np.expm1(-s), np.expm1(s)
    fp = c.gamma * em + c.gamma_bar * ab
    fm = c.gamma * em - c.gamma_bar * ab
    return _block(model, c.mode, 0.5 * fp), _block(model, c.mode, 0.5 * fm)


def riccati_sigma(model: GaussianModel, channel_index, s: float,
                  tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Tilted covariance ``Sigma_s`` by Newton-Kleinman iteration from ``Sigma^(0)``."""
    A = model.drift
    D = model.diffusion
    P, M = _field_matrices(model, channel_index, s)
    X = lyapunov_solve(A, -2.0 * D)
    scale = max(1.0, np.linalg.norm(D))
    res = np.inf
    for _ in range(max_iter):
        AM = A + M
        R = AM @ X + X @ AM.T - X @ P @ X - P - 2.0 * D
        res = np.linalg.norm(R)
        if res <= tol * scale:
            return X
        try:
            dX = lyapunov_solve(AM - X @ P, R)
        except (InstabilityError, ConvergenceError) as exc:
            raise ConvergenceError(f"Riccati Newton step failed at s={s}: {exc}",
                                   residual=res) from None
        X = X + dX
    raise ConvergenceError(f"Riccati iteration did not converge at s={s}", residual=res)


def riccati_theta(model: GaussianModel, channel_index, s: float, **kw) -> float:
    """Scaled cumulant generating function ``theta(s) = Tr(P_s Sigma_s - M_s) / 2``."""
    if s == 0:
        return 0.0
    X = riccati_sigma(model, channel_index, s, **kw)
    P, M = _field_matrices(model, channel_index, s)
    return float(0.5 * np.trace(P @ X - M))


def squeezing_from_kappa1(kappa1: float, gamma: float) -> float:
    """Minimal quadrature ``1 / (1 + sqrt(2 kappa1 / (gamma + 2 kappa1)))``."""
    if kappa1 < 0 or gamma <= 0:
        raise ValueError("need kappa1 >= 0 and gamma > 0")
    return 1.0 / (1.0 + np.sqrt(2.0 * kappa1 / (gamma + 2.0 * kappa1)))


def squeezing_direct(gamma: float, omega: float, g: float) -> float:
    """Minimal quadrature of the symmetric squeezed pair, ``1 / (1 + 2|g| / sqrt(gamma^2 + 4 omega^2))``."""
    return 1.0 / (1.0 + np.sqrt(4.0 * g * g / (gamma * gamma + 4.0 * omega * omega)))


def min_quadrature_variance(sigma) -> float:
    """Smallest variance over all normalised quadrature combinations (vacuum = 1)."""
    return float(np.linalg.eigvalsh(np.asarray(sigma))[0])
