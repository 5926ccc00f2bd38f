"""Scaled cumulants of a counting process from the biased-matrix hierarchy.

The normalised tilted state ``rho_s`` is expanded around ``s = 0``; its
derivatives ``rho^(n)`` obey

    d/dt rho^(n) = W[rho^(n)] + S_n,
    S_n = J^(n)[.] - sum_{j<n} C(n, j) rho^(j) Tr J^(n-j)[.],
    J^(m)[.] = sum_c gamma_c sum_{k<m} C(m, k) (-w_c)^(m-k) L_c rho^(k) L_c^dag,

where ``w_c`` are the counting weights (1 for a plain jump count). The
stationary solutions, with ``Tr rho^(n) = 0`` for ``n >= 1``, give

    kappa_n = (-1)^n sum_c gamma_c sum_{k<n} C(n, k) (-w_c)^(n-k) Tr(L_c^dag L_c rho^(k)).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, UndefinedFanoError
from .hilbert import DensityMatrix, Operator
from .liouville import (
    LindbladModel,
    Superoperator,
    build_liouvillian,
    counting_process,
    null_spaces,
    stationary_projector,
    steady_states,
    time_averaged_rate,
    vec,
    unvec,
)

__all__ = [
    "MAX_ORDER",
    "HierarchyOrder",
    "CumulantResult",
    "hierarchy_source",
    "solve_hierarchy",
    "cumulant",
    "cumulants",
    "fano",
    "fano_standard",
    "cumulants_per_fixed_point",
    "kappa1_from_initial_state",
]

MAX_ORDER = 20
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class HierarchyOrder:
    """One stationary order ``rho^(n)`` with its solve residual."""

    order: int
    matrix: Operator
    residual: float = 0.0


@dataclass(frozen=True)
class CumulantResult:
    values: tuple[float, ...]
    channel_index: object
    fixed_point_index: int
    hierarchy: tuple[HierarchyOrder, ...]
    phase_transition: bool = False

    @property
    def kappa1(self) -> float:
        return self.values[0]

    @property
    def fano(self) -> float:
        return _fano_shifted(self.values)

    @property
    def fano_standard(self) -> float:
        return _fano_standard(self.values)


def _check_order(n):
    if int(n) != n or n < 0:
        raise ValueError(f"order must be a non-negative integer, got {n}")
    if n > MAX_ORDER:
        raise ValueError(f"order {n} exceeds the cap of {MAX_ORDER}")


def _jump_data(model: LindbladModel, channel):
    out = []
    for idx, w in counting_process(model, channel):
        ch = model.channels[idx]
        lm = ch.l_op.matrix
        out.append((ch.rate, w, lm, lm.conj().T @ lm))
    return out


def _jump_derivative(jumps, m: int, lower) -> np.ndarray:
    """``J^(m)`` evaluated on the matrices ``lower[0..m-1]``."""
    acc = np.zeros_like(lower[0], dtype=complex)
    for rate, w, lm, _ in jumps:
        if rate == 0.0:
            continue
        for k in range(m):
            acc += rate * comb(m, k) * (-w) ** (m - k) * (lm @ lower[k] @ lm.conj().T)
    return acc


def _as_arrays(lower):
    out = []
    for x in lower:
        if isinstance(x, HierarchyOrder):
            x = x.matrix
        out.append(x.matrix if isinstance(x, Operator) else np.asarray(x, dtype=complex))
    return out


def hierarchy_source(model: LindbladModel, channel_index, n: int, lower) -> Operator:
    """Inhomogeneous term ``S_n`` of the equation for ``rho^(n)``.

    Parameters
    ----------
    model : LindbladModel
    channel_index : int or dict
        Counted channel, or ``{channel: weight}``.
    n : int
        Order, ``n >= 1``.
    lower : sequence
        Orders ``0..n-1`` as :class:`HierarchyOrder`, :class:`Operator` or arrays.
    """
    _check_order(n)
    if n < 1:
        raise ValueError("the source is defined for n >= 1")
    if len(lower) < n:
        raise ValueError(f"order {n} needs {n} lower orders, got {len(lower)}")
    mats = _as_arrays(lower[:n])
    jumps = _jump_data(model, channel_index)
    src = _jump_derivative(jumps, n, mats)
    for j in range(n):
        src -= comb(n, j) * mats[j] * np.trace(_jump_derivative(jumps, n - j, mats))
    return Operator(src, model.layout)


class _StationarySolver:
    """Solves ``W x = b`` in the gauge orthogonal to the conserved quantities.

    A unique steady state uses an LU factorisation of ``W`` with its first
    row (redundant by trace preservation) replaced by the trace functional.
    A degenerate null space uses least squares on ``[W; J^H]`` where ``J``
    spans the left null space.
    """

    def __init__(self, W: Superoperator):
        self.W = W
        n = W.layout.total_dim
        m = np.array(W.matrix)
        m[0, :] = np.eye(n).reshape(-1, order="F")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self._lu = sla.lu_factor(m, check_finite=False)
        rcond, info = sla.lapack.zgecon(self._lu[0], np.linalg.norm(m, 1), norm="1")
        self.unique = info == 0 and rcond >= 1e-10
        if not self.unique:
            _, left = null_spaces(W)
            self._aug = np.vstack([W.matrix, left.conj().T])
            self._nleft = left.shape[1]

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.unique:
            rhs = np.array(b, dtype=complex)
            rhs[0] = 0.0
            return sla.lu_solve(self._lu, rhs, check_finite=False)
        rhs = np.concatenate([b, np.zeros(self._nleft, dtype=complex)])
        x, *_ = np.linalg.lstsq(self._aug, rhs, rcond=None)
        return x


def solve_hierarchy(model: LindbladModel, channel_index, n_max: int,
                    fixed_point: DensityMatrix | None = None,
                    W: Superoperator | None = None) -> list[HierarchyOrder]:
    """Stationary orders ``rho^(0) .. rho^(n_max)``.

    Parameters
    ----------
    fixed_point : DensityMatrix, optional
        Stationary state to expand around. Defaults to the unique steady
        state; required when the steady state is degenerate.
    W : Superoperator, optional
        Precomputed Liouvillian of ``model``.

    Raises
    ------
    ConvergenceError
        If an order cannot be solved to a residual of 1e-8; ``err.order``
        names the failing order.
    """
    _check_order(n_max)
    W = W if W is not None else build_liouvillian(model)
    solver = _StationarySolver(W)
    if fixed_point is None:
        states = steady_states(W)
        if len(states) != 1:
            raise ValueError(f"steady state is {len(states)}-fold degenerate; pass fixed_point")
        fixed_point = states[0]
    rho0 = fixed_point.matrix
    res0 = float(np.linalg.norm(W.matrix @ vec(rho0)))
    if res0 > RESIDUAL_TOL:
        raise ConvergenceError(f"fixed point residual {res0:.2e}", order=0, residual=res0)
    orders = [HierarchyOrder(0, Operator(rho0, model.layout), res0)]
    mats = [np.array(rho0)]
    for n in range(1, n_max + 1):
        src = hierarchy_source(model, channel_index, n, mats).matrix
        b = -vec(src)
        x = solver.solve(b)
        x = unvec(x)
        x = 0.5 * (x + x.conj().T)
        res = float(np.linalg.norm(W.matrix @ vec(x) - b))
        if res > RESIDUAL_TOL * max(1.0, np.linalg.norm(b)):
            raise ConvergenceError(f"hierarchy order {n} residual {res:.2e}", order=n, residual=res)
        mats.append(x)
        orders.append(HierarchyOrder(n, Operator(x, model.layout), res))
    return orders


def cumulant(model: LindbladModel, channel_index, n: int, hierarchy) -> float:
    """Scaled cumulant ``kappa_n`` from orders ``0..n-1`` of the hierarchy."""
    _check_order(n)
    if n < 1:
        raise ValueError("cumulants start at n = 1")
    if len(hierarchy) < n:
        raise ValueError(f"kappa_{n} needs hierarchy orders 0..{n - 1}")
    mats = _as_arrays(hierarchy[:n])
    total = 0.0
    for rate, w, _, ldl in _jump_data(model, channel_index):
        for k in range(n):
            total += rate * comb(n, k) * (-w) ** (n - k) * np.sum(ldl.T * mats[k])
    return float(((-1) ** n * total).real)


def cumulants(model: LindbladModel, channel_index, n_max: int,
              fixed_point: DensityMatrix | None = None) -> tuple[float, ...]:
    """``(kappa_1, ..., kappa_n_max)`` around a (default: unique) steady state."""
    h = solve_hierarchy(model, channel_index, max(n_max - 1, 0), fixed_point)
    return tuple(cumulant(model, channel_index, k, h) for k in range(1, n_max + 1))


def _fano_shifted(values):
    k1, k2 = values[0], values[1]
    if abs(k1) < 1e-14:
        raise UndefinedFanoError("mean count rate is zero; Fano factor undefined")
    return (k2 + k1 * k1) / k1


def _fano_standard(values):
    k1, k2 = values[0], values[1]
    if abs(k1) < 1e-14:
        raise UndefinedFanoError("mean count rate is zero; Fano factor undefined")
    return k2 / k1


def fano(model: LindbladModel, channel_index, fixed_point=None) -> float:
    """``(kappa_2 + kappa_1^2) / kappa_1``.

    With ``kappa_2`` the second derivative of the scaled cumulant generating
    function this is the Fano factor convention used by the closed forms in
    :mod:`fullcount.models`. See :func:`fano_standard` for ``kappa_2/kappa_1``.

    Raises
    ------
    UndefinedFanoError
        In a quiet phase (``kappa_1 = 0``).
    """
    return _fano_shifted(cumulants(model, channel_index, 2, fixed_point))


def fano_standard(model: LindbladModel, channel_index, fixed_point=None) -> float:
    """Variance rate over mean rate, ``kappa_2 / kappa_1`` (1 for Poisson counts)."""
    return _fano_standard(cumulants(model, channel_index, 2, fixed_point))


def cumulants_per_fixed_point(model: LindbladModel, channel_index, n_max: int,
                              transition_tol: float = 1e-6) -> list[CumulantResult]:
    """Cumulants around every extremal stationary state.

    Every result carries ``phase_transition=True`` when the mean rates of
    the fixed points differ by more than ``transition_tol * max|kappa_1|``,
    the signature of a first-order dynamical phase transition.
    """
    _check_order(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    W = build_liouvillian(model)
    out = []
    for idx, fp in enumerate(steady_states(W)):
        h = solve_hierarchy(model, channel_index, n_max - 1, fp, W)
        vals = tuple(cumulant(model, channel_index, k, h) for k in range(1, n_max + 1))
        out.append((idx, vals, tuple(h)))
    k1 = np.array([v[0] for _, v, _ in out])
    scale = np.max(np.abs(k1))
    flag = bool(len(k1) > 1 and np.ptp(k1) > transition_tol * scale)
    return [CumulantResult(v, channel_index, idx, h, flag) for idx, v, h in out]


def kappa1_from_initial_state(model: LindbladModel, channel_index, rho0,
                              method: str = "projector") -> float:
    """Long-time mean count rate reached from ``rho0``.

    ``method="projector"`` applies the exact long-time projector onto the
    stationary manifold. ``method="evolve"`` integrates the master equation
    past the slowest relaxation time and averages the instantaneous rate
    over a further window of the same length.
    """
    W = build_liouvillian(model)
    rho0 = rho0.matrix if isinstance(rho0, Operator) else np.asarray(rho0, dtype=complex)
    if method == "projector":
        rho_inf = unvec(stationary_projector(W) @ vec(rho0))
        total = 0.0
        for rate, w, _, ldl in _jump_data(model, channel_index):
            total += w * rate * np.sum(ldl.T * rho_inf)
        return float(np.real(total))
    if method == "evolve":
        ev = sla.eigvals(W.matrix)
        decaying = -ev.real[ev.real < -1e-9 * max(1.0, np.abs(ev).max())]
        gap = decaying.min() if decaying.size else 1.0
        t_relax = 25.0 / gap
        return time_averaged_rate(model, channel_index, Operator(rho0, model.layout),
                                  t_relax, 2.0 * t_relax)
    raise ValueError(f"unknown method {method!r}")
