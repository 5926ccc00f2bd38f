"""Lindblad models in Liouville space.

Matrices are vectorised by column stacking, ``vec(A X B) = (B^T kron A) vec(X)``,
so a superoperator acting on an ``N x N`` matrix is an ``N^2 x N^2`` array.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DimensionError
from .hilbert import DensityMatrix, Operator, SpaceLayout

__all__ = [
    "Channel",
    "LindbladModel",
    "Superoperator",
    "vec",
    "unvec",
    "counting_process",
    "jump_superoperator",
    "build_liouvillian",
    "biased_liouvillian",
    "null_spaces",
    "steady_states",
    "stationary_projector",
    "evolve",
    "time_averaged_rate",
    "trace_preservation_error",
    "eigenvalues",
    "as_density",
]

NULL_TOL = 1e-9


def vec(x) -> np.ndarray:
    m = x.matrix if isinstance(x, Operator) else np.asarray(x)
    return m.reshape(-1, order="F")


def unvec(v, layout=None) -> np.ndarray:
    v = np.asarray(v)
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorised square matrix")
    return v.reshape(n, n, order="F")


@dataclass(frozen=True)
class Channel:
    """A dissipation channel: jump operator and its rate."""

    l_op: Operator
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"channel rate must be >= 0, got {self.rate}")
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus a list of :class:`Channel` on a common layout."""

    hamiltonian: Operator
    channels: tuple[Channel, ...]
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.hamiltonian.is_hermitian(1e-10):
            raise ValueError("Hamiltonian is not Hermitian")
        for k, ch in enumerate(self.channels):
            if ch.l_op.layout != self.hamiltonian.layout:
                raise DimensionError(f"channel {k} lives on {ch.l_op.layout.dims}, "
                                     f"Hamiltonian on {self.hamiltonian.layout.dims}")
        object.__setattr__(self, "params", dict(self.params))

    @property
    def layout(self) -> SpaceLayout:
        return self.hamiltonian.layout

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim


class Superoperator:
    """Immutable ``N^2 x N^2`` matrix acting on column-vectorised operators."""

    __slots__ = ("_matrix", "_layout")

    def __init__(self, matrix, layout):
        m = np.array(matrix, dtype=complex)
        layout = layout if isinstance(layout, SpaceLayout) else SpaceLayout(layout)
        n2 = layout.total_dim ** 2
        if m.shape != (n2, n2):
            raise DimensionError(f"superoperator shape {m.shape} does not match layout {layout.dims}")
        m.setflags(write=False)
        self._matrix = m
        self._layout = layout

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def layout(self) -> SpaceLayout:
        return self._layout

    def apply(self, op) -> Operator:
        return Operator(unvec(self._matrix @ vec(op)), self._layout)

    def __add__(self, other):
        if not isinstance(other, Superoperator) or other.layout != self._layout:
            raise DimensionError("superoperator layout mismatch")
        return Superoperator(self._matrix + other.matrix, self._layout)

    def __repr__(self):
        return f"Superoperator(dims={self._layout.dims})"


def counting_process(model: LindbladModel, channel) -> tuple[tuple[int, float], ...]:
    """Normalise a channel selector to ``((index, weight), ...)``.

    An integer selects one channel with weight 1 (each jump adds one count).
    A mapping ``{index: weight}`` builds a weighted count, e.g. ``{0: 1, 1: -1}``
    for emissions minus absorptions.
    """
    items = channel.items() if isinstance(channel, Mapping) else [(channel, 1.0)]
    out = []
    for idx, w in items:
        if isinstance(idx, bool) or not isinstance(idx, (int, np.integer)):
            raise ValueError(f"channel index must be an integer, got {idx!r}")
        if not 0 <= idx < len(model.channels):
            raise ValueError(f"channel {idx} out of range ({len(model.channels)} channels)")
        out.append((int(idx), float(w)))
    if not out:
        raise ValueError("empty counting process")
    return tuple(out)


def _spre(a):
    return np.kron(np.eye(a.shape[0]), a)


def _spost(b):
    return np.kron(b.T, np.eye(b.shape[0]))


def jump_superoperator(l_op: Operator) -> np.ndarray:
    """Matrix of ``rho -> L rho L^dagger``."""
    lm = l_op.matrix
    return np.kron(lm.conj(), lm)


def build_liouvillian(model: LindbladModel) -> Superoperator:
    """Vectorised generator ``-i[H, .] + sum_i gamma_i D[L_i]``."""
    h = model.hamiltonian.matrix
    w = -1j * (_spre(h) - _spost(h))
    for ch in model.channels:
        if ch.rate == 0.0:
            continue
        lm = ch.l_op.matrix
        ldl = lm.conj().T @ lm
        w += ch.rate * (np.kron(lm.conj(), lm) - 0.5 * _spre(ldl) - 0.5 * _spost(ldl))
    return Superoperator(w, model.layout)


def biased_liouvillian(model: LindbladModel, channel, s: float,
                       W: Superoperator | None = None) -> Superoperator:
    """Tilted generator ``W + gamma_i (e^{-s} - 1) L_i . L_i^dagger``.

    With a weighted counting process each selected channel contributes
    ``gamma_c (e^{-w_c s} - 1) L_c . L_c^dagger``.
    """
    proc = counting_process(model, channel)
    base = (W if W is not None else build_liouvillian(model)).matrix.copy()
    for idx, weight in proc:
        ch = model.channels[idx]
        base += ch.rate * np.expm1(-weight * s) * jump_superoperator(ch.l_op)
    return Superoperator(base, model.layout)


def _trace_row(n: int) -> np.ndarray:
    return np.eye(n).reshape(-1, order="F")


def null_spaces(W: Superoperator, tol: float = NULL_TOL):
    """Right and left numerical null spaces of ``W`` via SVD.

    Returns ``(R, J)`` with ``W R = 0`` and ``J^H W = 0``; columns are
    orthonormal. Singular values below ``tol * ||W||_2`` count as zero.
    """
    m = W.matrix
    u, sv, vh = sla.svd(m)
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    k = int(np.sum(sv > tol * scale))
    right = vh[k:].conj().T
    left = u[:, k:]
    return right, left


def _unique_steady_state_lu(W: Superoperator):
    """Trace-augmented LU solve; returns None when the system looks singular."""
    m = np.array(W.matrix)
    n = W.layout.total_dim
    m[0, :] = _trace_row(n)
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(m, check_finite=False)
    anorm = np.linalg.norm(m, 1)
    rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond < 1e-10:
        return None
    return sla.lu_solve((lu, piv), rhs, check_finite=False)


def _hermitian_state(v, layout) -> np.ndarray:
    m = unvec(v)
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr) < 1e-14:
        raise ConvergenceError("stationary vector has vanishing trace")
    return m / tr


def stationary_projector(W: Superoperator, tol: float = NULL_TOL) -> np.ndarray:
    """Projector onto the null space along the conserved quantities.

    ``P0 @ vec(rho0)`` is the long-time (Cesaro) average of ``exp(tW) rho0``.
    """
    right, left = null_spaces(W, tol)
    if right.shape[1] == 0:
        raise ConvergenceError("W has an empty null space")
    gram = left.conj().T @ right
    return right @ np.linalg.solve(gram, left.conj().T)


def steady_states(W: Superoperator, tol: float = NULL_TOL, method: str = "auto"
                  ) -> list[DensityMatrix]:
    """Extremal stationary states of ``W``.

    For a one-dimensional null space this is the unique steady state. For a
    degenerate null space each computational-basis projector ``|k><k|`` is
    sent to its long-time limit and the distinct limits are returned, so every
    attractor reachable from a basis state appears exactly once.

    ``method`` is ``"svd"``, ``"lu"`` (assume uniqueness, fall back to SVD if
    the augmented system is singular) or ``"auto"`` (LU above 1296 Liouville
    dimensions, SVD otherwise).
    """
    n = W.layout.total_dim
    if method not in ("auto", "svd", "lu"):
        raise ValueError(f"unknown method {method!r}")
    if method == "lu" or (method == "auto" and n * n > 1296):
        v = _unique_steady_state_lu(W)
        if v is not None:
            rho = _hermitian_state(v, W.layout)
            _check_stationary(W, rho)
            return [DensityMatrix(rho, W.layout, tol=1e-9, pos_tol=1e-8)]

    right, left = null_spaces(W, tol)
    k = right.shape[1]
    if k == 0:
        raise ConvergenceError("W has an empty null space")
    if k == 1:
        rho = _hermitian_state(right[:, 0], W.layout)
        _check_stationary(W, rho)
        return [DensityMatrix(rho, W.layout, tol=1e-9, pos_tol=1e-8)]

    proj = right @ np.linalg.solve(left.conj().T @ right, left.conj().T)
    found: list[np.ndarray] = []
    for idx in range(n):
        seed = np.zeros((n, n), dtype=complex)
        seed[idx, idx] = 1.0
        rho = _hermitian_state(proj @ vec(seed), W.layout)
        if not any(np.max(np.abs(rho - f)) < 1e-8 for f in found):
            _check_stationary(W, rho)
            found.append(rho)
    return [DensityMatrix(f, W.layout, tol=1e-9, pos_tol=1e-8) for f in found]


def _check_stationary(W, rho, atol=1e-8):
    res = np.linalg.norm(W.matrix @ vec(rho))
    if res > atol * max(1.0, np.abs(W.matrix).max()):
        raise ConvergenceError(f"steady state residual {res:.2e}", residual=res)


def _rhs(W):
    m = W.matrix

    def f(t, y):
        return m @ y

    return f


def evolve(W: Superoperator, rho0: Operator, t_final: float, dt: float | None = None,
           rtol: float = 1e-10, atol: float = 1e-12) -> Operator:
    """Integrate ``d vec(rho)/dt = W vec(rho)`` with adaptive explicit RK (DOP853).

    ``dt`` is the initial step; returns a :class:`DensityMatrix` when the
    input is one, otherwise a plain :class:`Operator`.
    """
    if dt is not None and dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    y0 = vec(rho0).astype(complex)
    if t_final == 0:
        out = unvec(y0)
    else:
        sol = solve_ivp(_rhs(W), (0.0, float(t_final)), y0, method="DOP853",
                        rtol=rtol, atol=atol, first_step=dt)
        if not sol.success:
            raise ConvergenceError(f"time integration failed: {sol.message}")
        out = unvec(sol.y[:, -1])
    if isinstance(rho0, DensityMatrix):
        out = 0.5 * (out + out.conj().T)
        return DensityMatrix(out, W.layout, tol=1e-8, pos_tol=1e-7)
    return Operator(out, W.layout)


def time_averaged_rate(model: LindbladModel, channel, rho0: Operator, t_start: float,
                       t_end: float, rtol: float = 1e-10, atol: float = 1e-12) -> float:
    """Mean count rate ``sum_c w_c gamma_c <L_c^dag L_c>`` averaged over ``[t_start, t_end]``.

    The integral of the rate is carried as an extra ODE component, so
    undamped oscillations average out instead of biasing a point estimate.
    """
    if not 0 <= t_start < t_end:
        raise ValueError("need 0 <= t_start < t_end")
    proc = counting_process(model, channel)
    W = build_liouvillian(model)
    obs = sum(w * model.channels[i].rate
              * (model.channels[i].l_op.dag() @ model.channels[i].l_op).matrix
              for i, w in proc)
    # Tr(O rho) = vec(O^T)^T vec(rho)
    row = vec(np.asarray(obs).T)
    m = W.matrix

    def f(t, y):
        dy = np.empty_like(y)
        dy[:-1] = m @ y[:-1]
        dy[-1] = row @ y[:-1] if t >= t_start else 0.0
        return dy

    y0 = np.concatenate([vec(rho0).astype(complex), [0.0]])
    sol = solve_ivp(f, (0.0, float(t_end)), y0, method="DOP853", rtol=rtol, atol=atol,
                    t_eval=[t_end])
    if not sol.success:
        raise ConvergenceError(f"time integration failed: {sol.message}")
    return float(sol.y[-1, -1].real / (t_end - t_start))


def trace_preservation_error(W: Superoperator) -> float:
    """``||vec(I)^T W|| / ||W||``; zero for a valid Lindbladian."""
    n = W.layout.total_dim
    norm = np.linalg.norm(W.matrix)
    return float(np.linalg.norm(_trace_row(n) @ W.matrix) / (norm if norm else 1.0))


def eigenvalues(W: Superoperator) -> np.ndarray:
    return sla.eigvals(W.matrix)


def as_density(op, layout=None) -> DensityMatrix:
    if isinstance(op, DensityMatrix):
        return op
    if isinstance(op, Operator):
        return DensityMatrix(op.matrix, op.layout)
    arr = np.asarray(op, dtype=complex)
    if arr.ndim == 1:
        return DensityMatrix.from_ket(arr, layout)
    return DensityMatrix(arr, layout)


def superoperator_from_channels(layout, terms: Sequence[tuple[complex, Operator, Operator]]):
    """Sum of ``c * A . B`` terms; small helper for hand-built generators in tests."""
    n = layout.total_dim if isinstance(layout, SpaceLayout) else int(np.prod(layout))
    m = np.zeros((n * n, n * n), dtype=complex)
    for c, a, b in terms:
        m += c * np.kron(b.matrix.T, a.matrix)
    return Superoperator(m, layout)
