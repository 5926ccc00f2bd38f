"""Dense operator algebra on composite finite-dimensional Hilbert spaces.

Basis conventions used throughout the package:

* qubit sites: index 0 is spin up, index 1 is spin down, so
  ``sigma_plus = |up><down|`` has its single nonzero entry at ``[0, 1]``;
* boson modes: the Fock index equals the excitation number;
* composite spaces are ordered as in :class:`SpaceLayout`, first site
  slowest (``numpy.kron`` order).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DimensionError

__all__ = [
    "SpaceLayout",
    "Operator",
    "DensityMatrix",
    "tensor",
    "identity",
    "embed",
    "pauli",
    "boson_annihilation",
    "expectation",
    "basis_ket",
    "thermal_state",
]


@dataclass(frozen=True)
class SpaceLayout:
    """Local dimensions of the subsystems of a composite space."""

    dims: tuple[int, ...]

    def __init__(self, dims):
        dims = tuple(int(d) for d in np.atleast_1d(dims))
        if not dims:
            raise DimensionError("layout needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every local dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    def __len__(self):
        return len(self.dims)


def _as_layout(layout) -> SpaceLayout:
    return layout if isinstance(layout, SpaceLayout) else SpaceLayout(layout)


class Operator:
    """A square complex matrix attached to a :class:`SpaceLayout`.

    The underlying array is copied on construction and marked read-only, so
    operators can be shared freely between threads and processes.
    """

    __slots__ = ("_matrix", "_layout")

    def __init__(self, matrix, layout=None):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be a square matrix, got shape {m.shape}")
        layout = SpaceLayout((m.shape[0],)) if layout is None else _as_layout(layout)
        if layout.total_dim != m.shape[0]:
            raise DimensionError(
                f"matrix dimension {m.shape[0]} does not match layout {layout.dims}"
            )
        m.setflags(write=False)
        self._matrix = m
        self._layout = layout

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def layout(self) -> SpaceLayout:
        return self._layout

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            raise TypeError(f"expected Operator, got {type(other).__name__}")
        if other.layout != self.layout:
            raise DimensionError(f"layout mismatch: {self.layout.dims} vs {other.layout.dims}")

    def dag(self) -> "Operator":
        return Operator(self._matrix.conj().T, self._layout)

    def trace(self) -> complex:
        return complex(np.trace(self._matrix))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        m = self._matrix
        return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)

    def __matmul__(self, other):
        self._check(other)
        return Operator(self._matrix @ other.matrix, self._layout)

    def __add__(self, other):
        self._check(other)
        return Operator(self._matrix + other.matrix, self._layout)

    def __sub__(self, other):
        self._check(other)
        return Operator(self._matrix - other.matrix, self._layout)

    def __neg__(self):
        return Operator(-self._matrix, self._layout)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            raise TypeError("use @ for operator products")
        return Operator(complex(scalar) * self._matrix, self._layout)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self._matrix / complex(scalar), self._layout)

    def __repr__(self):
        return f"Operator(dims={self._layout.dims})"


class DensityMatrix(Operator):
    """A validated physical state: unit trace, Hermitian, positive semidefinite."""

    __slots__ = ()

    def __init__(self, matrix, layout=None, *, tol: float = 1e-10, pos_tol: float = 1e-9):
        super().__init__(matrix, layout)
        m = self.matrix
        if abs(np.trace(m) - 1.0) > tol:
            raise ValueError(f"density matrix trace {np.trace(m).real:.3e} != 1")
        if not self.is_hermitian(tol):
            raise ValueError("density matrix is not Hermitian")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -pos_tol:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")

    @classmethod
    def from_ket(cls, psi, layout=None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), layout)

    @classmethod
    def from_operator(cls, op: Operator, **kw) -> "DensityMatrix":
        return cls(op.matrix, op.layout, **kw)


def tensor(factors: Sequence, layout=None) -> Operator:
    """Kronecker product of single-site factors, in layout order."""
    mats = [f.matrix if isinstance(f, Operator) else np.asarray(f, dtype=complex) for f in factors]
    if layout is None:
        layout = SpaceLayout(tuple(m.shape[0] for m in mats))
    layout = _as_layout(layout)
    if len(mats) != layout.n_sites:
        raise DimensionError(f"{len(mats)} factors for {layout.n_sites} sites")
    for k, (m, d) in enumerate(zip(mats, layout.dims)):
        if m.shape != (d, d):
            raise DimensionError(f"factor {k} has shape {m.shape}, site dimension is {d}")
    return Operator(reduce(np.kron, mats), layout)


def identity(layout) -> Operator:
    layout = _as_layout(layout)
    return Operator(np.eye(layout.total_dim), layout)


def embed(local, site: int, layout) -> Operator:
    """Place a single-site operator at ``site``, identities elsewhere."""
    layout = _as_layout(layout)
    if not 0 <= site < layout.n_sites:
        raise DimensionError(f"site {site} out of range for {layout.n_sites} sites")
    factors = [np.eye(d) for d in layout.dims]
    factors[site] = local.matrix if isinstance(local, Operator) else local
    return tensor(factors, layout)


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli(axis: str, site: int = 0, layout=(2,)) -> Operator:
    """Pauli operator on a qubit site.

    ``axis`` is one of ``x, y, z, plus, minus``. ``plus`` is
    ``(sigma_x + i sigma_y) / 2`` and raises |down> to |up>.
    """
    layout = _as_layout(layout)
    try:
        local = _PAULI[axis]
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None
    if not 0 <= site < layout.n_sites:
        raise DimensionError(f"site {site} out of range for {layout.n_sites} sites")
    if layout.dims[site] != 2:
        raise DimensionError(f"site {site} has dimension {layout.dims[site]}, not a qubit")
    return embed(local, site, layout)


def boson_annihilation(cutoff: int) -> Operator:
    """Truncated annihilation operator with sqrt(n) on the first superdiagonal."""
    cutoff = int(cutoff)
    if cutoff < 2:
        raise DimensionError(f"Fock cutoff must be >= 2, got {cutoff}")
    return Operator(np.diag(np.sqrt(np.arange(1, cutoff)), 1), (cutoff,))


def expectation(obs: Operator, state: Operator) -> complex:
    """``Tr(obs @ state)``; the state need not have unit trace."""
    obs._check(state)
    # Tr(AB) without forming the product
    return complex(np.sum(obs.matrix.T * state.matrix))


def basis_ket(index, layout) -> np.ndarray:
    """Computational basis vector; ``index`` is flat or a per-site tuple."""
    layout = _as_layout(layout)
    flat = int(np.ravel_multi_index(tuple(index), layout.dims)) if np.ndim(index) else int(index)
    psi = np.zeros(layout.total_dim, dtype=complex)
    psi[flat] = 1.0
    return psi


def thermal_state(nbar: float, cutoff: int) -> DensityMatrix:
    """Geometric Fock distribution with mean ``nbar``, renormalised after truncation."""
    n = np.arange(cutoff)
    p = (nbar / (1.0 + nbar)) ** n / (1.0 + nbar) if nbar > 0 else (n == 0).astype(float)
    return DensityMatrix(np.diag(p / p.sum()), (cutoff,))
