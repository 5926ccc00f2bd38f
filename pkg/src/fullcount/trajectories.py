"""Quantum-jump unravelling and empirical count cumulants.

Between jumps a trajectory follows ``d psi/dt = -i H_eff psi`` with
``H_eff = H - (i/2) sum_c gamma_c L_c^dag L_c``. A jump happens when the
squared norm of the unnormalised state falls to a uniform random threshold;
the channel is chosen with probability proportional to
``gamma_c ||L_c psi||^2``.

All trajectories of a batch are advanced together. Trajectory ``i`` draws
its random numbers from its own generator seeded with ``seeds[i]``, so
results depend only on the seed list.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError
from .hilbert import DensityMatrix, Operator
from .liouville import LindbladModel, counting_process

__all__ = [
    "TrajectoryBatch",
    "EmpiricalCumulants",
    "trajectory_seeds",
    "simulate_batch",
    "simulate_jump_trajectory",
    "empirical_cumulants",
    "ensemble_populations",
]

NORM_TOL = 1e-10
_BLOCK = 64


@dataclass(frozen=True)
class TrajectoryBatch:
    """Counts recorded on a batch of trajectories.

    ``counts`` is the (weighted) count of the selected channel(s) per
    trajectory and ``channel_counts`` the raw jump numbers per channel.
    """

    counts: np.ndarray
    channel_counts: np.ndarray
    T: float
    seeds: tuple[int, ...]
    model: str
    channel_index: object
    final_states: np.ndarray | None = None
    record_times: tuple[float, ...] = ()
    records: np.ndarray | None = None

    def __len__(self):
        return len(self.seeds)


@dataclass(frozen=True)
class EmpiricalCumulants:
    kappa1_hat: float
    kappa2_hat: float
    se1: float
    se2: float
    n: int


def trajectory_seeds(seed: int, n: int) -> tuple[int, ...]:
    """Per-trajectory integer seeds derived from one master seed."""
    state = np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)
    return tuple(int(x) for x in state)


class _Streams:
    """Independent uniform streams, one per trajectory, drawn in blocks."""

    def __init__(self, seeds):
        self.gens = [np.random.default_rng(s) for s in seeds]
        self.buf = np.empty((len(seeds), _BLOCK))
        self.pos = np.full(len(seeds), _BLOCK)

    def draw(self, idx):
        idx = np.asarray(idx)
        need = idx[self.pos[idx] >= _BLOCK]
        for i in need:
            self.buf[i] = self.gens[i].random(_BLOCK)
            self.pos[i] = 0
        out = self.buf[idx, self.pos[idx]]
        self.pos[idx] += 1
        return out


class _NoJumpPropagator:
    """``exp(-i H_eff tau)`` applied to many states with individual ``tau``."""

    def __init__(self, heff):
        self.heff = heff
        lam, V = np.linalg.eig(heff)
        self.diag = np.linalg.cond(V) < 1e8
        if self.diag:
            self.lam = lam
            self.V = V
            self.Vinv = np.linalg.inv(V)

    def to_coeffs(self, psi):
        return psi @ self.Vinv.T if self.diag else psi

    def states(self, coeffs, tau):
        if self.diag:
            return (coeffs * np.exp(-1j * np.outer(tau, self.lam))) @ self.V.T
        props = sla.expm(-1j * tau[:, None, None] * self.heff[None])
        return np.einsum("bij,bj->bi", props, coeffs)


def _initial_kets(state0, n_sites_dim, streams, idx_all):
    if isinstance(state0, Operator):
        rho = state0.matrix
        if not isinstance(state0, DensityMatrix):
            DensityMatrix(rho, state0.layout)
    else:
        arr = np.asarray(state0, dtype=complex)
        if arr.ndim == 1:
            nrm = np.linalg.norm(arr)
            if abs(nrm - 1.0) > 1e-10:
                raise ValueError(f"initial ket is not normalised (norm {nrm:.6g})")
            return np.tile(arr, (len(idx_all), 1))
        rho = DensityMatrix(arr).matrix
    if rho.shape[0] != n_sites_dim:
        raise ValueError("initial state dimension does not match the model")
    p, vecs = np.linalg.eigh(rho)
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    if np.max(p) > 1.0 - 1e-12:
        return np.tile(vecs[:, np.argmax(p)], (len(idx_all), 1))
    cdf = np.cumsum(p)
    u = streams.draw(idx_all)
    k = np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)
    return vecs[:, k].T.copy()


def simulate_batch(model: LindbladModel, channel_index, state0, T: float, n_traj: int | None = None,
                   seed: int = 0, dt: float | None = None, seeds=None,
                   record_times=None, keep_final: bool = False) -> TrajectoryBatch:
    """Run a batch of jump trajectories up to time ``T``.

    Parameters
    ----------
    state0 : array_like or Operator
        Normalised ket, or a density matrix whose eigen-decomposition is sampled.
    n_traj, seed : int
        Batch size and master seed (see :func:`trajectory_seeds`); ignored if
        ``seeds`` is given.
    dt : float, optional
        Initial bracket for each waiting-time search. By default the whole
        remaining interval is bracketed.
    record_times : sequence of float, optional
        Times at which the normalised states are stored in ``records``
        (shape ``(n_times, n_traj, dim)``).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if seeds is None:
        if n_traj is None or n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        seeds = trajectory_seeds(seed, n_traj)
    seeds = tuple(int(s) for s in seeds)
    B = len(seeds)
    proc = counting_process(model, channel_index)
    chans = [(c.rate, c.l_op.matrix) for c in model.channels]
    dim = model.dim
    gamma_op = sum((r * (l.conj().T @ l) for r, l in chans), np.zeros((dim, dim), complex))
    heff = model.hamiltonian.matrix - 0.5j * gamma_op
    prop = _NoJumpPropagator(heff)

    rec_t = np.array(sorted(record_times), dtype=float) if record_times is not None else np.empty(0)
    if rec_t.size and (rec_t[0] < 0 or rec_t[-1] > T):
        raise ValueError("record times must lie in [0, T]")
    records = np.zeros((rec_t.size, B, dim), complex) if rec_t.size else None

    streams = _Streams(seeds)
    everyone = np.arange(B)
    psi = _initial_kets(state0, dim, streams, everyone)
    coeffs = prop.to_coeffs(psi)
    t0 = np.zeros(B)
    thresh = 1.0 - streams.draw(everyone)
    counts = np.zeros((B, len(chans)), dtype=np.int64)
    final = np.zeros((B, dim), complex)
    active = np.ones(B, bool)

    def norm2(ix, tau):
        ph = prop.states(coeffs[ix], tau)
        return np.einsum("bi,bi->b", ph.conj(), ph).real, ph

    def decay_rate(ph):
        return np.einsum("bi,ij,bj->b", ph.conj(), gamma_op, ph).real

    while active.any():
        ix = np.flatnonzero(active)
        t_rem = T - t0[ix]
        r = thresh[ix]
        n_end, ph_end = norm2(ix, t_rem)
        stop = n_end > r
        jump_ix = ix[~stop]
        # waiting time: safeguarded Newton on ||psi(tau)||^2 = r
        if jump_ix.size:
            sel = ~stop
            lo = np.zeros(jump_ix.size)
            hi = t_rem[sel].copy()
            rr = r[sel]
            if dt is not None:
                cap = np.minimum(hi, dt)
                for _ in range(64):
                    ncap, _ = norm2(jump_ix, cap)
                    grow = ncap > rr
                    if not grow.any():
                        break
                    lo[grow] = cap[grow]
                    cap[grow] = np.minimum(hi[grow], 2 * cap[grow])
                hi = cap
            # first guess from the initial norm decay rate, ||psi||^2 ~ exp(-rate tau)
            rate0 = decay_rate(prop.states(coeffs[jump_ix], lo))
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                guess = lo - np.log(rr) / rate0
            tau = np.where(np.isfinite(guess) & (guess > lo) & (guess < hi), guess, 0.5 * (lo + hi))
            done = np.zeros(jump_ix.size, bool)
            for _ in range(200):
                open_ = ~done
                nv, ph = norm2(jump_ix[open_], tau[open_])
                f = nv - rr[open_]
                ok = np.abs(f) <= NORM_TOL * rr[open_]
                lo_o, hi_o, ta = lo[open_], hi[open_], tau[open_]
                lo_o = np.where(f > 0, ta, lo_o)
                hi_o = np.where(f <= 0, ta, hi_o)
                deriv = -decay_rate(ph)
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    newton = ta - f / deriv
                inside = np.isfinite(newton) & (newton > lo_o) & (newton < hi_o)
                nxt = np.where(inside, newton, 0.5 * (lo_o + hi_o))
                narrow = (hi_o - lo_o) <= 1e-14 * np.maximum(1.0, hi_o)
                ok |= narrow
                lo[open_], hi[open_] = lo_o, hi_o
                tau[open_] = np.where(ok, ta, nxt)
                done[open_] = ok
                if done.all():
                    break
            else:
                raise ConvergenceError("waiting-time search did not converge")
            t_jump = t0[jump_ix] + tau
        if rec_t.size:
            upto = t0.copy()
            upto[ix[stop]] = T
            if jump_ix.size:
                upto[jump_ix] = t_jump
            for k, tk in enumerate(rec_t):
                mask = (t0[ix] <= tk) & ((tk < upto[ix]) | ((tk == T) & stop))
                if mask.any():
                    sub = ix[mask]
                    _, phk = norm2(sub, tk - t0[sub])
                    records[k, sub] = phk / np.linalg.norm(phk, axis=1)[:, None]
        if stop.any():
            done_ix = ix[stop]
            ph = ph_end[stop]
            final[done_ix] = ph / np.linalg.norm(ph, axis=1)[:, None]
            active[done_ix] = False
        if not jump_ix.size:
            break
        _, ph = norm2(jump_ix, tau)
        ph /= np.linalg.norm(ph, axis=1)[:, None]
        weights = np.stack([rate * np.sum(np.abs(ph @ l.T) ** 2, axis=1) for rate, l in chans], axis=1)
        tot = weights.sum(axis=1)
        if np.any(tot <= 0):
            raise ConvergenceError("jump with vanishing total rate (norm underflow)")
        cdf = np.cumsum(weights / tot[:, None], axis=1)
        u = streams.draw(jump_ix)
        which = np.minimum((cdf < u[:, None]).sum(axis=1), len(chans) - 1)
        newpsi = np.empty_like(ph)
        for c, (_, l) in enumerate(chans):
            m = which == c
            if m.any():
                newpsi[m] = ph[m] @ l.T
        newpsi /= np.linalg.norm(newpsi, axis=1)[:, None]
        counts[jump_ix, which] += 1
        coeffs[jump_ix] = prop.to_coeffs(newpsi)
        t0[jump_ix] = t_jump
        thresh[jump_ix] = 1.0 - streams.draw(jump_ix)

    weighted = sum(w * counts[:, i].astype(float) for i, w in proc)
    if all(float(w).is_integer() for _, w in proc):
        weighted = np.rint(weighted).astype(np.int64)
    return TrajectoryBatch(weighted, counts, float(T), seeds, model.name, channel_index,
                           final if keep_final else None, tuple(rec_t), records)


def simulate_jump_trajectory(model: LindbladModel, channel_index, state0, T: float,
                             dt: float | None = None, seed: int = 0):
    """One trajectory; returns ``(counts_per_channel, final_ket)``."""
    b = simulate_batch(model, channel_index, state0, T, seeds=(seed,), dt=dt, keep_final=True)
    return b.channel_counts[0].copy(), b.final_states[0].copy()


def empirical_cumulants(batch: TrajectoryBatch, min_size: int = 100) -> EmpiricalCumulants:
    """Rate estimators ``mean(K)/T`` and ``var(K)/T`` with jackknife errors."""
    k = np.asarray(batch.counts, dtype=float)
    n = k.size
    if n < min_size:
        raise ValueError(f"batch of {n} trajectories is below the minimum of {min_size}")
    T = batch.T
    x = k - k.mean()
    mean = k.mean()
    var = x.var(ddof=1)
    se1 = np.sqrt(var / n)
    # leave-one-out variances in closed form
    s1, s2 = x.sum(), np.sum(x * x)
    m_i = (s1 - x) / (n - 1)
    var_i = (s2 - x * x - (n - 1) * m_i ** 2) / (n - 2)
    se2 = np.sqrt((n - 1) / n * np.sum((var_i - var_i.mean()) ** 2))
    return EmpiricalCumulants(mean / T, var / T, se1 / T, se2 / T, n)


def ensemble_populations(model: LindbladModel, state0, times, n_traj: int, seed: int = 0):
    """Trajectory-averaged populations at ``times`` with standard errors.

    Returns ``(mean, se)``, each of shape ``(len(times), dim)``.
    """
    times = np.asarray(sorted(times), dtype=float)
    T = max(float(times[-1]), 1e-12)
    b = simulate_batch(model, 0, state0, T, n_traj=n_traj, seed=seed, record_times=times)
    pops = np.abs(b.records) ** 2
    return pops.mean(axis=1), pops.std(axis=1, ddof=1) / np.sqrt(n_traj)
