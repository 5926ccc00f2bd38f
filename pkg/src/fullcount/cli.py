"""Command-line front end.

Usage::

    fullcount cumulants --config run.toml --out result.csv
    fullcount sweep --config sweep.toml --jobs 4

The config is TOML (``.toml``) or JSON (anything else)::

    model = "two_spins_inverse"
    channel = 0
    order = 2
    [params]
    gamma = 2.0
    h = 0.0
    [sweep]
    axes = [{name = "h", start = 0, stop = 2, steps = 60},
            {name = "gamma", start = 0.2, stop = 6, steps = 60}]

Output is CSV preceded by ``#``-prefixed metadata lines. Floats are written
with 17 significant digits so that they round-trip exactly.
"""
from __future__ import annotations

import argparse
import inspect
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version as _pkg_version

import numpy as np

from .cumulants import cumulants_per_fixed_point
from .errors import ConfigError, ConvergenceError, DimensionCapError, InstabilityError
from .gaussian import gaussian_cumulants
from .hilbert import DensityMatrix, basis_ket
from .ldf import theta_curve
from .liouville import build_liouvillian, steady_states
from .models import MODEL_BUILDERS, KerrParams, kerr_bistable_window, kerr_branches, squeezed_pair_gaussian
from .trajectories import empirical_cumulants, simulate_batch

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["main", "run", "load_config", "read_csv", "EXIT_CODES"]

TASKS = ("cumulants", "theta", "traj", "kerr", "sweep")
EXIT_CODES = {"ok": 0, "config": 2, "instability": 3, "convergence": 4, "dimension_cap": 5}
GAUSSIAN_BUILDERS = {"squeezed_pair_gaussian": squeezed_pair_gaussian}


def _version():
    try:
        return _pkg_version("artifact")
    except PackageNotFoundError:
        return "unknown"


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        if str(path).endswith(".toml"):
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _builder(name):
    if name in MODEL_BUILDERS:
        return MODEL_BUILDERS[name]
    if name in GAUSSIAN_BUILDERS:
        return GAUSSIAN_BUILDERS[name]
    raise ConfigError(f"unknown model {name!r}; known: {sorted({**MODEL_BUILDERS, **GAUSSIAN_BUILDERS})}")


def _check_params(name, params, extra=()):
    sig = inspect.signature(_builder(name))
    allowed = set(sig.parameters)
    unknown = set(params) - allowed - set(extra)
    if unknown:
        raise ConfigError(f"model {name!r} has no parameter(s) {sorted(unknown)}")
    missing = [p for p, v in sig.parameters.items()
               if v.default is inspect.Parameter.empty and p not in params and p not in extra]
    if missing:
        raise ConfigError(f"model {name!r} needs parameter(s) {missing}")


def _build(name, params):
    try:
        return _builder(name)(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build {name!r} with {params}: {exc}") from None


def _sweep_axes(cfg):
    axes = cfg.get("sweep", {}).get("axes")
    if not axes:
        raise ConfigError("sweep task needs [sweep] axes")
    out = []
    for ax in axes:
        try:
            name, lo, hi, steps = ax["name"], float(ax["start"]), float(ax["stop"]), int(ax["steps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad sweep axis {ax!r}: {exc}") from None
        if steps < 2:
            raise ConfigError(f"sweep axis {name!r} needs steps >= 2")
        out.append((name, np.linspace(lo, hi, steps)))
    return out


def _cumulant_rows(model_name, params, channel, order):
    model = _build(model_name, params)
    cols = [f"kappa_{k}" for k in range(1, order + 1)]
    if model_name in GAUSSIAN_BUILDERS:
        vals = gaussian_cumulants(model, channel, order)
        results = [(0, vals, False)]
    else:
        results = [(r.fixed_point_index, r.values, r.phase_transition)
                   for r in cumulants_per_fixed_point(model, channel, order)]
    rows = []
    for idx, vals, flag in results:
        k1, k2 = vals[0], vals[1]
        quiet = abs(k1) < 1e-14
        row = {"fixed_point": idx}
        row.update(zip(cols, vals))
        row["fano_paper"] = float("nan") if quiet else (k2 + k1 * k1) / k1
        row["fano_standard"] = float("nan") if quiet else k2 / k1
        row["phase_transition"] = flag
        rows.append(row)
    return rows


def _sweep_cell(args):
    model_name, base, coords, channel, order = args
    params = dict(base)
    params.update(coords)
    rows = _cumulant_rows(model_name, params, channel, order)
    return [{**coords, **r} for r in rows]


def _default_jobs():
    env = os.environ.get("FULLCOUNT_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FULLCOUNT_JOBS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _initial_state(model, initial):
    if initial is None or initial == "steady":
        states = steady_states(build_liouvillian(model))
        return states[0]
    if isinstance(initial, int):
        return basis_ket(initial, model.layout)
    if isinstance(initial, list):
        arr = np.asarray([complex(x) if not isinstance(x, list) else complex(*x) for x in initial])
        return arr / np.linalg.norm(arr)
    raise ConfigError(f"unsupported initial state {initial!r}")


def run(cfg: dict, task: str | None = None, seed: int | None = None, jobs: int | None = None,
        order: int | None = None):
    """Execute one run; returns ``(metadata, columns, rows)``."""
    task = task or cfg.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    seed = int(seed if seed is not None else cfg.get("seed", 0))
    order = int(order if order is not None else cfg.get("order", 2))
    if not 2 <= order <= 20:
        raise ConfigError("order must be between 2 and 20")
    channel = cfg.get("channel", 0)
    if isinstance(channel, dict):
        channel = {int(k): float(v) for k, v in channel.items()}
    params = dict(cfg.get("params", {}))
    meta = {"task": task, "version": _version(), "seed": seed}

    if task == "kerr":
        kp = cfg.get("kerr", params)
        try:
            base = KerrParams(float(kp["delta"]), float(kp["gamma"]), float(kp["g"]))
            sw = cfg.get("intensity", {})
            grid = np.linspace(float(sw.get("start", 0.0)), float(sw["stop"]), int(sw.get("steps", 200)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"kerr task needs delta, gamma, g and intensity.stop: {exc}") from None
        meta.update(model="kerr", params=json.dumps(
            {"delta": base.delta, "gamma": base.gamma, "g": base.g}, sort_keys=True))
        window = kerr_bistable_window(base)
        meta["bistable_window"] = "none" if window is None else f"{window[0]!r},{window[1]!r}"
        cols = ["intensity", "n_stable", "n_low", "n_high", "kappa1_low", "kappa1_high"]
        rows = []
        for inten in grid:
            p = KerrParams(base.delta, base.gamma, base.g, float(inten))
            b = kerr_branches(p)
            stable = [n for n, ok in zip(b.roots, b.stable) if ok]
            lo, hi = min(stable), max(stable)
            rows.append({"intensity": float(inten), "n_stable": len(stable), "n_low": lo,
                         "n_high": hi if len(stable) > 1 else float("nan"),
                         "kappa1_low": p.gamma * lo,
                         "kappa1_high": p.gamma * hi if len(stable) > 1 else float("nan")})
        return meta, cols, rows

    name = cfg.get("model")
    if name is None:
        raise ConfigError("config needs a 'model'")
    meta["model"] = name
    meta["channel"] = json.dumps(channel, sort_keys=True)
    kcols = [f"kappa_{k}" for k in range(1, order + 1)]
    tail = kcols + ["fano_paper", "fano_standard", "phase_transition"]

    if task == "sweep":
        axes = _sweep_axes(cfg)
        _check_params(name, params, extra=[a for a, _ in axes])
        meta["params"] = json.dumps(params, sort_keys=True)
        meta["axes"] = json.dumps([[a, v[0], v[-1], len(v)] for a, v in axes])
        names = [a for a, _ in axes]
        cells = [(name, params, dict(zip(names, map(float, c))), channel, order)
                 for c in itertools.product(*(v for _, v in axes))]
        jobs = jobs or _default_jobs()
        if jobs > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                chunks = list(pool.map(_sweep_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
        else:
            chunks = [_sweep_cell(c) for c in cells]
        rows = [r for ch in chunks for r in ch]
        rows.sort(key=lambda r: tuple(r[a] for a in names) + (r["fixed_point"],))
        return meta, names + ["fixed_point"] + tail, rows

    _check_params(name, params)
    meta["params"] = json.dumps(params, sort_keys=True)
    if task == "cumulants":
        return meta, ["fixed_point"] + tail, _cumulant_rows(name, params, channel, order)

    if name in GAUSSIAN_BUILDERS:
        raise ConfigError(f"task {task!r} needs a Lindblad model, got {name!r}")
    model = _build(name, params)
    if task == "theta":
        th = cfg.get("theta", {})
        try:
            s = np.linspace(float(th.get("start", -1.0)), float(th.get("stop", 1.0)), int(th.get("steps", 41)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad theta grid: {exc}") from None
        curve = theta_curve(model, channel, s)
        rows = [{"s": a, "theta": b} for a, b in zip(curve.s_values, curve.theta_values)]
        return meta, ["s", "theta"], rows

    # traj
    tr = cfg.get("traj", {})
    try:
        T = float(tr.get("T", 100.0))
        n = int(tr.get("n_traj", 1000))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad traj settings: {exc}") from None
    state0 = _initial_state(model, tr.get("initial"))
    if isinstance(state0, DensityMatrix):
        meta["initial"] = "steady"
    batch = simulate_batch(model, channel, state0, T, n_traj=n, seed=seed)
    e = empirical_cumulants(batch, min_size=min(100, n))
    meta.update(T=T, n_traj=n)
    cols = ["kappa1_hat", "se1", "kappa2_hat", "se2", "fano_standard_hat"]
    ratio = e.kappa2_hat / e.kappa1_hat if e.kappa1_hat > 0 else float("nan")
    return meta, cols, [{"kappa1_hat": e.kappa1_hat, "se1": e.se1, "kappa2_hat": e.kappa2_hat,
                         "se2": e.se2, "fano_standard_hat": ratio}]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(fh, meta, cols, rows):
    for k in sorted(meta):
        fh.write(f"# {k}: {meta[k]}\n")
    fh.write(",".join(cols) + "\n")
    for r in rows:
        fh.write(",".join(_fmt(r[c]) for c in cols) + "\n")


def read_csv(path):
    """Parse a file written by :func:`write_csv`; returns ``(metadata, rows)``."""
    meta, rows, cols = {}, [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            elif cols is None:
                cols = line.split(",")
            elif line:
                vals = []
                for tok in line.split(","):
                    if tok in ("true", "false"):
                        vals.append(tok == "true")
                    elif tok.lstrip("-").isdigit():
                        vals.append(int(tok))
                    else:
                        vals.append(float(tok))
                rows.append(dict(zip(cols, vals)))
    return meta, rows


def _parser():
    p = argparse.ArgumentParser(prog="fullcount", description="Counting-statistics cumulants of open quantum systems")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="TOML or JSON run configuration")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
    p.add_argument("--jobs", type=int, help="worker processes for sweeps (default: $FULLCOUNT_JOBS or CPU count)")
    p.add_argument("--order", type=int, help="highest cumulant order (overrides config)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed must be non-negative")
        cfg = load_config(args.config)
        meta, cols, rows = run(cfg, args.task, args.seed, args.jobs, args.order)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                write_csv(fh, meta, cols, rows)
        else:
            write_csv(sys.stdout, meta, cols, rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except InstabilityError as exc:
        print(f"unstable model: {exc}", file=sys.stderr)
        return EXIT_CODES["instability"]
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CODES["convergence"]
    except DimensionCapError as exc:
        print(f"dimension cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CODES["dimension_cap"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
