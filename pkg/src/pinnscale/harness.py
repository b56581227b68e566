"""Experiment orchestration: collocation sweeps, scaling studies, references.

Also owns run persistence (``sweep.csv`` rows, per-run loss history and
config echo) and the split-step spectral integrator that provides the
Schrodinger error reference.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .metrics import classify_regime
from .problems import ProblemSpec, ReferenceGrid, ic_schrodinger
from .sampling import lhs
from .training import RunRecord, TrainingDiverged, train_single
from .parallel import train_distributed

__all__ = [
    "McRateResult",
    "SWEEP_COLUMNS",
    "load_reference_grid",
    "mc_rate_study",
    "persist_run",
    "read_sweep",
    "regime_order_violations",
    "run_h_sweep",
    "run_scaling",
    "save_reference_grid",
    "schrodinger_reference",
]

SWEEP_COLUMNS = [
    "problem",
    "mode",
    "size",
    "N_f",
    "N_g",
    "N_h",
    "M",
    "seed",
    "iterations",
    "lr",
    "width",
    "depth",
    "error",
    "best_iter",
    "loss_train",
    "loss_test",
    "gap_rel",
    "time_total_s",
    "t500_mean",
    "t500_std",
    "pointsec",
    "regime",
]

_GRID_MAGIC = b"NLSGRID1"

REGIME_RANK = {"pre-asymptotic": 0, "transition": 1, "permanent": 2}


def _seed_list(seeds, base: int = 1234) -> list[int]:
    if isinstance(seeds, (int, np.integer)):
        if seeds < 1:
            raise ValueError(f"need at least one seed, got {seeds}")
        return [base + i for i in range(int(seeds))]
    out = [int(s) for s in seeds]
    if not out:
        raise ValueError("seed list is empty")
    return out


def _failed_record(problem: ProblemSpec, n_f: int, seed: int, dims, iterations: int, lr: float, config) -> RunRecord:
    return RunRecord(
        problem=problem.kind,
        mode="none",
        size=1,
        n_f=n_f,
        n_g=0,
        n_h=0,
        m_obs=0,
        seed=seed,
        iterations=iterations,
        lr=lr,
        width=max(dims[1:-1]) if len(dims) > 2 else dims[-1],
        depth=len(dims) - 2,
        regime="failed",
        failed=True,
        config=dict(config or {}),
    )


def run_h_sweep(
    problem: ProblemSpec,
    n_list,
    seeds,
    dims,
    iterations: int,
    lr: float = 1e-4,
    n_g: int | None = None,
    n_h: int | None = None,
    m_obs: int | None = None,
    record_every: int = 100,
    activation: str = "tanh",
    out_dir=None,
    config: dict | None = None,
) -> list[RunRecord]:
    """Train one model per (N_f, seed) and label the collocation regimes.

    A run that diverges (non-finite loss) is recorded as failed, not fatal.
    Regime labels are attached when every N has at least two finite runs.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list is empty")
    seeds = _seed_list(seeds)
    records: list[RunRecord] = []
    for n_f in n_list:
        for seed in seeds:
            run_cfg = dict(config or {})
            run_cfg.update({"n_f": n_f, "seed": seed, "iterations": iterations, "lr": lr})
            try:
                rec = train_single(
                    problem,
                    n_f,
                    dims,
                    seed=seed,
                    iterations=iterations,
                    lr=lr,
                    n_g=n_g,
                    n_h=n_h,
                    m_obs=m_obs,
                    activation=activation,
                    record_every=record_every,
                    config=run_cfg,
                )
            except TrainingDiverged:
                rec = _failed_record(problem, n_f, seed, dims, iterations, lr, run_cfg)
            records.append(rec)
            if out_dir is not None:
                persist_run(rec, out_dir)
    finite = [r for r in records if not r.failed]
    counts = {n: sum(1 for r in finite if r.n_f == n) for n in n_list}
    if finite and all(c >= 2 for c in counts.values()):
        labels = classify_regime(finite)
        for rec in records:
            if not rec.failed:
                rec.regime = labels[rec.n_f]
    return records


def regime_order_violations(labels: dict[int, str]) -> list[tuple[int, int]]:
    """Pairs (N_small, N_large) where the label regresses as N grows."""
    ns = sorted(labels)
    out = []
    for a, b in zip(ns, ns[1:]):
        if REGIME_RANK[labels[b]] < REGIME_RANK[labels[a]]:
            out.append((a, b))
    return out


def run_scaling(
    problem: ProblemSpec,
    mode: str,
    sizes,
    n_1: int,
    dims,
    iterations: int,
    seeds=1,
    lr: float = 1e-4,
    n_g: int | None = None,
    n_h: int | None = None,
    m_obs: int | None = None,
    record_every: int = 100,
    activation: str = "tanh",
    out_dir=None,
    config: dict | None = None,
) -> list[RunRecord]:
    """Distributed runs for each size plus the matching unaccelerated baselines.

    weak: each rank samples ``n_1`` interior points, so the baseline for
    size s is a serial run at ``N_f = s * n_1``.  strong: ``n_1`` is the
    fixed total and the serial baseline trains on the full set.
    """
    if mode not in ("weak", "strong"):
        raise ValueError(f"mode must be 'weak' or 'strong', got {mode!r}")
    sizes = sorted({int(s) for s in sizes})
    if not sizes or sizes[0] < 1:
        raise ValueError(f"sizes must be positive, got {sizes}")
    seeds = _seed_list(seeds)
    records: list[RunRecord] = []
    for size in sizes:
        for seed in seeds:
            run_cfg = dict(config or {})
            run_cfg.update({"mode": mode, "size": size, "n_1": n_1, "seed": seed})
            recs = train_distributed(
                problem,
                mode,
                size,
                n_1,
                dims,
                seed=seed,
                iterations=iterations,
                lr=lr,
                n_g=n_g,
                n_h=n_h,
                m_obs=m_obs,
                activation=activation,
                record_every=record_every,
                config=run_cfg,
            )
            records.append(recs[0])
            if out_dir is not None:
                persist_run(recs[0], out_dir)
    baseline_ns = sorted({size * n_1 for size in sizes}) if mode == "weak" else [n_1]
    for n_f in baseline_ns:
        for seed in seeds:
            run_cfg = dict(config or {})
            run_cfg.update({"mode": "none", "n_f": n_f, "seed": seed})
            try:
                rec = train_single(
                    problem,
                    n_f,
                    dims,
                    seed=seed,
                    iterations=iterations,
                    lr=lr,
                    n_g=n_g,
                    n_h=n_h,
                    m_obs=m_obs,
                    activation=activation,
                    record_every=record_every,
                    config=run_cfg,
                )
            except TrainingDiverged:
                rec = _failed_record(problem, n_f, seed, dims, iterations, lr, run_cfg)
            records.append(rec)
            if out_dir is not None:
                persist_run(rec, out_dir)
    return records


# --------------------------------------------------------------------------
# Schrodinger reference: Strang split-step spectral integration
# --------------------------------------------------------------------------


def schrodinger_reference(
    n_x: int = 256,
    n_t: int = 201,
    dt: float = 5e-4,
    t_final: float = np.pi / 2,
    x_bounds: tuple[float, float] = (-5.0, 5.0),
    initial=None,
    mass_tolerance: float = 1e-6,
) -> ReferenceGrid:
    """Integrate i u_t + 0.5 u_xx + |u|^2 u = 0 with periodic boundaries.

    Strang splitting: half nonlinear phase rotation ``u <- u e^{i|u|^2 dt/2}``,
    full linear step in Fourier space ``u_k <- u_k e^{-i 0.5 k^2 dt}``, half
    nonlinear rotation.  ``x`` is uniform on [x0, x1) (n_x a power of two for
    the spectral transform), ``t`` uniform on [0, t_final].  Initial data is
    2 sech(x) unless ``initial`` (callable or array) overrides it.  Aborts if
    the discrete mass drifts by more than ``mass_tolerance`` relative.
    """
    if n_x < 2 or (n_x & (n_x - 1)) != 0:
        raise ValueError(f"n_x must be a power of two, got {n_x}")
    if n_t < 2:
        raise ValueError(f"n_t must be >= 2, got {n_t}")
    if dt <= 0 or dt > 1e-3:
        raise ValueError(f"dt must be in (0, 1e-3], got {dt}")
    x0, x1 = x_bounds
    dx = (x1 - x0) / n_x
    x = x0 + dx * np.arange(n_x)
    t_out = np.linspace(0.0, t_final, n_t)
    if initial is None:
        ic = ic_schrodinger(x)
        u = ic[:, 0].astype(np.complex128)
    elif callable(initial):
        u = np.asarray(initial(x), dtype=np.complex128)
    else:
        u = np.asarray(initial, dtype=np.complex128)
    if u.shape != (n_x,):
        raise ValueError(f"initial data must have shape ({n_x},), got {u.shape}")

    k = 2.0 * np.pi * np.fft.fftfreq(n_x, d=dx)
    mass0 = float(np.sum(np.abs(u) ** 2) * dx)
    field = np.empty((n_t, n_x), dtype=np.complex128)
    field[0] = u
    for j in range(1, n_t):
        span = t_out[j] - t_out[j - 1]
        steps = max(1, math.ceil(span / dt))
        h = span / steps
        linear = np.exp(-0.5j * k**2 * h)
        for _ in range(steps):
            u = u * np.exp(0.5j * h * np.abs(u) ** 2)
            u = np.fft.ifft(np.fft.fft(u) * linear)
            u = u * np.exp(0.5j * h * np.abs(u) ** 2)
        mass = float(np.sum(np.abs(u) ** 2) * dx)
        if mass0 > 0 and abs(mass - mass0) / mass0 > mass_tolerance:
            raise ArithmeticError(
                f"mass drifted by {abs(mass - mass0) / mass0:.3e} relative at t={t_out[j]:.4f}"
            )
        field[j] = u
    return ReferenceGrid(x=x, t=t_out, field=field)


def save_reference_grid(path, grid: ReferenceGrid) -> None:
    """Write a reference grid.

    Byte layout (little-endian): magic ``NLSGRID1``; uint32 header length;
    UTF-8 JSON ``{"n_x", "n_t", "x_min", "x_max", "t_min", "t_max"}`` where
    ``x_max`` is the exclusive right edge of the periodic axis; then
    ``n_t * n_x`` (real, imag) float64 pairs, row-major with time as rows.
    """
    n_t, n_x = grid.field.shape
    dx = grid.x[1] - grid.x[0]
    header = json.dumps(
        {
            "n_x": int(n_x),
            "n_t": int(n_t),
            "x_min": float(grid.x[0]),
            "x_max": float(grid.x[0] + n_x * dx),
            "t_min": float(grid.t[0]),
            "t_max": float(grid.t[-1]),
        }
    ).encode()
    pairs = np.empty((n_t, n_x, 2))
    pairs[:, :, 0] = grid.field.real
    pairs[:, :, 1] = grid.field.imag
    try:
        with open(path, "wb") as fh:
            fh.write(_GRID_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(pairs.astype("<f8").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write reference grid {path}: {exc}") from exc


def load_reference_grid(path) -> ReferenceGrid:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read reference grid {path}: {exc}") from exc
    if blob[:8] != _GRID_MAGIC:
        raise ValueError(f"{path}: not a reference grid file (bad magic)")
    (hlen,) = struct.unpack("<I", blob[8:12])
    meta = json.loads(blob[12 : 12 + hlen].decode())
    n_x, n_t = meta["n_x"], meta["n_t"]
    pairs = np.frombuffer(blob[12 + hlen :], dtype="<f8").reshape(n_t, n_x, 2)
    dx = (meta["x_max"] - meta["x_min"]) / n_x
    x = meta["x_min"] + dx * np.arange(n_x)
    t = np.linspace(meta["t_min"], meta["t_max"], n_t)
    return ReferenceGrid(x=x, t=t, field=pairs[:, :, 0] + 1j * pairs[:, :, 1])


# --------------------------------------------------------------------------
# Monte-Carlo quadrature rate study
# --------------------------------------------------------------------------


@dataclass
class McRateResult:
    n_list: list[int]
    rms_errors: list[float]
    slope: float | None
    exact: bool


def mc_rate_study(
    g,
    n_list,
    repeats: int,
    box,
    exact_integral: float,
    seed: int = 0,
    sampler: str = "uniform",
    fit: bool = True,
) -> McRateResult:
    """Fit the log-log decay rate of the quadrature error of ``sum_i (vol/N) g(x_i)``.

    ``sampler`` is ``uniform`` (iid points; the Monte-Carlo alpha=1/2 regime)
    or ``lhs`` (stratified; faster decay in one dimension).  A constant
    integrand gives zero error everywhere, reported as ``exact``.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list is empty")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if sampler not in ("uniform", "lhs"):
        raise ValueError(f"sampler must be 'uniform' or 'lhs', got {sampler!r}")
    box = np.atleast_2d(np.asarray(box, dtype=np.float64))
    widths = box[:, 1] - box[:, 0]
    vol = float(np.prod(widths))
    rng = np.random.Generator(np.random.Philox(int(seed)))
    rms = []
    for idx, n in enumerate(n_list):
        errs = np.empty(repeats)
        for rep in range(repeats):
            if sampler == "uniform":
                pts = box[:, 0] + rng.uniform(size=(n, box.shape[0])) * widths
            else:
                pts = lhs(n, box, seed + 1_000_000 + 7919 * idx + rep)
            est = vol * float(np.mean(g(pts)))
            errs[rep] = abs(est - exact_integral)
        rms.append(float(np.sqrt(np.mean(errs**2))))
    if all(e == 0.0 for e in rms):
        return McRateResult(n_list, rms, None, True)
    if not fit:
        return McRateResult(n_list, rms, None, False)
    if len(set(n_list)) < 2:
        raise ValueError(f"degenerate n_list {n_list}: need two distinct counts to fit a rate")
    slope = float(np.polyfit(np.log10(n_list), np.log10(rms), 1)[0])
    return McRateResult(n_list, rms, slope, False)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_row(record: RunRecord) -> list[str]:
    return [
        record.problem,
        record.mode,
        _fmt(record.size),
        _fmt(record.n_f),
        _fmt(record.n_g),
        _fmt(record.n_h),
        _fmt(record.m_obs),
        _fmt(record.seed),
        _fmt(record.iterations),
        _fmt(record.lr),
        _fmt(record.width),
        _fmt(record.depth),
        _fmt(record.error),
        _fmt(record.best_iter),
        _fmt(record.loss_train),
        _fmt(record.loss_test),
        _fmt(record.gap_rel),
        _fmt(record.time_total_s),
        _fmt(record.t500_mean),
        _fmt(record.t500_std),
        _fmt(record.pointsec),
        record.regime,
    ]


def _run_id(record: RunRecord, out_dir: str) -> str:
    base = f"{record.problem}_{record.mode}_z{record.size}_nf{record.n_f}_s{record.seed}"
    run_id, k = base, 1
    while os.path.exists(os.path.join(out_dir, f"run_{run_id}.json")):
        k += 1
        run_id = f"{base}-{k}"
    return run_id


def persist_run(record: RunRecord, out_dir) -> dict[str, str]:
    """Append to sweep.csv and write the per-run loss history and config echo.

    Returns the paths written, keyed by role.
    """
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
        run_id = _run_id(record, out_dir)
        sweep_path = os.path.join(out_dir, "sweep.csv")
        new = not os.path.exists(sweep_path)
        with open(sweep_path, "a", newline="") as fh:
            if new:
                fh.write(",".join(SWEEP_COLUMNS) + "\n")
            fh.write(",".join(record_row(record)) + "\n")
        losses_path = os.path.join(out_dir, f"losses_{run_id}.csv")
        with open(losses_path, "w", newline="") as fh:
            fh.write("iteration,loss_train,loss_test,error\n")
            for it, lt, lv, err in zip(
                record.history_iters, record.history_train, record.history_test, record.history_error
            ):
                fh.write(f"{it},{_fmt(lt)},{_fmt(lv)},{_fmt(err)}\n")
        json_path = os.path.join(out_dir, f"run_{run_id}.json")
        with open(json_path, "w") as fh:
            json.dump(
                {
                    "id": run_id,
                    "config": record.config,
                    "summary": dict(zip(SWEEP_COLUMNS, record_row(record))),
                    "extras": record.extras,
                },
                fh,
                indent=2,
            )
    except OSError as exc:
        raise OSError(f"cannot persist run into {out_dir}: {exc}") from exc
    return {"sweep": sweep_path, "losses": losses_path, "run": json_path}


def read_sweep(path) -> list[dict]:
    """Parse sweep.csv back into typed dicts (inverse of :func:`persist_run` rows)."""
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read sweep file {path}: {exc}") from exc
    if not lines:
        raise ValueError(f"{path}: sweep file is empty")
    header = lines[0].split(",")
    if header != SWEEP_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    rows = []
    int_cols = {"size", "N_f", "N_g", "N_h", "M", "seed", "iterations", "best_iter", "width", "depth"}
    float_cols = {
        "lr",
        "error",
        "loss_train",
        "loss_test",
        "gap_rel",
        "time_total_s",
        "t500_mean",
        "t500_std",
        "pointsec",
    }
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(SWEEP_COLUMNS):
            raise ValueError(f"{path}: malformed row {ln!r}")
        row: dict = {}
        for col, val in zip(SWEEP_COLUMNS, parts):
            if col in int_cols:
                row[col] = int(val)
            elif col in float_cols:
                row[col] = float(val)
            else:
                row[col] = val
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: sweep file has a header but no runs")
    return rows
