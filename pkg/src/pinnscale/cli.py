"""Command-line surface: train / sweep / scale / report / oracle.

Exit codes: 0 success, 1 configuration error (bad flags, config file,
unknown problem), 2 runtime failure (diverged training, I/O).  The default
output directory is ``$PINN_OUT_DIR`` or ``./runs``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict

import numpy as np

from .config import Config, ConfigError, parse_config
from .harness import (
    load_reference_grid,
    persist_run,
    read_sweep,
    run_h_sweep,
    run_scaling,
    save_reference_grid,
    schrodinger_reference,
)
from .model import save_params
from .parallel import efficiency_speedup, train_distributed
from .problems import make_problem
from .svg import efficiency_bars_svg, error_vs_n_svg
from .training import train_single

__all__ = ["main"]

DEFAULT_N_LIST = [8, 16, 32, 64, 100, 200, 400, 512, 4096]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); config errors are exit 1
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags override file values)")
    p.add_argument("--problem", help="laplace | laplace-inverse | schrodinger")
    p.add_argument("--nf", type=int, help="interior collocation points N_f")
    p.add_argument("--ng", type=int, help="boundary points N_g")
    p.add_argument("--nh", type=int, help="initial-condition points N_h")
    p.add_argument("--m-obs", type=int, dest="m_obs", help="observation count M")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--width", type=int, help="hidden width")
    p.add_argument("--depth", type=int, help="hidden depth")
    p.add_argument("--iterations", type=int, help="training iterations")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--ranks", type=int, help="worker count (ring size)")
    p.add_argument("--mode", choices=["weak", "strong"], help="scaling mode for ranks > 1")
    p.add_argument("--out", help="output directory (default $PINN_OUT_DIR or ./runs)")
    p.add_argument("--record-every", type=int, dest="record_every", help="loss recording cadence")
    p.add_argument("--activation", choices=["tanh", "identity"])


def _overrides(args: argparse.Namespace) -> dict:
    keys = {
        "problem": "problem",
        "nf": "N_f",
        "ng": "N_g",
        "nh": "N_h",
        "m_obs": "M",
        "lr": "lr",
        "width": "width",
        "depth": "depth",
        "iterations": "iterations",
        "seed": "seed",
        "seeds": "seeds",
        "ranks": "ranks",
        "mode": "mode",
        "out": "out_dir",
        "record_every": "record_every",
        "activation": "activation",
        "n_list": "n_list",
        "sizes": "sizes",
        "n1": "n_1",
        "save": "save",
        "reference": "reference",
    }
    out = {}
    for attr, key in keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _echo(cfg: Config) -> dict:
    return {k: v for k, v in asdict(cfg).items() if v is not None}


def _load_problem(cfg: Config):
    reference = None
    if cfg.reference and cfg.problem == "schrodinger1d":
        reference = load_reference_grid(cfg.reference)
    return make_problem(cfg.problem, reference=reference)


def _counts(cfg: Config) -> dict:
    return dict(n_g=cfg.n_g, n_h=cfg.n_h or None, m_obs=cfg.m_obs or None)


def _cmd_train(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    problem = _load_problem(cfg)
    out_dir = cfg.resolved_out_dir()
    if cfg.ranks == 1:
        record = train_single(
            problem,
            cfg.n_f,
            cfg.dims,
            seed=cfg.seed,
            iterations=cfg.iterations,
            lr=cfg.lr,
            activation=cfg.activation,
            record_every=cfg.record_every,
            config=_echo(cfg),
            **_counts(cfg),
        )
        records = [record]
    else:
        records = train_distributed(
            problem,
            cfg.mode,
            cfg.ranks,
            cfg.n_f,
            cfg.dims,
            seed=cfg.seed,
            iterations=cfg.iterations,
            lr=cfg.lr,
            activation=cfg.activation,
            record_every=cfg.record_every,
            config=_echo(cfg),
            **_counts(cfg),
        )
        record = records[0]
    paths = persist_run(record, out_dir)
    if len(records) > 1:
        for rank, rec in enumerate(records):
            rank_path = os.path.join(out_dir, f"rank{rank}_losses.csv")
            with open(rank_path, "w") as fh:
                fh.write("iteration,loss_train,loss_test,error\n")
                for row in zip(rec.history_iters, rec.history_train, rec.history_test, rec.history_error):
                    fh.write(",".join(map(repr, row)) + "\n")
    if cfg.save:
        save_params(cfg.save, record.final_params)
        print(f"saved parameters to {cfg.save}")
    print(f"run written to {paths['run']}")
    for name, value in record.extras.items():
        print(f"{name} = {value:.6f}")
    print(f"final relative L2 error: {record.error:.6e}")
    return 0


def _seeds_for(cfg: Config, args) -> list[int]:
    if getattr(args, "seeds", None) is not None or len(cfg.seeds) > 1:
        return cfg.seeds
    return [cfg.seed + i for i in range(getattr(args, "runs", 1))]


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    problem = _load_problem(cfg)
    n_list = cfg.n_list or DEFAULT_N_LIST
    records = run_h_sweep(
        problem,
        n_list,
        _seeds_for(cfg, args),
        cfg.dims,
        iterations=cfg.iterations,
        lr=cfg.lr,
        record_every=cfg.record_every,
        activation=cfg.activation,
        out_dir=cfg.resolved_out_dir(),
        config=_echo(cfg),
        **_counts(cfg),
    )
    print(f"{'N_f':>8} {'median error':>14} {'median gap':>12} regime")
    for n in sorted({r.n_f for r in records}):
        group = [r for r in records if r.n_f == n and not r.failed]
        if not group:
            print(f"{n:>8} {'all runs failed':>14}")
            continue
        med_err = float(np.median([r.error for r in group]))
        med_gap = float(np.median([r.gap_rel for r in group]))
        print(f"{n:>8} {med_err:>14.4e} {med_gap:>12.4e} {group[0].regime}")
    print(f"sweep written to {os.path.join(cfg.resolved_out_dir(), 'sweep.csv')}")
    return 0


def _cmd_scale(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    problem = _load_problem(cfg)
    if cfg.mode == "strong" and cfg.n_1 is None:
        n_1 = cfg.n_f
    else:
        n_1 = cfg.n_1 or 64
    records = run_scaling(
        problem,
        cfg.mode,
        cfg.sizes,
        n_1,
        cfg.dims,
        iterations=cfg.iterations,
        seeds=_seeds_for(cfg, args),
        lr=cfg.lr,
        record_every=cfg.record_every,
        activation=cfg.activation,
        out_dir=cfg.resolved_out_dir(),
        config=_echo(cfg),
        **_counts(cfg),
    )
    scaled = [r for r in records if r.mode == cfg.mode]
    by_size: dict[int, list] = {}
    for rec in scaled:
        by_size.setdefault(rec.size, []).append(rec)
    t_by_size = {s: float(np.median([r.t500_mean for r in recs])) for s, recs in by_size.items()}
    base = t_by_size.get(1)
    print(f"{'size':>5} {'t500 [s]':>10} {'E_ff':>8} {'S_up':>7} {'pointsec':>12} {'median err':>12}")
    for size in sorted(by_size):
        med_err = float(np.median([r.error for r in by_size[size]]))
        psec = float(np.median([r.pointsec for r in by_size[size]]))
        t = t_by_size[size]
        if base is not None and np.isfinite(base) and np.isfinite(t):
            eff, sup = efficiency_speedup(base, t, size)
            print(f"{size:>5} {t:>10.3f} {eff:>8.2%} {sup:>7.2f} {psec:>12.0f} {med_err:>12.4e}")
        else:
            print(f"{size:>5} {t:>10.3f} {'n/a':>8} {'n/a':>7} {psec:>12.0f} {med_err:>12.4e}")
    print("(timings are informational; accuracy columns are the comparison target)")
    return 0


def _cmd_report(args) -> int:
    sweep_path = args.sweep
    out_dir = args.out or os.environ.get("PINN_OUT_DIR", "runs")
    try:
        rows = read_sweep(sweep_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    os.makedirs(out_dir, exist_ok=True)
    plain = [r for r in rows if r["mode"] == "none" and np.isfinite(r["error"])]
    written = []
    problems = sorted({r["problem"] for r in plain})
    for problem in problems:
        sub = [r for r in plain if r["problem"] == problem]
        points = [(r["N_f"], r["error"]) for r in sub]
        ns = sorted({n for n, _ in points})
        medians = {n: float(np.median([e for m, e in points if m == n])) for n in ns}
        regimes = {r["N_f"]: r["regime"] for r in sub if r["regime"]}
        print(f"== {problem}")
        print(f"{'N_f':>8} {'runs':>5} {'median error':>14} regime")
        for n in ns:
            count = sum(1 for m, _ in points if m == n)
            print(f"{n:>8} {count:>5} {medians[n]:>14.4e} {regimes.get(n, '')}")
        path = os.path.join(out_dir, f"error_vs_n_{problem}.svg")
        with open(path, "w") as fh:
            fh.write(error_vs_n_svg(points, medians, regimes, title=f"{problem}: error vs N_f"))
        written.append(path)

    for mode in ("weak", "strong"):
        sub = [r for r in rows if r["mode"] == mode and np.isfinite(r["t500_mean"])]
        if not sub:
            continue
        sizes = sorted({r["size"] for r in sub})
        t_by_size = {s: float(np.median([r["t500_mean"] for r in sub if r["size"] == s])) for s in sizes}
        if 1 not in t_by_size:
            continue
        effs = [efficiency_speedup(t_by_size[1], t_by_size[s], s)[0] for s in sizes]
        print(f"== {mode} scaling: sizes {sizes}, efficiency {[f'{e:.2%}' for e in effs]}")
        path = os.path.join(out_dir, f"efficiency_{mode}.svg")
        with open(path, "w") as fh:
            fh.write(efficiency_bars_svg(sizes, effs, title=f"{mode} scaling efficiency"))
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    out_file = args.out_file
    if out_file is None:
        out_dir = args.out or os.environ.get("PINN_OUT_DIR", "runs")
        os.makedirs(out_dir, exist_ok=True)
        out_file = os.path.join(out_dir, "schrodinger_reference.nls")
    grid = schrodinger_reference(n_x=args.nx, n_t=args.nt, dt=args.dt)
    save_reference_grid(out_file, grid)
    print(f"reference grid ({args.nx} x {args.nt}) written to {out_file}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="pinnscale", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model and print its error")
    _add_common(p_train)
    p_train.add_argument("--save", help="write a parameter snapshot to this path")
    p_train.add_argument("--reference", help="reference grid file for schrodinger errors")
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="collocation-count sweep with regime labels")
    _add_common(p_sweep)
    p_sweep.add_argument("--n-list", dest="n_list", help="comma-separated N_f values")
    p_sweep.add_argument("--runs", type=int, default=4, help="runs per N when --seeds is not given")
    p_sweep.add_argument("--reference", help="reference grid file for schrodinger errors")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_scale = sub.add_parser("scale", help="weak/strong scaling study")
    _add_common(p_scale)
    p_scale.add_argument("--sizes", help="comma-separated worker counts")
    p_scale.add_argument("--n1", type=int, help="per-worker N_f (weak) or fixed total (strong)")
    p_scale.add_argument("--runs", type=int, default=1, help="runs per size when --seeds is not given")
    p_scale.add_argument("--reference", help="reference grid file for schrodinger errors")
    p_scale.set_defaults(func=_cmd_scale)

    p_report = sub.add_parser("report", help="summaries and SVG plots from sweep.csv")
    p_report.add_argument("--sweep", default=os.path.join(os.environ.get("PINN_OUT_DIR", "runs"), "sweep.csv"))
    p_report.add_argument("--out", help="directory for emitted SVG files")
    p_report.set_defaults(func=_cmd_report)

    p_oracle = sub.add_parser("oracle", help="generate the Schrodinger reference grid file")
    p_oracle.add_argument("--nx", type=int, default=256, help="spatial points (power of two)")
    p_oracle.add_argument("--nt", type=int, default=201, help="stored time slices")
    p_oracle.add_argument("--dt", type=float, default=5e-4, help="integration step (<= 1e-3)")
    p_oracle.add_argument("--out", help="output directory")
    p_oracle.add_argument("--out-file", dest="out_file", help="explicit output file path")
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
