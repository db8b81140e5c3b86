"""``krylov-lab`` command-line entry point.

Exit codes: 0 success, 1 usage or invalid argument, 2 file format or I/O,
3 numerical failure (including diverged training).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import svg
from .dataset import read_kcx, write_kcx
from .ensemble import GueEnsemble, read_ensemble_kcx, write_ensemble_kcx
from .errors import FormatError, InvalidArgumentError, NumericalError
from .experiments import ExperimentSpec, assemble_dataset, run_experiment, simulate
from .kcx import atomic_open
from .krylov import write_curves_csv, write_mean_curve_csv
from .nn import (TrainConfig, architecture, evaluate_rmse, fit, load_checkpoint, mean_predictor_rmse,
                 save_checkpoint)
from .nn.train import write_bins_csv
from .states import Basis, amplitude_grid

log = logging.getLogger("krylov_lab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def default_threads() -> int:
    env = os.environ.get("KRYLOV_LAB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidArgumentError(f"KRYLOV_LAB_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise InvalidArgumentError("KRYLOV_LAB_THREADS must be >= 1")
        return value
    return os.cpu_count() or 1


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _write_json(obj, path):
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parent(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return d


# --- commands ---------------------------------------------------------------


def cmd_gen(args):
    _require(args, "n", "samples", "out")
    ens = GueEnsemble(args.n, args.samples, args.seed, args.threads)
    ev = ens.eigenvalues()
    _parent(args.out)
    write_ensemble_kcx(ens, args.out)
    print(f"wrote {args.samples} GUE matrices (N={args.n}, seed={args.seed}) to {args.out}")
    print(f"eigenvalue range [{ev.min():.4f}, {ev.max():.4f}], mean {ev.mean():.2e}")
    return 0


def cmd_complexity(args):
    _require(args, "ensemble", "out_csv")
    basis = Basis.parse(args.basis)
    target = {"complexity": "complexity_over_N", "time": "time_over_N"}.get(args.target, args.target)
    ens = read_ensemble_kcx(args.ensemble)
    betas = args.beta if args.beta else [0.0]
    trajs, curves = simulate(ens, betas, basis, args.threads)
    ds = assemble_dataset(ens, trajs, curves, betas, basis, target)
    _parent(args.out_csv)
    write_curves_csv(curves, args.out_csv)
    stem, _ = os.path.splitext(args.out_csv)
    write_mean_curve_csv(curves, stem + "_mean.csv")
    if args.out_dataset:
        _parent(args.out_dataset)
        write_kcx(ds, args.out_dataset)
    if args.out_svg:
        series = []
        for beta in betas:
            vals = np.stack([c.over_n for c in curves if c.beta == beta])
            series.append({"x": curves[0].t_over_n, "y": vals.mean(axis=0), "err": vals.std(axis=0),
                           "label": f"beta={beta:g}"})
        svg.write_svg(svg.line_plot(series, title="spread complexity", xlabel="t/N", ylabel="C/N"),
                      args.out_svg)
    if args.out_heatmap:
        grid = amplitude_grid(trajs[0])
        n, t = grid.shape
        svg.write_svg(svg.heatmap(grid, title=f"|Re+Im| amplitudes, {basis.value} basis, sample 0",
                                  xlabel="t/N", ylabel="n", extent=(0, t / n, 0, n)), args.out_heatmap)
    print(f"{len(curves)} curves, {len(ds)} records ({basis.value} basis, target {target})")
    return 0


def cmd_train(args):
    _require(args, "dataset", "out_model")
    ds = read_kcx(args.dataset)
    cfg = TrainConfig(batch_size=args.batch, epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
                      kernel=args.kernel)
    spec = architecture(args.arch, ds.n, args.profile, kernel=args.kernel)

    def progress(row):
        log.info("epoch %d train %.6g val %.6g", row.epoch, row.train_loss, row.val_loss)

    net, history = fit(ds, spec, cfg, progress=progress)
    _parent(args.out_model)
    save_checkpoint(net, args.out_model, extra={"dataset": os.path.basename(args.dataset),
                                                "train_config": vars(cfg)})
    if args.out_history:
        _parent(args.out_history)
        history.write_csv(args.out_history)
    last = history.rows[-1]
    print(f"trained {args.arch.upper()} for {cfg.epochs} epochs: train {last.train_loss:.6g}, "
          f"val {last.val_loss:.6g}")
    return 0


def cmd_eval(args):
    _require(args, "model", "dataset", "out")
    net = load_checkpoint(args.model)
    ds = read_kcx(args.dataset)
    if net.n != ds.n:
        raise FormatError(f"model expects N={net.n}, dataset has N={ds.n}")
    data = ds.subset(args.split) if args.split != "all" else ds
    if len(data) == 0:
        raise UsageError(f"split {args.split!r} is empty")
    rep = evaluate_rmse(net, data)
    train = ds.subset("train") if len(ds.indices("train")) else data
    os.makedirs(args.out, exist_ok=True)
    _write_json({k: v for k, v in vars(args).items() if k != "func"}, os.path.join(args.out, "config.json"))
    metrics = {"split": args.split, "records": len(data), "delta": rep.overall,
               "time_averaged_delta": rep.time_averaged,
               "baseline_delta": mean_predictor_rmse(data.targets, float(train.targets.mean()))}
    _write_json(metrics, os.path.join(args.out, "metrics.json"))
    write_bins_csv(rep, data.targets, data.time_index, ds.n, os.path.join(args.out, "bins.csv"))
    bins, inv = np.unique(data.time_index, return_inverse=True)
    count = np.bincount(inv)
    series = [
        {"x": bins / ds.n, "y": np.bincount(inv, weights=data.targets) / count, "label": "truth",
         "color": "#333333", "dashed": True},
        {"x": bins / ds.n, "y": np.bincount(inv, weights=rep.predictions) / count, "err": rep.per_time_bin,
         "label": "predicted", "markers": True},
    ]
    svg.write_svg(svg.line_plot(series, title="predicted vs truth", xlabel="t/N",
                                ylabel=ds.metadata.get("target_kind", "target")),
                  os.path.join(args.out, "prediction.svg"))
    print(f"delta {rep.overall:.6g}, time-averaged {rep.time_averaged:.6g}, "
          f"baseline {metrics['baseline_delta']:.6g} on {len(data)} {args.split} records")
    return 0


def cmd_experiment(args):
    _require(args, "spec")
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"spec {args.spec} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidArgumentError("spec must be a JSON object")
    if args.out:
        raw["output_dir"] = args.out
    raw.setdefault("threads", args.threads)
    spec = ExperimentSpec.from_dict(raw)
    if spec.output_dir is None:
        raise UsageError("an output directory is required (--out or output_dir in the spec)")
    report = run_experiment(spec)
    print(report.to_json())
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krylov-lab", description="GUE spread complexity and CNN regression laboratory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of option values; command-line flags take precedence")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $KRYLOV_LAB_THREADS or CPU count)")
        p.set_defaults(func=func)
        return p

    p = command("gen", cmd_gen, "sample a GUE ensemble into a KCX file")
    p.add_argument("--n", type=int, help="matrix dimension N")
    p.add_argument("--samples", type=int, help="number of matrices M")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output .kcx path")

    p = command("complexity", cmd_complexity, "compute trajectories, complexity curves and a dataset")
    p.add_argument("--ensemble", help="ensemble .kcx from `gen`")
    p.add_argument("--beta", type=float, action="append", help="inverse temperature (repeatable; default 0)")
    p.add_argument("--basis", default="energy", help="energy, krylov, original or pseudorandom")
    p.add_argument("--target", default="complexity_over_N", help="complexity_over_N or time_over_N")
    p.add_argument("--out-csv", help="per-sample curve CSV; the ensemble mean goes to <stem>_mean.csv")
    p.add_argument("--out-dataset", help="optional dataset .kcx")
    p.add_argument("--out-svg", help="optional mean-curve SVG")
    p.add_argument("--out-heatmap", help="optional amplitude heatmap SVG of sample 0")

    p = command("train", cmd_train, "train a CNN or FCN on a dataset")
    p.add_argument("--dataset", help="dataset .kcx")
    p.add_argument("--arch", default="CNN", choices=["CNN", "FCN", "cnn", "fcn"])
    p.add_argument("--profile", default="desk", choices=["desk", "full"])
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", help="checkpoint path")
    p.add_argument("--out-history", help="optional history CSV")

    p = command("eval", cmd_eval, "evaluate a checkpoint on a dataset split")
    p.add_argument("--model", help="checkpoint path")
    p.add_argument("--dataset", help="dataset .kcx")
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--out", help="output directory")

    p = command("experiment", cmd_experiment, "run a basis_sweep, beta_sweep or time_target experiment")
    p.add_argument("--spec", help="experiment spec JSON")
    p.add_argument("--out", help="output directory (overrides output_dir in the spec)")
    return parser


def _apply_config(parser, argv):
    """Parse twice: once to find the subcommand and --config, then with file values as defaults."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise InvalidArgumentError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        values = {k.replace("-", "_"): v for k, v in values.items()}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown config keys for {args.command}: {unknown}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:  # argparse: --help (0) or a usage error (1)
            return int(exc.code or 0)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise InvalidArgumentError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"krylov-lab: error: {exc}", file=sys.stderr)
        return 1
    except InvalidArgumentError as exc:
        print(f"krylov-lab: invalid argument: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"krylov-lab: format error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"krylov-lab: I/O error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"krylov-lab: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
