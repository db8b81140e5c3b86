"""End-to-end pipelines: basis dependence, temperature mixing, system-time regression.

Every learning claim is measured against the mean-predictor baseline (a
constant equal to the training-target mean), so thresholds carry over between
scales.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import svg
from .dataset import Dataset, build_dataset, split_by_sample, write_kcx
from .ensemble import GueEnsemble
from .errors import InvalidArgumentError
from .kcx import atomic_open
from .krylov import krylov_project, lanczos_tridiagonalize, spread_complexity
from .nn import TrainConfig, architecture, evaluate_rmse, fit, mean_predictor_rmse, save_checkpoint
from .nn.train import write_bins_csv
from .numerics import Rng
from .states import (Basis, diagonalizing_unitary, energy_trajectory, to_krylov_basis,
                     to_original_basis, to_pseudorandom_basis)

log = logging.getLogger(__name__)

KINDS = ("basis_sweep", "beta_sweep", "time_target")
SPLIT_STREAM = 2**63 + 1

_DEFAULT_BASES = {
    "basis_sweep": ["energy", "krylov", "original", "pseudorandom"],
    "beta_sweep": ["energy"],
    "time_target": ["energy"],
}
_DEFAULT_BETAS = {"basis_sweep": [0.0], "beta_sweep": [0.0, 1.0, 3.0], "time_target": [0.0]}


@dataclass
class ExperimentSpec:
    kind: str
    n: int = 64
    m: int = 40
    betas: list = None
    bases: list = None
    seed: int = 1
    profile: str = "desk"
    train: TrainConfig = None
    output_dir: str | None = None
    split_ratios: tuple = (0.8, 0.1, 0.1)
    threads: int = 1
    save_datasets: bool = False
    arch_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.betas is None:
            self.betas = list(_DEFAULT_BETAS[self.kind])
        if self.bases is None:
            self.bases = list(_DEFAULT_BASES[self.kind])
        self.betas = [float(b) for b in self.betas]
        self.bases = [Basis.parse(b).value for b in self.bases]
        if not self.betas:
            raise InvalidArgumentError("betas must be non-empty")
        if any(not (np.isfinite(b) and b >= 0) for b in self.betas):
            raise InvalidArgumentError(f"betas must be finite and >= 0, got {self.betas}")
        if self.kind == "beta_sweep" and len(self.betas) not in (2, 3):
            raise InvalidArgumentError(f"beta_sweep needs 2 or 3 temperatures, got {self.betas}")
        if self.profile not in ("desk", "full"):
            raise InvalidArgumentError(f"profile must be 'desk' or 'full', got {self.profile!r}")
        if self.train is None:
            self.train = TrainConfig(epochs=30 if self.profile == "desk" else 100, seed=self.seed)
        if self.n < 2 or self.m < 3:
            raise InvalidArgumentError("need n >= 2 and m >= 3")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise InvalidArgumentError(f"unknown spec keys {sorted(unknown)}")
        if "kind" not in d:
            raise InvalidArgumentError("spec needs a 'kind'")
        train = d.pop("train", None)
        if isinstance(train, dict):
            profile = d.get("profile", "desk")
            train = {"epochs": 30 if profile == "desk" else 100, "seed": d.get("seed", 1), **train}
            try:
                train = TrainConfig(**train)
            except TypeError as exc:
                raise InvalidArgumentError(f"bad train config: {exc}") from exc
        if "split_ratios" in d:
            d["split_ratios"] = tuple(d["split_ratios"])
        return cls(train=train, **d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d


@dataclass
class ExperimentReport:
    spec: dict
    metrics: dict
    files: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"spec": self.spec, "metrics": self.metrics, "files": self.files},
                          indent=2, sort_keys=True)


# --- data generation ------------------------------------------------------


def simulate_sample(ensemble: GueEnsemble, s: int, beta: float, basis, u0=None):
    """Trajectory in ``basis`` and complexity curve for sample ``s``."""
    basis = Basis.parse(basis)
    eig = ensemble[s].eig
    traj = energy_trajectory(eig, beta, sample_id=s)
    kd = lanczos_tridiagonalize(eig.eigenvalues, traj.psi0)
    curve = spread_complexity(krylov_project(kd, traj.psi_t), traj.times, ensemble.n, s, beta)
    if basis is Basis.KRYLOV:
        traj = to_krylov_basis(traj, kd)
    elif basis is Basis.ORIGINAL:
        traj = to_original_basis(traj, diagonalizing_unitary(eig))
    elif basis is Basis.PSEUDO_RANDOM:
        if u0 is None:
            u0 = diagonalizing_unitary(ensemble[0].eig)
        traj = to_pseudorandom_basis(traj, u0)
    return traj, curve


def simulate(ensemble: GueEnsemble, betas, basis, threads: int = 1):
    """Trajectories and curves for every (sample, beta), ordered by sample then beta."""
    basis = Basis.parse(basis)
    u0 = diagonalizing_unitary(ensemble[0].eig) if basis is Basis.PSEUDO_RANDOM else None
    jobs = [(s, float(b)) for s in range(ensemble.m) for b in betas]
    _ = ensemble.samples  # eigendecompose up front, in parallel if configured

    def run(job):
        return simulate_sample(ensemble, job[0], job[1], basis, u0)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return [r[0] for r in results], [r[1] for r in results]


def make_dataset(ensemble: GueEnsemble, betas, basis, target_kind="complexity_over_N",
                 ratios=(0.8, 0.1, 0.1), threads: int = 1) -> Dataset:
    trajs, curves = simulate(ensemble, betas, basis, threads)
    return assemble_dataset(ensemble, trajs, curves, betas, basis, target_kind, ratios)


def assemble_dataset(ensemble, trajs, curves, betas, basis, target_kind="complexity_over_N",
                     ratios=(0.8, 0.1, 0.1)) -> Dataset:
    meta = {"N": ensemble.n, "M": ensemble.m, "seed": ensemble.seed, "basis": Basis.parse(basis).value,
            "betas": [float(b) for b in betas]}
    ds = build_dataset(trajs, curves, target_kind, meta)
    return split_by_sample(ds, ratios, Rng(ensemble.seed).spawn(SPLIT_STREAM))


# --- training / evaluation --------------------------------------------------


def _window_means(report, n, lo=None, hi=None):
    t = report.time_indices / n
    sel = np.ones_like(t, dtype=bool)
    if lo is not None:
        sel &= t > lo
    if hi is not None:
        sel &= t < hi
    return float(np.mean(report.per_time_bin[sel]))


def train_and_evaluate(dataset: Dataset, arch: str, spec: ExperimentSpec, tag: str, outdir=None):
    n = dataset.n
    net_spec = architecture(arch, n, spec.profile, kernel=spec.train.kernel, **spec.arch_overrides)
    log.info("training %s (%d records)", tag, len(dataset))
    net, history = fit(dataset, net_spec, spec.train)
    test = dataset.subset("test")
    rep = evaluate_rmse(net, test)
    baseline = mean_predictor_rmse(test.targets, float(dataset.subset("train").targets.mean()))
    metrics = {
        "arch": arch,
        "records": len(dataset),
        "final_train_loss": history.rows[-1].train_loss,
        "final_val_loss": history.rows[-1].val_loss,
        "first_val_loss": history.rows[0].val_loss,
        "test_delta": rep.overall,
        "test_time_averaged_delta": rep.time_averaged,
        "baseline_delta": baseline,
        "delta_over_baseline": rep.overall / baseline,
    }
    files = []
    if outdir is not None:
        ckpt = f"{tag}.knn"
        save_checkpoint(net, os.path.join(outdir, ckpt), extra={"tag": tag, "dataset_seed": spec.seed})
        history.write_csv(os.path.join(outdir, f"{tag}_history.csv"))
        write_bins_csv(rep, test.targets, test.time_index, n, os.path.join(outdir, f"{tag}_bins.csv"))
        files += [ckpt, f"{tag}_history.csv", f"{tag}_bins.csv"]
        if spec.save_datasets:
            write_kcx(dataset, os.path.join(outdir, f"{tag}.kcx"))
            files.append(f"{tag}.kcx")
        metrics["checkpoint"] = ckpt
    return net, history, rep, test, metrics, files


def _bin_means(values, time_index):
    bins, inv = np.unique(time_index, return_inverse=True)
    return bins, np.bincount(inv, weights=values) / np.bincount(inv)


def _prediction_figure(rep, test, n, title, ylabel):
    bins, pred = _bin_means(rep.predictions, test.time_index)
    _, truth = _bin_means(test.targets, test.time_index)
    return svg.line_plot([
        {"x": bins / n, "y": truth, "label": "truth", "color": "#333333", "dashed": True},
        {"x": bins / n, "y": pred, "err": rep.per_time_bin, "label": "predicted", "markers": True},
    ], title=title, xlabel="t/N", ylabel=ylabel)


def _loss_figure(histories):
    series = []
    for label, h in histories.items():
        series.append({"x": [r.epoch for r in h.rows], "y": h.val_loss, "label": f"{label} val"})
    return svg.line_plot(series, title="validation loss", xlabel="epoch", ylabel="MSE", logy=True)


def _prepare_output(spec: ExperimentSpec):
    if spec.output_dir is None:
        return None
    os.makedirs(spec.output_dir, exist_ok=True)
    with atomic_open(os.path.join(spec.output_dir, "config.json")) as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
    return spec.output_dir


def _finish(spec, metrics, files, outdir):
    # run location and thread count do not affect results; keep them out of the report
    identity = {k: v for k, v in spec.to_dict().items() if k not in ("output_dir", "threads")}
    report = ExperimentReport(identity, metrics, ["config.json"] + files)
    if outdir is not None:
        report.files.append("report.json")
        with atomic_open(os.path.join(outdir, "report.json")) as fh:
            fh.write(report.to_json())
    return report


def _write(outdir, files, name, text):
    if outdir is not None:
        svg.write_svg(text, os.path.join(outdir, name))
        files.append(name)


# --- experiments ----------------------------------------------------------


def run_basis_sweep(spec: ExperimentSpec) -> ExperimentReport:
    if spec.kind != "basis_sweep":
        raise InvalidArgumentError(f"expected a basis_sweep spec, got {spec.kind!r}")
    outdir = _prepare_output(spec)
    ens = GueEnsemble(spec.n, spec.m, spec.seed, spec.threads)
    metrics, files, histories = {}, [], {}
    for basis in spec.bases:
        ds = make_dataset(ens, spec.betas, basis, ratios=spec.split_ratios, threads=spec.threads)
        archs = ["CNN", "FCN"] if basis == Basis.PSEUDO_RANDOM.value else ["CNN"]
        for arch in archs:
            tag = f"{basis}-{arch}"
            _, hist, rep, test, m, f = train_and_evaluate(ds, arch, spec, tag, outdir)
            # early phase: before the peak of the mean true curve
            _, truth = _bin_means(test.targets, test.time_index)
            peak = float(np.argmax(truth)) / spec.n
            m["peak_t_over_N"] = peak
            m["early_rmse"] = _window_means(rep, spec.n, hi=peak)
            m["late_rmse"] = _window_means(rep, spec.n, lo=peak)
            metrics[tag] = m
            files += f
            histories[tag] = hist
            _write(outdir, files, f"{tag}_prediction.svg",
                   _prediction_figure(rep, test, spec.n, f"C(t)/N, {basis} basis, {arch}", "C/N"))
    if outdir is not None and histories:
        _write(outdir, files, "loss.svg", _loss_figure(histories))
    return _finish(spec, metrics, files, outdir)


def run_beta_sweep(spec: ExperimentSpec) -> ExperimentReport:
    if spec.kind != "beta_sweep":
        raise InvalidArgumentError(f"expected a beta_sweep spec, got {spec.kind!r}")
    outdir = _prepare_output(spec)
    ens = GueEnsemble(spec.n, spec.m, spec.seed, spec.threads)
    n = spec.n
    files = []
    mixed = make_dataset(ens, spec.betas, Basis.ENERGY, ratios=spec.split_ratios, threads=spec.threads)
    net, _, rep, test, mixed_metrics, f = train_and_evaluate(mixed, "CNN", spec, "mixed", outdir)
    files += f
    per_beta = {}
    series = []
    for i, beta in enumerate(spec.betas):
        sel = test.beta == beta
        sub = test.take(np.flatnonzero(sel))
        pred = rep.predictions[sel]
        plateau = sub.time_index >= 2 * n
        single = make_dataset(ens, [beta], Basis.ENERGY, ratios=spec.split_ratios, threads=spec.threads)
        _, _, srep, _, smetrics, sf = train_and_evaluate(single, "CNN", spec, f"single-beta{beta:g}", outdir)
        files += sf
        delta = float(np.sqrt(np.mean((pred - sub.targets) ** 2)))
        per_beta[f"{beta:g}"] = {
            "beta": beta,
            "test_delta": delta,
            "single_beta_delta": smetrics["test_delta"],
            "delta_over_single": delta / smetrics["test_delta"],
            "baseline_delta": mean_predictor_rmse(sub.targets),
            "plateau_pred_mean": float(pred[plateau].mean()),
            "plateau_true_mean": float(sub.targets[plateau].mean()),
        }
        bins, pm = _bin_means(pred, sub.time_index)
        _, tm = _bin_means(sub.targets, sub.time_index)
        color = svg.PALETTE[i]
        series += [{"x": bins / n, "y": tm, "color": color, "dashed": True},
                   {"x": bins / n, "y": pm, "color": color, "markers": True, "label": f"beta={beta:g}"}]
    pred_order = sorted(per_beta, key=lambda k: per_beta[k]["plateau_pred_mean"])
    true_order = sorted(per_beta, key=lambda k: per_beta[k]["plateau_true_mean"])
    metrics = {"mixed": mixed_metrics, "per_beta": per_beta,
               "plateau_order_predicted": pred_order, "plateau_order_true": true_order,
               "plateau_order_matches": pred_order == true_order}
    _write(outdir, files, "beta_prediction.svg",
           svg.line_plot(series, title="C(t)/N at several temperatures", xlabel="t/N", ylabel="C/N"))
    return _finish(spec, metrics, files, outdir)


def run_time_target(spec: ExperimentSpec) -> ExperimentReport:
    if spec.kind != "time_target":
        raise InvalidArgumentError(f"expected a time_target spec, got {spec.kind!r}")
    outdir = _prepare_output(spec)
    ens = GueEnsemble(spec.n, spec.m, spec.seed, spec.threads)
    metrics, files = {}, []
    for basis in spec.bases:
        ds = make_dataset(ens, spec.betas, basis, "time_over_N", spec.split_ratios, spec.threads)
        tag = f"time-{basis}"
        _, _, rep, test, m, f = train_and_evaluate(ds, "CNN", spec, tag, outdir)
        files += f
        early = _window_means(rep, spec.n, hi=0.5)
        late = _window_means(rep, spec.n, lo=1.5)
        t0 = test.time_index == 0
        m.update(early_rmse=early, late_rmse=late, late_over_early=late / early,
                 t0_mean_prediction=float(rep.predictions[t0].mean()),
                 t0_max_abs_prediction=float(np.max(np.abs(rep.predictions[t0]))))
        metrics[tag] = m
        _write(outdir, files, f"{tag}_prediction.svg",
               _prediction_figure(rep, test, spec.n, f"system time, {basis} basis", "n/N"))
    return _finish(spec, metrics, files, outdir)


RUNNERS = {"basis_sweep": run_basis_sweep, "beta_sweep": run_beta_sweep, "time_target": run_time_target}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return RUNNERS[spec.kind](spec)
