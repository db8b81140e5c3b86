"""Supervised records built from state trajectories, split by sample, stored as KCX."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kcx
from .errors import FormatError, InvalidArgumentError
from .numerics import Rng

TARGET_KINDS = ("complexity_over_N", "time_over_N")
SPLITS = ("train", "val", "test")
N_CHANNELS = 4


@dataclass
class Dataset:
    """Feature/target records, ordered by sample, then beta, then time index.

    ``features`` has shape (records, 4, N) in float32 with channels
    (Re psi(t), Im psi(t), Re psi(0), Im psi(0)).
    """

    features: np.ndarray
    targets: np.ndarray
    sample_id: np.ndarray
    time_index: np.ndarray
    beta: np.ndarray
    metadata: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)  # sample_id -> "train" | "val" | "test"

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def n(self) -> int:
        return int(self.metadata.get("N", self.features.shape[-1]))

    @property
    def sample_ids(self) -> np.ndarray:
        return np.unique(self.sample_id)

    def split_samples(self, name: str) -> list[int]:
        return sorted(s for s, v in self.split.items() if v == name)

    def indices(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise InvalidArgumentError(f"unknown split {name!r}")
        if not self.split:
            raise InvalidArgumentError("dataset has no split assignment")
        chosen = np.array(self.split_samples(name), dtype=np.int64)
        return np.flatnonzero(np.isin(self.sample_id, chosen))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx], targets=self.targets[idx],
                       sample_id=self.sample_id[idx], time_index=self.time_index[idx],
                       beta=self.beta[idx])

    def subset(self, name: str) -> "Dataset":
        return self.take(self.indices(name))

    def identical(self, other: "Dataset") -> bool:
        """Bitwise equality of every payload array plus metadata and split."""
        arrays = ("features", "targets", "sample_id", "time_index", "beta")
        return (
            all(getattr(self, a).dtype == getattr(other, a).dtype
                and getattr(self, a).shape == getattr(other, a).shape
                and getattr(self, a).tobytes() == getattr(other, a).tobytes() for a in arrays)
            and self.metadata == other.metadata
            and {int(k): v for k, v in self.split.items()} == {int(k): v for k, v in other.split.items()}
        )


def _features(psi_t, psi0, n):
    k, t = psi_t.shape
    out = np.zeros((t, N_CHANNELS, n), dtype=np.float32)
    out[:, 0, :k] = psi_t.real.T
    out[:, 1, :k] = psi_t.imag.T
    out[:, 2, : len(psi0)] = psi0.real
    out[:, 3, : len(psi0)] = psi0.imag
    return out


def build_dataset(trajectories, curves, target_kind: str = "complexity_over_N", metadata=None) -> Dataset:
    """One record per (sample, beta, time).

    ``curves`` are matched to trajectories by (sample_id, beta). Krylov-basis
    trajectories shorter than N (early breakdown) are zero-padded.
    """
    if target_kind not in TARGET_KINDS:
        raise InvalidArgumentError(f"target_kind must be one of {TARGET_KINDS}, got {target_kind!r}")
    trajectories = sorted(trajectories, key=lambda tr: (tr.sample_id, tr.beta))
    by_key = {(c.sample_id, float(c.beta)): c for c in curves}
    meta = dict(metadata or {})
    if not trajectories:
        n = int(meta.get("N", 0))
        return Dataset(np.zeros((0, N_CHANNELS, n), np.float32), np.zeros(0), np.zeros(0, np.int64),
                       np.zeros(0, np.int64), np.zeros(0), {**meta, "N": n, "target_kind": target_kind})
    n = max(len(tr.psi0) for tr in trajectories)
    n = int(meta.get("N", n))
    feats, targets, sids, tidx, betas = [], [], [], [], []
    for tr in trajectories:
        curve = by_key.get((tr.sample_id, float(tr.beta)))
        if curve is None:
            raise InvalidArgumentError(f"no complexity curve for sample {tr.sample_id}, beta {tr.beta}")
        if len(curve.times) != len(tr.times) or np.any(curve.times != tr.times):
            raise InvalidArgumentError(f"time grid mismatch for sample {tr.sample_id}, beta {tr.beta}")
        feats.append(_features(tr.psi_t, tr.psi0, n))
        if target_kind == "complexity_over_N":
            targets.append(curve.values / n)
        else:
            targets.append(tr.times / n)
        t = len(tr.times)
        sids.append(np.full(t, tr.sample_id, np.int64))
        tidx.append(np.arange(t, dtype=np.int64))
        betas.append(np.full(t, float(tr.beta)))
    meta.update(N=n, T=len(trajectories[0].times), target_kind=target_kind)
    meta.setdefault("betas", sorted({float(tr.beta) for tr in trajectories}))
    meta.setdefault("basis", trajectories[0].basis.value)
    meta.setdefault("M", len({tr.sample_id for tr in trajectories}))
    return Dataset(np.concatenate(feats), np.concatenate(targets).astype(np.float64),
                   np.concatenate(sids), np.concatenate(tidx), np.concatenate(betas), meta)


def split_counts(m: int, ratios) -> tuple[int, int, int]:
    """Floor the val/test shares; the remainder goes to train."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise InvalidArgumentError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n_val = math.floor(ratios[1] * m + 1e-9)
    n_test = math.floor(ratios[2] * m + 1e-9)
    n_train = m - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise InvalidArgumentError(f"ratios {ratios} leave an empty split for {m} samples")
    return n_train, n_val, n_test


def split_by_sample(dataset: Dataset, ratios=(0.8, 0.1, 0.1), rng: Rng | int = 0) -> Dataset:
    """Shuffle sample ids with ``rng`` and assign contiguous blocks to train/val/test."""
    if not isinstance(rng, Rng):
        rng = Rng(int(rng))
    ids = dataset.sample_ids
    n_train, n_val, _ = split_counts(len(ids), ratios)
    order = ids[rng.permutation(len(ids))]
    split = {}
    for i, s in enumerate(order):
        split[int(s)] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    meta = {**dataset.metadata, "split_ratios": list(ratios), "split_seed": rng.seed}
    return replace(dataset, split=split, metadata=meta)


def _record_dtype(n: int) -> np.dtype:
    return np.dtype([("features", "<f4", (N_CHANNELS, n)), ("target", "<f8")])


_INDEX_DTYPE = np.dtype([("sample_id", "<i8"), ("time_index", "<i8"), ("beta", "<f8")])


def write_kcx(dataset: Dataset, path) -> None:
    n = dataset.n
    rec = np.empty(len(dataset), dtype=_record_dtype(n))
    rec["features"] = dataset.features
    rec["target"] = dataset.targets
    idx = np.empty(len(dataset), dtype=_INDEX_DTYPE)
    idx["sample_id"] = dataset.sample_id
    idx["time_index"] = dataset.time_index
    idx["beta"] = dataset.beta
    header = {
        "kind": "dataset",
        "metadata": dataset.metadata,
        "split": {str(k): v for k, v in sorted(dataset.split.items())},
        "N": n,
        "records": len(dataset),
    }
    kcx.write(path, header, [
        kcx.Section("INDEX", {"dtype": "i8,i8,f8", "fields": list(_INDEX_DTYPE.names)}, idx.tobytes()),
        kcx.Section("RECORDS", {"features": "f4", "channels": N_CHANNELS, "target": "f8"}, rec.tobytes()),
    ])


def read_kcx(path) -> Dataset:
    header, sections = kcx.read(path)
    if header.get("kind") != "dataset":
        raise FormatError(f"container holds {header.get('kind')!r}, not a dataset", 16)
    n, r = int(header["N"]), int(header["records"])
    found = {s.tag: s for s in sections}
    for tag in ("INDEX", "RECORDS"):
        if tag not in found:
            raise FormatError(f"missing {tag} section")
    rdt = _record_dtype(n)
    if len(found["RECORDS"].payload) != r * rdt.itemsize or len(found["INDEX"].payload) != r * _INDEX_DTYPE.itemsize:
        raise FormatError("payload size does not match record count")
    rec = np.frombuffer(found["RECORDS"].payload, dtype=rdt)
    idx = np.frombuffer(found["INDEX"].payload, dtype=_INDEX_DTYPE)
    return Dataset(
        features=np.ascontiguousarray(rec["features"]).astype(np.float32, copy=True),
        targets=rec["target"].astype(np.float64, copy=True),
        sample_id=idx["sample_id"].astype(np.int64, copy=True),
        time_index=idx["time_index"].astype(np.int64, copy=True),
        beta=idx["beta"].astype(np.float64, copy=True),
        metadata=header["metadata"],
        split={int(k): v for k, v in header["split"].items()},
    )


def write_targets_csv(dataset: Dataset, path) -> None:
    with kcx.atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "t", "target"])
        for s, t, y in zip(dataset.sample_id, dataset.time_index, dataset.targets):
            w.writerow([int(s), int(t), repr(float(y))])
