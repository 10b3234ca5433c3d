"""Exhaustive configuration-to-throughput datasets.

Every joint assignment of (primary, max_bandwidth) across the BSSs gets a
stable integer id; generating a dataset simulates each id once (or ``reps``
times, averaged) with a seed derived from ``(base_seed, id, rep)``, so the
result is independent of worker count and generation order. A complete
dataset then serves as a fast reward oracle for the learning harness.

CSV schema (bit-exact):

    # deployment_digest=<hex>
    # n_channels=<int>
    # n_bss=<int>
    # duration_s=<float repr>
    # reps=<int>
    config_id,bss,primary,max_bw,throughput_mbps

One row per (id, bss); ids ascending, bss ascending within an id; floats
printed with 6 decimal digits (values are quantized to that precision when
generated, so save/load round-trips are exact).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agents import reward
from .deployment import Deployment, MacParams, deployment_digest
from .errors import NotFoundError, PersistenceError, ValidationError
from .seeding import stable_hash
from .sim import simulate
from .spectrum import Action, action_from_index, action_index, n_actions

log = logging.getLogger(__name__)

_HEADER = "config_id,bss,primary,max_bw,throughput_mbps"


def n_configs(n_channels: int, n_bss: int) -> int:
    """Total number of joint configurations: |A|^W."""
    return n_actions(n_channels) ** n_bss


def config_id(actions: Sequence[Action], n_channels: int) -> int:
    """Mixed-radix id of a joint configuration (BSS 0 least significant)."""
    base = n_actions(n_channels)
    cid = 0
    for w in reversed(range(len(actions))):
        cid = cid * base + action_index(actions[w], n_channels)
    return cid


def config_from_id(cid: int, n_channels: int, n_bss: int) -> tuple[Action, ...]:
    """Inverse of :func:`config_id`; round-trips exactly."""
    base = n_actions(n_channels)
    total = base**n_bss
    if not isinstance(cid, int) or not 0 <= cid < total:
        raise ValidationError(f"config id {cid!r} out of range [0, {total})")
    actions = []
    for _ in range(n_bss):
        cid, idx = divmod(cid, base)
        actions.append(action_from_index(idx, n_channels))
    return tuple(actions)


@dataclass
class Dataset:
    """Configuration-to-throughput table for one deployment.

    ``records`` is an (n_configs, n_bss) float array; NaN marks ids not yet
    computed. Loaded datasets are immutable in spirit: share them read-only.
    """

    deployment_digest: str
    n_channels: int
    n_bss: int
    duration_s: float
    reps: int
    records: np.ndarray

    @property
    def n_configs(self) -> int:
        return self.records.shape[0]

    @property
    def complete(self) -> bool:
        return not np.isnan(self.records).any()

    def missing_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(np.isnan(self.records).any(axis=1))]

    def equals(self, other: "Dataset") -> bool:
        return (
            self.deployment_digest == other.deployment_digest
            and self.n_channels == other.n_channels
            and self.n_bss == other.n_bss
            and self.duration_s == other.duration_s
            and self.reps == other.reps
            and self.records.shape == other.records.shape
            and bool(np.array_equal(self.records, other.records, equal_nan=True))
        )


def empty_dataset(
    deployment: Deployment, mac: MacParams, duration_seconds: float, reps: int
) -> Dataset:
    total = n_configs(deployment.n_channels, deployment.n_bss)
    records = np.full((total, deployment.n_bss), np.nan)
    return Dataset(
        deployment_digest=deployment_digest(deployment, mac),
        n_channels=deployment.n_channels,
        n_bss=deployment.n_bss,
        duration_s=float(duration_seconds),
        reps=reps,
        records=records,
    )


def lookup(dataset: Dataset, global_config: Sequence[Action]) -> tuple[float, ...]:
    """Stored per-BSS throughput for a joint configuration. Pure read."""
    cid = config_id(global_config, dataset.n_channels)
    return lookup_id(dataset, cid)


def lookup_id(dataset: Dataset, cid: int) -> tuple[float, ...]:
    if not 0 <= cid < dataset.n_configs:
        raise NotFoundError(f"config id {cid} out of range")
    row = dataset.records[cid]
    if np.isnan(row).any():
        raise NotFoundError(f"config id {cid} not present in dataset")
    return tuple(float(v) for v in row)


def _simulate_record(
    deployment: Deployment,
    mac: MacParams,
    duration_seconds: float,
    reps: int,
    base_seed: int,
    cid: int,
) -> tuple[float, ...]:
    actions = config_from_id(cid, deployment.n_channels, deployment.n_bss)
    acc = np.zeros(deployment.n_bss)
    for rep in range(reps):
        result = simulate(
            deployment,
            actions,
            duration_seconds,
            mac,
            seed=stable_hash(base_seed, cid, rep),
        )
        acc += np.asarray(result.throughput_mbps)
    return tuple(round(float(v), 6) for v in acc / reps)


def _record_chunk(args) -> list[tuple[int, tuple[float, ...]]]:
    deployment, mac, duration_seconds, reps, base_seed, ids = args
    return [
        (cid, _simulate_record(deployment, mac, duration_seconds, reps, base_seed, cid))
        for cid in ids
    ]


def generate(
    deployment: Deployment,
    duration_seconds: float,
    mac: Optional[MacParams] = None,
    reps: int = 1,
    base_seed: int = 0,
    parallelism: int = 1,
    out_path=None,
    chunk_size: int = 32,
) -> Dataset:
    """Simulate every configuration and return the complete dataset.

    With ``out_path`` set, rows are persisted as they are produced and an
    existing partial file is resumed without recomputing finished ids.
    Per-record seeds depend only on (base_seed, id, rep), so the output is
    identical for any ``parallelism``.
    """
    mac = mac or MacParams()
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    dataset = empty_dataset(deployment, mac, duration_seconds, reps)

    writer = None
    if out_path is not None:
        existing = _try_resume(out_path, dataset)
        if existing is not None:
            dataset = existing
        if dataset.complete:
            log.info("dataset at %s already complete", out_path)
            return dataset
        writer = _IncrementalWriter(out_path, dataset)

    todo = dataset.missing_ids()
    log.info(
        "generating %d of %d records (duration=%ss, reps=%d, workers=%d)",
        len(todo),
        dataset.n_configs,
        duration_seconds,
        reps,
        parallelism,
    )
    chunks = [
        (deployment, mac, duration_seconds, reps, base_seed, todo[i : i + chunk_size])
        for i in range(0, len(todo), chunk_size)
    ]
    try:
        if parallelism > 1:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                for done, results in enumerate(pool.map(_record_chunk, chunks)):
                    _store_chunk(dataset, results, writer)
                    if done % 64 == 0:
                        log.debug("chunk %d/%d done", done + 1, len(chunks))
        else:
            for chunk in chunks:
                _store_chunk(dataset, _record_chunk(chunk), writer)
    finally:
        if writer is not None:
            writer.close()
    if writer is not None:
        writer.finalize()
    return dataset


def _store_chunk(dataset, results, writer) -> None:
    for cid, row in results:
        dataset.records[cid] = row
        if writer is not None:
            writer.append(cid, row)


class _IncrementalWriter:
    """Appends rows in ascending-id order when the file is an id prefix;
    otherwise defers to a sorted rewrite at finalize time."""

    def __init__(self, path, dataset: Dataset):
        self._path = Path(path)
        self._dataset = dataset
        present = ~np.isnan(dataset.records).any(axis=1)
        n_present = int(present.sum())
        self._append_mode = bool(present[:n_present].all())
        self._next_id = n_present
        self._fh = None
        if self._append_mode:
            try:
                if n_present == 0:
                    self._fh = open(self._path, "w", newline="")
                    _write_preamble(self._fh, dataset)
                else:
                    self._fh = open(self._path, "a", newline="")
            except OSError as exc:
                raise PersistenceError(f"cannot write dataset {self._path}: {exc}", self._path) from exc

    def append(self, cid: int, row) -> None:
        if self._append_mode and cid == self._next_id:
            _write_record(self._fh, self._dataset, cid, row)
            self._next_id += 1
        else:
            self._append_mode = False

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def finalize(self) -> None:
        self.close()
        if not self._append_mode:
            save(self._dataset, self._path)


def _try_resume(path, fresh: Dataset) -> Optional[Dataset]:
    path = Path(path)
    if not path.exists():
        return None
    existing = load(path, allow_partial=True)
    for field in ("deployment_digest", "n_channels", "n_bss", "duration_s", "reps"):
        if getattr(existing, field) != getattr(fresh, field):
            raise ValidationError(
                f"{path}: existing dataset {field} does not match this run; "
                "refusing to resume"
            )
    log.info(
        "resuming %s: %d records present", path, existing.n_configs - len(existing.missing_ids())
    )
    return existing


def _write_preamble(fh, dataset: Dataset) -> None:
    fh.write(f"# deployment_digest={dataset.deployment_digest}\n")
    fh.write(f"# n_channels={dataset.n_channels}\n")
    fh.write(f"# n_bss={dataset.n_bss}\n")
    fh.write(f"# duration_s={dataset.duration_s!r}\n")
    fh.write(f"# reps={dataset.reps}\n")
    fh.write(_HEADER + "\n")


def _write_record(fh, dataset: Dataset, cid: int, row) -> None:
    actions = config_from_id(cid, dataset.n_channels, dataset.n_bss)
    for w, action in enumerate(actions):
        fh.write(
            f"{cid},{w},{action.primary},{action.max_bandwidth},{row[w]:.6f}\n"
        )


def save(dataset: Dataset, path) -> None:
    """Write the dataset CSV atomically (tmp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", newline="") as fh:
            _write_preamble(fh, dataset)
            for cid in range(dataset.n_configs):
                row = dataset.records[cid]
                if np.isnan(row).any():
                    continue
                _write_record(fh, dataset, cid, row)
        os.replace(tmp, path)
    except OSError as exc:
        raise PersistenceError(f"cannot write dataset {path}: {exc}", path) from exc


def load(path, allow_partial: bool = False) -> Dataset:
    """Read a dataset CSV, validating the schema field by field."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PersistenceError(f"cannot read dataset {path}: {exc}", path) from exc

    meta = {}
    lines = text.splitlines()
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        body = lines[pos][1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
        pos += 1
    for key in ("deployment_digest", "n_channels", "n_bss", "duration_s", "reps"):
        if key not in meta:
            raise ValidationError(f"{path}: missing preamble field {key}")
    if pos >= len(lines) or lines[pos] != _HEADER:
        raise ValidationError(f"{path}: header must be exactly '{_HEADER}'")
    pos += 1

    n_channels = int(meta["n_channels"])
    n_bss = int(meta["n_bss"])
    dataset = Dataset(
        deployment_digest=meta["deployment_digest"],
        n_channels=n_channels,
        n_bss=n_bss,
        duration_s=float(meta["duration_s"]),
        reps=int(meta["reps"]),
        records=np.full((n_configs(n_channels, n_bss), n_bss), np.nan),
    )

    seen = np.zeros((dataset.n_configs, n_bss), dtype=bool)
    for lineno, line in enumerate(lines[pos:], start=pos + 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ValidationError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
        try:
            cid, w, primary, max_bw = (int(v) for v in parts[:4])
            thr = float(parts[4])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if not 0 <= cid < dataset.n_configs:
            raise ValidationError(f"{path}:{lineno}: config_id {cid} out of range")
        if not 0 <= w < n_bss:
            raise ValidationError(f"{path}:{lineno}: bss {w} out of range")
        expected = config_from_id(cid, n_channels, n_bss)[w]
        if (primary, max_bw) != (expected.primary, expected.max_bandwidth):
            raise ValidationError(
                f"{path}:{lineno}: primary/max_bw ({primary},{max_bw}) inconsistent "
                f"with config_id {cid} (expected {expected.primary},{expected.max_bandwidth})"
            )
        if seen[cid, w]:
            raise ValidationError(f"{path}:{lineno}: duplicate row for config_id {cid} bss {w}")
        seen[cid, w] = True
        dataset.records[cid, w] = thr

    partial_rows = seen.any(axis=1) & ~seen.all(axis=1)
    if partial_rows.any():
        bad = int(np.flatnonzero(partial_rows)[0])
        raise ValidationError(
            f"{path}: config_id {bad} has throughput for only some bss "
            f"(n_bss={n_bss} per the preamble)"
        )
    if not allow_partial and not dataset.complete:
        raise ValidationError(
            f"{path}: dataset incomplete ({len(dataset.missing_ids())} ids missing)"
        )
    return dataset


def validate_against(dataset: Dataset, deployment: Deployment, mac: MacParams) -> None:
    """Reject a dataset whose digest does not match the given deployment."""
    expected = deployment_digest(deployment, mac)
    if dataset.deployment_digest != expected:
        raise ValidationError(
            "deployment_digest mismatch: dataset was generated for a different "
            f"deployment/mac (dataset {dataset.deployment_digest[:12]}..., "
            f"supplied {expected[:12]}...)"
        )


@dataclass(frozen=True)
class OptimaResult:
    """Configurations satisfying every BSS, plus the max-min satisfaction."""

    satisfied: tuple[tuple[int, float], ...]  # (config_id, min sigma), id ascending
    best_id: int
    best_min_sigma: float


def find_optima(
    dataset: Dataset, loads_mbps: Sequence[float], satisfaction_threshold: float
) -> OptimaResult:
    """Scan every record for ids where min-over-BSS sigma meets the threshold."""
    if len(loads_mbps) != dataset.n_bss:
        raise ValidationError(
            f"need {dataset.n_bss} loads, got {len(loads_mbps)}"
        )
    if not dataset.complete:
        raise ValidationError("optima scan requires a complete dataset")
    satisfied = []
    best_id, best_min = 0, -math.inf
    for cid in range(dataset.n_configs):
        row = dataset.records[cid]
        min_sigma = min(reward(float(row[w]), loads_mbps[w]) for w in range(dataset.n_bss))
        if min_sigma >= satisfaction_threshold:
            satisfied.append((cid, min_sigma))
        if min_sigma > best_min:
            best_id, best_min = cid, min_sigma
    return OptimaResult(tuple(satisfied), best_id, best_min)
