"""Deployment and MAC configuration: BSS geometry, offered loads and the
pairwise interference matrix, loaded from a TOML file or built in code.

A deployment file either supplies the interference matrix directly (the
faithful path when the matrix is known) or AP positions plus radio
parameters from which the matrix is derived.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import PersistenceError, ValidationError
from .spectrum import (
    InterferenceMatrix,
    RadioParams,
    derive_interference_matrix,
    is_power_of_two,
)

Coord = tuple[float, float, float]


@dataclass(frozen=True)
class Bss:
    """One basic service set: a single AP serving a single STA downlink."""

    id: str
    load_mbps: float
    packet_bits: int
    ap: Optional[Coord] = None
    sta: Optional[Coord] = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("bss id must be a non-empty label")
        if self.load_mbps <= 0:
            raise ValidationError(f"bss {self.id}: load_mbps must be > 0")
        if self.packet_bits <= 0:
            raise ValidationError(f"bss {self.id}: packet_bits must be > 0")


@dataclass(frozen=True)
class MacParams:
    """MAC timing and service constants used by the simulator.

    Defaults are chosen so that at a 50 Mbps offered load one basic channel
    cannot keep up but two can, which is what makes the bandwidth attribute
    worth learning.
    """

    slot_us: int = 9
    difs_us: int = 34
    sifs_us: int = 16
    cw_fixed: int = 16  # slots; fixed window, no exponential backoff
    max_aggregation: int = 64  # packets per PPDU
    per_channel_rate_mbps: float = 30.0
    rts_cts_overhead_us: int = 110
    max_ppdu_us: int = 5484
    queue_capacity_packets: int = 1000

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValidationError(f"mac parameter {f.name} must be > 0")


@dataclass(frozen=True)
class Deployment:
    """A set of BSSs over a common band plus their pairwise overlap map."""

    n_channels: int
    bss_list: tuple[Bss, ...]
    matrix: InterferenceMatrix
    radio: Optional[RadioParams] = None

    def __post_init__(self):
        if not is_power_of_two(self.n_channels):
            raise ValidationError(
                f"n_channels must be a power of two, got {self.n_channels!r}"
            )
        if not self.bss_list:
            raise ValidationError("deployment needs at least one bss")
        ids = [b.id for b in self.bss_list]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate bss ids: {ids}")
        if self.matrix.n_bss != len(self.bss_list):
            raise ValidationError(
                f"matrix is {self.matrix.n_bss}x{self.matrix.n_bss} "
                f"but deployment has {len(self.bss_list)} bss"
            )

    @property
    def n_bss(self) -> int:
        return len(self.bss_list)

    @property
    def loads_mbps(self) -> tuple[float, ...]:
        return tuple(b.load_mbps for b in self.bss_list)


def build_deployment(
    n_channels: int,
    bss_list: Sequence[Bss],
    matrix: Optional[InterferenceMatrix] = None,
    radio: Optional[RadioParams] = None,
) -> Deployment:
    """Assemble a deployment, deriving the matrix from positions if absent."""
    if matrix is None:
        positions = []
        for b in bss_list:
            if b.ap is None:
                raise ValidationError(
                    f"bss {b.id}: ap position required when no interference "
                    "matrix is supplied"
                )
            positions.append(b.ap)
        matrix = derive_interference_matrix(positions, n_channels, radio or RadioParams())
    return Deployment(n_channels, tuple(bss_list), matrix, radio)


def _coord(value, where: str) -> Coord:
    if not isinstance(value, list) or len(value) != 3:
        raise ValidationError(f"{where} must be a 3-element [x, y, z] list")
    return tuple(float(v) for v in value)


def parse_deployment_toml(text: str, source: str = "<string>") -> tuple[Deployment, MacParams]:
    """Parse deployment TOML text into a (Deployment, MacParams) pair.

    MacParams come from the optional ``[mac]`` table, defaulted field-wise.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{source}: invalid TOML: {exc}") from exc

    dep = doc.get("deployment")
    if not isinstance(dep, dict) or "n_channels" not in dep:
        raise ValidationError(f"{source}: missing [deployment] n_channels")
    n_channels = dep["n_channels"]
    if not isinstance(n_channels, int):
        raise ValidationError(f"{source}: n_channels must be an integer")

    raw_bss = doc.get("bss")
    if not isinstance(raw_bss, list) or not raw_bss:
        raise ValidationError(f"{source}: at least one [[bss]] table required")
    bss_list = []
    for idx, entry in enumerate(raw_bss):
        try:
            bss_list.append(
                Bss(
                    id=str(entry["id"]),
                    load_mbps=float(entry["load_mbps"]),
                    packet_bits=int(entry["packet_bits"]),
                    ap=_coord(entry["ap"], f"bss[{idx}].ap") if "ap" in entry else None,
                    sta=_coord(entry["sta"], f"bss[{idx}].sta") if "sta" in entry else None,
                )
            )
        except KeyError as exc:
            raise ValidationError(f"{source}: bss[{idx}] missing key {exc}") from exc

    radio = None
    if "radio" in doc:
        known = {f.name for f in fields(RadioParams)}
        extra = set(doc["radio"]) - known
        if extra:
            raise ValidationError(f"{source}: unknown [radio] keys {sorted(extra)}")
        radio = RadioParams(**{k: float(v) for k, v in doc["radio"].items()})

    matrix = None
    if "interference" in doc:
        rows = doc["interference"].get("matrix")
        if rows is None:
            raise ValidationError(f"{source}: [interference] requires a matrix key")
        matrix = InterferenceMatrix.from_rows(rows)

    mac = MacParams()
    if "mac" in doc:
        known = {f.name for f in fields(MacParams)}
        extra = set(doc["mac"]) - known
        if extra:
            raise ValidationError(f"{source}: unknown [mac] keys {sorted(extra)}")
        mac = MacParams(**doc["mac"])

    return build_deployment(n_channels, bss_list, matrix, radio), mac


def load_deployment(path) -> tuple[Deployment, MacParams]:
    """Load a deployment file; see ``deployments/`` for the format."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PersistenceError(f"cannot read deployment file {path}: {exc}", path) from exc
    return parse_deployment_toml(text, source=str(path))


def deployment_digest(deployment: Deployment, mac: MacParams) -> str:
    """Hash of the canonical deployment + MAC content.

    Datasets embed this digest so a dataset can be rejected when replayed
    against a different deployment or MAC configuration. Hashing canonical
    content (not file bytes) keeps reformatted files compatible.
    """
    lines = [f"n_channels={deployment.n_channels}"]
    for b in deployment.bss_list:
        lines.append(
            f"bss={b.id}|{b.load_mbps!r}|{b.packet_bits}|{b.ap!r}|{b.sta!r}"
        )
    for row in deployment.matrix.entries:
        lines.append("matrix=" + ",".join(str(v) for v in row))
    if deployment.radio is not None:
        r = deployment.radio
        lines.append(
            f"radio={r.tx_power_dbm!r}|{r.cca_dbm!r}|{r.pl0_db!r}|{r.pl_exponent!r}"
        )
    lines.append(
        "mac=" + "|".join(repr(getattr(mac, f.name)) for f in fields(MacParams))
    )
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
