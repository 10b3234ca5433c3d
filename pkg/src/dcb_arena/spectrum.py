"""Channelization and bonding rules shared by the simulator, dataset and agents.

Basic channels are 20 MHz wide and numbered 1..C, with C a power of two.
A bonded transmission always occupies a contiguous power-of-two block aligned
to its own width, so {1,2} and {3,4} are the only 40 MHz blocks of a
4-channel system (802.11ac/ax channelization). All functions here are pure
and all types immutable, so they can be shared freely across concurrent
simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ValidationError

BASIC_CHANNEL_MHZ = 20


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


def _require_channel_count(n_channels: int) -> None:
    if not isinstance(n_channels, int) or not is_power_of_two(n_channels):
        raise ValidationError(
            f"n_channels must be a power of two >= 1, got {n_channels!r}"
        )


@dataclass(frozen=True, order=True)
class Action:
    """One spectrum configuration.

    ``primary`` is the 1-based basic channel where the backoff runs;
    ``max_bandwidth`` caps how many basic channels a frame may bond
    (1, 2, 4, ... up to the system width).
    """

    primary: int
    max_bandwidth: int

    def __post_init__(self):
        if not isinstance(self.primary, int) or self.primary < 1:
            raise ValidationError(f"primary must be a channel index >= 1, got {self.primary!r}")
        if not isinstance(self.max_bandwidth, int) or not is_power_of_two(self.max_bandwidth):
            raise ValidationError(
                f"max_bandwidth must be a power of two, got {self.max_bandwidth!r}"
            )


def validate_action(action: Action, n_channels: int) -> None:
    _require_channel_count(n_channels)
    if action.primary > n_channels:
        raise ValidationError(
            f"primary {action.primary} out of range for {n_channels} channels"
        )
    if action.max_bandwidth > n_channels:
        raise ValidationError(
            f"max_bandwidth {action.max_bandwidth} exceeds system width {n_channels}"
        )


def n_actions(n_channels: int) -> int:
    """Size of the action space: one arm per (primary, width) pair."""
    _require_channel_count(n_channels)
    return n_channels * (int(math.log2(n_channels)) + 1)


def enumerate_actions(n_channels: int) -> list[Action]:
    """All actions, ordered by width ascending then primary ascending.

    The ordering is fixed so arm indices stay stable across runs and files.
    """
    _require_channel_count(n_channels)
    actions = []
    width = 1
    while width <= n_channels:
        actions.extend(Action(p, width) for p in range(1, n_channels + 1))
        width *= 2
    return actions


def action_index(action: Action, n_channels: int) -> int:
    """Stable arm number of an action: ``log2(width) * C + (primary - 1)``."""
    validate_action(action, n_channels)
    return (action.max_bandwidth.bit_length() - 1) * n_channels + action.primary - 1


def action_from_index(index: int, n_channels: int) -> Action:
    """Inverse of :func:`action_index`; round-trips exactly."""
    _require_channel_count(n_channels)
    if not isinstance(index, int) or not 0 <= index < n_actions(n_channels):
        raise ValidationError(
            f"action index {index!r} out of range for {n_channels} channels"
        )
    width_log, rem = divmod(index, n_channels)
    return Action(rem + 1, 1 << width_log)


def allowed_block(primary: int, width: int, n_channels: int) -> frozenset[int]:
    """The unique width-aligned contiguous block containing the primary."""
    _require_channel_count(n_channels)
    if not is_power_of_two(width) or width > n_channels:
        raise ValidationError(f"block width {width!r} invalid for {n_channels} channels")
    if not 1 <= primary <= n_channels:
        raise ValidationError(f"primary {primary!r} out of range")
    start = ((primary - 1) // width) * width + 1
    return frozenset(range(start, start + width))


def dcb_select(
    primary: int, max_bandwidth: int, idle: Iterable[int], n_channels: int
) -> frozenset[int]:
    """Channels bonded at backoff expiry.

    Returns the widest aligned block containing the primary, no wider than
    ``max_bandwidth``, entirely contained in ``idle``. Empty exactly when the
    primary itself is not idle (the transmission is deferred).
    """
    validate_action(Action(primary, max_bandwidth), n_channels)
    idle = frozenset(idle)
    if not idle <= frozenset(range(1, n_channels + 1)):
        raise ValidationError(f"idle set {sorted(idle)} not within 1..{n_channels}")
    if primary not in idle:
        return frozenset()
    width = max_bandwidth
    while width > 1:
        block = allowed_block(primary, width, n_channels)
        if block <= idle:
            return block
        width //= 2
    return frozenset((primary,))


@dataclass(frozen=True)
class InterferenceMatrix:
    """Per-AP-pair map of the widest transmission bandwidth (MHz) at which
    the two APs still reach each other; 0 means they never overlap.

    Narrow transmissions concentrate power on fewer Hertz and reach farther,
    hence a single bandwidth threshold per pair.
    """

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        for i, row in enumerate(self.entries):
            if len(row) != n:
                raise ValidationError("interference matrix must be square")
            for j, value in enumerate(row):
                if not isinstance(value, int) or value < 0 or value % BASIC_CHANNEL_MHZ:
                    raise ValidationError(
                        f"matrix entry [{i}][{j}]={value!r} must be a non-negative "
                        f"multiple of {BASIC_CHANNEL_MHZ} MHz"
                    )
                if value != self.entries[j][i]:
                    raise ValidationError(f"matrix not symmetric at [{i}][{j}]")
            if row[i] != 0:
                raise ValidationError(f"matrix diagonal must be zero at [{i}]")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "InterferenceMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))

    @property
    def n_bss(self) -> int:
        return len(self.entries)

    def mhz(self, i: int, j: int) -> int:
        return self.entries[i][j]


def overlaps(i: int, j: int, tx_bandwidth_mhz: int, matrix: InterferenceMatrix) -> bool:
    """Whether a transmission of the given bandwidth by one AP of the pair
    reaches the other.

    Monotone in bandwidth: true at some width implies true at every
    narrower width.
    """
    if i == j:
        raise ValidationError("overlap is defined between distinct APs")
    if tx_bandwidth_mhz <= 0 or tx_bandwidth_mhz % BASIC_CHANNEL_MHZ:
        raise ValidationError(
            f"tx bandwidth {tx_bandwidth_mhz!r} must be a positive multiple of "
            f"{BASIC_CHANNEL_MHZ} MHz"
        )
    return tx_bandwidth_mhz <= matrix.mhz(i, j)


@dataclass(frozen=True)
class RadioParams:
    """Transmit power, carrier-sense threshold and log-distance path loss."""

    tx_power_dbm: float = 20.0
    cca_dbm: float = -82.0
    pl0_db: float = 40.0  # loss at 1 m
    pl_exponent: float = 2.0


def path_loss_db(distance_m: float, radio: RadioParams) -> float:
    """Log-distance path loss; -inf at zero distance (co-located nodes)."""
    if distance_m < 0:
        raise ValidationError(f"distance must be non-negative, got {distance_m!r}")
    if distance_m == 0:
        return float("-inf")
    return radio.pl0_db + 10.0 * radio.pl_exponent * math.log10(distance_m)


def derive_interference_matrix(
    ap_positions: Sequence[Sequence[float]], n_channels: int, radio: RadioParams
) -> InterferenceMatrix:
    """Widest bandwidth per AP pair whose per-channel power still clears the
    carrier-sense threshold at the other AP.

    Total transmit power is split evenly across bonded channels, costing
    ``10*log10(width)`` dB of per-channel power as width grows.
    """
    _require_channel_count(n_channels)
    positions = []
    for idx, pos in enumerate(ap_positions):
        if pos is None or len(pos) != 3:
            raise ValidationError(f"AP position {idx} must be a 3-D coordinate")
        positions.append(tuple(float(v) for v in pos))
    n = len(positions)
    rows = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            dist = math.dist(positions[i], positions[j])
            loss = path_loss_db(dist, radio)
            entry = 0
            width = 1
            while width <= n_channels:
                rx_dbm = radio.tx_power_dbm - 10.0 * math.log10(width) - loss
                if rx_dbm >= radio.cca_dbm:
                    entry = width * BASIC_CHANNEL_MHZ
                width *= 2
            rows[i][j] = rows[j][i] = entry
    return InterferenceMatrix.from_rows(rows)
