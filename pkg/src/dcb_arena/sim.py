"""Event-driven CSMA/CA throughput simulator with per-frame channel bonding.

Model, in brief:

- Downlink only; the AP is the sole transmitter of its BSS.
- Packet arrivals are a Poisson process conditioned on the nominal volume
  ``round(load * duration / packet_bits)``: arrival instants are iid uniform
  over the run, so burstiness is Poisson-like while offered traffic never
  exceeds the configured load by more than quantization.
- An AP with queued packets draws a uniform integer backoff in
  ``[0, cw_fixed)``, waits a DIFS, then counts down one slot per idle slot of
  its primary channel, freezing while the primary is sensed busy. All APs
  released by the same transmission resume from the same instant, which is
  what makes equal residual counters expire in the same microsecond and
  collide, as in DCF.
- At expiry the AP bonds the widest aligned idle block containing its
  primary, up to its bandwidth cap, and sends up to ``max_aggregation``
  packets at ``per_channel_rate_mbps`` per bonded channel, capped at
  ``max_ppdu_us`` of payload airtime.
- Channel ``c`` is sensed busy at AP ``i`` iff some active transmitter ``j``
  has ``c`` in its band and ``j``'s transmission bandwidth still reaches
  ``i`` (narrower reaches farther). The same predicate decides corruption:
  a concurrent transmission by ``j`` corrupts ``i``'s frame iff their bands
  intersect and ``j`` reaches ``i`` - deliberately asymmetric, producing
  hidden/exposed-node behavior.
- A frame corrupted at its start airs only the RTS/CTS exchange
  (``rts_cts_overhead_us``); a frame corrupted mid-flight by a later hidden
  transmitter airs fully. Either way it delivers nothing and its packets
  return to the queue head.
- The queue drops arrivals beyond ``queue_capacity_packets``; drops are
  counted, not retried.

Time is integer microseconds throughout; given identical inputs (seed
included) results are bit-identical. Per-BSS random streams are derived
from ``(seed, bss id)``, so removing a BSS that never overlaps the others
leaves their results exactly unchanged. A simulator run is confined to the
calling thread; run many instances concurrently for parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .deployment import Deployment, MacParams
from .errors import UnsupportedOperationError, ValidationError
from .seeding import rng_stream
from .spectrum import BASIC_CHANNEL_MHZ, Action, dcb_select, validate_action

GlobalConfig = tuple[Action, ...]

_INF = 1 << 62


@dataclass(frozen=True)
class TraceEvent:
    """One audited simulator event; ``channels`` is '+'-joined, e.g. '1+2'."""

    time_us: int
    bss: str
    event: str  # arrival | tx_start | tx_end
    channels: str
    outcome: str  # queued | dropped | success | corrupted | ''


@dataclass(frozen=True)
class SimResult:
    """Per-BSS outcome of one simulation run."""

    throughput_mbps: tuple[float, ...]
    dropped: tuple[int, ...]
    airtime: tuple[float, ...]
    generated_packets: tuple[int, ...]
    delivered_packets: tuple[int, ...]
    occupancy: Optional[tuple[tuple[float, ...], ...]] = None
    trace: Optional[tuple[TraceEvent, ...]] = None


def occupancy_observation(result: SimResult, bss: int) -> tuple[float, ...]:
    """Fraction of time each channel was sensed busy by the given AP.

    Requires the simulation to have run with ``record_occupancy=True``.
    """
    if result.occupancy is None:
        raise UnsupportedOperationError(
            "occupancy was not recorded; simulate with record_occupancy=True"
        )
    return result.occupancy[bss]


def write_trace_csv(path, trace: Sequence[TraceEvent]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time_us,bss,event,channels,outcome\n")
        for ev in trace:
            fh.write(f"{ev.time_us},{ev.bss},{ev.event},{ev.channels},{ev.outcome}\n")


def _mask_channels(mask: int) -> str:
    return "+".join(str(c + 1) for c in range(mask.bit_length()) if mask >> c & 1)


class _BackoffDraws:
    """Chunked uniform draws in [0, cw); cheaper than per-call Generator use."""

    __slots__ = ("_rng", "_cw", "_buf", "_pos")

    def __init__(self, rng, cw: int):
        self._rng = rng
        self._cw = cw
        self._buf = ()
        self._pos = 0

    def next(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = self._rng.integers(0, self._cw, size=512).tolist()
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return value


def simulate(
    deployment: Deployment,
    global_config: Sequence[Action],
    duration_seconds: float,
    mac: Optional[MacParams] = None,
    seed: int = 0,
    record_occupancy: bool = False,
    record_trace: bool = False,
) -> SimResult:
    """Run one configuration for the given duration and report throughput.

    Deterministic in all arguments including ``seed``.
    """
    mac = mac or MacParams()
    n_ch = deployment.n_channels
    n_bss = deployment.n_bss
    if len(global_config) != n_bss:
        raise ValidationError(
            f"global config has {len(global_config)} actions for {n_bss} bss"
        )
    for action in global_config:
        validate_action(action, n_ch)
    if duration_seconds <= 0:
        raise ValidationError("duration must be positive")
    duration = int(round(duration_seconds * 1_000_000))
    if duration < 1:
        raise ValidationError("duration must be at least one microsecond")

    matrix = deployment.matrix
    n_widths = n_ch.bit_length()  # widths 2^0 .. 2^(n_widths-1)

    # reach[k][j][i]: a transmission by j at width 2^k is sensed at / corrupts i
    reach = [
        [
            [
                j != i and (BASIC_CHANNEL_MHZ << k) <= matrix.mhz(i, j)
                for i in range(n_bss)
            ]
            for j in range(n_bss)
        ]
        for k in range(n_widths)
    ]

    full_mask = (1 << n_ch) - 1
    prim_bit = [a.primary - 1 for a in global_config]

    # Per-BSS DCB outcome for every idle-channel mask, precomputed.
    def _band_for(w: int, idle_mask: int) -> int:
        idle = {c + 1 for c in range(n_ch) if idle_mask >> c & 1}
        block = dcb_select(global_config[w].primary, global_config[w].max_bandwidth, idle, n_ch)
        out = 0
        for c in block:
            out |= 1 << (c - 1)
        return out

    if n_ch <= 12:
        dcb_tab = [[_band_for(w, m) for m in range(1 << n_ch)] for w in range(n_bss)]
        band_of = lambda w, idle_mask: dcb_tab[w][idle_mask]  # noqa: E731
    else:
        band_of = _band_for

    # Traffic and service constants per BSS.
    bits = [b.packet_bits for b in deployment.bss_list]
    rate = [mac.per_channel_rate_mbps * (1 << k) for k in range(n_widths)]
    fit = [
        [max(0, int(mac.max_ppdu_us * rate[k] / bits[w])) for k in range(n_widths)]
        for w in range(n_bss)
    ]
    for w in range(n_bss):
        if fit[w][0] < 1:
            raise ValidationError(
                f"bss {deployment.bss_list[w].id}: one {bits[w]}-bit packet does "
                f"not fit in max_ppdu_us at the base rate"
            )

    arrivals: list[np.ndarray] = []
    quota: list[int] = []
    for b in deployment.bss_list:
        count = max(0, round(b.load_mbps * duration / b.packet_bits))
        rng = rng_stream("traffic", seed, b.id)
        if count:
            times = np.sort(rng.integers(0, duration, size=count, dtype=np.int64))
        else:
            times = np.empty(0, dtype=np.int64)
        arrivals.append(times)
        quota.append(count)
    draws = [
        _BackoffDraws(rng_stream("backoff", seed, b.id), mac.cw_fixed)
        for b in deployment.bss_list
    ]

    # Mutable per-BSS state.
    queue = [0] * n_bss
    aptr = [0] * n_bss
    dropped = [0] * n_bss
    delivered = [0] * n_bss
    contending = [False] * n_bss
    remaining = [0] * n_bss
    anchor = [0] * n_bss
    expiry = [_INF] * n_bss
    tx_end = [_INF] * n_bss
    tx_band = [0] * n_bss
    tx_k = [0] * n_bss
    tx_n = [0] * n_bss
    tx_bad = [False] * n_bss
    tx_t0 = [0] * n_bss
    arr_wake = [int(arrivals[w][0]) if quota[w] else _INF for w in range(n_bss)]
    busy = [0] * n_bss
    air_us = [0] * n_bss

    occ_count = [[0] * n_ch for _ in range(n_bss)] if record_occupancy else None
    occ_us = [[0] * n_ch for _ in range(n_bss)] if record_occupancy else None
    occ_last = 0
    trace: list[TraceEvent] = [] if record_trace else None

    ids = [b.id for b in deployment.bss_list]
    slot = mac.slot_us
    difs = mac.difs_us
    cap = mac.queue_capacity_packets
    rts = mac.rts_cts_overhead_us
    sifs = mac.sifs_us
    agg = mac.max_aggregation

    def absorb(w: int, now: int) -> None:
        """Pull all arrivals up to ``now`` into the queue, counting drops."""
        end = int(np.searchsorted(arrivals[w], now, side="right"))
        count = end - aptr[w]
        if count <= 0:
            return
        if trace is not None:
            q = queue[w]
            for t_arr in arrivals[w][aptr[w] : end]:
                admitted = q < cap
                if admitted:
                    q += 1
                trace.append(
                    TraceEvent(int(t_arr), ids[w], "arrival", "", "queued" if admitted else "dropped")
                )
        admit = min(count, cap - queue[w])
        if admit < count:
            dropped[w] += count - admit
        queue[w] += admit
        aptr[w] = end

    def recompute_busy() -> None:
        for i in range(n_bss):
            m = 0
            for j in range(n_bss):
                if tx_band[j] and reach[tx_k[j]][j][i]:
                    m |= tx_band[j]
            busy[i] = m

    def occ_integrate(now: int) -> None:
        nonlocal occ_last
        if now > occ_last:
            dt = now - occ_last
            for i in range(n_bss):
                row_c = occ_count[i]
                row_t = occ_us[i]
                for c in range(n_ch):
                    if row_c[c]:
                        row_t[c] += dt
            occ_last = now

    def occ_apply(j: int, band: int, k: int, delta: int) -> None:
        for i in range(n_bss):
            if reach[k][j][i]:
                row = occ_count[i]
                for c in range(n_ch):
                    if band >> c & 1:
                        row[c] += delta

    while True:
        now = _INF
        for w in range(n_bss):
            if tx_end[w] < now:
                now = tx_end[w]
            if expiry[w] < now:
                now = expiry[w]
            if arr_wake[w] < now:
                now = arr_wake[w]
        if now > duration:
            break
        if record_occupancy:
            occ_integrate(now)

        channel_change = False

        # 1. Transmissions ending now free their channels first.
        for w in range(n_bss):
            if tx_end[w] != now:
                continue
            air_us[w] += now - tx_t0[w]
            if tx_bad[w]:
                queue[w] += tx_n[w]  # back to the head; counts only, order is moot
            else:
                delivered[w] += tx_n[w]
            if trace is not None:
                trace.append(
                    TraceEvent(
                        now,
                        ids[w],
                        "tx_end",
                        _mask_channels(tx_band[w]),
                        "corrupted" if tx_bad[w] else "success",
                    )
                )
            if record_occupancy:
                occ_apply(w, tx_band[w], tx_k[w], -1)
            tx_band[w] = 0
            tx_end[w] = _INF
            channel_change = True
            absorb(w, now)
            if queue[w] > 0:
                contending[w] = True
                remaining[w] = draws[w].next()
                expiry[w] = _INF  # scheduled by the bookkeeping pass below
            else:
                contending[w] = False
                arr_wake[w] = int(arrivals[w][aptr[w]]) if aptr[w] < quota[w] else _INF
        if channel_change:
            recompute_busy()

        # 2. Arrivals that wake an idle, empty AP start a fresh contention.
        for w in range(n_bss):
            if arr_wake[w] != now:
                continue
            arr_wake[w] = _INF
            absorb(w, now)
            contending[w] = True
            remaining[w] = draws[w].next()
            expiry[w] = _INF

        # 3. Backoffs expiring now transmit simultaneously (slot-coincident
        #    expiries collide); bands are chosen from the pre-start state.
        starters = [w for w in range(n_bss) if expiry[w] == now]
        if starters:
            actives = [j for j in range(n_bss) if tx_band[j]]
            chosen = [(w, band_of(w, full_mask & ~busy[w])) for w in starters]
            started: list[int] = []
            bad_start = {}
            for w, band in chosen:
                if band == 0:
                    # Primary sensed busy at expiry: defer and redraw. Not
                    # reachable through normal countdown, kept defensively.
                    remaining[w] = draws[w].next()
                    expiry[w] = _INF
                    continue
                absorb(w, now)
                k = (band.bit_count()).bit_length() - 1
                n_pkts = min(queue[w], agg, fit[w][k])
                queue[w] -= n_pkts
                data_us = math.ceil(n_pkts * bits[w] / rate[k])
                tx_band[w] = band
                tx_k[w] = k
                tx_n[w] = n_pkts
                tx_bad[w] = False
                tx_t0[w] = now
                tx_end[w] = now + rts + data_us + sifs  # shortened below if bad at start
                contending[w] = False
                expiry[w] = _INF
                bad_start[w] = False
                started.append(w)
            for w in started:
                for j in actives:
                    if tx_band[w] & tx_band[j]:
                        if reach[tx_k[j]][j][w]:
                            bad_start[w] = True
                        if reach[tx_k[w]][w][j]:
                            tx_bad[j] = True  # mid-flight corruption, airs fully
            for a_idx, w in enumerate(started):
                for v in started[a_idx + 1 :]:
                    if tx_band[w] & tx_band[v]:
                        if reach[tx_k[v]][v][w]:
                            bad_start[w] = True
                        if reach[tx_k[w]][w][v]:
                            bad_start[v] = True
            for w in started:
                if bad_start[w]:
                    tx_bad[w] = True
                    tx_end[w] = now + rts
                if trace is not None:
                    trace.append(
                        TraceEvent(now, ids[w], "tx_start", _mask_channels(tx_band[w]), "")
                    )
                if record_occupancy:
                    occ_apply(w, tx_band[w], tx_k[w], +1)
            if started:
                channel_change = True
                recompute_busy()

        # 4. Freeze / resume countdowns against the new channel state.
        for w in range(n_bss):
            if tx_band[w] or not contending[w]:
                continue
            primary_busy = busy[w] >> prim_bit[w] & 1
            if expiry[w] == _INF:
                if not primary_busy:
                    anchor[w] = now
                    expiry[w] = now + difs + remaining[w] * slot
            elif primary_busy:
                elapsed = (now - anchor[w] - difs) // slot
                if elapsed > 0:
                    remaining[w] -= elapsed
                expiry[w] = _INF

    # Wind-up: account the tail of the run.
    for w in range(n_bss):
        absorb(w, duration)
        if tx_band[w]:
            air_us[w] += duration - tx_t0[w]  # in flight at the end; not delivered
    if record_occupancy:
        occ_integrate(duration)

    throughput = tuple(delivered[w] * bits[w] / duration for w in range(n_bss))
    occupancy = (
        tuple(tuple(occ_us[w][c] / duration for c in range(n_ch)) for w in range(n_bss))
        if record_occupancy
        else None
    )
    if trace is not None:
        # arrivals are absorbed lazily, so their rows were appended late
        trace.sort(key=lambda ev: ev.time_us)
    return SimResult(
        throughput_mbps=throughput,
        dropped=tuple(dropped),
        airtime=tuple(air_us[w] / duration for w in range(n_bss)),
        generated_packets=tuple(quota),
        delivered_packets=tuple(delivered),
        occupancy=occupancy,
        trace=tuple(trace) if trace is not None else None,
    )
