"""Timestamp alignment of per-sensor frame streams into synchronized bundles.

Bundles are emitted on a fixed tick grid at the rate of the slowest
participating sensor. Each slot takes the frame nearest in time to the
tick, accepted only if it lies within half the tolerance, so timestamps
inside one bundle never differ pairwise by more than the tolerance.
Missing slots are data (None), not errors: a halted stream degrades that
slot while the rest of the bundle keeps flowing.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Mapping, Sequence

from .sensors import StampedFrame


@dataclass(frozen=True)
class SyncedBundle:
    t: float
    slots: dict   # sensor_id -> StampedFrame | None


def default_tolerance(reference_rate: float) -> float:
    """Half the reference (slowest) sensor period."""
    return 0.5 / reference_rate


class Synchronizer:
    """Incremental synchronizer with bounded buffering.

    Feed frames in per-sensor timestamp order; `poll(now)` yields every
    bundle whose tick is final (all acceptance windows fully in the past),
    then drops frames that can no longer be referenced.
    """

    def __init__(self, sensor_ids: Sequence[str], reference_rate: float,
                 tolerance: float | None = None):
        if reference_rate <= 0.0:
            raise ValueError("reference_rate must be positive")
        self.sensor_ids = list(sensor_ids)
        self.reference_rate = float(reference_rate)
        self.tolerance = default_tolerance(reference_rate) if tolerance is None else float(tolerance)
        self._buffers: dict[str, list[StampedFrame]] = {s: [] for s in self.sensor_ids}
        self._times: dict[str, list[float]] = {s: [] for s in self.sensor_ids}
        self._next_tick = 0

    def feed(self, frame: StampedFrame) -> None:
        times = self._times[frame.sensor_id]
        if times and frame.timestamp < times[-1]:
            raise ValueError(f"stream {frame.sensor_id} is not monotonic")
        times.append(frame.timestamp)
        self._buffers[frame.sensor_id].append(frame)

    def poll(self, now: float) -> list[SyncedBundle]:
        half = self.tolerance / 2.0
        out = []
        while True:
            tick = self._next_tick / self.reference_rate
            if tick + half >= now:
                break
            out.append(self._bundle_at(tick, half))
            self._next_tick += 1
            self._drop_before(tick - half)
        return out

    def flush(self) -> list[SyncedBundle]:
        """Emit all remaining bundles up to the last buffered timestamp."""
        t_max = max((ts[-1] for ts in self._times.values() if ts), default=None)
        if t_max is None:
            return []
        half = self.tolerance / 2.0
        out = []
        while self._next_tick / self.reference_rate <= t_max + half:
            tick = self._next_tick / self.reference_rate
            out.append(self._bundle_at(tick, half))
            self._next_tick += 1
        return out

    def _bundle_at(self, tick: float, half: float) -> SyncedBundle:
        slots: dict[str, StampedFrame | None] = {}
        for sid in self.sensor_ids:
            times = self._times[sid]
            slot = None
            if times:
                i = bisect.bisect_left(times, tick)
                best = None
                for j in (i - 1, i):
                    if 0 <= j < len(times):
                        d = abs(times[j] - tick)
                        if best is None or d < best[0]:
                            best = (d, j)
                if best is not None and best[0] <= half:
                    slot = self._buffers[sid][best[1]]
            slots[sid] = slot
        return SyncedBundle(tick, slots)

    def _drop_before(self, horizon: float) -> None:
        for sid in self.sensor_ids:
            times = self._times[sid]
            k = bisect.bisect_left(times, horizon)
            if k:
                del times[:k]
                del self._buffers[sid][:k]


def synchronize(streams: Mapping[str, Sequence[StampedFrame]], reference_rate: float,
                tolerance: float | None = None) -> list[SyncedBundle]:
    """Batch alignment of complete streams (see Synchronizer for semantics)."""
    sync = Synchronizer(list(streams), reference_rate, tolerance)
    for sid in sync.sensor_ids:
        for frame in streams[sid]:
            sync.feed(frame)
    return sync.flush()
