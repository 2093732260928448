"""Bounded per-rollout cache of observed and predicted frames."""
from __future__ import annotations

from collections import OrderedDict

from .errors import InsufficientHistory, NonContiguousFrame
from .scene import InstanceSet


class InstanceMemoryQueue:
    """Ring of contiguous InstanceSets keyed by frame index.

    Capacity defaults to h + f + 1: the full history plus every frame a
    rollout can produce. Pushing past capacity evicts the oldest frame.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._frames: OrderedDict[int, InstanceSet] = OrderedDict()

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def newest_index(self) -> int | None:
        if not self._frames:
            return None
        return next(reversed(self._frames))

    @property
    def oldest_index(self) -> int | None:
        if not self._frames:
            return None
        return next(iter(self._frames))

    def push(self, frame: InstanceSet) -> None:
        newest = self.newest_index
        if newest is not None and frame.frame_index != newest + 1:
            raise NonContiguousFrame(
                f"pushed frame {frame.frame_index} after newest {newest}"
            )
        self._frames[frame.frame_index] = frame
        while len(self._frames) > self.capacity:
            self._frames.popitem(last=False)

    def get(self, index: int) -> InstanceSet:
        return self._frames[index]

    def window(self, t: int, m: int) -> list[InstanceSet]:
        """Frames t-m .. t in ascending order; raises when any is missing."""
        missing = [i for i in range(t - m, t + 1) if i not in self._frames]
        if missing:
            raise InsufficientHistory(f"frames {missing} not in queue")
        return [self._frames[i] for i in range(t - m, t + 1)]

    def window_padded(self, t: int, m: int) -> tuple[list[InstanceSet], int]:
        """Like window(), but repeats the oldest stored frame in place of
        missing leading history. Returns (frames, number of padded slots)."""
        if t not in self._frames:
            raise InsufficientHistory(f"frame {t} not in queue")
        oldest = self.oldest_index
        frames = []
        padded = 0
        for i in range(t - m, t + 1):
            if i in self._frames:
                frames.append(self._frames[i])
            elif i < oldest:
                frames.append(self._frames[oldest])
                padded += 1
            else:
                raise InsufficientHistory(f"frame {i} missing inside the window")
        return frames, padded
