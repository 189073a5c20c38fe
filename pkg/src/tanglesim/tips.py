"""Tip pool: PCT-gated admission after scheduling, uniform tip selection.

A block enters the pool only if a recently confirmed block sits in its
past-cone (the PCT condition); admitting a block evicts its parents. Selection
never removes tips: removal happens only through admission of an approver.
"""

from __future__ import annotations

import random
from typing import Optional

from .dag import AdmitResult, LedgerView, PipelineOrderingError


class TipPool:
    """Set of admissible tips with O(1) insert/remove/sample.

    Internally a swap-removal list plus an index map; iteration order is
    deterministic for a deterministic event sequence.
    """

    def __init__(self, pct_threshold: float, bfs_horizon: float,
                 pct_enabled: bool = True):
        self.pct_threshold = pct_threshold
        self.bfs_horizon = bfs_horizon
        self.pct_enabled = pct_enabled
        self._tips: list[int] = []
        self._index: dict[int, int] = {}

    def __contains__(self, block_id: int) -> bool:
        return block_id in self._index

    def tip_count(self) -> int:
        return len(self._tips)

    def tips(self) -> list[int]:
        return list(self._tips)

    def seed(self, block_id: int) -> None:
        """Bootstrap entry (genesis), bypassing the admission check."""
        self._insert(block_id)

    def _insert(self, block_id: int) -> None:
        if block_id in self._index:
            return
        self._index[block_id] = len(self._tips)
        self._tips.append(block_id)

    def _remove(self, block_id: int) -> None:
        pos = self._index.pop(block_id, None)
        if pos is None:
            return
        last = self._tips.pop()
        if last != block_id:
            self._tips[pos] = last
            self._index[last] = pos

    def admit(self, view: LedgerView, block_id: int,
              schedule_time: float) -> AdmitResult:
        """Apply the PCT condition to a just-scheduled block.

        On admission the block's parents leave the pool and the block becomes a
        tip. A failed block never re-enters, even if its past-cone confirms
        later. PCT with no confirmed ancestor in reach counts as a failure,
        except inside the bootstrap window right after t=0 where genesis is the
        only possible anchor.
        """
        entry = view.entries.get(block_id)
        if entry is None or entry.schedule_time is None:
            raise PipelineOrderingError(
                f"block {block_id} not scheduled before tip admission")
        if self.pct_enabled:
            verdict = self._pct_verdict(view, block_id, schedule_time)
            if verdict is not None:
                return verdict
        for p in entry.block.parents:
            self._remove(p)
        self._insert(block_id)
        return AdmitResult.ADMITTED

    def _pct_verdict(self, view: LedgerView, block_id: int,
                     schedule_time: float) -> Optional[AdmitResult]:
        """None means pass. Short-circuits the cone search as soon as any
        confirmation newer than (schedule_time - threshold) is found, which is
        decision-equivalent to thresholding the full pct() value."""
        cutoff = schedule_time - self.pct_threshold
        latest = view.most_recent_confirmed_in_past_cone(
            block_id, schedule_time, self.bfs_horizon, _stop_above=cutoff)
        if latest is None:
            if schedule_time < self.pct_threshold:
                return None  # genesis bootstrap window
            return AdmitResult.REJECTED_NO_CONFIRMED_ANCESTOR
        if latest > cutoff:
            return None
        return AdmitResult.REJECTED_PCT

    def select_tips(self, k: int, rng: random.Random) -> list[int]:
        """Uniform sample without replacement of min(k, |tips|) tips."""
        if not self._tips:
            raise RuntimeError("tip pool empty; genesis bootstrap missing")
        if k >= len(self._tips):
            return list(self._tips)
        return rng.sample(self._tips, k)
