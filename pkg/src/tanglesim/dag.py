"""Per-node local DAG: storage, solidification, cumulative weight, confirmation, PCT.

Each node owns one LedgerView. Blocks attach at receipt (held as pending until
all parents are known), but contribute and accumulate cumulative weight only
when the local scheduler emits them. Confirmation is local: an entry whose
weight reaches the threshold gets a confirmation timestamp that is never unset.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from enum import Enum
from typing import Iterable, Optional

log = logging.getLogger(__name__)

GENESIS_ID = 0
GENESIS_ISSUER = -1


class AttachResult(Enum):
    SOLID = "solid"
    PENDING = "pending"
    DUPLICATE = "duplicate"


class AdmitResult(Enum):
    ADMITTED = "admitted"
    REJECTED_PCT = "rejected_pct"
    REJECTED_NO_CONFIRMED_ANCESTOR = "rejected_no_confirmed_ancestor"


class MalformedBlock(ValueError):
    pass


class PipelineOrderingError(RuntimeError):
    """An operation ran against a block in the wrong lifecycle state."""


class Block:
    """Immutable ledger unit. Parents are stored sorted for deterministic traversal."""

    __slots__ = ("id", "issuer", "issue_time", "parents", "payload_size")

    def __init__(self, id: int, issuer: int, issue_time: float,
                 parents: Iterable[int], payload_size: int = 1):
        self.id = id
        self.issuer = issuer
        self.issue_time = issue_time
        self.parents = tuple(sorted(parents))
        self.payload_size = payload_size
        if len(set(self.parents)) != len(self.parents):
            raise MalformedBlock(f"block {id}: duplicate parents {self.parents}")
        if id in self.parents:
            raise MalformedBlock(f"block {id}: references itself")
        if not self.parents and id != GENESIS_ID:
            raise MalformedBlock(f"block {id}: no parents and not genesis")

    def __repr__(self):
        return f"Block({self.id}, issuer={self.issuer}, t={self.issue_time:.3f})"


def make_genesis() -> Block:
    return Block(GENESIS_ID, GENESIS_ISSUER, 0.0, ())


class LedgerEntry:
    __slots__ = ("block", "schedule_time", "weight", "confirm_time", "children")

    def __init__(self, block: Block):
        self.block = block
        self.schedule_time: Optional[float] = None
        self.weight: int = 0
        self.confirm_time: Optional[float] = None
        self.children: list[int] = []


class LedgerView:
    """One node's perception of the DAG.

    `entries` holds solid blocks only; received blocks with missing ancestry
    wait in `pending` and are promoted when the last missing parent arrives.

    `freeze_confirmed_weights=True` stops weight propagation at confirmed
    entries. Because every ancestor of a confirmed block is itself confirmed
    (weights are monotone along parent edges), freezing changes no confirmation
    outcome and leaves unconfirmed weights exact; it only leaves the counters of
    long-confirmed blocks at their confirmation-era values. The simulation
    engine enables it: re-walking the full past-cone of every scheduled block
    is quadratic in ledger size. Genesis, which every block approves, keeps an
    exact count either way.
    """

    def __init__(self, genesis: Block, freeze_confirmed_weights: bool = False):
        if genesis.id != GENESIS_ID or genesis.parents:
            raise MalformedBlock("genesis must be the unique parentless block")
        self.genesis_id = genesis.id
        self.freeze_confirmed_weights = freeze_confirmed_weights
        self.entries: dict[int, LedgerEntry] = {}
        self.pending: dict[int, tuple[Block, set[int]]] = {}
        self.waiting: dict[int, list[int]] = {}
        self.scheduled_count = 0
        # Genesis is seeded scheduled and confirmed at t=0 by fiat so early
        # past-cone searches have an anchor.
        g = LedgerEntry(genesis)
        g.schedule_time = 0.0
        g.weight = 1
        g.confirm_time = 0.0
        self.entries[genesis.id] = g
        self.scheduled_count = 1

    # -- attachment / solidification ------------------------------------

    def attach(self, block: Block) -> tuple[AttachResult, list[int]]:
        """Insert a received block; returns (status, ids promoted to solid).

        The promoted list is in promotion order and includes the attached block
        itself when it is immediately solid.
        """
        if block.id in self.entries or block.id in self.pending:
            return AttachResult.DUPLICATE, []
        missing = {p for p in block.parents if p not in self.entries}
        # A parent can itself be pending; it is absent from entries either way.
        if missing:
            self.pending[block.id] = (block, missing)
            for p in missing:
                self.waiting.setdefault(p, []).append(block.id)
            return AttachResult.PENDING, []
        promoted = [block.id]
        self._solidify(block)
        self._promote_waiters(block.id, promoted)
        return AttachResult.SOLID, promoted

    def _solidify(self, block: Block) -> None:
        for p in block.parents:
            if self.entries[p].block.issue_time >= block.issue_time:
                raise MalformedBlock(
                    f"block {block.id} not younger than its parent {p}")
        self.entries[block.id] = LedgerEntry(block)
        for p in block.parents:
            self.entries[p].children.append(block.id)

    def _promote_waiters(self, root: int, promoted: list[int]) -> None:
        queue = deque([root])
        while queue:
            ready = queue.popleft()
            for wid in self.waiting.pop(ready, ()):  # insertion order: deterministic
                blk, missing = self.pending[wid]
                missing.discard(ready)
                if not missing:
                    del self.pending[wid]
                    self._solidify(blk)
                    promoted.append(wid)
                    queue.append(wid)

    def is_solid(self, block_id: int) -> bool:
        return block_id in self.entries

    # -- scheduling and cumulative weight --------------------------------

    def on_scheduled(self, block_id: int, schedule_time: float,
                     cw_threshold: float) -> list[int]:
        """Register a local scheduling; returns ids newly confirmed by it.

        Adds the block's own unit of weight plus one to every block in its
        past-cone; entries reaching `cw_threshold` are stamped with this
        schedule time. `cw_threshold` must be held constant over a view's
        lifetime (the freezing optimisation relies on it).
        """
        entry = self.entries.get(block_id)
        if entry is None:
            raise PipelineOrderingError(f"block {block_id} not solid, cannot schedule")
        if entry.schedule_time is not None:
            raise PipelineOrderingError(f"block {block_id} scheduled twice")
        entry.schedule_time = schedule_time
        self.scheduled_count += 1

        freeze = self.freeze_confirmed_weights
        newly: list[int] = []
        seen = {block_id}
        if freeze and block_id != self.genesis_id:
            # Every block transitively approves genesis, so its count stays
            # exact without being walked to.
            self.entries[self.genesis_id].weight += 1
            seen.add(self.genesis_id)
        queue = deque([block_id])
        while queue:
            eid = queue.popleft()
            e = self.entries[eid]
            if freeze and e.confirm_time is not None:
                continue
            e.weight += 1
            if e.confirm_time is None and e.weight >= cw_threshold:
                e.confirm_time = schedule_time
                newly.append(eid)
            for p in e.block.parents:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return newly

    def recount_cw(self, block_id: int) -> int:
        """Brute-force cumulative weight: 1 + scheduled blocks approving this one.

        Pure; walks the stored child edges. Serves as the oracle for the
        incremental accounting done by on_scheduled.
        """
        entry = self.entries.get(block_id)
        if entry is None or entry.schedule_time is None:
            raise PipelineOrderingError(f"block {block_id} not scheduled, no weight defined")
        count = 0
        seen = {block_id}
        queue = deque([block_id])
        while queue:
            e = self.entries[queue.popleft()]
            for c in e.children:
                if c not in seen:
                    seen.add(c)
                    if self.entries[c].schedule_time is not None:
                        count += 1
                    queue.append(c)
        return 1 + count

    # -- past-cone confirmation search ------------------------------------

    def most_recent_confirmed_in_past_cone(
        self, block_id: int, now: float, bfs_horizon: float,
        _stop_above: Optional[float] = None,
    ) -> Optional[float]:
        """Latest local confirmation time reachable from a block, or None.

        Breadth-first over parent links, the block itself included. A branch
        stops at any block issued before ``now - bfs_horizon``. The private
        ``_stop_above`` short-circuits as soon as some visited confirmation
        beats that bound; it never changes whether the result clears the bound,
        only which qualifying value is returned.
        """
        if block_id not in self.entries:
            raise PipelineOrderingError(f"block {block_id} not solid")
        oldest = -math.inf if math.isinf(bfs_horizon) else now - bfs_horizon
        best: Optional[float] = None
        seen = {block_id}
        queue = deque([block_id])
        while queue:
            e = self.entries[queue.popleft()]
            if e.block.issue_time < oldest:
                continue  # pruned: too deep in time, do not expand
            ct = e.confirm_time
            if ct is not None:
                if best is None or ct > best:
                    best = ct
                if _stop_above is not None and ct > _stop_above:
                    return best
            for p in e.block.parents:  # stored ascending: deterministic order
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return best

    def pct(self, block_id: int, schedule_time: float,
            bfs_horizon: float) -> Optional[float]:
        """Past-cone confirmation time: scheduling time minus the latest
        confirmation in the past-cone; None when no confirmed block is in reach.
        """
        latest = self.most_recent_confirmed_in_past_cone(block_id, schedule_time, bfs_horizon)
        if latest is None:
            return None
        value = schedule_time - latest
        if value < 0:
            # Confirmation can land between issue and scheduling when events
            # interleave; a negative gap trivially satisfies any threshold.
            log.debug("clamping negative PCT %.6f for block %d", value, block_id)
            return 0.0
        return value
