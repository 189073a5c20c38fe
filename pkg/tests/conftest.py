"""Shared helpers: random DAG construction and brute-force oracles."""

from __future__ import annotations

import random
from collections import deque

from tanglesim.dag import Block, LedgerView, make_genesis


def build_random_view(rng: random.Random, n_blocks: int, max_parents: int = 3,
                      n_issuers: int = 5, freeze: bool = False) -> LedgerView:
    """A solid random DAG of n_blocks non-genesis blocks with increasing
    issue times; every attach lands solid."""
    view = LedgerView(make_genesis(), freeze_confirmed_weights=freeze)
    ids = [0]
    t = 0.0
    for i in range(1, n_blocks + 1):
        t += rng.random()
        k = rng.randint(1, min(max_parents, len(ids)))
        parents = rng.sample(ids, k)
        view.attach(Block(i, rng.randrange(n_issuers), t, parents))
        ids.append(i)
    return view


def schedule_random_order(view: LedgerView, rng: random.Random,
                          cw_threshold: float, gap: float = 0.25,
                          fraction: float = 1.0) -> list[int]:
    """Schedule a random subset of the view's non-genesis blocks in random
    order (any order is legal once solid); returns the order used."""
    ids = [b for b in view.entries if b != 0]
    rng.shuffle(ids)
    ids = ids[: int(len(ids) * fraction)]
    t = max(e.block.issue_time for e in view.entries.values()) + 1.0
    for bid in ids:
        view.on_scheduled(bid, t, cw_threshold)
        t += gap
    return ids


def ancestors_of(view: LedgerView, block_id: int) -> set[int]:
    """Past-cone of a block (the block excluded), by parent-link BFS."""
    seen: set[int] = set()
    queue = deque([block_id])
    while queue:
        for p in view.entries[queue.popleft()].block.parents:
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen


def exhaustive_weight(view: LedgerView, block_id: int) -> int:
    """Definition-level cumulative weight: 1 + scheduled blocks whose
    past-cone contains block_id."""
    count = 0
    for other, entry in view.entries.items():
        if other == block_id or entry.schedule_time is None:
            continue
        if block_id in ancestors_of(view, other):
            count += 1
    return 1 + count


def exhaustive_latest_confirmation(view: LedgerView, block_id: int) -> float | None:
    """Max confirm time over the full past-cone (block included), no horizon."""
    cone = ancestors_of(view, block_id) | {block_id}
    times = [view.entries[b].confirm_time for b in cone
             if view.entries[b].confirm_time is not None]
    return max(times) if times else None
