"""Malicious behaviours: the spammer and the multi-rate attacker.

The spammer deviates only in rate setting: it issues far above its guaranteed
rate but floods through its own pipeline like everyone else. The multi-rate
attacker deviates in forwarding: it maintains one honest local view, but sends
an independent, individually rate-compliant stream of fresh blocks to each
neighbour, so no single link betrays the aggregate overload.
"""

from __future__ import annotations

from .dag import Block
from .node import Node, guaranteed_rate


class MultiRateState:
    """Bookkeeping for the per-neighbour streams (disjoint by construction:
    every block is created for exactly one target)."""

    def __init__(self, neighbors):
        self.stream_blocks: dict[int, list[int]] = {u: [] for u in neighbors}

    def stream_of(self, neighbor: int) -> list[int]:
        return self.stream_blocks[neighbor]


def spammer_issue(node: Node, block_id: int, now: float) -> Block:
    """One spam block: tips from the attacker's honestly maintained pool,
    pushed through the attacker's own inbox like any other issuance.

    The deviation is purely the cadence (multiple * guaranteed rate). The
    overload backs up the attacker's own oversized queue first, so the spam
    that does trickle out has already aged past the admission window of every
    honest tip pool, and whatever keeps flooding is shed by drop-head."""
    return node.issue_block(block_id, now)


def spammer_rate(node: Node) -> float:
    return node.mode.multiple * guaranteed_rate(node.rep, node.id, node.nu)


def multirate_issue(node: Node, state: MultiRateState, neighbor: int,
                    block_id: int, now: float) -> Block:
    """One block of the stream dedicated to `neighbor`.

    Sent only to that neighbour and never through the attacker's own
    scheduler; parents still come from the attacker's local tip pool.
    """
    parents = node.pool.select_tips(node.k_parents, node.tip_rng)
    block = Block(block_id, node.id, now, parents)
    node.metrics.record_issued(block, node.id, now)
    node.send(block, neighbor, now)
    state.stream_blocks[neighbor].append(block.id)
    return block


def multirate_stream_rate(node: Node) -> float:
    """Each stream individually obeys the rate control policy."""
    return guaranteed_rate(node.rep, node.id, node.nu)
