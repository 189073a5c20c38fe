"""One node's runtime: issuance, AIMD rate setting, per-issuer inbox with
reputation-scaled drop-head, deficit-round-robin scheduling, and the
post-schedule pipeline (forward, weight update, tip admission).
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

from .dag import AdmitResult, AttachResult, Block, LedgerView
from .tips import TipPool

QUANTUM_EPS = 1e-9


@dataclass(frozen=True)
class NodeMode:
    """Issuing behaviour of a node.

    kind: inactive | content | best_effort | spammer | multirate.
    `fraction` applies to content nodes (share of the guaranteed rate),
    `multiple` to spammers (overshoot factor on the guaranteed rate).
    """

    kind: str
    fraction: float = 0.5
    multiple: float = 10.0

    VALID = ("inactive", "content", "best_effort", "spammer", "multirate")

    def __post_init__(self):
        if self.kind not in self.VALID:
            raise ValueError(f"unknown node mode {self.kind!r}")
        if self.kind == "content" and not 0 < self.fraction <= 1:
            raise ValueError(f"content fraction {self.fraction} outside (0, 1]")
        if self.kind == "spammer" and self.multiple <= 1:
            raise ValueError(f"spammer multiple {self.multiple} must exceed 1")

    @property
    def malicious(self) -> bool:
        return self.kind in ("spammer", "multirate")

    @classmethod
    def parse(cls, text: str) -> "NodeMode":
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        if kind == "content":
            return cls(kind, fraction=float(arg) if arg else 0.5)
        if kind == "spammer":
            return cls(kind, multiple=float(arg) if arg else 10.0)
        if arg:
            raise ValueError(f"mode {kind!r} takes no argument")
        return cls(kind)

    def render(self) -> str:
        if self.kind == "content":
            return f"content:{self.fraction:g}"
        if self.kind == "spammer":
            return f"spammer:{self.multiple:g}"
        return self.kind


class ReputationVector:
    def __init__(self, rep: Sequence[float]):
        if any(r <= 0 for r in rep):
            raise ValueError("reputations must be positive")
        self.rep = list(rep)
        self.total = sum(self.rep)

    def __getitem__(self, node: int) -> float:
        return self.rep[node]

    def __len__(self) -> int:
        return len(self.rep)


def guaranteed_rate(rep: ReputationVector, node: int, nu: float) -> float:
    """Fair share of scheduler throughput: nu * rep_m / sum(rep)."""
    return nu * rep[node] / rep.total


class EnqueueResult(Enum):
    ENQUEUED = "enqueued"
    DUPLICATE_DROPPED = "duplicate_dropped"


class Inbox:
    """Per-issuer FIFO queues with a total-occupancy cap.

    When the cap is exceeded, the eldest block of the issuer with the largest
    reputation-scaled queue is evicted until occupancy fits. Ids stay in `seen`
    after eviction: a dropped block re-gossiped later is dropped again, which
    is exactly the inconsistency the PCT filter has to contend with.
    """

    def __init__(self, n_nodes: int, w_max: int):
        self.queues: list[deque[tuple[Block, float]]] = [deque() for _ in range(n_nodes)]
        self.occupancy = 0
        self.w_max = w_max
        self.seen: set[int] = set()

    def queue_len(self, issuer: int) -> int:
        return len(self.queues[issuer])

    def enqueue(self, rep: ReputationVector, block: Block,
                now: float) -> tuple[EnqueueResult, list[Block]]:
        if block.id in self.seen:
            return EnqueueResult.DUPLICATE_DROPPED, []
        self.seen.add(block.id)
        self.queues[block.issuer].append((block, now))
        self.occupancy += 1
        victims: list[Block] = []
        while self.occupancy > self.w_max:
            victims.append(self._drop_head(rep))
        return EnqueueResult.ENQUEUED, victims

    def _drop_head(self, rep: ReputationVector) -> Block:
        worst = -1
        worst_key = (-math.inf, -math.inf, 0)
        for issuer, q in enumerate(self.queues):
            if not q:
                continue
            key = (len(q) / rep[issuer], len(q), -issuer)
            if key > worst_key:
                worst_key = key
                worst = issuer
        victim, _ = self.queues[worst].popleft()
        self.occupancy -= 1
        return victim


class DrrScheduler:
    """Deficit round robin over the per-issuer queues, one block per service.

    Quanta are proportional to reputation (normalised so the largest is 1).
    Empty queues forfeit their deficit when the cursor passes them; a fresh
    arrival of the cursor credits one quantum. The scheduler is
    work-conserving: a single backlogged queue absorbs every service slot.
    """

    def __init__(self, rep: ReputationVector, nu: float):
        top = max(rep.rep)
        self.quantum = [r / top for r in rep.rep]
        self.deficit = [0.0 for _ in rep.rep]
        self.service_rate = nu
        self.cursor = 0
        self.fresh_visit = True
        self._max_spins = len(rep.rep) * (int(1 / min(self.quantum)) + 2)

    def _advance(self) -> None:
        self.cursor = (self.cursor + 1) % len(self.deficit)
        self.fresh_visit = True

    def next(self, inbox: Inbox) -> Optional[Block]:
        """Serve one block, or None when every queue is empty."""
        if inbox.occupancy == 0:
            return None
        for _ in range(self._max_spins):
            q = inbox.queues[self.cursor]
            if not q:
                self.deficit[self.cursor] = 0.0
                self._advance()
                continue
            if self.fresh_visit:
                self.deficit[self.cursor] += self.quantum[self.cursor]
                self.fresh_visit = False
            if self.deficit[self.cursor] + QUANTUM_EPS >= 1.0:
                block, _ = q.popleft()
                inbox.occupancy -= 1
                self.deficit[self.cursor] -= 1.0
                if not q:
                    self.deficit[self.cursor] = 0.0
                    self._advance()
                return block
            self._advance()
        raise RuntimeError("DRR failed to serve a nonempty inbox")  # unreachable


class RateSetter:
    """AIMD controller for best-effort issuers, clocked every update_period.

    The congestion signal is the node's own-issuer queue length in its own
    inbox. At equal load the queue-length distribution does not depend on the
    reputation class, so a flat block threshold polices everyone with the same
    hazard; the cooldown after a decrease must instead scale with the queue's
    drain time (blocks / guaranteed rate), which the engine precomputes.

    Uncongested (own queue at or below the threshold): add `alpha`.
    Congested: multiply by `beta`, floored at floor_fraction of the
    guaranteed rate, then hold the rate for `backoff_cooldown` seconds so the
    backlog can drain before the next verdict.
    """

    def __init__(self, lambda_tilde: float, alpha: float, beta: float,
                 congestion_threshold: int, floor_fraction: float,
                 update_period: float, backoff_cooldown: float = 0.0):
        self.lambda_tilde = lambda_tilde
        self.alpha = alpha
        self.beta = beta
        self.congestion_threshold = congestion_threshold
        self.floor_fraction = floor_fraction
        self.update_period = update_period
        self.backoff_cooldown = backoff_cooldown
        self.rate = lambda_tilde
        self._hold_until = -math.inf

    def tick(self, own_queue_len: int, now: float = 0.0) -> float:
        if now < self._hold_until:
            return self.rate
        if own_queue_len <= self.congestion_threshold:
            self.rate += self.alpha
        else:
            self.rate = max(self.lambda_tilde * self.floor_fraction,
                            self.beta * self.rate)
            self._hold_until = now + self.backoff_cooldown
        return self.rate


class Node:
    """State and handlers for one simulated node.

    The engine is the only caller; it never interleaves two handlers of the
    same node. `send` delivers a block to a neighbour with link delay and
    `metrics` records lifecycle events; both are wired in by the engine.
    """

    def __init__(self, node_id: int, mode: NodeMode, rep: ReputationVector,
                 neighbors: Sequence[int], view: LedgerView, pool: TipPool,
                 inbox: Inbox, scheduler: DrrScheduler,
                 rate_setter: Optional[RateSetter], cw_threshold: float,
                 k_parents: int, tip_rng: random.Random,
                 send: Callable[[Block, int, float], None], metrics):
        self.id = node_id
        self.mode = mode
        self.rep = rep
        self.neighbors = list(neighbors)
        self.view = view
        self.pool = pool
        self.inbox = inbox
        self.scheduler = scheduler
        self.rate_setter = rate_setter
        self.cw_threshold = cw_threshold
        self.k_parents = k_parents
        self.tip_rng = tip_rng
        self.send = send
        self.metrics = metrics
        self.received_from: dict[int, int] = {}
        self.nu = scheduler.service_rate
        self.admit_counts: dict[AdmitResult, int] = {r: 0 for r in AdmitResult}

    # -- receive path ----------------------------------------------------

    def on_deliver(self, block: Block, from_node: Optional[int], now: float) -> None:
        status, promoted = self.view.attach(block)
        if status is AttachResult.DUPLICATE:
            return
        self.metrics.record_received(block, self.id, now)
        if from_node is not None:
            self.received_from[block.id] = from_node
        # Solidification gate: a block reaches the inbox only once its whole
        # past-cone is known, so the scheduler never emits an unsolid block.
        for bid in promoted:
            self._enqueue(self.view.entries[bid].block, now)

    def _enqueue(self, block: Block, now: float) -> None:
        result, victims = self.inbox.enqueue(self.rep, block, now)
        if result is EnqueueResult.ENQUEUED:
            for victim in victims:
                self.metrics.record_dropped(victim, self.id, now)

    # -- service path ----------------------------------------------------

    def on_service_tick(self, now: float) -> Optional[Block]:
        block = self.scheduler.next(self.inbox)
        if block is None:
            return None
        self.on_scheduled_block(block, now)
        return block

    def on_scheduled_block(self, block: Block, now: float) -> AdmitResult:
        """Forward, account weight, then attempt tip admission."""
        arrived_from = self.received_from.pop(block.id, None)
        for nb in self.neighbors:
            if nb != arrived_from and nb != block.issuer:
                self.send(block, nb, now)
        newly_confirmed = self.view.on_scheduled(block.id, now, self.cw_threshold)
        self.metrics.record_scheduled(block, self.id, now)
        for bid in newly_confirmed:
            self.metrics.record_confirmed_local(bid, self.id, now)
        verdict = self.pool.admit(self.view, block.id, now)
        self.admit_counts[verdict] += 1
        self.metrics.record_admission(block, self.id, now, verdict)
        if verdict is AdmitResult.ADMITTED:
            self.metrics.record_tip_admitted(block, self.id, now)
        return verdict

    # -- issue path --------------------------------------------------------

    def issue_rate(self) -> float:
        """Current offered rate in blocks/s for Poisson issuance."""
        kind = self.mode.kind
        if kind == "inactive":
            return 0.0
        lam_tilde = guaranteed_rate(self.rep, self.id, self.nu)
        if kind == "content":
            return self.mode.fraction * lam_tilde
        if kind == "best_effort":
            return self.rate_setter.rate
        if kind == "spammer":
            return self.mode.multiple * lam_tilde
        raise RuntimeError(f"mode {kind} does not issue through the node pipeline")

    def issue_block(self, block_id: int, now: float) -> Block:
        """Create a block on freshly selected tips and push it through the
        node's own inbox so it faces the same scheduler as everyone else."""
        parents = self.pool.select_tips(self.k_parents, self.tip_rng)
        block = Block(block_id, self.id, now, parents)
        self.metrics.record_issued(block, self.id, now)
        self.on_deliver(block, None, now)
        return block

    def on_rate_tick(self, now: float) -> None:
        if self.rate_setter is not None:
            self.rate_setter.tick(self.inbox.queue_len(self.id), now)
