import math
import random

import pytest

from tanglesim.dag import AdmitResult, Block, LedgerView, make_genesis
from tanglesim.node import (DrrScheduler, EnqueueResult, Inbox, Node, NodeMode,
                            RateSetter, ReputationVector, guaranteed_rate)
from tanglesim.tips import TipPool


def blk(bid, issuer, t=1.0, parents=(0,)):
    return Block(bid, issuer, t, parents)


class TestNodeMode:
    def test_parse_roundtrip(self):
        assert NodeMode.parse("content:0.5").fraction == 0.5
        assert NodeMode.parse("spammer:10").multiple == 10
        assert NodeMode.parse("best_effort").kind == "best_effort"
        assert NodeMode.parse("inactive").render() == "inactive"
        assert NodeMode.parse("content:0.25").render() == "content:0.25"

    def test_invalid_modes(self):
        with pytest.raises(ValueError):
            NodeMode.parse("turbo")
        with pytest.raises(ValueError):
            NodeMode.parse("content:1.5")
        with pytest.raises(ValueError):
            NodeMode.parse("spammer:0.5")
        with pytest.raises(ValueError):
            NodeMode.parse("inactive:3")

    def test_malicious_flag(self):
        assert NodeMode.parse("spammer:4").malicious
        assert NodeMode.parse("multirate").malicious
        assert not NodeMode.parse("content:0.5").malicious


class TestGuaranteedRate:
    def test_direct_formula(self):
        rep = ReputationVector([2.0, 18.0])
        assert guaranteed_rate(rep, 0, 20.0) == pytest.approx(2.0)

    def test_single_node_gets_full_rate(self):
        rep = ReputationVector([7.3])
        assert guaranteed_rate(rep, 0, 20.0) == pytest.approx(20.0)

    def test_zipf_top_node(self):
        from tanglesim.engine import sample_reputations
        n, s, nu = 20, 0.9, 20.0
        rep = sample_reputations(n, s)
        harmonic = sum(r ** (-s) for r in range(1, n + 1))
        expected = nu * (n / harmonic) / n  # top rank weight normalised to sum n
        assert guaranteed_rate(rep, 0, nu) == pytest.approx(expected)


class TestInbox:
    def test_enqueue_below_cap(self):
        rep = ReputationVector([1.0, 1.0])
        inbox = Inbox(2, w_max=200)
        for i in range(199):
            inbox.enqueue(rep, blk(i + 1, 0), float(i))
        result, victims = inbox.enqueue(rep, blk(500, 1), 200.0)
        assert result is EnqueueResult.ENQUEUED and victims == []
        assert inbox.occupancy == 200

    def test_duplicate_dropped_silently(self):
        rep = ReputationVector([1.0])
        inbox = Inbox(1, w_max=10)
        inbox.enqueue(rep, blk(1, 0), 0.0)
        result, victims = inbox.enqueue(rep, blk(1, 0), 1.0)
        assert result is EnqueueResult.DUPLICATE_DROPPED
        assert inbox.occupancy == 1

    def test_drop_head_targets_largest_scaled_queue(self):
        # A: rep 10, 150 blocks (scaled 15); B: rep 1, 50 blocks (scaled 50)
        rep = ReputationVector([10.0, 1.0])
        inbox = Inbox(2, w_max=200)
        for i in range(150):
            inbox.enqueue(rep, blk(i + 1, 0), float(i))
        for i in range(50):
            inbox.enqueue(rep, blk(1000 + i, 1), float(i))
        result, victims = inbox.enqueue(rep, blk(5000, 0), 300.0)
        assert result is EnqueueResult.ENQUEUED
        assert [v.id for v in victims] == [1000]  # B's eldest
        assert inbox.occupancy == 200

    def test_drop_head_tie_breaks(self):
        # equal scaled length: larger queue loses; then smaller node id
        rep = ReputationVector([2.0, 1.0])
        inbox = Inbox(2, w_max=2)
        inbox.enqueue(rep, blk(1, 0), 0.0)
        inbox.enqueue(rep, blk(2, 0), 0.0)  # A: len 2, scaled 1.0
        _, victims = inbox.enqueue(rep, blk(3, 1), 0.0)  # B: len 1, scaled 1.0
        assert [v.id for v in victims] == [1]
        rep = ReputationVector([1.0, 1.0])
        inbox = Inbox(2, w_max=2)
        inbox.enqueue(rep, blk(1, 0), 0.0)
        inbox.enqueue(rep, blk(2, 1), 0.0)
        _, victims = inbox.enqueue(rep, blk(3, 1), 0.0)
        # B now len 2 > A len 1
        assert victims[0].issuer == 1 and victims[0].id == 2

    def test_victims_stay_seen(self):
        rep = ReputationVector([1.0, 1.0])
        inbox = Inbox(2, w_max=1)
        inbox.enqueue(rep, blk(1, 0), 0.0)
        _, victims = inbox.enqueue(rep, blk(2, 1), 0.0)
        victim = victims[0]
        result, _ = inbox.enqueue(rep, victim, 5.0)
        assert result is EnqueueResult.DUPLICATE_DROPPED

    def test_flood_victims_come_from_flooder(self):
        # low-rep issuer floods a served inbox; capacity holds after every
        # enqueue and the drop-head victims are the flooder's blocks
        rep = ReputationVector([5.0, 5.0, 0.5])
        inbox = Inbox(3, w_max=50)
        drr = DrrScheduler(rep, nu=20.0)
        rng = random.Random(9)
        victims = []
        next_id = 1
        for step in range(1200):
            issuer = 2 if rng.random() < 0.8 else rng.randrange(2)
            _, v = inbox.enqueue(rep, blk(next_id, issuer), float(step))
            next_id += 1
            victims.extend(v)
            assert inbox.occupancy <= 50
            if step % 2 == 0:  # service at half the arrival rate
                drr.next(inbox)
        assert len(victims) > 100
        flood_share = sum(1 for v in victims if v.issuer == 2) / len(victims)
        assert flood_share >= 0.95


class TestDrr:
    def backlogged_inbox(self, rep, counts):
        inbox = Inbox(len(rep.rep), w_max=10 ** 9)
        next_id = 1
        for issuer, count in enumerate(counts):
            for _ in range(count):
                inbox.enqueue(rep, blk(next_id, issuer), 0.0)
                next_id += 1
        return inbox

    def test_single_queue_served_every_call(self):
        rep = ReputationVector([1.0, 5.0])
        inbox = self.backlogged_inbox(rep, [300, 0])
        drr = DrrScheduler(rep, nu=20.0)
        for _ in range(300):
            assert drr.next(inbox) is not None
        assert drr.next(inbox) is None

    def test_idle_when_empty(self):
        rep = ReputationVector([1.0, 1.0])
        drr = DrrScheduler(rep, nu=20.0)
        assert drr.next(self.backlogged_inbox(rep, [0, 0])) is None

    def test_service_ratio_tracks_reputation(self):
        rep = ReputationVector([3.0, 1.0])
        inbox = self.backlogged_inbox(rep, [20000, 20000])
        drr = DrrScheduler(rep, nu=20.0)
        served = [0, 0]
        for _ in range(10_000):
            block = drr.next(inbox)
            served[block.issuer] += 1
        ratio = served[0] / served[1]
        assert abs(ratio - 3.0) <= 0.15  # within 5%

    def test_work_conserving_for_low_rep_queue(self):
        rep = ReputationVector([10.0, 0.5])
        inbox = self.backlogged_inbox(rep, [0, 100])
        drr = DrrScheduler(rep, nu=20.0)
        for _ in range(100):
            assert drr.next(inbox).issuer == 1

    def test_fifo_within_queue(self):
        rep = ReputationVector([1.0])
        inbox = self.backlogged_inbox(rep, [10])
        drr = DrrScheduler(rep, nu=20.0)
        ids = [drr.next(inbox).id for _ in range(10)]
        assert ids == sorted(ids)


class TestRateSetter:
    def make(self, **kw):
        defaults = dict(lambda_tilde=2.0, alpha=0.02, beta=0.7,
                        congestion_threshold=10, floor_fraction=0.5,
                        update_period=0.1)
        defaults.update(kw)
        return RateSetter(**defaults)

    def test_additive_phase(self):
        rs = self.make()
        for _ in range(10):
            rs.tick(own_queue_len=3)
        assert rs.rate == pytest.approx(2.0 + 10 * 0.02)

    def test_multiplicative_decrease(self):
        rs = self.make()
        rs.rate = 4.0
        rs.tick(own_queue_len=11)
        assert rs.rate == pytest.approx(2.8)

    def test_floor_fixed_point(self):
        rs = self.make()
        for i in range(200):
            rs.tick(own_queue_len=999, now=float(i))
        assert rs.rate == pytest.approx(1.0)  # 0.5 * lambda_tilde

    def test_threshold_boundary_is_uncongested(self):
        rs = self.make()
        rs.tick(own_queue_len=10)
        assert rs.rate == pytest.approx(2.02)

    def test_backoff_cooldown_freezes_rate(self):
        rs = self.make(backoff_cooldown=5.0)
        rs.rate = 4.0
        rs.tick(own_queue_len=99, now=0.0)
        assert rs.rate == pytest.approx(2.8)
        rs.tick(own_queue_len=99, now=1.0)  # still draining: hold
        rs.tick(own_queue_len=0, now=2.0)   # no increase during the hold either
        assert rs.rate == pytest.approx(2.8)
        rs.tick(own_queue_len=99, now=5.0)
        assert rs.rate == pytest.approx(2.8 * 0.7)

    def test_sawtooth_never_below_floor_and_additive_segments_increase(self):
        rs = self.make()
        rng = random.Random(11)
        floor = 0.5 * rs.lambda_tilde
        previous = rs.rate
        for step in range(5000):
            congested = rng.random() < 0.4
            rate = rs.tick(own_queue_len=99 if congested else 0, now=0.1 * step)
            assert rate >= floor - 1e-12
            if not congested:
                assert rate > previous  # additive segments strictly increase
            previous = rate


class FakeMetrics:
    def __init__(self):
        self.events = []

    def __getattr__(self, name):
        if name.startswith("record_"):
            def recorder(*args, **kwargs):
                self.events.append((name[len("record_"):], args))
            return recorder
        raise AttributeError(name)

    def of(self, kind):
        return [e for e in self.events if e[0] == kind]


def make_node(node_id=0, mode="best_effort", n=5, neighbors=(1, 2, 3, 4),
              rep=None, pct_enabled=True, w_max=200):
    rep = rep or ReputationVector([1.0] * n)
    view = LedgerView(make_genesis(), freeze_confirmed_weights=True)
    pool = TipPool(25.0, 80.0, pct_enabled=pct_enabled)
    pool.seed(0)
    inbox = Inbox(n, w_max)
    inbox.seen.add(0)
    sent = []
    metrics = FakeMetrics()
    node = Node(
        node_id=node_id, mode=NodeMode.parse(mode), rep=rep,
        neighbors=list(neighbors), view=view, pool=pool, inbox=inbox,
        scheduler=DrrScheduler(rep, nu=20.0),
        rate_setter=RateSetter(4.0, 0.04, 0.7, 4, 0.5, 0.1),
        cw_threshold=25, k_parents=2, tip_rng=random.Random(3),
        send=lambda block, to, now: sent.append((block.id, to, now)),
        metrics=metrics)
    return node, sent, metrics


class TestNodePipeline:
    def test_forward_excludes_arrival_link_and_issuer(self):
        node, sent, _ = make_node()
        block = blk(1, 3, t=0.5)
        node.on_deliver(block, from_node=3, now=0.6)
        node.on_service_tick(0.65)
        # degree 4 node, received from issuer 3 over link 3: forwards to 3 others
        assert sorted(to for _, to, _ in sent) == [1, 2, 4]

    def test_own_block_forwarded_everywhere(self):
        node, sent, _ = make_node()
        node.issue_block(1, 0.5)
        node.on_service_tick(0.55)
        assert sorted(to for _, to, _ in sent) == [1, 2, 3, 4]

    def test_rejected_block_still_forwarded_and_weighted(self):
        node, sent, metrics = make_node()
        stale = blk(1, 2, t=0.5)
        node.on_deliver(stale, 2, 100.0)  # genesis anchor now 100 s old
        verdict = node.on_scheduled_block(stale, 200.0)
        assert verdict is not AdmitResult.ADMITTED
        assert len(sent) == 3
        assert node.view.entries[1].schedule_time == 200.0
        assert 1 not in node.pool
        assert metrics.of("scheduled")

    def test_duplicate_delivery_ignored(self):
        node, _, metrics = make_node()
        block = blk(1, 2, t=0.5)
        node.on_deliver(block, 2, 0.6)
        node.on_deliver(block, 4, 0.7)
        assert len(metrics.of("received")) == 1
        assert node.inbox.occupancy == 1

    def test_solidification_gates_the_inbox(self):
        node, _, _ = make_node()
        child = blk(2, 1, t=1.0, parents=(1,))
        parent = blk(1, 1, t=0.5)
        node.on_deliver(child, 1, 1.1)
        assert node.inbox.occupancy == 0  # held back until solid
        node.on_deliver(parent, 1, 1.2)
        assert node.inbox.occupancy == 2
        first = node.on_service_tick(1.3)
        assert first.id == 1  # enqueue order follows promotion order

    def test_issue_goes_through_own_inbox(self):
        node, sent, metrics = make_node()
        block = node.issue_block(1, 2.0)
        assert node.inbox.queue_len(0) == 1
        assert not sent  # nothing leaves before the scheduler emits it
        assert metrics.of("issued") and metrics.of("received")
        assert block.parents == (0,)

    def test_drop_victims_reported(self):
        node, _, metrics = make_node(w_max=3)
        for i in range(5):
            node.on_deliver(blk(i + 1, 2, t=0.1 * (i + 1)), 2, 0.1 * (i + 1))
        assert node.inbox.occupancy == 3
        assert len(metrics.of("dropped")) == 2

    def test_issue_rates_by_mode(self):
        rep = ReputationVector([1.0] * 5)  # guaranteed 4.0 at nu 20
        node, _, _ = make_node(mode="content:0.5", rep=rep)
        assert node.issue_rate() == pytest.approx(2.0)
        node, _, _ = make_node(mode="spammer:5", rep=rep)
        assert node.issue_rate() == pytest.approx(20.0)
        node, _, _ = make_node(mode="inactive", rep=rep)
        assert node.issue_rate() == 0.0
        node, _, _ = make_node(mode="best_effort", rep=rep)
        node.rate_setter.rate = 5.5
        assert node.issue_rate() == pytest.approx(5.5)

    def test_rate_tick_reads_own_queue(self):
        node, _, _ = make_node()
        for i in range(6):  # over the congestion threshold of 4
            node.on_deliver(blk(i + 1, 0, t=0.1), 1, 0.2)
        before = node.rate_setter.rate
        node.on_rate_tick(1.0)
        assert node.rate_setter.rate < before
