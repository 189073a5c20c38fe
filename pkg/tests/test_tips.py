import math
import random
from collections import Counter

import pytest

from tanglesim.dag import AdmitResult, Block, LedgerView, PipelineOrderingError, make_genesis
from tanglesim.tips import TipPool

from conftest import build_random_view


def make_pool(**kwargs):
    defaults = dict(pct_threshold=25.0, bfs_horizon=80.0, pct_enabled=True)
    defaults.update(kwargs)
    pool = TipPool(**defaults)
    pool.seed(0)
    return pool


def solid_block(view, bid, issuer, t, parents):
    blk = Block(bid, issuer, t, parents)
    status, _ = view.attach(blk)
    return blk


class TestAdmit:
    def setup_view(self):
        view = LedgerView(make_genesis())
        solid_block(view, 1, 0, 70.0, [0])
        view.entries[1].confirm_time = 80.0
        return view

    def test_fresh_anchor_admitted(self):
        view = self.setup_view()
        pool = make_pool()
        solid_block(view, 2, 0, 95.0, [1])
        view.on_scheduled(2, 100.0, 10**9)
        assert pool.admit(view, 2, 100.0) is AdmitResult.ADMITTED
        assert 2 in pool

    def test_stale_anchor_rejected(self):
        view = self.setup_view()
        pool = make_pool()
        solid_block(view, 2, 0, 115.0, [1])
        view.on_scheduled(2, 120.0, 10**9)
        # latest confirmation at 80, scheduled at 120: PCT 40 >= 25
        assert pool.admit(view, 2, 120.0) is AdmitResult.REJECTED_PCT
        assert 2 not in pool

    def test_pct_disabled_admits_everything(self):
        view = self.setup_view()
        pool = make_pool(pct_enabled=False)
        solid_block(view, 2, 0, 115.0, [1])
        view.on_scheduled(2, 500.0, 10**9)
        assert pool.admit(view, 2, 500.0) is AdmitResult.ADMITTED

    def test_no_anchor_rejected_after_bootstrap(self):
        view = LedgerView(make_genesis())
        pool = make_pool()
        solid_block(view, 1, 0, 100.0, [0])
        view.on_scheduled(1, 200.0, 10**9)
        # only confirmed block is genesis, outside the 80 s horizon at t=200
        assert pool.admit(view, 1, 200.0) is AdmitResult.REJECTED_NO_CONFIRMED_ANCESTOR

    def test_bootstrap_window_tolerates_missing_anchor(self):
        view = LedgerView(make_genesis())
        view.entries[0].confirm_time = None  # contrived: no anchor at all
        pool = make_pool()
        solid_block(view, 1, 0, 1.0, [0])
        view.on_scheduled(1, 2.0, 10**9)
        assert pool.admit(view, 1, 2.0) is AdmitResult.ADMITTED

    def test_parents_removed_on_admission(self):
        view = LedgerView(make_genesis())
        pool = make_pool()
        solid_block(view, 1, 0, 1.0, [0])
        view.on_scheduled(1, 2.0, 10**9)
        pool.admit(view, 1, 2.0)
        assert pool.tips() == [1]  # genesis evicted by its approver
        solid_block(view, 2, 1, 2.5, [1])
        solid_block(view, 3, 2, 3.0, [1])
        view.on_scheduled(2, 3.0, 10**9)
        view.on_scheduled(3, 3.5, 10**9)
        pool.admit(view, 2, 3.0)
        pool.admit(view, 3, 3.5)
        assert sorted(pool.tips()) == [2, 3]

    def test_unscheduled_block_is_a_pipeline_bug(self):
        view = LedgerView(make_genesis())
        pool = make_pool()
        solid_block(view, 1, 0, 1.0, [0])
        with pytest.raises(PipelineOrderingError):
            pool.admit(view, 1, 2.0)

    def test_rejected_never_reenters(self):
        view = self.setup_view()
        pool = make_pool()
        solid_block(view, 2, 0, 115.0, [1])
        view.on_scheduled(2, 120.0, 10**9)
        pool.admit(view, 2, 120.0)
        view.entries[1].confirm_time = 119.0  # cone confirms later anyway
        assert 2 not in pool

    def test_admission_matches_pct_operation(self):
        """The pool's decision must equal thresholding the pct() value."""
        for seed in range(12):
            rng = random.Random(seed)
            view = build_random_view(rng, 90)
            for bid in view.entries:
                if rng.random() < 0.35:
                    view.entries[bid].confirm_time = rng.uniform(0, 120)
            now = max(e.block.issue_time for e in view.entries.values()) + rng.uniform(0, 40)
            for bid in list(view.entries):
                if view.entries[bid].schedule_time is None:
                    view.entries[bid].schedule_time = now
                pool = make_pool()
                verdict = pool.admit(view, bid, now)
                pct = view.pct(bid, now, 80.0)
                if pct is None:
                    expect = (AdmitResult.ADMITTED if now < 25.0
                              else AdmitResult.REJECTED_NO_CONFIRMED_ANCESTOR)
                elif pct < 25.0:
                    expect = AdmitResult.ADMITTED
                else:
                    expect = AdmitResult.REJECTED_PCT
                assert verdict is expect, f"seed {seed} block {bid} pct={pct}"


class TestRedBlockStarvation:
    def test_descendants_of_unconfirmable_branch_eventually_fail(self):
        """A branch rooted at a block that never confirms anywhere loses
        admission rights once its last confirmed ancestor ages out: first by
        the PCT threshold, then (past the BFS horizon) for lack of any anchor.
        """
        view = LedgerView(make_genesis())
        pool = make_pool()
        anchor = solid_block(view, 1, 0, 5.0, [0])
        view.entries[1].confirm_time = 20.0
        red = solid_block(view, 2, 1, 10.0, [1])
        view.on_scheduled(2, 12.0, 10**9)  # scheduled by a minority; never confirms

        d1 = solid_block(view, 3, 1, 30.0, [2])
        view.on_scheduled(3, 31.0, 10**9)
        assert pool.admit(view, 3, 31.0) is AdmitResult.ADMITTED  # anchor 11 s old

        d2 = solid_block(view, 4, 1, 50.0, [3])
        view.on_scheduled(4, 51.0, 10**9)
        assert pool.admit(view, 4, 51.0) is AdmitResult.REJECTED_PCT  # anchor 31 s old

        # past pct_threshold + bfs_horizon after the red block: nothing anchors
        t_late = 12.0 + 25.0 + 80.0 + 1.0
        d3 = solid_block(view, 5, 1, t_late - 1.0, [4])
        view.on_scheduled(5, t_late, 10**9)
        assert pool.admit(view, 5, t_late) is AdmitResult.REJECTED_NO_CONFIRMED_ANCESTOR


class TestSelectTips:
    def test_singleton_pool_returns_genesis(self):
        pool = make_pool()
        assert pool.select_tips(2, random.Random(1)) == [0]

    def test_whole_pool_when_k_matches(self):
        pool = make_pool()
        for bid in range(1, 6):
            pool._insert(bid)
        got = pool.select_tips(6, random.Random(1))
        assert sorted(got) == [0, 1, 2, 3, 4, 5]

    def test_selection_does_not_remove(self):
        pool = make_pool()
        pool._insert(1)
        pool.select_tips(2, random.Random(1))
        assert pool.tip_count() == 2

    def test_uniformity(self):
        pool = TipPool(25.0, 80.0)
        for bid in range(10):
            pool._insert(bid)
        rng = random.Random(42)
        counts = Counter()
        draws = 10_000
        for _ in range(draws):
            picked = pool.select_tips(2, rng)
            assert len(set(picked)) == 2
            counts.update(picked)
        for bid in range(10):
            assert math.isclose(counts[bid] / draws, 0.2, abs_tol=0.02)

    def test_empty_pool_is_an_error(self):
        pool = TipPool(25.0, 80.0)
        with pytest.raises(RuntimeError):
            pool.select_tips(2, random.Random(1))


class TestTipCount:
    def test_fresh_pool_has_genesis(self):
        assert make_pool().tip_count() == 1

    def test_single_approver_replaces_genesis(self):
        view = LedgerView(make_genesis())
        pool = make_pool()
        solid_block(view, 1, 0, 1.0, [0])
        view.on_scheduled(1, 2.0, 10**9)
        pool.admit(view, 1, 2.0)
        assert pool.tip_count() == 1

    def test_two_approvers_of_genesis(self):
        view = LedgerView(make_genesis())
        pool = make_pool()
        for bid in (1, 2):
            solid_block(view, bid, bid, 1.0 + bid, [0])
            view.on_scheduled(bid, 2.0 + bid, 10**9)
            pool.admit(view, bid, 2.0 + bid)
        assert pool.tip_count() == 2
