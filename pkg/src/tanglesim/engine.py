"""Deterministic discrete-event engine: topology, reputation law, event loop,
scenario orchestration and Monte Carlo replication.

All randomness flows from one root seed through named substreams, so a
(config, seed) pair fully determines every output byte. Events execute in
(time, insertion-sequence) order; link delivery is send time plus link delay.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import adversary
from .config import ScenarioConfig
from .dag import Block, LedgerView, make_genesis
from .metrics import (MetricsRecorder, RunResult, coefficient_of_variation,
                      honest_scaled_series, mean_tip_series, slope)
from .node import (DrrScheduler, Inbox, Node, RateSetter, ReputationVector,
                   guaranteed_rate)
from .tips import TipPool

log = logging.getLogger(__name__)

# event kinds, processed in (time, seq) order
DELIVER, SERVICE, ISSUE, RATE, SAMPLE, MULTIRATE = range(6)


class EngineError(RuntimeError):
    pass


def sample_reputations(n: int, s: float,
                       rng: Optional[random.Random] = None) -> ReputationVector:
    """Zipf-law reputations by rank: node r (0-based) gets weight (r+1)^-s,
    normalised so the total equals n. The law is exact, not sampled; `rng` is
    accepted for interface uniformity."""
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = [(r + 1) ** (-s) for r in range(n)]
    scale = n / sum(raw)
    return ReputationVector([w * scale for w in raw])


@dataclass
class Topology:
    n: int
    degree: int
    adjacency: list[list[int]]
    link_delay: dict[tuple[int, int], float]

    def neighbors(self, node: int) -> list[int]:
        return self.adjacency[node]

    def delay(self, a: int, b: int) -> float:
        return self.link_delay[(a, b) if a < b else (b, a)]


def _pair_stubs(n: int, degree: int, rng: random.Random) -> Optional[set[tuple[int, int]]]:
    """One attempt of the configuration/pairing model (NetworkX-style):
    repeatedly pair leftover stubs, failing when only self-loops or repeated
    edges remain."""
    edges: set[tuple[int, int]] = set()
    stubs = list(range(n)) * degree
    while stubs:
        potential: dict[int, int] = defaultdict(int)
        rng.shuffle(stubs)
        it = iter(stubs)
        for s1, s2 in zip(it, it):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((s1, s2))
            else:
                potential[s1] += 1
                potential[s2] += 1
        if potential:
            nodes = sorted(potential)
            if not any((a, b) not in edges
                       for i, a in enumerate(nodes) for b in nodes[i + 1:]):
                return None  # no suitable edge remains: attempt failed
        stubs = [node for node, count in sorted(potential.items()) for _ in range(count)]
    return edges


def _connected(n: int, adjacency: list[list[int]]) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        for nb in adjacency[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == n


def build_topology(n: int, degree: int, d_min: float, d_max: float,
                   rng: random.Random, max_attempts: int = 10000) -> Topology:
    """Connected random regular graph with symmetric per-link delays drawn
    once, uniform on [d_min, d_max]."""
    if (n * degree) % 2 != 0:
        raise ValueError("n * degree must be even")
    if not 0 < degree < n:
        raise ValueError("degree must satisfy 0 < degree < n")
    for _ in range(max_attempts):
        edges = _pair_stubs(n, degree, rng)
        if edges is None:
            continue
        adjacency: list[list[int]] = [[] for _ in range(n)]
        for a, b in sorted(edges):
            adjacency[a].append(b)
            adjacency[b].append(a)
        if not _connected(n, adjacency):
            continue
        delays = {edge: rng.uniform(d_min, d_max) for edge in sorted(edges)}
        return Topology(n, degree, [sorted(a) for a in adjacency], delays)
    raise EngineError(
        f"could not build a connected {degree}-regular graph on {n} nodes "
        f"after {max_attempts} attempts; try another seed")


class Simulation:
    """One seeded run of a scenario."""

    def __init__(self, config: ScenarioConfig, seed: int, run_index: int = 0):
        config.validate()
        self.config = config
        self.seed = seed
        self.run_index = run_index
        self._heap: list[tuple] = []
        self._seq = 0
        self._next_block_id = 1  # 0 is genesis
        self.clock = 0.0

        self.reputations = sample_reputations(config.n, config.zipf_exponent,
                                              self._rng("reputations"))
        self.topology = build_topology(config.n, config.degree, config.delay_min_s,
                                       config.delay_max_s, self._rng("topology"))
        self._message_delay_rng = self._rng("delays") if config.per_message_delays else None

        modes = config.modes()
        self.metrics = MetricsRecorder(
            n_nodes=config.n,
            honest=[not m.malicious for m in modes],
            reps=self.reputations.rep,
            mode_names=[m.render() for m in modes],
            rate_window_s=config.rate_window_s,
        )

        genesis = make_genesis()
        self.nodes: list[Node] = []
        self.multirate_states: dict[int, adversary.MultiRateState] = {}
        for i in range(config.n):
            mode = modes[i]
            view = LedgerView(genesis, freeze_confirmed_weights=True)
            pool = TipPool(config.pct_threshold_s, config.bfs_horizon_s,
                           pct_enabled=config.pct_enabled)
            pool.seed(genesis.id)
            inbox = Inbox(config.n, config.max_inbox)
            inbox.seen.add(genesis.id)
            scheduler = DrrScheduler(self.reputations, config.nu)
            rate_setter = None
            if mode.kind == "best_effort":
                lam = guaranteed_rate(self.reputations, i, config.nu)
                threshold = config.aimd.congestion_threshold
                rate_setter = RateSetter(
                    lambda_tilde=lam,
                    alpha=config.aimd.alpha_fraction * lam,
                    beta=config.aimd.beta,
                    congestion_threshold=threshold,
                    floor_fraction=config.aimd.floor_fraction,
                    update_period=config.aimd.update_period_s,
                    backoff_cooldown=config.aimd.backoff_cooldown_factor * threshold / lam)
            node = Node(
                node_id=i, mode=mode, rep=self.reputations,
                neighbors=self.topology.neighbors(i), view=view, pool=pool,
                inbox=inbox, scheduler=scheduler, rate_setter=rate_setter,
                cw_threshold=config.cw_threshold, k_parents=config.k_parents,
                tip_rng=self._rng(f"tips/{i}"),
                send=self._make_sender(i), metrics=self.metrics)
            self.nodes.append(node)
            if mode.kind == "multirate":
                self.multirate_states[i] = adversary.MultiRateState(node.neighbors)
        self._issue_rngs = [self._rng(f"issue/{i}") for i in range(config.n)]
        self._stream_rngs = {
            (i, u): self._rng(f"multirate/{i}/{u}")
            for i, st in self.multirate_states.items() for u in st.stream_blocks}

    def _rng(self, name: str) -> random.Random:
        # String seeding hashes via sha512: stable across platforms and runs.
        return random.Random(f"{self.seed}/{name}")

    def _make_sender(self, frm: int):
        def send(block: Block, to: int, now: float) -> None:
            if self._message_delay_rng is not None:
                delay = self._message_delay_rng.uniform(
                    self.config.delay_min_s, self.config.delay_max_s)
            else:
                delay = self.topology.delay(frm, to)
            self._push(now + delay, DELIVER, to, (block, frm))
        return send

    def _push(self, time: float, kind: int, node: int, payload: Any = None) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, node, payload))
        self._seq += 1

    def _fresh_block_id(self) -> int:
        bid = self._next_block_id
        self._next_block_id += 1
        return bid

    # -- the event loop ----------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.config
        duration = cfg.duration_s
        if duration > 0:
            self._seed_initial_events()
        heap = self._heap
        service_gap = 1.0 / cfg.nu
        while heap and heap[0][0] <= duration:
            time, _, kind, node_id, payload = heapq.heappop(heap)
            if time < self.clock:
                raise EngineError(f"causality violated: event at {time} < clock {self.clock}")
            self.clock = time
            if kind == DELIVER:
                block, frm = payload
                self.nodes[node_id].on_deliver(block, frm, time)
            elif kind == SERVICE:
                self.nodes[node_id].on_service_tick(time)
                self._push(time + service_gap, SERVICE, node_id)
            elif kind == ISSUE:
                node = self.nodes[node_id]
                if node.mode.kind == "spammer":
                    adversary.spammer_issue(node, self._fresh_block_id(), time)
                else:
                    node.issue_block(self._fresh_block_id(), time)
                rate = node.issue_rate()
                self._push(time + self._issue_rngs[node_id].expovariate(rate),
                           ISSUE, node_id)
            elif kind == RATE:
                node = self.nodes[node_id]
                node.on_rate_tick(time)
                self._push(time + node.rate_setter.update_period, RATE, node_id)
            elif kind == MULTIRATE:
                neighbor = payload
                node = self.nodes[node_id]
                adversary.multirate_issue(node, self.multirate_states[node_id],
                                          neighbor, self._fresh_block_id(), time)
                gap = self._stream_rngs[(node_id, neighbor)].expovariate(
                    adversary.multirate_stream_rate(node))
                self._push(time + gap, MULTIRATE, node_id, neighbor)
            elif kind == SAMPLE:
                self.metrics.sample(time, [n.pool.tip_count() for n in self.nodes])
                self._push(time + cfg.metrics_sample_period_s, SAMPLE, -1)
            else:
                raise EngineError(f"unknown event kind {kind}")
        if duration > 0 and not heap:
            raise EngineError("event queue exhausted before simulation end")
        result = RunResult(config_dict=cfg.to_dict(), seed=self.seed,
                           run_index=self.run_index, metrics=self.metrics)
        result.summary = self._summarize()
        return result

    def _seed_initial_events(self) -> None:
        cfg = self.config
        self._push(0.0, SAMPLE, -1)
        for i, node in enumerate(self.nodes):
            self._push(1.0 / cfg.nu, SERVICE, i)
            if node.mode.kind == "multirate":
                for u in node.neighbors:
                    gap = self._stream_rngs[(i, u)].expovariate(
                        adversary.multirate_stream_rate(node))
                    self._push(gap, MULTIRATE, i, u)
            elif node.mode.kind != "inactive":
                rate = node.issue_rate()
                if rate > 0:
                    self._push(self._issue_rngs[i].expovariate(rate), ISSUE, i)
            if node.rate_setter is not None:
                self._push(node.rate_setter.update_period, RATE, i)

    # -- per-run summary -----------------------------------------------------

    def _summarize(self) -> dict[str, Any]:
        cfg = self.config
        m = self.metrics
        t_hi = cfg.duration_s
        t_q = 0.75 * t_hi
        _, tip_means = mean_tip_series(m.tips_rows, t_q, t_hi)
        hist = m.latency_histogram()
        cr = honest_scaled_series(m.rates_rows, m.honest, "cr_scaled", t_q, t_hi)
        cr_means = [float(np.mean(v)) for v in cr.values()]
        law = m.tip_pool_law(t_hi / 2, t_hi)
        summary = {
            "blocks_issued": int(sum(m.issued_count)),
            "blocks_disseminated": int(sum(len(t) for t in m.dissem_times)),
            "blocks_fully_confirmed": int(sum(len(t) for t in m.full_confirm_times)),
            "drops": int(m.dropped_count),
            "mean_tips_last_quartile": float(np.mean(tip_means)) if len(tip_means) else None,
            "latency_mean": hist["mean"],
            "latency_max": hist["max"],
            "honest_scaled_cr_cv": (coefficient_of_variation(cr_means)
                                    if cr_means else None),
            "scaled_cr_min": min(cr_means) if cr_means else None,
            "scaled_cr_max": max(cr_means) if cr_means else None,
            "fairness_gap": (max(cr_means) / min(cr_means)
                             if cr_means and min(cr_means) > 0 else None),
            "tip_pool_law_ratio": law,
            "tips_slope_last_half": None,
        }
        times, means = mean_tip_series(m.tips_rows, t_hi / 2, t_hi)
        if len(times) >= 2:
            summary["tips_slope_last_half"] = slope(times, means)
        if summary["honest_scaled_cr_cv"] is not None and \
                math.isinf(summary["honest_scaled_cr_cv"]):
            summary["honest_scaled_cr_cv"] = None
        return summary


def run_simulation(config: ScenarioConfig, seed: Optional[int] = None,
                   run_index: int = 0) -> RunResult:
    """Convenience wrapper: one run under the config's (or an explicit) seed."""
    return Simulation(config, config.seed if seed is None else seed, run_index).run()


def _mc_worker(args: tuple) -> tuple[int, dict[str, Any]]:
    config_dict, seed, index, outdir, version = args
    cfg = ScenarioConfig.from_dict(config_dict)
    result = Simulation(cfg, seed, index).run()
    if outdir is not None:
        result.write(Path(outdir) / f"run_{index:03d}", version)
    return index, result.summary


AGGREGATE_FIELDS = ("blocks_issued", "blocks_disseminated", "blocks_fully_confirmed",
                    "drops", "mean_tips_last_quartile", "latency_mean", "latency_max",
                    "honest_scaled_cr_cv", "tip_pool_law_ratio")


def run_monte_carlo(config: ScenarioConfig, outdir: Optional[Path], version: str,
                    jobs: int = 1) -> list[dict[str, Any]]:
    """Execute config.runs independent replications (seeds seed+0..runs-1).

    Per-run CSV directories are written under `outdir` when given, plus an
    aggregate.csv holding per-run summary rows and mean / normal-approximation
    95% CI rows. Returns the per-run summaries in run order.
    """
    tasks = [(config.to_dict(), config.seed + i, i,
              str(outdir) if outdir else None, version)
             for i in range(config.runs)]
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(jobs, len(tasks))) as pool:
            indexed = pool.map(_mc_worker, tasks)
    else:
        indexed = [_mc_worker(t) for t in tasks]
    summaries = [s for _, s in sorted(indexed)]
    if outdir is not None:
        _write_aggregate(Path(outdir), config, summaries)
    return summaries


def _write_aggregate(outdir: Path, config: ScenarioConfig,
                     summaries: list[dict[str, Any]]) -> None:
    from .metrics import fmt
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "aggregate.csv", "w", newline="") as fh:
        fh.write("run,seed," + ",".join(AGGREGATE_FIELDS) + "\n")
        for i, s in enumerate(summaries):
            cells = [str(i), str(config.seed + i)]
            cells += [fmt(s[f]) if s[f] is not None else "" for f in AGGREGATE_FIELDS]
            fh.write(",".join(cells) + "\n")
        for label, reducer in (("mean", np.mean), ("ci95", _ci95)):
            cells = [label, ""]
            for f in AGGREGATE_FIELDS:
                values = [s[f] for s in summaries if s[f] is not None]
                cells.append(fmt(float(reducer(values))) if values else "")
            fh.write(",".join(cells) + "\n")


def _ci95(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return 0.0
    return 1.96 * arr.std(ddof=1) / math.sqrt(arr.size)
