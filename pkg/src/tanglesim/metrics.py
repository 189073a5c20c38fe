"""Run metrics: block lifecycle timelines, dissemination / full-confirmation
detection, windowed rate series, tip series, latency distribution, CSV output.

Dissemination and full confirmation are network-wide milestones: a block is
disseminated once every honest node received it and fully confirmed once every
honest node confirmed it. Rates are windowed counts of those milestone events,
bucketed by issuer.
"""

from __future__ import annotations

import json
import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .dag import Block

log = logging.getLogger(__name__)

RATES_COLUMNS = ("time", "node", "mode", "rep", "dr", "cr", "dr_scaled", "cr_scaled")
TIPS_COLUMNS = ("time", "node", "tip_count")
LATENCY_COLUMNS = ("block", "issuer", "issue_time", "full_confirm_time", "latency")
DROPS_COLUMNS = ("time", "node", "victim_issuer")

_NAN = float("nan")


def fmt(value: Any) -> str:
    """Fixed CSV number formatting: floats at 6 significant digits."""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class BlockTimeline:
    """Per-node milestones of one block plus the network-wide ones."""

    __slots__ = ("issuer", "issue_time", "receipt_time", "schedule_time",
                 "confirm_time", "honest_receipts", "honest_confirms",
                 "disseminated_time", "fully_confirmed_time")

    def __init__(self, issuer: int, issue_time: float, n_nodes: int):
        self.issuer = issuer
        self.issue_time = issue_time
        self.receipt_time = [_NAN] * n_nodes
        self.schedule_time = [_NAN] * n_nodes
        self.confirm_time = [_NAN] * n_nodes
        self.honest_receipts = 0
        self.honest_confirms = 0
        self.disseminated_time: Optional[float] = None
        self.fully_confirmed_time: Optional[float] = None


class MetricsRecorder:
    """Single-writer event sink owned by the engine."""

    def __init__(self, n_nodes: int, honest: Sequence[bool],
                 reps: Sequence[float], mode_names: Sequence[str],
                 rate_window_s: float = 10.0):
        self.n_nodes = n_nodes
        self.honest = list(honest)
        self.n_honest = sum(self.honest)
        self.reps = list(reps)
        self.mode_names = list(mode_names)
        self.rate_window_s = rate_window_s

        self.timelines: dict[int, BlockTimeline] = {}
        self.dissem_times: list[list[float]] = [[] for _ in range(n_nodes)]
        self.full_confirm_times: list[list[float]] = [[] for _ in range(n_nodes)]

        self.rates_rows: list[tuple] = []
        self.tips_rows: list[tuple] = []
        self.latency_rows: list[tuple] = []
        self.drops_rows: list[tuple] = []

        # tip-pool law inputs: admission delays (issue -> tip-pool entry)
        self.admit_delay_sum = [0.0] * n_nodes
        self.admit_count = [0] * n_nodes
        self.admit_events: list[list[tuple[float, float]]] = [[] for _ in range(n_nodes)]

        self.issued_count = [0] * n_nodes
        self.dropped_count = 0
        # (issuer_is_honest, verdict_value) -> [count, last_time]
        self.admission_outcomes: dict[tuple[bool, str], list] = {}

    # -- event hooks (engine-facing) --------------------------------------

    def record_issued(self, block: Block, node: int, now: float) -> None:
        if block.id in self.timelines:
            log.debug("duplicate issue event for block %d", block.id)
            return
        self.timelines[block.id] = BlockTimeline(block.issuer, block.issue_time, self.n_nodes)
        self.issued_count[node] += 1

    def record_received(self, block: Block, node: int, now: float) -> None:
        tl = self.timelines.get(block.id)
        if tl is None:
            return
        if not math.isnan(tl.receipt_time[node]):
            log.debug("duplicate receipt for block %d at node %d", block.id, node)
            return
        tl.receipt_time[node] = now
        if self.honest[node]:
            tl.honest_receipts += 1
            if tl.honest_receipts == self.n_honest and tl.disseminated_time is None:
                tl.disseminated_time = now
                self.dissem_times[tl.issuer].append(now)

    def record_scheduled(self, block: Block, node: int, now: float) -> None:
        tl = self.timelines.get(block.id)
        if tl is None:
            return
        if not math.isnan(tl.schedule_time[node]):
            log.debug("duplicate scheduling for block %d at node %d", block.id, node)
            return
        tl.schedule_time[node] = now

    def record_confirmed_local(self, block_id: int, node: int, now: float) -> None:
        tl = self.timelines.get(block_id)
        if tl is None:
            return
        if not math.isnan(tl.confirm_time[node]):
            log.debug("duplicate confirmation for block %d at node %d", block_id, node)
            return
        tl.confirm_time[node] = now
        if self.honest[node]:
            tl.honest_confirms += 1
            if tl.honest_confirms == self.n_honest and tl.fully_confirmed_time is None:
                tl.fully_confirmed_time = now
                self.full_confirm_times[tl.issuer].append(now)
                self.latency_rows.append(
                    (block_id, tl.issuer, tl.issue_time, now, now - tl.issue_time))

    def record_dropped(self, block: Block, node: int, now: float) -> None:
        self.drops_rows.append((now, node, block.issuer))
        self.dropped_count += 1

    def record_admission(self, block: Block, node: int, now: float, verdict) -> None:
        key = (self.honest[block.issuer] if block.issuer >= 0 else True,
               getattr(verdict, "value", str(verdict)))
        slot = self.admission_outcomes.setdefault(key, [0, 0.0])
        slot[0] += 1
        slot[1] = now

    def record_tip_admitted(self, block: Block, node: int, now: float) -> None:
        delay = now - block.issue_time
        self.admit_delay_sum[node] += delay
        self.admit_count[node] += 1
        self.admit_events[node].append((now, delay))

    # -- sampling ----------------------------------------------------------

    @staticmethod
    def _window_count(times: list[float], lo: float, hi: float) -> int:
        return bisect_right(times, hi) - bisect_right(times, lo)

    def scaled_rates(self, now: float) -> list[tuple]:
        """One rate sample per node over the sliding window ending at `now`."""
        w = self.rate_window_s
        rows = []
        for i in range(self.n_nodes):
            dr = self._window_count(self.dissem_times[i], now - w, now) / w
            cr = self._window_count(self.full_confirm_times[i], now - w, now) / w
            rep = self.reps[i]
            rows.append((now, i, self.mode_names[i], rep, dr, cr, dr / rep, cr / rep))
        return rows

    def network_rates(self, now: float) -> tuple[float, float]:
        """Network DR and CR at `now` (sums over issuers by definition)."""
        w = self.rate_window_s
        dr = sum(self._window_count(t, now - w, now) for t in self.dissem_times) / w
        cr = sum(self._window_count(t, now - w, now) for t in self.full_confirm_times) / w
        return dr, cr

    def sample(self, now: float, tip_counts: Sequence[int]) -> None:
        self.rates_rows.extend(self.scaled_rates(now))
        for i in range(self.n_nodes):
            if self.honest[i]:
                self.tips_rows.append((now, i, tip_counts[i]))

    # -- end-of-run reports --------------------------------------------------

    def latency_histogram(self) -> dict[str, Any]:
        """Distribution of full-confirmation latency for honest-issued blocks."""
        values = np.array([row[4] for row in self.latency_rows
                           if self.honest[row[1]]], dtype=float)
        if values.size == 0:
            return {"count": 0, "mean": None, "max": None, "quantiles": {}, "values": values}
        return {
            "count": int(values.size),
            "mean": float(values.mean()),
            "max": float(values.max()),
            "quantiles": {q: float(np.quantile(values, q)) for q in (0.5, 0.9, 0.99)},
            "values": values,
        }

    def mean_admission_delay(self, node: int, t_lo: float, t_hi: float) -> Optional[float]:
        events = self.admit_events[node]
        times = [t for t, _ in events]
        lo, hi = bisect_left(times, t_lo), bisect_right(times, t_hi)
        if hi <= lo:
            return None
        return sum(d for _, d in events[lo:hi]) / (hi - lo)

    def tip_pool_law(self, t_lo: float, t_hi: float) -> Optional[float]:
        """mean tips / (2 * mean admission delay * admission rate), averaged
        over honest nodes; the related-work rule of thumb says ~1."""
        ratios = []
        tips_by_node: dict[int, list[float]] = {}
        for t, node, count in self.tips_rows:
            if t_lo <= t <= t_hi:
                tips_by_node.setdefault(node, []).append(count)
        for node, counts in tips_by_node.items():
            dbar = self.mean_admission_delay(node, t_lo, t_hi)
            times = [t for t, _ in self.admit_events[node]]
            n_admit = bisect_right(times, t_hi) - bisect_left(times, t_lo)
            lam = n_admit / (t_hi - t_lo)
            if dbar and lam > 0:
                ratios.append((sum(counts) / len(counts)) / (2 * dbar * lam))
        if not ratios:
            return None
        return sum(ratios) / len(ratios)


@dataclass
class RunResult:
    config_dict: dict[str, Any]
    seed: int
    run_index: int
    metrics: MetricsRecorder
    summary: dict[str, Any] = field(default_factory=dict)

    def tables(self) -> dict[str, tuple[tuple[str, ...], list[tuple]]]:
        m = self.metrics
        return {
            "rates": (RATES_COLUMNS, m.rates_rows),
            "tips": (TIPS_COLUMNS, m.tips_rows),
            "latency": (LATENCY_COLUMNS, m.latency_rows),
            "drops": (DROPS_COLUMNS, m.drops_rows),
        }

    def write(self, outdir: str | Path, version: str) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, (columns, rows) in self.tables().items():
            with open(outdir / f"{name}.csv", "w", newline="") as fh:
                fh.write(",".join(columns) + "\n")
                for row in rows:
                    fh.write(",".join(fmt(v) for v in row) + "\n")
        meta = {
            "config": self.config_dict,
            "seed": self.seed,
            "run_index": self.run_index,
            "version": version,
            "summary": self.summary,
        }
        (outdir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return outdir


# -- small analysis helpers shared by the CLI and the test-suite -------------

def honest_scaled_series(rows: list[tuple], honest: Sequence[bool],
                         column: str, t_lo: float, t_hi: float,
                         active_only: bool = True) -> dict[int, list[float]]:
    """Per-node scaled DR or CR samples inside [t_lo, t_hi]."""
    idx = RATES_COLUMNS.index(column)
    series: dict[int, list[float]] = {}
    for row in rows:
        t, node = row[0], row[1]
        if t_lo <= t <= t_hi and honest[node]:
            series.setdefault(node, []).append(row[idx])
    if active_only:
        series = {n: v for n, v in series.items() if sum(v) > 0}
    return series


def coefficient_of_variation(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    mean = arr.mean()
    if mean == 0:
        return math.inf
    return float(arr.std() / mean)


def mean_tip_series(rows: list[tuple], t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean tip count across honest nodes per sample instant inside the window."""
    by_time: dict[float, list[int]] = {}
    for t, _node, count in rows:
        if t_lo <= t <= t_hi:
            by_time.setdefault(t, []).append(count)
    times = np.array(sorted(by_time))
    means = np.array([np.mean(by_time[t]) for t in times])
    return times, means


def slope(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope in units per second."""
    if len(times) < 2:
        return 0.0
    return float(np.polyfit(times, values, 1)[0])
