"""The evolving-tree step rule and full-trajectory driver.

The tree starts as a single edge.  Each step introduces one vertex, samples
d candidates independently and degree-proportionally from the existing
tree, and attaches the newcomer to the candidate with the largest degree
(``max`` rule), the smallest (``min``), or to the single sampled candidate
(``plain``, the classic preferential-attachment baseline).

Ties among sampled candidates are broken uniformly over the tied samples,
counted with multiplicity, via reservoir replacement; for a two-way tie
this is exactly a fair coin.  How multi-way ties are resolved does not
affect the degree sequence, only which tied vertex gets the edge.

``run`` drives a whole trajectory with checkpointing and is backed by the
jitted kernel by default; ``engine="python"`` runs the same algorithm in
pure Python (identical RNG stream, identical output) at small scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError
from .rng import SplitMix64, mix_seed
from .sampler import RepeatedEntryList
from .stats import (
    PAD_HOLDER,
    CheckpointSeries,
    HubTimeline,
    TopKTracker,
    c_hat,
    record_rank_change,
)

RULES = ("max", "min", "plain")

MAX_HORIZON = 2**31 - 3  # 32-bit vertex ids
MAX_TRACKED_RANKS = 64


@dataclass(frozen=True)
class ModelConfig:
    """One replica's model parameters."""

    d: int
    rule: str = "max"
    horizon: int = 1000
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise ConfigError(f"horizon must be in 1..{MAX_HORIZON}")
        if not 1 <= self.k <= MAX_TRACKED_RANKS:
            raise ConfigError(f"k must be in 1..{MAX_TRACKED_RANKS}")

    @property
    def effective_d(self) -> int:
        """Number of candidates actually sampled (plain rule means one)."""
        return 1 if self.rule == "plain" else self.d


@dataclass
class TreeState:
    """Evolving tree: step counter plus the degree sampler."""

    n: int
    sampler: RepeatedEntryList

    @property
    def next_vertex(self) -> int:
        return self.n + 1

    @property
    def num_vertices(self) -> int:
        return self.n + 1


@dataclass(frozen=True)
class AttachmentRecord:
    """Outcome of one step: which candidates were drawn and who won."""

    step: int
    chosen: int
    candidates: tuple[int, ...]
    tie_size: int


def init_state(config: ModelConfig) -> TreeState:
    """The one-edge tree: vertices 0 and 1, each of degree 1, at n = 1."""
    sampler = RepeatedEntryList(max_vertices=config.horizon + 1)
    sampler.record_edge(0, 1)
    return TreeState(n=1, sampler=sampler)


def step(state: TreeState, config: ModelConfig, rng: SplitMix64) -> AttachmentRecord:
    """Advance the tree by one vertex; pure-Python reference path.

    Draw order (candidate draws interleaved with tie coins) is fixed and
    must match kernels.run_segment exactly.
    """
    sampler = state.sampler
    use_min = config.rule == "min"
    best = sampler.sample(rng)
    best_deg = sampler.degree(best)
    candidates = [best]
    tie = 1
    for _ in range(config.effective_d - 1):
        v = sampler.sample(rng)
        candidates.append(v)
        dv = sampler.degree(v)
        better = dv < best_deg if use_min else dv > best_deg
        if better:
            best, best_deg, tie = v, dv, 1
        elif dv == best_deg:
            tie += 1
            if rng.bounded(tie) == 0:
                best = v
    n = state.n
    new_vertex = state.next_vertex
    tie_size = sum(1 for v in candidates if sampler.degree(v) == best_deg)
    sampler.record_edge(best, new_vertex)
    state.n = n + 1
    return AttachmentRecord(step=n, chosen=best, candidates=tuple(candidates), tie_size=tie_size)


def checkpoint_steps(horizon: int, ratio: float = 1.05) -> list[int]:
    """Geometric step schedule from 1 to horizon, horizon always included."""
    if ratio <= 1.0:
        raise ConfigError("checkpoint ratio must be > 1")
    steps = [1]
    while steps[-1] < horizon:
        nxt = max(steps[-1] + 1, int(steps[-1] * ratio))
        steps.append(min(nxt, horizon))
    return steps


def planned_memory_bytes(horizon: int) -> int:
    """Dominant allocation size of a single replica at the given horizon."""
    entries = 4 * 2 * horizon
    degrees = 4 * (horizon + 1)
    return entries + degrees


def _seed_tracking(tracker: TopKTracker, timeline: HubTimeline) -> None:
    tracker.update(0, 1)
    tracker.update(1, 1)
    record_rank_change(timeline, 1, tracker)


def _series_row(series, n, tracker, timeline, k):
    m_vals = tracker.m_values()
    chat = c_hat(m_vals, n, k)
    last = [timeline.last_change(r) for r in range(1, k + 1)]
    series.append_row(n, m_vals, tracker.l_count_current(), chat, tracker.holders(), last)


def run(
    config: ModelConfig,
    tracker: TopKTracker | None = None,
    timeline: HubTimeline | None = None,
    checkpoint_ratio: float = 1.05,
    engine: str = "jit",
    on_checkpoint=None,
) -> CheckpointSeries:
    """Run a full trajectory, returning the checkpoint series.

    The passed-in tracker/timeline observers (fresh ones by default) are
    left holding the final state.  Output is a pure function of (config,
    checkpoint_ratio): the same seed yields byte-identical CSVs.
    """
    if engine not in ("jit", "python"):
        raise ConfigError(f"unknown engine {engine!r}")
    k = config.k
    if tracker is None:
        tracker = TopKTracker(k)
    if timeline is None:
        timeline = HubTimeline(k)
    state = init_state(config)
    _seed_tracking(tracker, timeline)
    rng = SplitMix64(config.seed)
    series = CheckpointSeries(k)
    schedule = checkpoint_steps(config.horizon, checkpoint_ratio)

    if engine == "python":
        pos = 0
        if schedule[0] == 1:
            _series_row(series, 1, tracker, timeline, k)
            pos = 1
        for n_target in schedule[pos:]:
            while state.n < n_target:
                rec = step(state, config, rng)
                tracker.update(rec.chosen, state.sampler.degree(rec.chosen))
                tracker.update(state.n, 1)
                record_rank_change(timeline, state.n, tracker)
            _series_row(series, state.n, tracker, timeline, k)
            if on_checkpoint is not None:
                on_checkpoint(state.n, tracker, timeline)
        return series

    entries, degrees = state.sampler.raw_arrays()
    rng_state = np.array([rng.state], dtype=np.uint64)
    top_ids = np.array(tracker.holders(), dtype=np.int64)
    top_vals = np.array(tracker.m_values(), dtype=np.int64)
    scal = np.array([tracker.k_real, tracker._nonlist_at_threshold], dtype=np.int64)
    last_holder = np.array(timeline.last_holder_change, dtype=np.int64)
    last_strict = np.array(timeline.last_strict_toggle, dtype=np.int64)
    strict = np.array([1 if s else 0 for s in timeline.strict], dtype=np.int64)
    old_ids = np.empty(k, dtype=np.int64)
    old_vals = np.empty(k, dtype=np.int64)

    pos = 0
    if schedule[0] == 1:
        _series_row(series, 1, tracker, timeline, k)
        pos = 1
    cur = 1
    use_min = config.rule == "min"
    d = config.effective_d
    for n_target in schedule[pos:]:
        kernels.run_segment(
            entries, degrees, rng_state, cur, n_target, d, use_min,
            top_ids, top_vals, scal, last_holder, last_strict, strict,
            old_ids, old_vals, k,
        )
        cur = n_target
        _sync_tracking(tracker, timeline, top_ids, top_vals, scal, last_holder, last_strict, strict)
        _series_row(series, cur, tracker, timeline, k)
        if on_checkpoint is not None:
            on_checkpoint(cur, tracker, timeline)
    state.n = cur
    state.sampler.bulk_sync(cur, cur + 1)
    rng._state = int(rng_state[0])
    return series


def _sync_tracking(tracker, timeline, top_ids, top_vals, scal, last_holder, last_strict, strict):
    """Copy kernel tracking arrays back into the Python observer objects."""
    k_real = int(scal[0])
    tracker._ids = [int(v) for v in top_ids[:k_real]]
    tracker._vals = [int(v) for v in top_vals[:k_real]]
    tracker._nonlist_at_threshold = int(scal[1])
    tracker._pending_changes = set()
    timeline.last_holder_change = [int(v) for v in last_holder]
    timeline.last_strict_toggle = [int(v) for v in last_strict]
    timeline.strict = tuple(bool(v) for v in strict)
    timeline.holders = tracker.holders()


def replica_seed(base_seed: int, index: int) -> int:
    """Stream seed for one replica of an ensemble."""
    return mix_seed(base_seed, index)
