"""Incremental extreme-degree statistics.

Tracks, per step of the growing tree: the k highest degrees M_1 >= ... >= M_k,
the vertices holding them, the multiplicity L_k of the k-th value, the
remaining-mass statistic c_hat, and per-rank change times used as empirical
proxies for hub persistence.

The tracker exploits two facts about the process: degrees only ever move by
unit increments, and any vertex whose degree exceeds the current k-th value
must already be tracked.  Hence the k-th value can rise by at most one per
step and L_k is maintainable from a single counter of *untracked* vertices
sitting exactly at the threshold -- no degree histogram is needed.

Times reported by :class:`HubTimeline` are "last change before the horizon"
lower-bound proxies of the persistence times; they are never the almost-sure
stabilization times themselves, which are unobservable in a finite run.
"""

from __future__ import annotations

import numpy as np

PAD_HOLDER = -1  # holder id for ranks not yet occupied by a real vertex
PAD_DEGREE = 1  # convention: with fewer than k vertices, M_k is 1


def l_count(degrees, k: int) -> int:
    """Number of vertices whose degree equals the k-th largest degree.

    ``degrees`` is any sequence of positive vertex degrees; with fewer than
    k vertices the k-th value is taken to be 1 per the padding convention.
    """
    if k < 1:
        raise ValueError("rank must be >= 1")
    deg = np.asarray(degrees)
    if deg.size == 0:
        raise ValueError("need at least one vertex")
    if k <= deg.size:
        target = int(np.partition(deg, deg.size - k)[deg.size - k])
    else:
        target = PAD_DEGREE
    return int(np.count_nonzero(deg == target))


def c_hat(m_values, n: int, l: int) -> float:
    """Remaining degree mass below rank l: 1 - (M_1 + ... + M_{l-1}) / 2n."""
    if l < 1:
        raise ValueError("rank must be >= 1")
    top = sum(int(v) for v in m_values[: l - 1])
    return 1.0 - top / (2.0 * n)


def p_increase(m_values, l_k: int, n: int, k: int, d: int) -> float:
    """One-step probability that the k-th highest degree increases.

    Evaluates ``ch^d - (ch - M_k L_k / 2n)^d`` with ``ch = c_hat(.., k)``.
    This equals the conditional increase probability whenever
    M_{k-1}(n) > M_k(n); the formula itself is defined for any consistent
    state.  The inner base going negative means the inputs cannot come from
    a real degree sequence.
    """
    if k < 1:
        raise ValueError("rank must be >= 1")
    ch = c_hat(m_values, n, k)
    m_k = int(m_values[k - 1])
    base = ch - m_k * l_k / (2.0 * n)
    if base < 0.0:
        raise ValueError(
            f"inconsistent inputs: c_hat {ch} smaller than M_k*L_k/2n {m_k * l_k / (2.0 * n)}"
        )
    return ch**d - base**d


class TopKTracker:
    """Exact top-k degree multiset under unit increments.

    The ranked list is ordered by (degree desc, vertex id asc); the id
    tiebreak is for reporting determinism only.  ``update`` must see every
    degree change: new vertices enter via ``update(v, 1)``, increments via
    ``update(v, old_degree + 1)``.  Anything else is rejected.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        if k > 64:
            raise ValueError("k larger than 64 is not supported")
        self.k = k
        self._ids: list[int] = []
        self._vals: list[int] = []
        # untracked vertices whose degree equals the current threshold
        self._nonlist_at_threshold = 0
        # rank indices whose holder genuinely changed since the last drain
        self._pending_changes: set[int] = set()

    # -- queries ---------------------------------------------------------

    @property
    def k_real(self) -> int:
        return len(self._ids)

    @property
    def threshold(self) -> int:
        """Current M_k (1 while fewer than k vertices exist)."""
        return self._vals[-1] if len(self._vals) == self.k else PAD_DEGREE

    def m_values(self) -> tuple[int, ...]:
        pad = self.k - len(self._vals)
        return tuple(self._vals) + (PAD_DEGREE,) * pad

    def holders(self) -> tuple[int, ...]:
        pad = self.k - len(self._ids)
        return tuple(self._ids) + (PAD_HOLDER,) * pad

    def l_count_current(self) -> int:
        """L_k: multiplicity of the threshold degree over all vertices."""
        t = self.threshold
        inside = sum(1 for v in self._vals if v == t)
        return inside + self._nonlist_at_threshold

    def strict_flags(self) -> tuple[bool, ...]:
        """Rank-l flag: M_l strictly above everything ranked below it.

        For l < k this is M_l > M_{l+1}; for l = k it means no untracked
        vertex ties the threshold.
        """
        vals = self.m_values()
        flags = [vals[i] > vals[i + 1] for i in range(self.k - 1)]
        flags.append(len(self._ids) == self.k and self._nonlist_at_threshold == 0)
        return tuple(flags)

    def drain_pending_changes(self) -> set[int]:
        out = self._pending_changes
        self._pending_changes = set()
        return out

    # -- updates ---------------------------------------------------------

    def _snapshot(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.holders(), self.m_values()

    def _record(self, old_ids, old_vals, vertex: int) -> None:
        new_ids = self.holders()
        new_vals = self.m_values()
        for l in range(self.k):
            if new_ids[l] != old_ids[l]:
                # Pure shuffles among tied vertices (a displaced holder that
                # kept its degree) are not rank changes.
                exempt = (
                    new_vals[l] == old_vals[l]
                    and old_ids[l] != vertex
                    and old_ids[l] != PAD_HOLDER
                )
                if not exempt:
                    self._pending_changes.add(l)

    def _insert_sorted(self, vertex: int, value: int) -> None:
        p = len(self._ids)
        self._ids.append(vertex)
        self._vals.append(value)
        while p > 0 and (
            self._vals[p - 1] < value
            or (self._vals[p - 1] == value and self._ids[p - 1] > vertex)
        ):
            self._ids[p] = self._ids[p - 1]
            self._vals[p] = self._vals[p - 1]
            p -= 1
            self._ids[p] = vertex
            self._vals[p] = value

    def update(self, vertex: int, new_degree: int) -> None:
        if new_degree < 1:
            raise ValueError("degrees are positive")
        full = len(self._ids) == self.k

        if new_degree == 1:  # arrival of a fresh vertex
            if vertex in self._ids:
                raise ValueError(f"vertex {vertex} already tracked; got degree 1 again")
            if full:
                if self._vals[-1] == PAD_DEGREE:
                    self._nonlist_at_threshold += 1
                return
            old_ids, old_vals = self._snapshot()
            self._insert_sorted(vertex, 1)
            self._record(old_ids, old_vals, vertex)
            return

        if full:
            t = self._vals[-1]
            if new_degree < t:
                return  # strictly below the tracked range; cannot be listed
            if new_degree == t:
                # a listed vertex would have had degree t-1 < t: impossible
                self._nonlist_at_threshold += 1
                return
        else:
            t = None

        # new_degree above the threshold (or list not yet full): the vertex
        # is either already listed or enters right now.
        try:
            pos = self._ids.index(vertex)
        except ValueError:
            pos = -1

        old_ids, old_vals = self._snapshot()
        if pos >= 0:
            if self._vals[pos] != new_degree - 1:
                raise ValueError(
                    f"non-unit increment for vertex {vertex}: "
                    f"{self._vals[pos]} -> {new_degree}"
                )
            self._vals[pos] = new_degree
            while pos > 0 and (
                self._vals[pos - 1] < new_degree
                or (self._vals[pos - 1] == new_degree and self._ids[pos - 1] > vertex)
            ):
                self._ids[pos] = self._ids[pos - 1]
                self._vals[pos] = self._vals[pos - 1]
                pos -= 1
                self._ids[pos] = vertex
                self._vals[pos] = new_degree
        else:
            if not full:
                raise ValueError(f"vertex {vertex} unknown to a non-full tracker")
            if new_degree != t + 1:
                raise ValueError(
                    f"non-unit entry for vertex {vertex}: degree {new_degree} "
                    f"with threshold {t}"
                )
            # The entering vertex sat at the threshold and the evicted one
            # lands there, so the untracked-at-threshold count is unchanged.
            self._ids.pop()
            self._vals.pop()
            self._insert_sorted(vertex, new_degree)

        if full:
            t_after = self._vals[-1]
            if t_after > t:
                # Untracked vertices all sat at or below the old threshold.
                self._nonlist_at_threshold = 0
        self._record(old_ids, old_vals, vertex)


class HubTimeline:
    """Per-rank holder identities and change times.

    ``last_holder_change[l]`` is the last step at which the rank-(l+1)
    holder identity genuinely changed; ``last_strict_toggle[l]`` the last
    step at which the rank's strict-separation flag flipped.  The combined
    ``last_change`` (the max of the two) is what checkpoint rows carry.
    """

    def __init__(self, k: int):
        self.k = k
        self.last_holder_change = [0] * k
        self.last_strict_toggle = [0] * k
        self.holders: tuple[int, ...] = (PAD_HOLDER,) * k
        self.strict: tuple[bool, ...] | None = None

    def last_change(self, rank: int) -> int:
        l = rank - 1
        return max(self.last_holder_change[l], self.last_strict_toggle[l])


def record_rank_change(timeline: HubTimeline, n: int, tracker: TopKTracker) -> None:
    """Fold the tracker's step outcome into the timeline; call once per step."""
    for l in tracker.drain_pending_changes():
        timeline.last_holder_change[l] = n
    strict_now = tracker.strict_flags()
    if timeline.strict is None:
        timeline.strict = strict_now
    else:
        for l in range(timeline.k):
            if strict_now[l] != timeline.strict[l]:
                timeline.last_strict_toggle[l] = n
        timeline.strict = strict_now
    timeline.holders = tracker.holders()


class CheckpointSeries:
    """Geometrically spaced snapshots of the tracked statistics.

    Row layout matches the CSV schema: n, M_1..M_k, L_k, c_hat at rank k,
    holder ids and combined last-change times per rank.
    """

    def __init__(self, k: int):
        self.k = k
        self._n: list[int] = []
        self._m: list[tuple[int, ...]] = []
        self._l_k: list[int] = []
        self._c_hat_k: list[float] = []
        self._holders: list[tuple[int, ...]] = []
        self._last_change: list[tuple[int, ...]] = []

    def __len__(self) -> int:
        return len(self._n)

    def append_row(self, n, m_vals, lk, chat, holders, last_changes) -> None:
        if self._n and n <= self._n[-1]:
            raise ValueError("checkpoint steps must be strictly increasing")
        self._n.append(int(n))
        self._m.append(tuple(int(v) for v in m_vals))
        self._l_k.append(int(lk))
        self._c_hat_k.append(float(chat))
        self._holders.append(tuple(int(v) for v in holders))
        self._last_change.append(tuple(int(v) for v in last_changes))

    @property
    def n(self) -> np.ndarray:
        return np.asarray(self._n, dtype=np.int64)

    def m(self, rank: int) -> np.ndarray:
        if not 1 <= rank <= self.k:
            raise ValueError(f"rank must be in 1..{self.k}")
        return np.asarray([row[rank - 1] for row in self._m], dtype=np.int64)

    @property
    def l_k(self) -> np.ndarray:
        return np.asarray(self._l_k, dtype=np.int64)

    @property
    def c_hat_k(self) -> np.ndarray:
        return np.asarray(self._c_hat_k, dtype=np.float64)

    def holder(self, rank: int) -> np.ndarray:
        return np.asarray([row[rank - 1] for row in self._holders], dtype=np.int64)

    def last_change(self, rank: int) -> np.ndarray:
        return np.asarray([row[rank - 1] for row in self._last_change], dtype=np.int64)

    def columns(self) -> list[str]:
        k = self.k
        return (
            ["n"]
            + [f"M_{i}" for i in range(1, k + 1)]
            + [f"L_{k}", f"c_hat_{k}"]
            + [f"holder_{i}" for i in range(1, k + 1)]
            + [f"last_change_{i}" for i in range(1, k + 1)]
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns()) + "\n")
            for i in range(len(self._n)):
                cells = [str(self._n[i])]
                cells += [str(v) for v in self._m[i]]
                cells.append(str(self._l_k[i]))
                cells.append(format(self._c_hat_k[i], ".17g"))
                cells += [str(v) for v in self._holders[i]]
                cells += [str(v) for v in self._last_change[i]]
                fh.write(",".join(cells) + "\n")

    @classmethod
    def from_csv(cls, path) -> "CheckpointSeries":
        with open(path, newline="") as fh:
            header = fh.readline().strip().split(",")
            if not header or header[0] != "n":
                raise ValueError(f"{path}: not a checkpoint CSV")
            k = sum(1 for c in header if c.startswith("M_"))
            series = cls(k)
            if header != series.columns():
                raise ValueError(f"{path}: unexpected columns {header}")
            for line in fh:
                cells = line.strip().split(",")
                n = int(cells[0])
                m_vals = [int(v) for v in cells[1 : 1 + k]]
                lk = int(cells[1 + k])
                chat = float(cells[2 + k])
                holders = [int(v) for v in cells[3 + k : 3 + 2 * k]]
                last = [int(v) for v in cells[3 + 2 * k : 3 + 3 * k]]
                series.append_row(n, m_vals, lk, chat, holders, last)
        return series
