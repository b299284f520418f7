"""Degree-proportional vertex sampling.

Two interchangeable implementations of the same distribution:

* :class:`RepeatedEntryList` -- the classic preferential-attachment trick.
  Every vertex id is stored once per unit of degree, so a uniform draw over
  positions is a degree-proportional draw over vertices.  O(1) sample and
  O(1) update, at the cost of one stored id per half-edge (2n ids after n
  edges).  This is the default engine for simulation runs.

* :class:`PrefixSumTree` -- a Fenwick tree over per-vertex weights with
  O(log n) sample and update.  Kept as an independent cross-check of the
  sampling distribution and for any future non-unit weight updates.

Vertex ids are dense 0-based integers in arrival order.  Ids are 32-bit on
the repeated-entry side, which halves memory for long runs.
"""

from __future__ import annotations

import numpy as np

from .rng import SplitMix64


class RepeatedEntryList:
    """Vertex ids repeated once per unit of degree, in a flat int32 array.

    After n recorded edges the array holds exactly 2n ids and vertex i
    occurs ``degree(i)`` times, so ``entries[U]`` with U uniform on
    ``[0, 2n)`` is a degree-proportional vertex draw.
    """

    def __init__(self, max_vertices: int = 64):
        if max_vertices < 2:
            raise ValueError("need room for at least the initial edge")
        self._degrees = np.zeros(max_vertices, dtype=np.int32)
        self._entries = np.zeros(2 * (max_vertices - 1), dtype=np.int32)
        self._edges = 0
        self._num_vertices = 0

    @property
    def total_weight(self) -> int:
        return 2 * self._edges

    @property
    def num_edges(self) -> int:
        return self._edges

    @property
    def num_vertices(self) -> int:
        return self._num_vertices

    @property
    def degrees(self) -> np.ndarray:
        """Read-only degree view over introduced vertices."""
        view = self._degrees[: self._num_vertices]
        view.flags.writeable = False
        return view

    def _grow_for(self, vertex: int, edges: int) -> None:
        if vertex >= len(self._degrees):
            grown = np.zeros(max(2 * len(self._degrees), vertex + 1), dtype=np.int32)
            grown[: len(self._degrees)] = self._degrees
            self._degrees = grown
        if 2 * edges > len(self._entries):
            grown = np.zeros(max(2 * len(self._entries), 2 * edges), dtype=np.int32)
            grown[: len(self._entries)] = self._entries
            self._entries = grown

    def record_edge(self, u: int, v: int) -> None:
        """Add an edge; both endpoint weights rise by one."""
        if u == v:
            raise ValueError("self-loops are not part of the model")
        if u < 0 or v < 0:
            raise ValueError("vertex ids are non-negative")
        self._grow_for(max(u, v), self._edges + 1)
        pos = 2 * self._edges
        self._entries[pos] = u
        self._entries[pos + 1] = v
        self._degrees[u] += 1
        self._degrees[v] += 1
        self._edges += 1
        self._num_vertices = max(self._num_vertices, u + 1, v + 1)

    def degree(self, v: int) -> int:
        if v < 0 or v >= self._num_vertices:
            raise ValueError(f"vertex id {v} out of range (have {self._num_vertices})")
        return int(self._degrees[v])

    def sample(self, rng: SplitMix64) -> int:
        """Draw vertex i with probability degree(i) / total_weight."""
        if self._edges == 0:
            raise ValueError("cannot sample before any edge is recorded")
        return int(self._entries[rng.bounded(2 * self._edges)])

    # Zero-copy handles for the jitted driver in pachoice.process.
    def raw_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._entries, self._degrees

    def bulk_sync(self, num_edges: int, num_vertices: int) -> None:
        """Adopt counts after a jitted segment wrote edges into raw_arrays()."""
        if 2 * num_edges > len(self._entries) or num_vertices > len(self._degrees):
            raise ValueError("bulk_sync beyond allocated capacity")
        self._edges = num_edges
        self._num_vertices = num_vertices


class PrefixSumTree:
    """Fenwick tree over per-vertex integer weights.

    Sampling draws a uniform integer in ``[0, total_weight)`` and walks the
    tree to the unique vertex whose weight interval contains it, so vertex i
    comes out with probability ``weight(i)/total_weight``.
    """

    def __init__(self, max_vertices: int = 64):
        if max_vertices < 2:
            raise ValueError("need room for at least the initial edge")
        self._size = 1
        while self._size < max_vertices:
            self._size *= 2
        self._tree = np.zeros(self._size + 1, dtype=np.int64)
        self._weights = np.zeros(self._size, dtype=np.int64)
        self._total = 0
        self._num_vertices = 0

    @property
    def total_weight(self) -> int:
        return self._total

    @property
    def num_vertices(self) -> int:
        return self._num_vertices

    @property
    def degrees(self) -> np.ndarray:
        view = self._weights[: self._num_vertices]
        view.flags.writeable = False
        return view

    def _grow_to(self, min_size: int) -> None:
        old_weights = self._weights
        size = self._size
        while size < min_size:
            size *= 2
        self._size = size
        self._tree = np.zeros(size + 1, dtype=np.int64)
        self._weights = np.zeros(size, dtype=np.int64)
        self._weights[: len(old_weights)] = old_weights
        for i, w in enumerate(old_weights):
            if w:
                self._add_tree(i, int(w))

    def _add_tree(self, v: int, delta: int) -> None:
        i = v + 1
        while i <= self._size:
            self._tree[i] += delta
            i += i & (-i)

    def add_weight(self, v: int, delta: int) -> None:
        if v < 0:
            raise ValueError("vertex ids are non-negative")
        if v >= self._size:
            self._grow_to(v + 1)
        if self._weights[v] + delta < 0:
            raise ValueError("weights cannot go negative")
        self._weights[v] += delta
        self._add_tree(v, delta)
        self._total += delta
        self._num_vertices = max(self._num_vertices, v + 1)

    def record_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError("self-loops are not part of the model")
        self.add_weight(u, 1)
        self.add_weight(v, 1)

    def degree(self, v: int) -> int:
        if v < 0 or v >= max(self._num_vertices, 1):
            raise ValueError(f"vertex id {v} out of range (have {self._num_vertices})")
        return int(self._weights[v])

    def prefix_sum(self, v: int) -> int:
        """Sum of weights of vertices 0..v inclusive."""
        i = v + 1
        acc = 0
        while i > 0:
            acc += int(self._tree[i])
            i -= i & (-i)
        return acc

    def sample(self, rng: SplitMix64) -> int:
        if self._total <= 0:
            raise ValueError("cannot sample before any edge is recorded")
        r = rng.bounded(self._total)
        # Descend to the largest position whose prefix sum is <= r.
        pos = 0
        rem = r
        bit = self._size
        tree = self._tree
        while bit:
            nxt = pos + bit
            if nxt <= self._size and tree[nxt] <= rem:
                rem -= int(tree[nxt])
                pos = nxt
            bit >>= 1
        return pos
