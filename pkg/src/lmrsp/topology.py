"""Network graph, kappa-hop interference and the finite schedule set."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidSchedule, LengthMismatch, SizeLimitExceeded

# exhaustive enumeration guard on the number of links
MAX_ENUMERATION_LINKS = 24

ScheduleVector = tuple[int, ...]


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected graph whose edges are the links, indexed in the given order."""

    node_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        if not edges:
            raise ValueError("graph needs at least one link")
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u}, {v}) references a missing node")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)

    @property
    def n_links(self) -> int:
        return len(self.edges)

    @classmethod
    def path(cls, n_links: int) -> "NetworkGraph":
        return cls(n_links + 1, tuple((i, i + 1) for i in range(n_links)))

    def node_distances(self) -> np.ndarray:
        """All-pairs hop distances between nodes (-1 for unreachable)."""
        adj = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        dist = np.full((self.node_count, self.node_count), -1, dtype=np.int64)
        for src in range(self.node_count):
            dist[src, src] = 0
            queue = deque([src])
            while queue:
                x = queue.popleft()
                for y in adj[x]:
                    if dist[src, y] < 0:
                        dist[src, y] = dist[src, x] + 1
                        queue.append(y)
        return dist

    def link_distances(self) -> np.ndarray:
        """Hop distance between links: min over endpoint pairs, 0 when a node is shared.

        Links in different components get a distance larger than any path.
        """
        nd = self.node_distances()
        big = self.node_count + 1
        nd = np.where(nd < 0, big, nd)
        n = self.n_links
        out = np.zeros((n, n), dtype=np.int64)
        for i, (a, b) in enumerate(self.edges):
            for j, (c, d) in enumerate(self.edges):
                out[i, j] = min(nd[a, c], nd[a, d], nd[b, c], nd[b, d])
        return out


@dataclass(frozen=True)
class InterferenceModel:
    kappa: int = 1

    def __post_init__(self):
        if int(self.kappa) < 1:
            raise ValueError("kappa must be >= 1")

    def conflicts(self, graph: NetworkGraph) -> np.ndarray:
        """Boolean matrix: links i != j that may not be active together."""
        dist = graph.link_distances()
        conf = dist < self.kappa
        np.fill_diagonal(conf, False)
        return conf


def _check_length(graph: NetworkGraph, s: Sequence[int]) -> None:
    if len(s) != graph.n_links:
        raise LengthMismatch(f"schedule has length {len(s)}, graph has {graph.n_links} links")


def is_valid_schedule(graph: NetworkGraph, model: InterferenceModel, s: Sequence[int]) -> bool:
    """True iff no two active links lie within kappa hops of each other."""
    _check_length(graph, s)
    active = [i for i, x in enumerate(s) if x]
    if len(active) < 2:
        return True
    conf = model.conflicts(graph)
    for k, i in enumerate(active):
        for j in active[k + 1:]:
            if conf[i, j]:
                return False
    return True


class ScheduleSet:
    """Valid schedules in canonical lexicographic order.

    The index of a schedule in this set is its stable identifier in traces
    and certificates. Index 0 is always the empty schedule.
    """

    def __init__(self, graph: NetworkGraph, model: InterferenceModel, matrix: np.ndarray):
        self.graph = graph
        self.model = model
        self.matrix = np.ascontiguousarray(matrix, dtype=np.uint8)
        self.matrix.setflags(write=False)
        n = graph.n_links
        weights = np.array([1 << (n - 1 - l) for l in range(n)], dtype=np.int64)
        self.masks = self.matrix.astype(np.int64) @ weights
        self._index = {int(m): i for i, m in enumerate(self.masks)}

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, i: int) -> ScheduleVector:
        return tuple(int(x) for x in self.matrix[i])

    def __iter__(self) -> Iterator[ScheduleVector]:
        for i in range(len(self)):
            yield self[i]

    @property
    def n_links(self) -> int:
        return self.matrix.shape[1]

    def index(self, s: Sequence[int]) -> int:
        """Canonical index of schedule ``s``; raises InvalidSchedule if absent."""
        if len(s) != self.n_links:
            raise LengthMismatch(f"schedule has length {len(s)}, expected {self.n_links}")
        n = self.n_links
        mask = 0
        for l, x in enumerate(s):
            if x:
                mask |= 1 << (n - 1 - l)
        try:
            return self._index[mask]
        except KeyError:
            raise InvalidSchedule(f"{tuple(s)} is not a valid schedule") from None

    def __contains__(self, s) -> bool:
        try:
            self.index(s)
        except (InvalidSchedule, LengthMismatch):
            return False
        return True


def enumerate_schedules(graph: NetworkGraph, model: InterferenceModel,
                        allow_large: bool = False) -> ScheduleSet:
    """Every valid schedule (including the empty one) in lexicographic order."""
    n = graph.n_links
    if n > MAX_ENUMERATION_LINKS and not allow_large:
        raise SizeLimitExceeded(
            f"{n} links exceed the exhaustive enumeration limit of {MAX_ENUMERATION_LINKS}")
    conf = model.conflicts(graph)
    conflict_mask = [0] * n
    for i in range(n):
        for j in range(n):
            if conf[i, j]:
                conflict_mask[i] |= 1 << j

    found: list[int] = []

    # depth-first over links in index order; bit l of `chosen` is link l
    def extend(l: int, chosen: int, blocked: int) -> None:
        if l == n:
            found.append(chosen)
            return
        extend(l + 1, chosen, blocked)
        if not blocked >> l & 1:
            extend(l + 1, chosen | 1 << l, blocked | conflict_mask[l])

    extend(0, 0, 0)
    matrix = np.array([[c >> l & 1 for l in range(n)] for c in found], dtype=np.uint8)
    # lexicographic on (I_0, ..., I_{N-1})
    order = sorted(range(len(found)), key=lambda k: tuple(matrix[k]))
    return ScheduleSet(graph, model, matrix[order])
