"""Frequency-collision scheduling of concurrent CNOT pulses."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from donorcnot.spectra import colliding_pairs
from donorcnot.utils import dumps

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

Strategy = Literal["min_degree", "random"]


class OverlapGraph:
    """Conflict graph over donor triples. Immutable.

    An edge joins two triples whose transition frequencies collide.
    """

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int]] = ()) -> None:
        """Create a graph.

        Raises
        ------
        ValueError
            On negative size, self-loops or out-of-range endpoints.
        """
        if n_nodes < 0:
            msg = "n_nodes must be non-negative"
            raise ValueError(msg)
        adjacency = np.zeros((n_nodes, n_nodes), dtype=bool)
        for i, j in edges:
            if i == j:
                msg = f"self-loop on node {i}"
                raise ValueError(msg)
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                msg = f"edge ({i}, {j}) out of range for {n_nodes} nodes"
                raise ValueError(msg)
            adjacency[i, j] = adjacency[j, i] = True
        adjacency.setflags(write=False)
        self._adjacency = adjacency

    @classmethod
    def from_adjacency(cls, adjacency: NDArray[np.bool_]) -> OverlapGraph:
        """Build from a boolean matrix (upper triangle is used)."""
        rows, cols = np.nonzero(np.triu(np.asarray(adjacency, dtype=bool), k=1))
        return cls(len(adjacency), zip(rows.tolist(), cols.tolist()))

    @property
    def n_nodes(self) -> int:
        """Number of triples."""
        return self._adjacency.shape[0]

    @property
    def adjacency(self) -> NDArray[np.bool_]:
        """Symmetric boolean adjacency matrix, read-only."""
        return self._adjacency

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        """Edges as ``(i, j)`` with ``i < j``."""
        rows, cols = np.nonzero(np.triu(self._adjacency, k=1))
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def n_edges(self) -> int:
        """Number of edges."""
        return int(np.count_nonzero(self._adjacency)) // 2

    def density(self) -> float:
        """Edges over possible edges; 0 for fewer than two nodes."""
        n = self.n_nodes
        return 0.0 if n < 2 else self.n_edges() / (n * (n - 1) / 2)

    def neighbors(self, node: int) -> list[int]:
        """Nodes adjacent to `node`."""
        return np.flatnonzero(self._adjacency[node]).tolist()

    def degrees(self) -> NDArray[np.int_]:
        """Degree of every node."""
        return self._adjacency.sum(axis=1)

    def is_independent(self, nodes: Iterable[int]) -> bool:
        """Whether no two of `nodes` share an edge."""
        idx = np.fromiter(nodes, dtype=int)
        return not bool(self._adjacency[np.ix_(idx, idx)].any())

    def __repr__(self) -> str:
        """Developer representation."""
        return f"OverlapGraph(n_nodes={self.n_nodes}, edges={self.n_edges()})"


@dataclass(frozen=True)
class ParallelPlan:
    """Rounds of concurrently executable triples, largest round first."""

    rounds: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        """Check the rounds are disjoint."""
        seen = [node for r in self.rounds for node in r]
        if len(seen) != len(set(seen)):
            msg = "rounds must not share nodes"
            raise ValueError(msg)

    @property
    def n_rounds(self) -> int:
        """Number of rounds."""
        return len(self.rounds)

    def sizes(self) -> list[int]:
        """Round sizes in order."""
        return [len(r) for r in self.rounds]

    def covers(self, n_nodes: int) -> bool:
        """Whether the rounds partition ``range(n_nodes)``."""
        return sorted(node for r in self.rounds for node in r) == list(range(n_nodes))

    def is_valid_for(self, graph: OverlapGraph) -> bool:
        """Partition of the graph's nodes into independent sets."""
        return self.covers(graph.n_nodes) and all(graph.is_independent(r) for r in self.rounds)

    def to_json(self) -> str:
        """JSON with the rounds as arrays of triple indices."""
        return dumps({"rounds": [list(r) for r in self.rounds]})


def build_overlap_graph(
    frequency_sets: Sequence[Sequence[float]],
    tolerance: float,
    broadband_tolerance: float | None = None,
) -> OverlapGraph:
    """Conflict graph from per-triple carrier frequencies.

    Parameters
    ----------
    frequency_sets : Sequence[Sequence[float]]
        Allowed frequencies of each triple, in MHz.
    tolerance : float
        Two frequencies collide when closer than this.
    broadband_tolerance : float | None
        If set, collisions closer than this are taken to be served by one
        broadband pulse; triples whose only collisions are of that kind are
        not joined.

    Returns
    -------
    OverlapGraph
        One node per triple.
    """
    if broadband_tolerance is not None and not 0 <= broadband_tolerance <= tolerance:
        msg = "broadband_tolerance must lie in [0, tolerance]"
        raise ValueError(msg)
    edges = []
    for i, j in itertools.combinations(range(len(frequency_sets)), 2):
        hits = colliding_pairs(frequency_sets[i], frequency_sets[j], tolerance)
        if broadband_tolerance is not None:
            hits = [(a, b) for a, b in hits if abs(a - b) >= broadband_tolerance]
        if hits:
            edges.append((i, j))
    graph = OverlapGraph(len(frequency_sets), edges)
    logger.debug("overlap graph: %d nodes, density %.3f", graph.n_nodes, graph.density())
    return graph


def _independent_set(
    adjacency: NDArray[np.bool_],
    candidates: NDArray[np.bool_],
    rng: np.random.Generator,
    strategy: Strategy,
) -> list[int]:
    available = candidates.copy()
    chosen: list[int] = []
    if strategy == "random":
        for node in rng.permutation(np.flatnonzero(available)):
            if available[node]:
                chosen.append(int(node))
                available &= ~adjacency[node]
                available[node] = False
        return chosen
    while available.any():
        idx = np.flatnonzero(available)
        degree = adjacency[np.ix_(idx, idx)].sum(axis=1)
        lowest = idx[degree == degree.min()]
        node = int(rng.choice(lowest))
        chosen.append(node)
        available &= ~adjacency[node]
        available[node] = False
    return chosen


def _check_strategy(strategy: str) -> None:
    if strategy not in ("min_degree", "random"):
        msg = f"strategy must be 'min_degree' or 'random', got '{strategy}'"
        raise ValueError(msg)


def greedy_parallel_sets(
    graph: OverlapGraph,
    seed: int | None = None,
    strategy: Strategy = "min_degree",
) -> ParallelPlan:
    """Partition the triples into conflict-free rounds.

    Independent sets are extracted greedily from the unassigned nodes until
    none remain.

    Parameters
    ----------
    graph : OverlapGraph
        Conflict graph.
    seed : int | None
        Seed for tie-breaking and random orders.
    strategy : {"min_degree", "random"}
        Pick the node of least remaining degree (ties broken at random), or
        scan nodes in a uniformly random order.

    Returns
    -------
    ParallelPlan
        Rounds sorted by size, largest first.
    """
    _check_strategy(strategy)
    rng = np.random.default_rng(seed)
    unassigned = np.ones(graph.n_nodes, dtype=bool)
    rounds: list[tuple[int, ...]] = []
    while unassigned.any():
        chosen = _independent_set(graph.adjacency, unassigned, rng, strategy)
        unassigned[chosen] = False
        rounds.append(tuple(sorted(chosen)))
    rounds.sort(key=len, reverse=True)
    return ParallelPlan(tuple(rounds))


@dataclass(frozen=True)
class ParallelismEstimate:
    """Monte-Carlo statistics of the first greedy round."""

    mean: float
    std: float
    trials: int
    p: float
    n: int

    def to_json(self) -> str:
        """JSON with ``mean, std, trials, p, n``."""
        return dumps(
            {"mean": self.mean, "std": self.std, "trials": self.trials, "p": self.p, "n": self.n}
        )


def random_conflict_graph(n: int, p: float, rng: np.random.Generator) -> NDArray[np.bool_]:
    """Adjacency of a random graph with independent edge probability `p`."""
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return upper | upper.T


def estimate_parallelism(
    n: int,
    p: float,
    trials: int,
    seed: int | None = None,
    strategy: Strategy = "random",
) -> ParallelismEstimate:
    """Size of the first concurrent round on random conflict graphs.

    Each trial draws its own generator from a spawned seed sequence, so
    results do not depend on how trials are distributed.

    Parameters
    ----------
    n : int
        Number of triples.
    p : float
        Probability that two triples collide.
    trials : int
        Number of random graphs.
    seed : int | None
        Root seed.
    strategy : {"random", "min_degree"}
        Greedy variant used for the first round.

    Returns
    -------
    ParallelismEstimate
        Mean and standard deviation of the first-round size.

    Raises
    ------
    ValueError
        If `p` is outside ``[0, 1]`` or `trials` is below 1.

    Examples
    --------
    >>> estimate_parallelism(10, 0.0, 3, seed=1).mean
    10.0
    """
    if not 0.0 <= p <= 1.0:
        msg = f"p must lie in [0, 1], got {p}"
        raise ValueError(msg)
    if trials < 1:
        msg = "trials must be at least 1"
        raise ValueError(msg)
    if n < 0:
        msg = "n must be non-negative"
        raise ValueError(msg)
    _check_strategy(strategy)
    sizes = np.empty(trials)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        adjacency = random_conflict_graph(n, p, rng)
        sizes[k] = len(_independent_set(adjacency, np.ones(n, dtype=bool), rng, strategy))
    estimate = ParallelismEstimate(float(sizes.mean()), float(sizes.std()), trials, p, n)
    logger.info(
        "parallelism estimate n=%d p=%.3g: %.3f +/- %.3f", n, p, estimate.mean, estimate.std
    )
    return estimate
