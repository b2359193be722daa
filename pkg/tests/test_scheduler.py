"""Tests for the overlap graph and concurrent-round scheduling."""

from __future__ import annotations

import json

import numpy as np
import pytest

from donorcnot.scheduler import (
    OverlapGraph,
    ParallelPlan,
    build_overlap_graph,
    estimate_parallelism,
    greedy_parallel_sets,
    random_conflict_graph,
)


def path_graph(n):
    return OverlapGraph(n, [(i, i + 1) for i in range(n - 1)])


class TestOverlapGraph:
    """Construction and queries."""

    def test_edges_are_symmetric(self):
        """Test adjacency is symmetric and edges are normalized."""
        g = OverlapGraph(4, [(2, 0), (1, 3)])
        assert g.edges == frozenset({(0, 2), (1, 3)})
        np.testing.assert_array_equal(g.adjacency, g.adjacency.T)
        assert g.n_edges() == 2

    def test_self_loop(self):
        """Test that self-loops are rejected."""
        with pytest.raises(ValueError, match="self-loop"):
            OverlapGraph(3, [(1, 1)])

    def test_out_of_range(self):
        """Test that edges must reference existing nodes."""
        with pytest.raises(ValueError, match="out of range"):
            OverlapGraph(3, [(0, 3)])

    def test_density_and_degrees(self):
        """Test density and degrees of a path."""
        g = path_graph(4)
        assert g.density() == pytest.approx(3 / 6)
        np.testing.assert_array_equal(g.degrees(), [1, 2, 2, 1])
        assert g.neighbors(1) == [0, 2]
        assert OverlapGraph(1).density() == 0.0

    def test_is_independent(self):
        """Test independence checks."""
        g = path_graph(4)
        assert g.is_independent([0, 2])
        assert not g.is_independent([1, 2])
        assert g.is_independent([])

    def test_from_adjacency(self):
        """Test round-tripping through the adjacency matrix."""
        g = path_graph(5)
        assert OverlapGraph.from_adjacency(g.adjacency).edges == g.edges

    def test_read_only(self):
        """Test that the adjacency matrix cannot be modified."""
        with pytest.raises(ValueError, match="read-only"):
            path_graph(3).adjacency[0, 1] = False


class TestBuildOverlapGraph:
    """Graphs from carrier frequencies."""

    def test_collisions(self):
        """Test that close frequencies create edges."""
        sets = [[10.0, 40.0], [10.5], [20.0], [39.2]]
        g = build_overlap_graph(sets, 1.0)
        assert g.edges == frozenset({(0, 1), (0, 3)})

    def test_broadband_merging(self):
        """Test that near-identical frequencies can share one pulse."""
        sets = [[10.0], [10.05], [10.6]]
        g = build_overlap_graph(sets, 1.0, broadband_tolerance=0.1)
        assert g.edges == frozenset({(0, 2), (1, 2)})

    def test_broadband_range(self):
        """Test that the broadband tolerance must not exceed the tolerance."""
        with pytest.raises(ValueError, match="broadband"):
            build_overlap_graph([[0.0]], 1.0, broadband_tolerance=2.0)

    def test_empty_sets(self):
        """Test triples without lines never collide."""
        assert build_overlap_graph([[], [1.0]], 1.0).n_edges() == 0


class TestGreedyParallelSets:
    """Round partitions."""

    @pytest.mark.parametrize("strategy", ["min_degree", "random"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_plan_is_valid(self, strategy, seed):
        """Test that rounds partition the nodes into independent sets."""
        rng = np.random.default_rng(seed)
        g = OverlapGraph.from_adjacency(random_conflict_graph(40, 0.3, rng))
        plan = greedy_parallel_sets(g, seed=seed, strategy=strategy)
        assert plan.is_valid_for(g)
        assert plan.sizes() == sorted(plan.sizes(), reverse=True)

    def test_no_conflicts_single_round(self):
        """Test that an edgeless graph runs in one round."""
        plan = greedy_parallel_sets(OverlapGraph(6))
        assert plan.n_rounds == 1
        assert plan.sizes() == [6]

    def test_complete_graph(self):
        """Test that a complete graph needs one round per node."""
        g = OverlapGraph.from_adjacency(~np.eye(5, dtype=bool))
        assert greedy_parallel_sets(g).n_rounds == 5

    def test_min_degree_on_path(self):
        """Test that min-degree finds the maximum independent set of a path."""
        plan = greedy_parallel_sets(path_graph(5), seed=0)
        assert plan.rounds[0] == (0, 2, 4)

    def test_deterministic(self):
        """Test that equal seeds give equal plans."""
        g = OverlapGraph.from_adjacency(random_conflict_graph(30, 0.4, np.random.default_rng(7)))
        assert greedy_parallel_sets(g, seed=3) == greedy_parallel_sets(g, seed=3)

    def test_invalid_strategy(self):
        """Test that an unknown strategy raises ValueError."""
        with pytest.raises(ValueError, match="strategy"):
            greedy_parallel_sets(OverlapGraph(2), strategy="largest")  # type: ignore[arg-type]

    def test_overlapping_rounds(self):
        """Test that plans reject shared nodes."""
        with pytest.raises(ValueError, match="share"):
            ParallelPlan(((0, 1), (1, 2)))

    def test_plan_json(self):
        """Test the plan document."""
        plan = ParallelPlan(((0, 2), (1,)))
        assert json.loads(plan.to_json()) == {"rounds": [[0, 2], [1]]}
        assert not plan.is_valid_for(OverlapGraph(4))


class TestEstimateParallelism:
    """Monte-Carlo first-round sizes."""

    def test_no_conflicts(self):
        """Test that without collisions every triple runs at once."""
        assert estimate_parallelism(10, 0.0, 3, seed=1).mean == 10.0

    def test_all_conflicts(self):
        """Test that with certain collisions one triple runs at a time."""
        est = estimate_parallelism(10, 1.0, 3, seed=1)
        assert est.mean == 1.0
        assert est.std == 0.0

    @pytest.mark.parametrize(("p", "low", "high"), [(0.3, 9.0, 16.0), (0.4, 7.0, 13.0)])
    def test_array_scale(self, p, low, high):
        """Test the first-round size for 225 triples."""
        est = estimate_parallelism(225, p, 200, seed=0)
        assert low <= est.mean <= high

    @pytest.mark.slow
    @pytest.mark.parametrize(("p", "low", "high"), [(0.3, 9.0, 16.0), (0.4, 7.0, 13.0)])
    def test_array_scale_full_trials(self, p, low, high):
        """Test the first-round size for 225 triples over 1000 graphs."""
        est = estimate_parallelism(225, p, 1000, seed=0)
        assert est.trials == 1000
        assert low <= est.mean <= high

    def test_decreases_with_collision_probability(self):
        """Test that more collisions mean smaller rounds."""
        ps = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
        means = [estimate_parallelism(100, p, 100, seed=5).mean for p in ps]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_deterministic(self):
        """Test that the root seed fixes the estimate."""
        assert estimate_parallelism(50, 0.3, 20, seed=4) == estimate_parallelism(50, 0.3, 20, seed=4)

    def test_min_degree_not_worse(self):
        """Test that min-degree rounds are at least as large on average."""
        rand = estimate_parallelism(100, 0.3, 100, seed=2, strategy="random")
        best = estimate_parallelism(100, 0.3, 100, seed=2, strategy="min_degree")
        assert best.mean >= rand.mean

    @pytest.mark.parametrize(
        ("kwargs", "match"),
        [({"p": 1.5}, "p must"), ({"trials": 0}, "trials"), ({"n": -1}, "non-negative")],
    )
    def test_invalid(self, kwargs, match):
        """Test input validation."""
        args = {"n": 10, "p": 0.3, "trials": 5} | kwargs
        with pytest.raises(ValueError, match=match):
            estimate_parallelism(**args)

    def test_json(self):
        """Test the estimate document."""
        doc = json.loads(estimate_parallelism(20, 0.2, 5, seed=0).to_json())
        assert set(doc) == {"mean", "std", "trials", "p", "n"}
        assert doc["n"] == 20
