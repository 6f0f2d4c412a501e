"""Placement scoring against an independent brute-force oracle."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedplane.model import Project, ResourceVector
from fedplane.scheduler import (
    ClusterLoadView,
    Outcome,
    feasible_clusters,
    place_project,
)


def view(cluster, free, capacity=None, available=True):
    free_vec = ResourceVector(*free)
    cap_vec = ResourceVector(*capacity) if capacity else free_vec
    return ClusterLoadView(
        cluster=cluster,
        capacity=cap_vec,
        committed=cap_vec - free_vec,
        available=available,
    )


def project(request, pid="p-0001"):
    return Project(id=pid, name=pid, members=frozenset({"u1"}), request=ResourceVector(*request))


def best_fit_oracle(views, request):
    """Literal restatement of the scoring rule, written as an explicit
    pairwise comparison loop so it shares no code path with the
    production min-by-key implementation."""
    best = None
    for candidate in views:
        if not candidate.available:
            continue
        free = candidate.free
        if not (
            request.gpus <= free.gpus
            and request.cpu_cores <= free.cpu_cores
            and request.memory_gib <= free.memory_gib
        ):
            continue
        if best is None:
            best = candidate
            continue
        b_free, c_free = best.free, candidate.free
        b = (
            b_free.gpus - request.gpus,
            b_free.memory_gib - request.memory_gib,
            b_free.cpu_cores - request.cpu_cores,
        )
        c = (
            c_free.gpus - request.gpus,
            c_free.memory_gib - request.memory_gib,
            c_free.cpu_cores - request.cpu_cores,
        )
        if c < b or (c == b and candidate.cluster < best.cluster):
            best = candidate
    return best.cluster if best else None


class TestFeasibleClusters:
    def test_single_feasible_cluster(self):
        views = [view("a", (2, 64, 388))]
        assert feasible_clusters(views, ResourceVector(2, 16, 64)) == ["a"]

    def test_gpu_component_filters(self):
        views = [view("a", (1, 8, 32)), view("b", (4, 32, 128))]
        assert feasible_clusters(views, ResourceVector(2, 4, 16)) == ["b"]

    def test_zero_request_fits_everywhere_in_input_order(self):
        views = [view("b", (1, 1, 1)), view("a", (0, 0, 0))]
        assert feasible_clusters(views, ResourceVector()) == ["b", "a"]

    def test_unavailable_clusters_excluded(self):
        views = [view("a", (4, 64, 388), available=False)]
        assert feasible_clusters(views, ResourceVector(1, 1, 1)) == []


class TestPlaceProject:
    def test_best_fit_minimizes_gpu_leftover(self):
        views = [view("a", (2, 64, 388)), view("b", (4, 64, 388))]
        decision = place_project(views, project((2, 16, 64)))
        assert decision.placed and decision.cluster == "a"

    def test_gpu_tie_breaks_on_memory_leftover(self):
        views = [view("a", (2, 64, 100)), view("b", (2, 64, 388))]
        decision = place_project(views, project((2, 16, 64)))
        assert decision.cluster == "a"  # memory leftover 36 < 324

    def test_memory_tie_breaks_on_cpu_then_id(self):
        views = [view("b", (2, 32, 100)), view("a", (2, 32, 100))]
        decision = place_project(views, project((2, 16, 64)))
        assert decision.cluster == "a"  # full tie -> lexicographically smallest id

    def test_infeasible_names_blocking_dimension(self):
        views = [view("a", (1, 64, 388))]
        decision = place_project(views, project((2, 16, 64)))
        assert decision.outcome == Outcome.INFEASIBLE
        assert decision.reason == "gpus"

    def test_dominant_blocking_dimension_across_clusters(self):
        views = [view("a", (4, 64, 10)), view("b", (4, 64, 20)), view("c", (1, 64, 388))]
        decision = place_project(views, project((2, 16, 64)))
        assert decision.reason == "memory_gib"  # blocks two clusters, gpus only one

    def test_empty_federation(self):
        decision = place_project([], project((1, 1, 1)))
        assert decision.outcome == Outcome.INFEASIBLE
        assert decision.reason == "no clusters registered"

    def test_all_unavailable(self):
        views = [view("a", (4, 64, 388), available=False)]
        decision = place_project(views, project((1, 1, 1)))
        assert decision.reason == "no available clusters"

    def test_score_trace_covers_every_cluster_in_order(self):
        views = [view("a", (1, 8, 32)), view("b", (4, 64, 388), available=False), view("c", (2, 16, 64))]
        decision = place_project(views, project((2, 16, 64)))
        assert [entry.cluster for entry in decision.score_trace] == ["a", "b", "c"]
        assert [entry.feasible for entry in decision.score_trace] == [False, False, True]

    def test_determinism(self):
        views = [view("a", (3, 32, 128)), view("b", (2, 16, 64))]
        first = place_project(views, project((1, 8, 32)))
        second = place_project(views, project((1, 8, 32)))
        assert first == second

    def test_matches_oracle_on_randomized_federations(self):
        rng = random.Random(20240601)
        for _ in range(2000):
            views = [
                view(
                    f"c{i}",
                    (rng.randint(0, 8), rng.randint(0, 8), rng.randint(0, 8)),
                    available=rng.random() > 0.2,
                )
                for i in range(rng.randint(1, 4))
            ]
            request = ResourceVector(rng.randint(0, 8), rng.randint(0, 8), rng.randint(0, 8))
            decision = place_project(views, project((request.gpus, request.cpu_cores, request.memory_gib)))
            expected = best_fit_oracle(views, request)
            if expected is None:
                assert not decision.placed
            else:
                assert decision.cluster == expected

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.tuples(
                    st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)
                ),
                st.booleans(),
            ),
            min_size=0,
            max_size=4,
        ),
        st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)),
    )
    def test_oracle_equivalence_property(self, cluster_specs, request):
        views = [
            view(f"c{i}", free, available=available)
            for i, (free, available) in enumerate(cluster_specs)
        ]
        decision = place_project(views, project(request))
        expected = best_fit_oracle(views, ResourceVector(*request))
        assert (decision.cluster if decision.placed else None) == expected
