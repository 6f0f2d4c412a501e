"""Placement of newly registered projects across the federation.

Scoring is deterministic best-fit: among feasible clusters minimize
leftover GPUs, tie-break by leftover memory, then leftover CPU cores,
then lexicographically smallest cluster id. Commits go through the
federation store with an optimistic version check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import ClusterId, Project, ProjectId, ResourceVector

BLOCKING_DIMENSIONS = ("gpus", "memory_gib", "cpu_cores")


@dataclass(frozen=True)
class ClusterLoadView:
    """Point-in-time load of one cluster as the scheduler sees it.
    free is always capacity - committed exactly."""

    cluster: ClusterId
    capacity: ResourceVector
    committed: ResourceVector
    available: bool

    @property
    def free(self) -> ResourceVector:
        return self.capacity - self.committed


class Outcome(str, Enum):
    PLACED = "Placed"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class ScoreEntry:
    cluster: ClusterId
    feasible: bool
    leftover: ResourceVector


@dataclass(frozen=True)
class PlacementDecision:
    project: ProjectId
    outcome: Outcome
    cluster: Optional[ClusterId] = None
    reason: str = ""
    # Every cluster evaluated, in view order, for auditability.
    score_trace: tuple[ScoreEntry, ...] = ()
    # Version of the federation store the scoring ran against; commit
    # rejects the decision if the store has moved on since.
    state_version: int = 0

    @property
    def placed(self) -> bool:
        return self.outcome == Outcome.PLACED

    def to_dict(self) -> dict:
        return {
            "project": self.project,
            "outcome": self.outcome.value,
            "cluster": self.cluster,
            "reason": self.reason,
            "score_trace": [
                {
                    "cluster": entry.cluster,
                    "feasible": entry.feasible,
                    "leftover": entry.leftover.to_dict(),
                }
                for entry in self.score_trace
            ],
            "state_version": self.state_version,
        }


def feasible_clusters(views: list[ClusterLoadView], request: ResourceVector) -> list[ClusterId]:
    """Exactly the available clusters whose free capacity fits the
    request, in input order."""
    return [v.cluster for v in views if v.available and request <= v.free]


def _blocking_dimensions(free: ResourceVector, request: ResourceVector) -> list[str]:
    blocked = []
    if request.gpus > free.gpus:
        blocked.append("gpus")
    if request.memory_gib > free.memory_gib:
        blocked.append("memory_gib")
    if request.cpu_cores > free.cpu_cores:
        blocked.append("cpu_cores")
    return blocked


def _infeasible_reason(views: list[ClusterLoadView], request: ResourceVector) -> str:
    """Name the dominant blocking dimension: the one that blocked the most
    available clusters, ties resolved in (gpus, memory_gib, cpu_cores)
    order. Falls back to availability when nothing was reachable."""
    if not views:
        return "no clusters registered"
    counts = {dim: 0 for dim in BLOCKING_DIMENSIONS}
    any_available = False
    for view in views:
        if not view.available:
            continue
        any_available = True
        for dim in _blocking_dimensions(view.free, request):
            counts[dim] += 1
    if not any_available:
        return "no available clusters"
    return max(BLOCKING_DIMENSIONS, key=lambda dim: (counts[dim], -BLOCKING_DIMENSIONS.index(dim)))


def place_project(
    views: list[ClusterLoadView],
    project: Project,
    state_version: int = 0,
) -> PlacementDecision:
    """Score every cluster and pick the best fit, or explain why none fit.
    Pure function: identical inputs yield identical decisions, score_trace
    order included."""
    request = project.request
    trace = []
    best: Optional[tuple[int, int, int, str]] = None
    best_cluster: Optional[ClusterId] = None
    for view in views:
        free = view.free
        feasible = view.available and request <= free
        leftover = free.saturating_sub(request)
        trace.append(ScoreEntry(view.cluster, feasible, leftover))
        if not feasible:
            continue
        key = (leftover.gpus, leftover.memory_gib, leftover.cpu_cores, view.cluster)
        if best is None or key < best:
            best = key
            best_cluster = view.cluster
    if best_cluster is None:
        return PlacementDecision(
            project=project.id,
            outcome=Outcome.INFEASIBLE,
            reason=_infeasible_reason(views, request),
            score_trace=tuple(trace),
            state_version=state_version,
        )
    return PlacementDecision(
        project=project.id,
        outcome=Outcome.PLACED,
        cluster=best_cluster,
        score_trace=tuple(trace),
        state_version=state_version,
    )
